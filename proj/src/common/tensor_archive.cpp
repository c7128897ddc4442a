#include "apr/common/tensor_archive.hpp"

#include <bit>
#include <cstring>

#include "apr/common/checksum.hpp"
#include "apr/common/errors.hpp"

namespace apr {
namespace {

constexpr char kMagic[8] = {'A', 'P', 'R', 'T', 'E', 'N', 'S', '1'};
constexpr std::size_t kDigestChars = 64;

static_assert(std::endian::native == std::endian::little, "archive I/O assumes little endian");

template <typename T>
void append_raw(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T read_raw(const std::string& in, std::size_t& pos, const std::string& origin) {
  if (pos + sizeof(T) > in.size()) throw DataError(origin + ": truncated archive");
  T v;
  std::memcpy(&v, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

}  // namespace

const Eigen::MatrixXd* TensorArchive::find(const std::string& name) const {
  for (const auto& e : tensors)
    if (e.name == name) return &e.value;
  return nullptr;
}

std::string TensorArchive::serialize() const {
  Json header;
  header["meta"] = meta;
  Json table = Json::array();
  for (const auto& e : tensors) table.push_back({{"name", e.name}, {"rows", e.value.rows()}, {"cols", e.value.cols()}});
  header["tensors"] = std::move(table);
  const std::string header_text = header.dump();

  std::string out(kMagic, sizeof(kMagic));
  append_raw<std::uint32_t>(out, kFormatVersion);
  append_raw<std::uint64_t>(out, header_text.size());
  out += header_text;
  for (const auto& e : tensors) {
    const auto bytes = static_cast<std::size_t>(e.value.size()) * sizeof(double);
    out.append(reinterpret_cast<const char*>(e.value.data()), bytes);
  }
  out += sha256_hex(out);
  return out;
}

TensorArchive TensorArchive::deserialize(const std::string& bytes, const std::string& origin) {
  if (bytes.size() < sizeof(kMagic) + kDigestChars || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
    throw DataError(origin + ": not a tensor archive (bad magic or truncated)");
  std::size_t pos = sizeof(kMagic);
  const auto version = read_raw<std::uint32_t>(bytes, pos, origin);
  if (version != kFormatVersion)
    throw DataError(origin + ": unsupported archive version " + std::to_string(version) + " (expected " +
                    std::to_string(kFormatVersion) + ")");
  const auto header_len = read_raw<std::uint64_t>(bytes, pos, origin);
  if (header_len > bytes.size() || pos + header_len + kDigestChars > bytes.size())
    throw DataError(origin + ": truncated archive header");

  const std::string_view body(bytes.data(), bytes.size() - kDigestChars);
  const std::string_view digest(bytes.data() + body.size(), kDigestChars);
  if (sha256_hex(body) != digest) throw DataError(origin + ": archive checksum mismatch (truncated or corrupt)");

  Json header;
  try {
    header = Json::parse(bytes.substr(pos, header_len));
  } catch (const Json::parse_error& e) {
    throw DataError(origin + ": malformed archive header: " + e.what());
  }
  pos += header_len;

  TensorArchive archive;
  archive.meta = header.value("meta", Json::object());
  for (const auto& t : header.at("tensors")) {
    const auto rows = t.at("rows").get<Eigen::Index>();
    const auto cols = t.at("cols").get<Eigen::Index>();
    const auto n = static_cast<std::size_t>(rows * cols) * sizeof(double);
    if (pos + n > body.size()) throw DataError(origin + ": truncated tensor payload");
    Eigen::MatrixXd m(rows, cols);
    std::memcpy(m.data(), bytes.data() + pos, n);
    pos += n;
    archive.tensors.push_back({t.at("name").get<std::string>(), std::move(m)});
  }
  if (pos != body.size()) throw DataError(origin + ": trailing bytes in archive");
  return archive;
}

void TensorArchive::save(const std::filesystem::path& path) const { write_file(path, serialize()); }

TensorArchive TensorArchive::load(const std::filesystem::path& path) {
  return deserialize(read_file(path), path.string());
}

}  // namespace apr
