#include "apr/common/json_lines.hpp"

#include "apr/common/checksum.hpp"
#include "apr/common/errors.hpp"

namespace apr {

std::string to_json_lines(const std::vector<Json>& records) {
  std::string out;
  for (const auto& r : records) {
    out += r.dump(-1, ' ', false, Json::error_handler_t::replace);
    out.push_back('\n');
  }
  return out;
}

std::vector<Json> parse_json_lines(const std::string& text, const std::string& origin) {
  std::vector<Json> records;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    ++line_no;
    std::string_view line(text.data() + pos, end - pos);
    pos = end + 1;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      records.push_back(Json::parse(line));
    } catch (const Json::parse_error& e) {
      throw DataError(origin + ":" + std::to_string(line_no) + ": malformed record: " + e.what());
    }
  }
  return records;
}

void write_json_lines(const std::filesystem::path& path, const std::vector<Json>& records) {
  write_file(path, to_json_lines(records));
}

std::vector<Json> read_json_lines(const std::filesystem::path& path) {
  return parse_json_lines(read_file(path), path.string());
}

void write_json(const std::filesystem::path& path, const Json& doc) {
  write_file(path, doc.dump(2, ' ', false, Json::error_handler_t::replace) + "\n");
}

Json read_json(const std::filesystem::path& path) {
  const auto text = read_file(path);
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw DataError(path.string() + ": malformed JSON: " + e.what());
  }
}

}  // namespace apr
