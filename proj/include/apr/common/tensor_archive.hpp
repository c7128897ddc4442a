#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <string>
#include <vector>

#include "apr/common/json_lines.hpp"

namespace apr {

// Binary container used for model checkpoints and trainer state.
//
//   "APRTENS1" | u32 version | u64 header bytes | header JSON
//   | f64 payload (little endian, column-major per tensor) | sha256 hex of all preceding bytes
//
// The header carries caller metadata under "meta" and the tensor table under "tensors".
struct TensorArchive {
  static constexpr std::uint32_t kFormatVersion = 1;

  struct Entry {
    std::string name;
    Eigen::MatrixXd value;
  };

  Json meta = Json::object();
  std::vector<Entry> tensors;

  const Eigen::MatrixXd* find(const std::string& name) const;

  std::string serialize() const;
  // Throws DataError on bad magic, unsupported version, truncation or checksum mismatch.
  static TensorArchive deserialize(const std::string& bytes, const std::string& origin);

  void save(const std::filesystem::path& path) const;
  static TensorArchive load(const std::filesystem::path& path);
};

}  // namespace apr
