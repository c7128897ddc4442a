#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace apr {

// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
// Writes atomically enough for our purposes (temp file + rename).
void write_file(const std::filesystem::path& path, std::string_view bytes);

}  // namespace apr
