#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

namespace apr {

using Json = nlohmann::ordered_json;

// One compact JSON document per line, '\n' terminated.
std::string to_json_lines(const std::vector<Json>& records);
std::vector<Json> parse_json_lines(const std::string& text, const std::string& origin);

void write_json_lines(const std::filesystem::path& path, const std::vector<Json>& records);
std::vector<Json> read_json_lines(const std::filesystem::path& path);

// Pretty JSON with trailing newline; stable formatting for byte-identical reruns.
void write_json(const std::filesystem::path& path, const Json& doc);
Json read_json(const std::filesystem::path& path);

}  // namespace apr
