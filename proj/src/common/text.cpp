#include "apr/common/text.hpp"

#include <cstdio>

namespace apr::text {

bool is_ascii_space(unsigned char c) noexcept {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

std::string normalize_whitespace(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool pending_space = false;
  for (unsigned char c : s) {
    if (is_ascii_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    out.push_back(static_cast<char>(c));
  }
  return out;
}

std::string percent_2dp(long long matched, long long total) {
  if (total <= 0) return "0.00";
  // Integer arithmetic so that exact hundredths are never lost to rounding.
  const long long hundredths = (matched * 10000) / total;
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%lld.%02lld", hundredths / 100, hundredths % 100);
  return buf;
}

std::string ratio_cell(long long matched, long long total) {
  return std::to_string(matched) + " / " + std::to_string(total) + " (" +
         percent_2dp(matched, total) + "%)";
}

}  // namespace apr::text
