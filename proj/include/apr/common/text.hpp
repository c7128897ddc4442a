#pragma once

#include <string>
#include <string_view>

namespace apr::text {

// Collapses every run of ASCII whitespace into one space and trims both ends.
// No case folding. Shared by corpus dedup, tokenizer input and exact match.
std::string normalize_whitespace(std::string_view s);

bool is_ascii_space(unsigned char c) noexcept;

// Percentage with two decimals, truncated toward zero: 92/468 -> "19.65".
// Returns "0.00" when total is zero.
std::string percent_2dp(long long matched, long long total);

// "570 / 2449 (23.27%)"
std::string ratio_cell(long long matched, long long total);

}  // namespace apr::text
