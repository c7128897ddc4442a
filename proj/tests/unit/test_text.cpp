#include <gtest/gtest.h>

#include <random>

#include "apr/common/text.hpp"
#include "testing.hpp"

namespace {

using apr::text::normalize_whitespace;
using apr::text::percent_2dp;

TEST(NormalizeWhitespace, CollapsesRunsAndTrims) {
  EXPECT_EQ(normalize_whitespace("  a \t=\n\n b ;  "), "a = b ;");
  EXPECT_EQ(normalize_whitespace(""), "");
  EXPECT_EQ(normalize_whitespace(" \t\r\n\f\v"), "");
  EXPECT_EQ(normalize_whitespace("Foo"), "Foo");
}

TEST(NormalizeWhitespace, KeepsCaseAndNonAsciiBytes) {
  EXPECT_EQ(normalize_whitespace("If  (X)"), "If (X)");
  // U+00A0 is not ASCII whitespace and must survive untouched.
  EXPECT_EQ(normalize_whitespace("a\xc2\xa0 b"), "a\xc2\xa0 b");
}

TEST(NormalizeWhitespace, IsIdempotent) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 500; ++i) {
    const auto s = apr::testing::statement(rng);
    const auto once = normalize_whitespace(s);
    EXPECT_EQ(normalize_whitespace(once), once);
    EXPECT_EQ(once.find("  "), std::string::npos);
  }
}

TEST(Percent, TruncatesToTwoDecimals) {
  EXPECT_EQ(percent_2dp(1, 3), "33.33");
  EXPECT_EQ(percent_2dp(2, 3), "66.66");
  EXPECT_EQ(percent_2dp(10, 10), "100.00");
  EXPECT_EQ(percent_2dp(0, 7), "0.00");
  EXPECT_EQ(percent_2dp(0, 0), "0.00");
  EXPECT_EQ(percent_2dp(1, 10000), "0.01");
  EXPECT_EQ(percent_2dp(1, 20000), "0.00");
}

TEST(Percent, RatioCellLayout) {
  EXPECT_EQ(apr::text::ratio_cell(3, 4), "3 / 4 (75.00%)");
}

}  // namespace
