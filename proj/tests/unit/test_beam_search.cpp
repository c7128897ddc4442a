#include <gtest/gtest.h>

#include "apr/model/beam_search.hpp"
#include "apr/tokenizer/vocab.hpp"
#include "oracles.hpp"

namespace {

namespace model = apr::model;
using apr::testing::check_beam_against_enumeration;

TEST(BeamOracle, TransformerMatchesEnumeration) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const int v = 3 + static_cast<int>(seed % 3);
    const std::size_t len = 2 + seed % 3;
    auto m = apr::testing::tiny_transformer(v, seed, len);
    const std::vector<int> src = {0, 1 + static_cast<int>(seed % (v - 1)), 2};
    const auto r = check_beam_against_enumeration(*m, src, len);
    EXPECT_TRUE(r.optimum_matches) << seed;
    EXPECT_TRUE(r.ranking_matches) << seed;
    EXPECT_TRUE(r.greedy_matches) << seed;
    EXPECT_LT(r.max_score_gap, 1e-9);
  }
}

TEST(BeamOracle, BaselineMatchesEnumeration) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const int v = 3 + static_cast<int>(seed % 3);
    const std::size_t len = 2 + seed % 3;
    auto m = apr::testing::tiny_baseline(v, seed, len);
    const std::vector<int> src = {0, 1, 1, 2};
    const auto r = check_beam_against_enumeration(*m, src, len);
    EXPECT_TRUE(r.optimum_matches) << seed;
    EXPECT_TRUE(r.ranking_matches) << seed;
    EXPECT_TRUE(r.greedy_matches) << seed;
    EXPECT_LT(r.max_score_gap, 1e-9);
  }
}

TEST(BeamSearch, FixedDistributionOracle) {
  // Position-independent distribution: p(3) = 0.5, p(eos) = 0.3, p(4) = 0.2, rest ~0.
  apr::testing::StubModel m(5, 8);
  m.bias().value << -50, -50, std::log(0.3), std::log(0.5), std::log(0.2);
  const std::vector<int> src = {0, 2};
  const auto c = model::beam_search(m, src, 3, 4);
  ASSERT_EQ(c.size(), 3u);
  // Every path is scored by its mean log-prob, so [3,3,3,3] (mean log 0.5) beats [2].
  EXPECT_EQ(c[0].ids, (std::vector<int>{3, 3, 3, 3}));
  EXPECT_NEAR(c[0].score, std::log(0.5), 1e-9);
  EXPECT_EQ(c[0].rank, 1);
  for (std::size_t i = 1; i < c.size(); ++i) {
    EXPECT_GE(c[i - 1].score, c[i].score);
    EXPECT_EQ(c[i].rank, static_cast<int>(i) + 1);
    EXPECT_NEAR(c[i].score * static_cast<double>(c[i].ids.size()), c[i].log_prob, 1e-12);
  }
  EXPECT_EQ(model::greedy_decode(m, src, 4), (std::vector<int>{3, 3, 3, 3}));
}

TEST(BeamSearch, EdgeCases) {
  apr::testing::StubModel m(4, 8);
  m.bias().value << 0, 0, 5, 0;  // EOS dominates
  const std::vector<int> src = {0, 2};
  const auto none = model::beam_search(m, src, 5, 0);
  ASSERT_EQ(none.size(), 1u);
  EXPECT_TRUE(none[0].ids.empty());
  const auto one = model::beam_search(m, src, 5, 3);
  ASSERT_FALSE(one.empty());
  EXPECT_EQ(one[0].ids, (std::vector<int>{2}));
  EXPECT_LE(one.size(), 5u);
  EXPECT_EQ(model::greedy_decode(m, src, 3), (std::vector<int>{2}));
}

TEST(BeamSearch, EmitsBeamSizeCandidatesWithText) {
  auto m = model::build(apr::testing::toy_transformer(260, 4));
  const auto vocab = apr::tokenizer::Vocab::byte_level();
  const std::vector<int> src = {0, 4 + 'a', 4 + ';', 2};
  const auto c = model::beam_search(*m, src, 5, 6, vocab);
  ASSERT_EQ(c.size(), 5u);
  for (const auto& cand : c) EXPECT_EQ(cand.text, vocab.decode(cand.ids));
}

TEST(BeamSearch, WiderBeamNeverScoresWorse) {
  for (std::uint64_t seed = 20; seed < 26; ++seed) {
    auto m = apr::testing::tiny_transformer(5, seed, 4);
    const std::vector<int> src = {0, 3, 4, 2};
    const double narrow = model::beam_search(*m, src, 2, 4).front().score;
    const double full = model::beam_search(*m, src, 625, 4).front().score;
    EXPECT_GE(full, narrow - 1e-12);
  }
}

}  // namespace
