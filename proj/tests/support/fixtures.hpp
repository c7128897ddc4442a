#pragma once

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "apr/corpus/corpus.hpp"
#include "apr/eval/predictions.hpp"

namespace apr::testing {

struct AccuracyRow {
  std::string approach;
  std::string dataset;
  long long matched;
  long long total;
  std::string printed;  // percentage exactly as published, without the % sign
};

// Published accuracy rows.
inline const std::vector<AccuracyRow>& published_accuracy() {
  static const std::vector<AccuracyRow> rows = {
      {"transformer", "Unique-Large", 570, 2449, "23.27"},    {"transformer", "Unique-Small", 92, 468, "19.65"},
      {"transformer", "Duplicate-Large", 4195, 5820, "72"},   {"transformer", "Duplicate-Small", 569, 827, "68.8"},
      {"simple-seq2seq", "Unique-Large", 55, 2449, "2.2"}, {"simple-seq2seq", "Unique-Small", 16, 468, "3.41"},
      {"simple-seq2seq", "Duplicate-Large", 376, 5820, "6.5"}, {"simple-seq2seq", "Duplicate-Small", 146, 827, "17.65"},
  };
  return rows;
}

// Re-rounds a two-decimal percentage string to the number of decimals in `printed`.
inline std::string at_printed_precision(const std::string& two_decimals, const std::string& printed) {
  const auto dot = printed.find('.');
  const int decimals = dot == std::string::npos ? 0 : static_cast<int>(printed.size() - dot - 1);
  if (decimals == 2) return two_decimals;
  const double scale = std::pow(10.0, decimals);
  // Work in hundredths to avoid binary rounding on the .5 boundary.
  const long long hundredths = std::llround(std::stod(two_decimals) * 100.0);
  const long long step = static_cast<long long>(100 / scale);
  const long long rounded = (hundredths + step / 2) / step;
  char buf[32];
  if (decimals == 0)
    std::snprintf(buf, sizeof buf, "%lld", rounded);
  else
    std::snprintf(buf, sizeof buf, "%lld.%0*lld", rounded / static_cast<long long>(scale), decimals,
                  rounded % static_cast<long long>(scale));
  return buf;
}

inline corpus::BugInstance fixture_instance(const std::string& id, const std::string& bug_type,
                                            const std::string& project, const std::string& commit,
                                            const std::string& before, const std::string& after) {
  corpus::BugInstance b;
  b.id = id;
  b.bug_type = bug_type;
  b.project_name = project;
  b.fix_commit_sha1 = commit;
  b.source_before_fix = before;
  b.source_after_fix = after;
  return b;
}

inline eval::PredictionRecord fixture_prediction(const std::string& id, const std::string& text,
                                                 const std::string& tag = "fixture") {
  eval::PredictionRecord r;
  r.instance_id = id;
  r.model_tag = tag;
  model::Candidate c;
  c.text = text;
  c.rank = 1;
  c.score = -0.5;
  c.log_prob = -1.0;
  r.candidates.push_back(c);
  return r;
}

struct ScoredFixture {
  std::vector<corpus::BugInstance> test;
  std::vector<eval::PredictionRecord> predictions;
};

// `total` test instances of which the first `matched` are predicted exactly.
inline ScoredFixture accuracy_fixture(long long matched, long long total) {
  ScoredFixture f;
  for (long long i = 0; i < total; ++i) {
    const auto id = "t" + std::to_string(i);
    const auto fix = "return value" + std::to_string(i) + ";";
    f.test.push_back(fixture_instance(id, "CHANGE_OPERAND", "p", std::string(40, 'a'), "return x;", fix));
    f.predictions.push_back(fixture_prediction(id, i < matched ? fix : "return wrong;"));
  }
  return f;
}

struct TypeCount {
  std::string bug_type;
  long long matched;
  long long total;
};

// Test split with the given per-type counts; a matched instance is predicted exactly.
inline ScoredFixture bug_type_fixture(const std::vector<TypeCount>& counts) {
  ScoredFixture f;
  long long n = 0;
  for (const auto& c : counts) {
    for (long long i = 0; i < c.total; ++i, ++n) {
      const auto id = "b" + std::to_string(n);
      const auto fix = "call" + std::to_string(n) + "();";
      f.test.push_back(fixture_instance(id, c.bug_type, "p" + std::to_string(n % 3), std::string(40, 'b'), "x();", fix));
      f.predictions.push_back(fixture_prediction(id, i < c.matched ? fix : "nope();"));
    }
  }
  return f;
}

struct TopBugTypes {
  std::string dataset;
  std::vector<TypeCount> counts;            // includes tie and distractor types
  std::vector<std::string> expected_order;  // published top three
  std::vector<std::string> printed;         // published ratios
};

// Per-type counts reproducing the published top-3 ratios, plus distractors that tie
// with the third entry on ratio and lose on the tie rules. 16/17 and 7/22 are the
// smallest fractions behind 94.12% and 31.82%.
inline const std::vector<TopBugTypes>& published_top_bug_types() {
  static const std::vector<TopBugTypes> rows = {
      {"Duplicate-Large",
       {{"DIFFERENT_METHOD_SAME_ARGS", 157, 170}, {"CHANGE_CALLER_IN_FUNCTION_CALL", 67, 74},
        {"CHANGE_OPERAND", 168, 190}, {"CHANGE_IDENTIFIER", 84, 95}, {"SWAP_BOOLEAN_LITERAL", 10, 20}},
       {"DIFFERENT_METHOD_SAME_ARGS", "CHANGE_CALLER_IN_FUNCTION_CALL", "CHANGE_OPERAND"},
       {"92.35", "90.54", "88.42"}},
      {"Unique-Large",
       {{"SWAP_BOOLEAN_LITERAL", 59, 76}, {"CHANGE_OPERATOR", 6, 13}, {"DIFFERENT_METHOD_SAME_ARGS", 44, 123},
        {"WRONG_FUNCTION_NAME", 44, 123}, {"CHANGE_OPERAND", 30, 200}},
       {"SWAP_BOOLEAN_LITERAL", "CHANGE_OPERATOR", "DIFFERENT_METHOD_SAME_ARGS"},
       {"77.63", "46.15", "35.77"}},
      {"Duplicate-Small",
       {{"DIFFERENT_METHOD_SAME_ARGS", 16, 17}, {"CHANGE_CALLER_IN_FUNCTION_CALL", 14, 15}, {"CHANGE_OPERAND", 8, 10},
        {"CHANGE_IDENTIFIER", 4, 5}, {"SWAP_ARGUMENTS", 8, 10}},
       {"DIFFERENT_METHOD_SAME_ARGS", "CHANGE_CALLER_IN_FUNCTION_CALL", "CHANGE_OPERAND"},
       {"94.12", "93.33", "80"}},
      {"Unique-Small",
       {{"SWAP_BOOLEAN_LITERAL", 3, 5}, {"CHANGE_OPERATOR", 7, 22}, {"SWAP_ARGUMENTS", 6, 20},
        {"CHANGE_IDENTIFIER", 3, 10}, {"WRONG_FUNCTION_NAME", 6, 20}},
       {"SWAP_BOOLEAN_LITERAL", "CHANGE_OPERATOR", "SWAP_ARGUMENTS"},
       {"60", "31.82", "30"}},
  };
  return rows;
}

struct LongPatchRow {
  std::string project;
  std::string commit_prefix;
  std::size_t length;
};

inline const std::vector<LongPatchRow>& published_longest_patches() {
  static const std::vector<LongPatchRow> rows = {
      {"reactor.reactor-core", "20e155eeff37", 193},
      {"square.okhttp", "f78f74f5a2cf", 192},
      {"android.platform_frameworks_base", "946a17782a7a", 147},
      {"clojure.clojure", "55ed50c4975c", 142},
      {"oracle.graal", "2104049f33ef", 137},
  };
  return rows;
}

// Matched patches whose fixed statements are exactly `length` byte-level tokens long,
// plus a longer unmatched one and shorter matched ones that must not displace them.
inline ScoredFixture longest_patch_fixture() {
  ScoredFixture f;
  int n = 0;
  auto add = [&](const std::string& project, const std::string& prefix, std::size_t length, bool matched) {
    const auto id = "l" + std::to_string(n++);
    const std::string fix(length, static_cast<char>('a' + n % 26));
    f.test.push_back(fixture_instance(id, "CHANGE_OPERAND", project, prefix + std::string(28, '0'), "x", fix));
    f.predictions.push_back(fixture_prediction(id, matched ? fix : "x"));
  };
  add("oracle.graal", "2104049f33ef", 137, true);
  add("other.project", "ffffffffffff", 400, false);
  add("square.okhttp", "f78f74f5a2cf", 192, true);
  add("clojure.clojure", "55ed50c4975c", 142, true);
  add("small.one", "111111111111", 12, true);
  add("reactor.reactor-core", "20e155eeff37", 193, true);
  add("android.platform_frameworks_base", "946a17782a7a", 147, true);
  add("mid.one", "222222222222", 136, true);
  return f;
}

}  // namespace apr::testing
