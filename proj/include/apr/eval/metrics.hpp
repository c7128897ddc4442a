#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "apr/common/json_lines.hpp"
#include "apr/eval/predictions.hpp"

namespace apr::corpus {
struct BugInstance;
}
namespace apr::tokenizer {
class Vocab;
}

namespace apr::eval {

// Equality after whitespace normalization.
bool exact_match(std::string_view predicted, std::string_view reference);

struct Ratio {
  long long matched = 0;
  long long total = 0;

  std::string percent() const;  // "23.27"
  double value() const { return total == 0 ? 0.0 : static_cast<double>(matched) / static_cast<double>(total); }
  bool operator==(const Ratio&) const = default;
};

// Top-1 outcome for one test instance.
struct Outcome {
  std::string instance_id;
  std::string bug_type;
  std::string project;
  std::string commit;  // full SHA1
  std::string prediction;
  std::string reference;
  bool matched = false;
};

// Joins predictions with the test split. Missing, duplicate or unknown ids are a
// DataError naming every offending id. Output follows test-split order.
std::vector<Outcome> join_outcomes(std::span<const PredictionRecord> predictions,
                                   std::span<const corpus::BugInstance> test);

using Breakdown = std::map<std::string, Ratio>;

Breakdown breakdown_by_bug_type(std::span<const Outcome> outcomes);

struct RankedEntry {
  std::string key;
  Ratio ratio;
};
// Highest ratio first; ties by larger total, then smaller key.
std::vector<RankedEntry> top_k(const Breakdown& breakdown, std::size_t k);

struct ProjectBreakdown {
  Breakdown per_project;
  std::vector<RankedEntry> zero_shot;  // test projects absent from train, by key
};
ProjectBreakdown breakdown_by_project(std::span<const Outcome> outcomes, std::span<const corpus::BugInstance> train);

struct LengthBucket {
  std::string label;
  std::size_t low = 0;   // exclusive, except the first bucket which starts at 1
  std::size_t high = 0;  // inclusive; 0 means unbounded
  Ratio ratio;           // over references whose token length falls in the bucket
};

struct LongPatch {
  std::string project;
  std::string commit_prefix;  // first 12 characters
  std::size_t length = 0;
  std::string instance_id;
};

struct LengthAnalysis {
  std::vector<LengthBucket> buckets;  // [1,20], (20,50], (50,100], (100,inf)
  std::vector<LongPatch> longest;     // matched patches, longest first
};

// Bucket for a token length; nullopt for length 0.
std::optional<std::size_t> length_bucket(std::size_t length);

LengthAnalysis length_analysis(std::span<const Outcome> outcomes, const tokenizer::Vocab& vocab, std::size_t top_n = 5);

// Matched instances whose normalized patch equals no training fixed statement and no
// training buggy statement, in outcome order.
std::vector<std::string> novelty_check(std::span<const Outcome> outcomes, std::span<const corpus::BugInstance> train);

// sha256 of the split serialized exactly as the exported split file.
std::string split_checksum(std::span<const corpus::BugInstance> split);

struct EvaluationReport {
  std::string dataset;
  std::string approach;
  std::string split_checksum;
  long long matched = 0;
  long long total = 0;
  Breakdown per_bug_type;
  ProjectBreakdown per_project;
  LengthAnalysis lengths;
  std::vector<std::string> novel_fixes;
  Json config = Json::object();  // resolved run configuration, for provenance

  double accuracy() const { return Ratio{matched, total}.value(); }
  Json to_json() const;
  static EvaluationReport from_json(const Json& j);
};

struct ScoreOptions {
  std::string dataset;
  std::string approach;
  std::size_t longest = 5;
};

// Top-1 exact match plus every breakdown.
EvaluationReport score(std::span<const PredictionRecord> predictions, std::span<const corpus::BugInstance> test,
                       std::span<const corpus::BugInstance> train, const tokenizer::Vocab& vocab,
                       const ScoreOptions& options);

}  // namespace apr::eval
