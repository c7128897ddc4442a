#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "apr/common/json_lines.hpp"
#include "apr/model/beam_search.hpp"

namespace apr::corpus {
struct BugInstance;
}
namespace apr::tokenizer {
class Vocab;
}

namespace apr::eval {

// Ranked beam candidates for one test instance.
struct PredictionRecord {
  std::string instance_id;
  std::vector<model::Candidate> candidates;  // rank 1 first
  std::string model_tag;
  double wall_clock_ms = 0.0;

  const model::Candidate* top() const { return candidates.empty() ? nullptr : &candidates.front(); }
};

// Beam search over every instance, in input order. wall_clock_ms is measured per instance.
std::vector<PredictionRecord> predict(const model::Seq2SeqModel& model, std::span<const corpus::BugInstance> instances,
                                      const tokenizer::Vocab& vocab, std::size_t beam_size,
                                      const std::string& model_tag);

// One line per candidate: {instance_id, rank, text, score, log_prob, model_tag[, wall_clock_ms]}.
// Without timing the output depends only on the model and inputs.
std::vector<Json> prediction_lines(std::span<const PredictionRecord> records, bool with_timing);
// Per-instance timing rows: {instance_id, wall_clock_ms}.
std::vector<Json> timing_lines(std::span<const PredictionRecord> records);

// Groups candidate lines back into records. Ranks for one id must run 1..k in order.
std::vector<PredictionRecord> parse_prediction_lines(const std::vector<Json>& lines, const std::string& origin);
std::vector<PredictionRecord> read_predictions(const std::filesystem::path& path);

}  // namespace apr::eval
