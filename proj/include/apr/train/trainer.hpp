#pragma once

#include <filesystem>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "apr/common/json_lines.hpp"
#include "apr/model/seq2seq.hpp"

namespace apr::corpus {
struct DatasetBundle;
}
namespace apr::tokenizer {
class Vocab;
}

namespace apr::train {

struct TrainConfig {
  double learning_rate = 5e-5;
  int batch_size = 8;
  long long max_steps = 50000;
  long long validation_every = 1000;
  int early_stop_patience = 5;
  std::uint64_t seed = 42;
  std::string device = "cpu";
  std::size_t exact_match_sample = 100;  // validation instances decoded greedily per validation
  bool dropout = true;
  double clip_norm = 1.0;
  // Stop as soon as the sampled exact match reaches 1.0. Off for real runs.
  bool stop_on_perfect_sample = false;

  void validate() const;
  Json to_json() const;
  static TrainConfig from_json(const Json& j);
  bool operator==(const TrainConfig&) const = default;
};

enum class Metric { Loss, ExactMatchSample };

// Mean token cross-entropy over the whole split, or greedy exact match on its first
// `sample` pairs. Deterministic: no dropout, no sampling. Throws RuntimeFailure on an
// empty split.
double validate(model::Seq2SeqModel& model, std::span<const model::RepairPair> split, Metric metric,
                std::size_t sample = 100);

struct StepRecord {
  long long step = 0;
  double loss = 0.0;
  double grad_norm = 0.0;
};

struct ValidationRecord {
  long long step = 0;
  double loss = 0.0;
  double exact_match = 0.0;
  bool improved = false;
};

enum class Phase { Training, Inference };
std::string to_string(Phase p);

struct TimingRecord {
  std::string phase;
  std::string bundle;
  double seconds = 0.0;
};

struct TrainLog {
  std::vector<StepRecord> steps;
  std::vector<ValidationRecord> validations;
  std::vector<TimingRecord> timings;  // wall clock; kept out of the deterministic log file
  long long best_step = -1;
  double best_loss = std::numeric_limits<double>::infinity();
  std::string best_checkpoint;  // file name relative to the run directory
  std::string stop_reason;

  // Steps, validations and a closing summary; no wall-clock fields.
  std::vector<Json> records() const;
  std::vector<Json> timing_records() const;
  Json summary() const;
  static TrainLog from_records(const std::vector<Json>& records);
};

const TimingRecord& record_timing(TrainLog& log, Phase phase, const std::string& bundle, double seconds);

struct FitOptions {
  std::filesystem::path out_dir;
  std::string vocab_hash;
  std::string bundle_name = "unnamed";
  // Continue from out_dir/last.ckpt and out_dir/trainer_state.bin when they exist.
  bool resume = false;
  // Return as if interrupted once this many steps have run (0 = never).
  long long stop_after = 0;
  // Replaces the validation loss used for early stopping (test hook).
  std::function<double(long long step)> metric_override;
};

struct FitResult {
  TrainLog log;
  std::filesystem::path best_checkpoint;
  bool completed = false;
};

// Adam updates over shuffled mini-batches, validation every validation_every steps, the
// lowest-validation-loss checkpoint kept as best.ckpt, early stop after
// early_stop_patience validations without improvement. On return the model holds the
// best weights. Writes train_log.jsonl, timing.jsonl and the checkpoints to out_dir.
// A non-finite loss writes diagnostic.json and raises RuntimeFailure.
FitResult fit(model::Seq2SeqModel& model, std::span<const model::RepairPair> train,
              std::span<const model::RepairPair> valid, const TrainConfig& config, const FitOptions& options);

// Tokenizes the bundle's train and valid splits, then trains.
FitResult fit(model::Seq2SeqModel& model, const corpus::DatasetBundle& bundle, const tokenizer::Vocab& vocab,
              const TrainConfig& config, FitOptions options);

std::vector<model::RepairPair> make_pairs(std::span<const corpus::BugInstance> instances,
                                          const tokenizer::Vocab& vocab, const model::Seq2SeqModel& model);

}  // namespace apr::train
