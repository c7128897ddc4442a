#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "apr/cli/config.hpp"

namespace apr::cli {

// Exit status classes shared by every command.
enum ExitCode : int { kOk = 0, kConfigFailure = 2, kDataFailure = 3, kRuntimeFailure = 4 };

struct PrepareArgs {
  std::filesystem::path raw_path;
  std::string variant = "Unique";
  std::string size = "Small";
  std::uint64_t seed = 42;
  std::filesystem::path out_dir;
  std::filesystem::path vocab_dir;  // for over-length counts; byte-level when empty
};

// load -> filter -> (dedup) -> split -> export, plus rejects.jsonl and stats.md.
// Prints the stats table to `out`.
void cmd_prepare(const PrepareArgs& args, std::ostream& out);

struct TrainArgs {
  ExperimentConfig config;
  bool resume = false;
  long long stop_after = 0;
};

// Trains the configured model on config.dataset.bundle_dir. Writes config.ini,
// vocab/, best.ckpt, last.ckpt, train_log.jsonl and timing.jsonl under out_dir.
void cmd_train(const TrainArgs& args, std::ostream& out);

struct PredictArgs {
  std::filesystem::path checkpoint;
  std::filesystem::path bundle_dir;
  std::string split = "test";
  std::size_t beam_size = 5;
  std::filesystem::path out_dir;
  std::filesystem::path vocab_dir;  // defaults to vocab/ beside the checkpoint
  bool deterministic = true;        // keeps wall-clock fields out of predictions.jsonl
};

// predictions.jsonl, predictions.timing.jsonl and predict_meta.json under out_dir.
void cmd_predict(const PredictArgs& args, std::ostream& out);

struct EvaluateArgs {
  std::filesystem::path predictions;
  std::filesystem::path bundle_dir;
  std::filesystem::path out_dir;
  std::filesystem::path vocab_dir;      // defaults to the one recorded at predict time
  std::filesystem::path training_log;   // optional timing.jsonl from the training run
};

// report.json, report.md and timing.json under out_dir.
void cmd_evaluate(const EvaluateArgs& args, std::ostream& out);

struct ReportArgs {
  std::vector<std::filesystem::path> run_dirs;  // each holds report.json (timing.json optional)
  std::filesystem::path out_file;               // stdout only when empty
};

void cmd_report(const ReportArgs& args, std::ostream& out);

// Runs `body`, mapping ConfigError/DataError/RuntimeFailure to exit codes and printing
// the message to `err`.
int run_guarded(const std::function<void()>& body, std::ostream& err);

}  // namespace apr::cli
