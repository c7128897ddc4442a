#pragma once

#include <filesystem>

#include "apr/baseline/lstm_seq2seq.hpp"
#include "apr/eval/metrics.hpp"
#include "apr/train/trainer.hpp"

namespace apr::corpus {
struct DatasetBundle;
}

namespace apr::baseline {

inline constexpr const char* kApproachTag = "simple-seq2seq";

// Trainer settings taken from the baseline config. The learning rate is not part of it:
// a recurrent model trained from scratch wants a much larger step than fine-tuning.
train::TrainConfig baseline_train_config(const BaselineConfig& config, double learning_rate = 1e-3);

struct ExperimentResult {
  eval::EvaluationReport report;
  train::FitResult fit;
  std::vector<eval::PredictionRecord> predictions;
};

// Train on the bundle, beam-search the test split, score it. An empty test split is
// rejected before any training happens.
ExperimentResult run_baseline_experiment(const corpus::DatasetBundle& bundle, const tokenizer::Vocab& vocab,
                                         const BaselineConfig& config, const train::TrainConfig& train_config,
                                         const std::filesystem::path& out_dir);

}  // namespace apr::baseline
