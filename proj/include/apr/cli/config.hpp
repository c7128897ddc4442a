#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "apr/baseline/lstm_seq2seq.hpp"
#include "apr/common/json_lines.hpp"
#include "apr/model/transformer.hpp"
#include "apr/train/trainer.hpp"

namespace apr::cli {

struct DatasetSection {
  std::string variant = "Unique";
  std::string size = "Small";
  std::filesystem::path raw_path;
  std::uint64_t seed = 42;
  std::filesystem::path bundle_dir;  // prepared bundle consumed by train/predict/evaluate

  bool operator==(const DatasetSection&) const = default;
};

struct TokenizerSection {
  std::filesystem::path vocab_dir;  // empty: train a toy vocabulary on the training split
  std::size_t toy_merges = 1000;

  bool operator==(const TokenizerSection&) const = default;
};

// One run, as read from an INI file with sections [dataset] [tokenizer] [model]
// [transformer] [baseline] [train] [output].
struct ExperimentConfig {
  DatasetSection dataset;
  TokenizerSection tokenizer;
  std::string model_kind = "transformer";  // or "baseline"
  model::ModelConfig transformer;
  baseline::BaselineConfig baseline;
  train::TrainConfig train;
  std::filesystem::path out_dir;
  bool deterministic = true;

  // Unknown sections or keys and unparsable values are ConfigErrors.
  static ExperimentConfig parse_ini(const std::string& text, const std::string& origin);
  static ExperimentConfig load(const std::filesystem::path& path);
  // Every field, so parse_ini(to_ini()) reproduces the config exactly.
  std::string to_ini() const;
  Json to_json() const;

  // "section.key=value".
  void apply_override(const std::string& assignment);

  // Field checks; with check_paths also requires the referenced files to exist.
  void validate(bool check_paths) const;

  bool operator==(const ExperimentConfig&) const = default;
};

// All "section.key" names understood by the INI reader.
std::vector<std::string> config_keys();

}  // namespace apr::cli
