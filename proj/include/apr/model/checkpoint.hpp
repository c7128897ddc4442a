#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "apr/model/seq2seq.hpp"

namespace apr::model {

inline constexpr int kCheckpointVersion = 1;

struct CheckpointInfo {
  std::string kind;
  Json config;
  std::string vocab_hash;
  int bos_id = 0;
  int eos_id = 2;
};

// Self-describing checkpoint: model kind, full config, vocabulary hash and every parameter.
void save_checkpoint(const Seq2SeqModel& model, const std::string& vocab_hash, const std::filesystem::path& path);

CheckpointInfo read_checkpoint_info(const std::filesystem::path& path);

// Rebuilds the model described by the checkpoint and restores its weights.
// Version mismatch, truncation and corruption raise DataError.
std::unique_ptr<Seq2SeqModel> load_checkpoint(const std::filesystem::path& path, CheckpointInfo* info = nullptr);

// Restores weights into an existing model; names and shapes must match exactly.
void load_weights(Seq2SeqModel& model, const std::filesystem::path& path);

}  // namespace apr::model
