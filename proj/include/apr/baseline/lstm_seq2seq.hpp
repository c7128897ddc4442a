#pragma once

#include <memory>

#include "apr/model/seq2seq.hpp"

namespace apr::baseline {

// Recurrent baseline: bidirectional LSTM encoder, LSTM decoder with input feeding and
// global dot-product attention. Pure generation: no copy mechanism, no abstraction.
struct BaselineConfig {
  int embedding_dim = 128;
  int hidden_dim = 256;  // decoder width; each encoder direction gets half
  int beam_size = 5;
  int batch_size = 32;
  double dropout = 0.3;
  long long max_steps = 20000;
  long long validation_every = 1000;
  int vocab_size = 50265;
  std::size_t max_source_len = 512;
  std::size_t max_target_len = 512;
  double init_range = 0.1;
  std::uint64_t seed = 42;

  void validate() const;
  Json to_json() const;
  static BaselineConfig from_json(const Json& j);
  bool operator==(const BaselineConfig&) const = default;
};

class LstmSeq2Seq final : public model::Seq2SeqModel {
 public:
  explicit LstmSeq2Seq(const BaselineConfig& config);

  const BaselineConfig& config() const { return config_; }

  std::string kind() const override { return "baseline"; }
  Json config_json() const override { return config_.to_json(); }
  nn::ParameterSet& parameters() override { return params_; }
  const nn::ParameterSet& parameters() const override { return params_; }
  int vocab_size() const override { return config_.vocab_size; }
  int bos_id() const override { return bos_; }
  int eos_id() const override { return eos_; }
  std::size_t max_source_len() const override { return config_.max_source_len; }
  std::size_t max_target_len() const override { return config_.max_target_len; }

  void set_special_ids(int bos, int eos);

  std::unique_ptr<model::DecoderState> begin(std::span<const int> source) const override;
  nn::Vector step(model::DecoderState& state, int token) const override;

  // Attention distribution over source positions from the most recent step().
  static const nn::RowVector& last_attention(const model::DecoderState& state);

 protected:
  nn::Var record_logits(nn::Tape& tape, std::span<const int> source, std::span<const int> decoder_input,
                        std::mt19937_64* dropout_rng) override;

 private:
  struct Lstm {
    nn::Parameter *w, *u, *b;
  };
  class State;

  Lstm make_lstm(const std::string& prefix, int input, int hidden);
  std::pair<nn::Var, nn::Var> lstm_step(nn::Tape& tape, const Lstm& cell, nn::Var x, nn::Var h, nn::Var c) const;
  nn::Matrix encode(std::span<const int> source, nn::RowVector& h0, nn::RowVector& c0) const;

  BaselineConfig config_;
  nn::ParameterSet params_;
  int bos_ = 0;
  int eos_ = 2;

  nn::Parameter* source_embedding_ = nullptr;
  nn::Parameter* target_embedding_ = nullptr;
  Lstm forward_{}, backward_{}, decoder_{};
  nn::Parameter* attention_out_ = nullptr;
  nn::Parameter* generator_weight_ = nullptr;
  nn::Parameter* generator_bias_ = nullptr;
};

std::unique_ptr<LstmSeq2Seq> build_baseline(const BaselineConfig& config);

}  // namespace apr::baseline
