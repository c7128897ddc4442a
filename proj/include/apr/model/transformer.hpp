#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "apr/model/seq2seq.hpp"

namespace apr::model {

// Encoder-decoder patch generator: a RoBERTa-style bidirectional encoder with a
// post-LN transformer decoder that shares the encoder's token embeddings.
struct ModelConfig {
  // "toy" initializes the encoder randomly; anything else names pretrained encoder
  // weights: a checkpoint file path, or a registry id looked up under $APR_MODEL_CACHE.
  std::string encoder_source = "toy";
  int encoder_layers = 12;
  int decoder_layers = 6;
  int hidden_dim = 768;
  int attention_heads = 12;
  int ffn_multiplier = 4;
  std::size_t max_source_len = 512;
  std::size_t max_target_len = 512;
  int beam_size = 5;
  int vocab_size = 50265;
  bool tie_embeddings = true;
  double dropout = 0.1;
  double init_std = 0.02;
  std::uint64_t seed = 42;

  // Throws ConfigError.
  void validate() const;
  Json to_json() const;
  static ModelConfig from_json(const Json& j);
  bool operator==(const ModelConfig&) const = default;
};

class TransformerSeq2Seq final : public Seq2SeqModel {
 public:
  explicit TransformerSeq2Seq(const ModelConfig& config);

  const ModelConfig& config() const { return config_; }

  std::string kind() const override { return "transformer"; }
  Json config_json() const override { return config_.to_json(); }
  nn::ParameterSet& parameters() override { return params_; }
  const nn::ParameterSet& parameters() const override { return params_; }
  int vocab_size() const override { return config_.vocab_size; }
  int bos_id() const override { return bos_; }
  int eos_id() const override { return eos_; }
  std::size_t max_source_len() const override { return config_.max_source_len; }
  std::size_t max_target_len() const override { return config_.max_target_len; }

  // Token ids used for decoder start and end; default to the RoBERTa layout (0 and 2).
  void set_special_ids(int bos, int eos);

  std::unique_ptr<DecoderState> begin(std::span<const int> source) const override;
  nn::Vector step(DecoderState& state, int token) const override;

  // Encoder hidden states, one row per source position.
  nn::Matrix encode(std::span<const int> source) const;

 protected:
  nn::Var record_logits(nn::Tape& tape, std::span<const int> source, std::span<const int> decoder_input,
                        std::mt19937_64* dropout_rng) override;

 private:
  struct Attention {
    nn::Parameter *wq, *bq, *wk, *bk, *wv, *bv, *wo, *bo;
  };
  struct Norm {
    nn::Parameter *gamma, *beta;
  };
  struct FeedForward {
    nn::Parameter *w_in, *b_in, *w_out, *b_out;
  };
  struct EncoderLayer {
    Attention attn;
    Norm ln1;
    FeedForward ffn;
    Norm ln2;
  };
  struct DecoderLayer {
    Attention self_attn;
    Norm ln1;
    Attention cross_attn;
    Norm ln2;
    FeedForward ffn;
    Norm ln3;
  };
  class State;

  Attention make_attention(const std::string& prefix);
  Norm make_norm(const std::string& prefix);
  FeedForward make_ffn(const std::string& prefix);

  nn::Var attention(nn::Tape& tape, const Attention& a, nn::Var query_in, nn::Var memory, bool causal,
                    std::mt19937_64* rng);
  nn::Var norm(nn::Tape& tape, const Norm& n, nn::Var x);
  nn::Var feed_forward(nn::Tape& tape, const FeedForward& f, nn::Var x, std::mt19937_64* rng);
  nn::Var record_encoder(nn::Tape& tape, std::span<const int> source, std::mt19937_64* rng);

  ModelConfig config_;
  nn::ParameterSet params_;
  int bos_ = 0;
  int eos_ = 2;

  nn::Parameter* word_embedding_ = nullptr;
  nn::Parameter* source_position_ = nullptr;
  Norm embedding_norm_{};
  std::vector<EncoderLayer> encoder_;
  nn::Parameter* target_position_ = nullptr;
  Norm target_embedding_norm_{};
  std::vector<DecoderLayer> decoder_;
  nn::Parameter* output_weight_ = nullptr;  // aliases word_embedding_ when tied
  nn::Parameter* output_bias_ = nullptr;
};

// Builds the model, loading pretrained encoder weights when encoder_source is not "toy".
// Unreachable weights raise RuntimeFailure with retryable() set; shape mismatches DataError.
std::unique_ptr<TransformerSeq2Seq> build(const ModelConfig& config);

// Where a pretrained encoder source resolves to, or empty when it cannot be found.
std::filesystem::path resolve_encoder_source(const std::string& source);

// Per-component parameter counts ("embeddings", "encoder", "decoder", "output") plus total.
std::string parameter_report(const nn::ParameterSet& params);

}  // namespace apr::model
