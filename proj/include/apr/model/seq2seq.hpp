#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "apr/common/json_lines.hpp"
#include "apr/nn/parameter.hpp"
#include "apr/nn/tape.hpp"

namespace apr::corpus {
struct BugInstance;
}
namespace apr::tokenizer {
class Vocab;
}

namespace apr::model {

// Tokenized training example: framed buggy statement in, fixed statement out.
struct RepairPair {
  std::string id;
  std::vector<int> source;  // <s> c1 .. cm </s>
  std::vector<int> target;  // unframed fixed-code ids, at most max_target_len - 1 of them
  bool source_truncated = false;
  bool target_truncated = false;
};

RepairPair make_repair_pair(const corpus::BugInstance& instance, const tokenizer::Vocab& vocab,
                            std::size_t max_source_len, std::size_t max_target_len);

struct LossStats {
  double loss = 0.0;  // mean token cross-entropy
  std::size_t tokens = 0;
  std::size_t correct = 0;  // argmax == target under teacher forcing
};

struct ForwardOptions {
  bool gradients = false;
  std::mt19937_64* dropout_rng = nullptr;  // null disables dropout
};

// Per-hypothesis incremental decoding state.
class DecoderState {
 public:
  virtual ~DecoderState() = default;
  virtual std::unique_ptr<DecoderState> clone() const = 0;
};

// Contract shared by the transformer patch generator and the recurrent baseline, so that
// training, generation and evaluation never branch on the model type.
//
// Inference members are const and may run concurrently; forward_loss with gradients
// writes parameter gradients and needs exclusive access.
class Seq2SeqModel {
 public:
  virtual ~Seq2SeqModel() = default;

  virtual std::string kind() const = 0;
  virtual Json config_json() const = 0;
  virtual nn::ParameterSet& parameters() = 0;
  virtual const nn::ParameterSet& parameters() const = 0;
  virtual int vocab_size() const = 0;
  virtual int bos_id() const = 0;
  virtual int eos_id() const = 0;
  virtual std::size_t max_source_len() const = 0;
  virtual std::size_t max_target_len() const = 0;

  // Mean token cross-entropy over every target position of the batch (targets are
  // followed by EOS). With gradients set, d(loss)/d(param) is added to Parameter::grad.
  // Throws RuntimeFailure on an empty batch.
  LossStats forward_loss(std::span<const RepairPair> batch, const ForwardOptions& options);

  // Teacher-forced logits, one row per decoder input position: |decoder_input| x |V|.
  nn::Matrix target_logits(std::span<const int> source, std::span<const int> decoder_input) const;

  // Sum of log-probabilities of `generated` (which may end in EOS) given the source,
  // computed from teacher-forced logits.
  double sequence_log_prob(std::span<const int> source, std::span<const int> generated) const;

  // Incremental decoding: begin() encodes the source; step() consumes one token (BOS
  // first) and returns log-probabilities for the next token.
  virtual std::unique_ptr<DecoderState> begin(std::span<const int> source) const = 0;
  virtual nn::Vector step(DecoderState& state, int token) const = 0;

 protected:
  // Records the teacher-forced logits for (source, decoder_input) on the tape.
  virtual nn::Var record_logits(nn::Tape& tape, std::span<const int> source, std::span<const int> decoder_input,
                                std::mt19937_64* dropout_rng) = 0;
};

// Log-softmax of a logit row.
nn::Vector log_softmax(const nn::Vector& logits);

// Checks that every id is a valid vocabulary index and the length bound holds.
void check_sequence(std::span<const int> ids, int vocab_size, std::size_t max_len, const char* what);

}  // namespace apr::model
