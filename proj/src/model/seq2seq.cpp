#include "apr/model/seq2seq.hpp"

#include <cmath>

#include "apr/common/errors.hpp"
#include "apr/common/text.hpp"
#include "apr/corpus/corpus.hpp"
#include "apr/tokenizer/vocab.hpp"

namespace apr::model {

RepairPair make_repair_pair(const corpus::BugInstance& instance, const tokenizer::Vocab& vocab,
                            std::size_t max_source_len, std::size_t max_target_len) {
  RepairPair pair;
  pair.id = instance.id;
  auto source = tokenizer::encode_code(instance.source_before_fix, vocab, max_source_len);
  pair.source = std::move(source.ids);
  pair.source_truncated = source.truncated;
  pair.target = vocab.encode_raw(text::normalize_whitespace(instance.source_after_fix));
  const std::size_t capacity = max_target_len > 0 ? max_target_len - 1 : 0;
  if (pair.target.size() > capacity) {
    pair.target.resize(capacity);
    pair.target_truncated = true;
  }
  return pair;
}

nn::Vector log_softmax(const nn::Vector& logits) {
  const double mx = logits.maxCoeff();
  const double lse = mx + std::log((logits.array() - mx).exp().sum());
  return (logits.array() - lse).matrix();
}

void check_sequence(std::span<const int> ids, int vocab_size, std::size_t max_len, const char* what) {
  if (ids.size() > max_len)
    throw RuntimeFailure(std::string(what) + " length " + std::to_string(ids.size()) + " exceeds limit " +
                         std::to_string(max_len));
  for (int id : ids)
    if (id < 0 || id >= vocab_size) throw RuntimeFailure(std::string(what) + " contains invalid id " + std::to_string(id));
}

LossStats Seq2SeqModel::forward_loss(std::span<const RepairPair> batch, const ForwardOptions& options) {
  if (batch.empty()) throw RuntimeFailure("forward_loss: empty batch");
  std::size_t total_tokens = 0;
  for (const auto& p : batch) total_tokens += p.target.size() + 1;

  LossStats stats;
  stats.tokens = total_tokens;
  const double inv_tokens = 1.0 / static_cast<double>(total_tokens);
  for (const auto& pair : batch) {
    std::vector<int> decoder_input;
    decoder_input.reserve(pair.target.size() + 1);
    decoder_input.push_back(bos_id());
    decoder_input.insert(decoder_input.end(), pair.target.begin(), pair.target.end());
    std::vector<int> expected(pair.target.begin(), pair.target.end());
    expected.push_back(eos_id());

    nn::Tape tape(options.gradients);
    const nn::Var logits = record_logits(tape, pair.source, decoder_input, options.dropout_rng);
    const nn::Var loss = tape.cross_entropy_sum(logits, expected);
    stats.loss += tape.scalar(loss) * inv_tokens;

    const nn::Matrix& lv = tape.value(logits);
    for (Eigen::Index i = 0; i < lv.rows(); ++i) {
      Eigen::Index arg;
      lv.row(i).maxCoeff(&arg);
      if (arg == expected[static_cast<std::size_t>(i)]) ++stats.correct;
    }
    if (options.gradients) tape.backward(loss, inv_tokens);
  }
  return stats;
}

nn::Matrix Seq2SeqModel::target_logits(std::span<const int> source, std::span<const int> decoder_input) const {
  // A tape without gradients never writes to parameters.
  nn::Tape tape(false);
  auto* self = const_cast<Seq2SeqModel*>(this);
  return tape.value(self->record_logits(tape, source, decoder_input, nullptr));
}

double Seq2SeqModel::sequence_log_prob(std::span<const int> source, std::span<const int> generated) const {
  if (generated.empty()) return 0.0;
  std::vector<int> decoder_input;
  decoder_input.push_back(bos_id());
  decoder_input.insert(decoder_input.end(), generated.begin(), generated.end() - 1);
  const nn::Matrix logits = target_logits(source, decoder_input);
  double total = 0.0;
  for (std::size_t i = 0; i < generated.size(); ++i)
    total += log_softmax(logits.row(static_cast<Eigen::Index>(i)).transpose())(generated[i]);
  return total;
}

}  // namespace apr::model
