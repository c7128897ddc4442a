#include "apr/baseline/lstm_seq2seq.hpp"

#include <cmath>

#include "apr/common/errors.hpp"

namespace apr::baseline {
namespace {

using nn::Matrix;
using nn::RowVector;
using nn::Var;

double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

// Gate layout along the 4h columns: input, forget, candidate, output.
void lstm_cell(const RowVector& x, RowVector& h, RowVector& c, const nn::Parameter& w, const nn::Parameter& u,
               const nn::Parameter& b) {
  const Eigen::Index n = h.cols();
  const RowVector gates = x * w.value + h * u.value + b.value.row(0);
  const RowVector i = gates.segment(0, n).unaryExpr(&sigmoid);
  const RowVector f = gates.segment(n, n).unaryExpr(&sigmoid);
  const RowVector g = gates.segment(2 * n, n).array().tanh().matrix();
  const RowVector o = gates.segment(3 * n, n).unaryExpr(&sigmoid);
  c = f.cwiseProduct(c) + i.cwiseProduct(g);
  h = o.cwiseProduct(c.array().tanh().matrix());
}

}  // namespace

void BaselineConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("baseline config: " + msg); };
  if (embedding_dim < 1 || hidden_dim < 2) fail("dimensions must be positive");
  if (hidden_dim % 2 != 0) fail("hidden_dim must be even (split across encoder directions)");
  if (beam_size < 1 || batch_size < 1) fail("beam_size and batch_size must be positive");
  if (max_steps < 1 || validation_every < 1) fail("max_steps and validation_every must be positive");
  if (dropout < 0.0 || dropout >= 1.0) fail("dropout must be in [0, 1)");
  if (vocab_size < 3) fail("vocab_size must be at least 3");
  if (max_source_len < 3 || max_target_len < 1) fail("sequence limits too small");
  if (init_range <= 0.0) fail("init_range must be positive");
}

Json BaselineConfig::to_json() const {
  Json j;
  j["embedding_dim"] = embedding_dim;
  j["hidden_dim"] = hidden_dim;
  j["beam_size"] = beam_size;
  j["batch_size"] = batch_size;
  j["dropout"] = dropout;
  j["max_steps"] = max_steps;
  j["validation_every"] = validation_every;
  j["vocab_size"] = vocab_size;
  j["max_source_len"] = max_source_len;
  j["max_target_len"] = max_target_len;
  j["init_range"] = init_range;
  j["seed"] = seed;
  return j;
}

BaselineConfig BaselineConfig::from_json(const Json& j) {
  BaselineConfig c;
  c.embedding_dim = j.value("embedding_dim", c.embedding_dim);
  c.hidden_dim = j.value("hidden_dim", c.hidden_dim);
  c.beam_size = j.value("beam_size", c.beam_size);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.dropout = j.value("dropout", c.dropout);
  c.max_steps = j.value("max_steps", c.max_steps);
  c.validation_every = j.value("validation_every", c.validation_every);
  c.vocab_size = j.value("vocab_size", c.vocab_size);
  c.max_source_len = j.value("max_source_len", c.max_source_len);
  c.max_target_len = j.value("max_target_len", c.max_target_len);
  c.init_range = j.value("init_range", c.init_range);
  c.seed = j.value("seed", c.seed);
  return c;
}

class LstmSeq2Seq::State final : public model::DecoderState {
 public:
  std::shared_ptr<const Matrix> memory;  // encoder outputs, one row per source position
  RowVector h, c, feed;
  RowVector attention;
  std::size_t position = 0;

  std::unique_ptr<model::DecoderState> clone() const override { return std::make_unique<State>(*this); }
};

LstmSeq2Seq::Lstm LstmSeq2Seq::make_lstm(const std::string& prefix, int input, int hidden) {
  return {&params_.add(prefix + ".w", input, 4 * hidden), &params_.add(prefix + ".u", hidden, 4 * hidden),
          &params_.add(prefix + ".b", 1, 4 * hidden)};
}

LstmSeq2Seq::LstmSeq2Seq(const BaselineConfig& config) : config_(config) {
  config_.validate();
  const int e = config_.embedding_dim;
  const int hd = config_.hidden_dim;
  source_embedding_ = &params_.add("embeddings.source", config_.vocab_size, e);
  target_embedding_ = &params_.add("embeddings.target", config_.vocab_size, e);
  forward_ = make_lstm("encoder.forward", e, hd / 2);
  backward_ = make_lstm("encoder.backward", e, hd / 2);
  decoder_ = make_lstm("decoder.lstm", e + hd, hd);
  attention_out_ = &params_.add("decoder.attention_out", 2 * hd, hd);
  generator_weight_ = &params_.add("generator.weight", hd, config_.vocab_size);
  generator_bias_ = &params_.add("generator.bias", 1, config_.vocab_size);

  std::mt19937_64 rng(config_.seed);
  params_.init_uniform(rng, config_.init_range);
}

void LstmSeq2Seq::set_special_ids(int bos, int eos) {
  if (bos < 0 || bos >= config_.vocab_size || eos < 0 || eos >= config_.vocab_size)
    throw ConfigError("special token ids outside the vocabulary");
  bos_ = bos;
  eos_ = eos;
}

std::pair<Var, Var> LstmSeq2Seq::lstm_step(nn::Tape& tape, const Lstm& cell, Var x, Var h, Var c) const {
  const Eigen::Index n = tape.value(h).cols();
  const Var gates = tape.add_row(tape.add(tape.matmul(x, tape.param(*cell.w)), tape.matmul(h, tape.param(*cell.u))),
                                 tape.param(*cell.b));
  const Var i = tape.sigmoid(tape.slice_cols(gates, 0, n));
  const Var f = tape.sigmoid(tape.slice_cols(gates, n, n));
  const Var g = tape.tanh(tape.slice_cols(gates, 2 * n, n));
  const Var o = tape.sigmoid(tape.slice_cols(gates, 3 * n, n));
  const Var c_next = tape.add(tape.mul(f, c), tape.mul(i, g));
  const Var h_next = tape.mul(o, tape.tanh(c_next));
  return {h_next, c_next};
}

Var LstmSeq2Seq::record_logits(nn::Tape& tape, std::span<const int> source, std::span<const int> decoder_input,
                               std::mt19937_64* rng) {
  model::check_sequence(source, config_.vocab_size, config_.max_source_len, "source");
  model::check_sequence(decoder_input, config_.vocab_size, config_.max_target_len, "decoder input");
  if (source.empty() || decoder_input.empty()) throw RuntimeFailure("empty source or decoder input");
  const double p = rng ? config_.dropout : 0.0;
  const int half = config_.hidden_dim / 2;
  const auto len = static_cast<Eigen::Index>(source.size());

  Var src = tape.gather_rows(tape.param(*source_embedding_), source);
  if (rng) src = tape.dropout(src, p, *rng);

  std::vector<Var> fwd(source.size()), bwd(source.size());
  Var h = tape.constant(Matrix::Zero(1, half)), c = tape.constant(Matrix::Zero(1, half));
  for (Eigen::Index t = 0; t < len; ++t) {
    std::tie(h, c) = lstm_step(tape, forward_, tape.slice_rows(src, t, 1), h, c);
    fwd[t] = h;
  }
  const Var fwd_h = h, fwd_c = c;
  h = tape.constant(Matrix::Zero(1, half));
  c = tape.constant(Matrix::Zero(1, half));
  for (Eigen::Index t = len - 1; t >= 0; --t) {
    std::tie(h, c) = lstm_step(tape, backward_, tape.slice_rows(src, t, 1), h, c);
    bwd[t] = h;
  }
  std::vector<Var> rows(source.size());
  for (std::size_t t = 0; t < source.size(); ++t) rows[t] = tape.concat_cols(std::vector<Var>{fwd[t], bwd[t]});
  const Var memory = tape.concat_rows(rows);

  Var dh = tape.concat_cols(std::vector<Var>{fwd_h, h});
  Var dc = tape.concat_cols(std::vector<Var>{fwd_c, c});
  Var feed = tape.constant(Matrix::Zero(1, config_.hidden_dim));
  Var tgt = tape.gather_rows(tape.param(*target_embedding_), decoder_input);
  if (rng) tgt = tape.dropout(tgt, p, *rng);

  std::vector<Var> outputs;
  outputs.reserve(decoder_input.size());
  for (std::size_t t = 0; t < decoder_input.size(); ++t) {
    const Var x = tape.concat_cols(std::vector<Var>{tape.slice_rows(tgt, static_cast<Eigen::Index>(t), 1), feed});
    std::tie(dh, dc) = lstm_step(tape, decoder_, x, dh, dc);
    const Var weights = tape.softmax_rows(tape.matmul_nt(dh, memory));
    const Var context = tape.matmul(weights, memory);
    Var attn = tape.tanh(tape.matmul(tape.concat_cols(std::vector<Var>{context, dh}), tape.param(*attention_out_)));
    if (rng) attn = tape.dropout(attn, p, *rng);
    feed = attn;
    outputs.push_back(attn);
  }
  const Var states = tape.concat_rows(outputs);
  return tape.add_row(tape.matmul(states, tape.param(*generator_weight_)), tape.param(*generator_bias_));
}

Matrix LstmSeq2Seq::encode(std::span<const int> source, RowVector& h0, RowVector& c0) const {
  model::check_sequence(source, config_.vocab_size, config_.max_source_len, "source");
  if (source.empty()) throw RuntimeFailure("source sequence is empty");
  const int half = config_.hidden_dim / 2;
  const auto len = static_cast<Eigen::Index>(source.size());
  Matrix memory(len, config_.hidden_dim);
  RowVector h = RowVector::Zero(half), c = RowVector::Zero(half);
  for (Eigen::Index t = 0; t < len; ++t) {
    lstm_cell(source_embedding_->value.row(source[t]), h, c, *forward_.w, *forward_.u, *forward_.b);
    memory.block(t, 0, 1, half) = h;
  }
  h0.resize(config_.hidden_dim);
  c0.resize(config_.hidden_dim);
  h0.head(half) = h;
  c0.head(half) = c;
  h.setZero();
  c.setZero();
  for (Eigen::Index t = len - 1; t >= 0; --t) {
    lstm_cell(source_embedding_->value.row(source[t]), h, c, *backward_.w, *backward_.u, *backward_.b);
    memory.block(t, half, 1, half) = h;
  }
  h0.tail(half) = h;
  c0.tail(half) = c;
  return memory;
}

std::unique_ptr<model::DecoderState> LstmSeq2Seq::begin(std::span<const int> source) const {
  auto state = std::make_unique<State>();
  state->memory = std::make_shared<const Matrix>(encode(source, state->h, state->c));
  state->feed = RowVector::Zero(config_.hidden_dim);
  return state;
}

nn::Vector LstmSeq2Seq::step(model::DecoderState& base, int token) const {
  auto& s = dynamic_cast<State&>(base);
  if (s.position >= config_.max_target_len) throw RuntimeFailure("decoder stepped past max_target_len");
  if (token < 0 || token >= config_.vocab_size) throw RuntimeFailure("decoder token out of range");
  RowVector x(config_.embedding_dim + config_.hidden_dim);
  x << target_embedding_->value.row(token), s.feed;
  lstm_cell(x, s.h, s.c, *decoder_.w, *decoder_.u, *decoder_.b);

  RowVector scores = s.h * s.memory->transpose();
  scores = (scores.array() - scores.maxCoeff()).exp();
  scores /= scores.sum();
  s.attention = scores;
  const RowVector context = scores * *s.memory;
  RowVector joined(2 * config_.hidden_dim);
  joined << context, s.h;
  s.feed = (joined * attention_out_->value).array().tanh().matrix();
  ++s.position;
  const nn::Vector logits = (s.feed * generator_weight_->value + generator_bias_->value.row(0)).transpose();
  return model::log_softmax(logits);
}

const RowVector& LstmSeq2Seq::last_attention(const model::DecoderState& state) {
  return dynamic_cast<const State&>(state).attention;
}

std::unique_ptr<LstmSeq2Seq> build_baseline(const BaselineConfig& config) {
  return std::make_unique<LstmSeq2Seq>(config);
}

}  // namespace apr::baseline
