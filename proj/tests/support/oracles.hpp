#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>
#include <span>
#include <vector>

#include "apr/baseline/lstm_seq2seq.hpp"
#include "apr/model/beam_search.hpp"
#include "apr/model/transformer.hpp"
#include "testing.hpp"

namespace apr::testing {

// Logits are a learned bias row, identical at every position.
class StubModel final : public model::Seq2SeqModel {
 public:
  explicit StubModel(int vocab_size, std::size_t max_len = 16) : vocab_(vocab_size), max_len_(max_len) {
    bias_ = &params_.add("bias", 1, vocab_size);
    bias_->value.setZero();
  }

  std::string kind() const override { return "stub"; }
  Json config_json() const override { return Json{{"vocab_size", vocab_}}; }
  nn::ParameterSet& parameters() override { return params_; }
  const nn::ParameterSet& parameters() const override { return params_; }
  int vocab_size() const override { return vocab_; }
  int bos_id() const override { return 0; }
  int eos_id() const override { return 2; }
  std::size_t max_source_len() const override { return max_len_; }
  std::size_t max_target_len() const override { return max_len_; }

  nn::Parameter& bias() { return *bias_; }

  std::unique_ptr<model::DecoderState> begin(std::span<const int>) const override { return std::make_unique<State>(); }
  nn::Vector step(model::DecoderState&, int) const override {
    return model::log_softmax(bias_->value.row(0).transpose());
  }

 protected:
  nn::Var record_logits(nn::Tape& tape, std::span<const int>, std::span<const int> decoder_input,
                        std::mt19937_64*) override {
    const auto zeros = tape.constant(nn::Matrix::Zero(static_cast<Eigen::Index>(decoder_input.size()), vocab_));
    return tape.add_row(zeros, tape.param(*bias_));
  }

 private:
  struct State final : model::DecoderState {
    std::unique_ptr<model::DecoderState> clone() const override { return std::make_unique<State>(); }
  };
  int vocab_;
  std::size_t max_len_;
  nn::ParameterSet params_;
  nn::Parameter* bias_ = nullptr;
};

// Small random models with spread-out output distributions, for search oracles.
inline std::unique_ptr<model::TransformerSeq2Seq> tiny_transformer(int vocab, std::uint64_t seed, std::size_t max_len) {
  model::ModelConfig c;
  c.encoder_layers = 1;
  c.decoder_layers = 1;
  c.hidden_dim = 8;
  c.attention_heads = 2;
  c.vocab_size = vocab;
  c.max_source_len = 8;
  c.max_target_len = max_len + 1;
  c.init_std = 0.6;
  c.seed = seed;
  return model::build(c);
}

inline std::unique_ptr<baseline::LstmSeq2Seq> tiny_baseline(int vocab, std::uint64_t seed, std::size_t max_len) {
  baseline::BaselineConfig c;
  c.embedding_dim = 4;
  c.hidden_dim = 8;
  c.vocab_size = vocab;
  c.max_source_len = 8;
  c.max_target_len = max_len + 1;
  c.init_range = 1.0;
  c.seed = seed;
  return baseline::build_baseline(c);
}

struct Scored {
  std::vector<int> ids;
  double score;
  double log_prob;
};

// Every finishable sequence: EOS-terminated of length 1..max_len, or max_len long
// without EOS. Scored by teacher-forced log-probability over its length, sorted like
// beam output.
inline std::vector<Scored> enumerate_sequences(const model::Seq2SeqModel& m, std::span<const int> source,
                                               std::size_t max_len) {
  const int v = m.vocab_size();
  const int eos = m.eos_id();
  std::vector<Scored> all;
  std::vector<std::vector<int>> prefixes = {{}};
  for (std::size_t len = 1; len <= max_len; ++len) {
    std::vector<std::vector<int>> next;
    for (const auto& p : prefixes) {
      for (int t = 0; t < v; ++t) {
        auto ids = p;
        ids.push_back(t);
        if (t == eos || len == max_len) {
          const double lp = m.sequence_log_prob(source, ids);
          all.push_back({ids, lp / static_cast<double>(ids.size()), lp});
        } else {
          next.push_back(std::move(ids));
        }
      }
    }
    prefixes = std::move(next);
  }
  std::sort(all.begin(), all.end(), [](const Scored& a, const Scored& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.ids < b.ids;
  });
  return all;
}

inline std::size_t int_pow(std::size_t b, std::size_t e) {
  std::size_t r = 1;
  while (e--) r *= b;
  return r;
}

struct BeamOracleResult {
  bool optimum_matches = false;
  bool ranking_matches = false;
  bool greedy_matches = false;
  double max_score_gap = 0.0;
};

inline BeamOracleResult check_beam_against_enumeration(const model::Seq2SeqModel& m, std::span<const int> source,
                                                       std::size_t max_len) {
  BeamOracleResult r;
  const auto width = int_pow(static_cast<std::size_t>(m.vocab_size()), max_len);
  const auto beam = model::beam_search(m, source, width, max_len);
  const auto oracle = enumerate_sequences(m, source, max_len);
  r.optimum_matches = !beam.empty() && beam.front().ids == oracle.front().ids;
  r.ranking_matches = beam.size() == oracle.size();
  for (std::size_t i = 0; r.ranking_matches && i < beam.size(); ++i) {
    r.ranking_matches = beam[i].ids == oracle[i].ids;
    r.max_score_gap = std::max(r.max_score_gap, std::abs(beam[i].score - oracle[i].score));
  }
  const auto one = model::beam_search(m, source, 1, max_len);
  r.greedy_matches = one.size() == 1 && one.front().ids == model::greedy_decode(m, source, max_len);
  return r;
}

struct GradientCheck {
  std::size_t checked = 0;
  std::size_t failures = 0;
  std::size_t above_floor = 0;  // entries whose gradient magnitude exceeds the floor
  double max_relative_error = 0.0;
  std::string worst;
};

// Central differences of the mean loss against the tape gradient on `samples` scalars
// drawn uniformly over every parameter entry. Relative error is
// |analytic - numeric| / max(|analytic|, |numeric|, floor).
inline GradientCheck gradient_check(model::Seq2SeqModel& m, std::span<const model::RepairPair> batch,
                                    std::size_t samples, std::uint64_t seed, double tolerance, double floor,
                                    double h = 1e-5) {
  auto& params = m.parameters();
  params.zero_grad();
  m.forward_loss(batch, {.gradients = true, .dropout_rng = nullptr});

  std::vector<std::pair<std::size_t, Eigen::Index>> entries;
  for (std::size_t p = 0; p < params.size(); ++p)
    for (Eigen::Index k = 0; k < params[p].value.size(); ++k) entries.emplace_back(p, k);
  std::mt19937_64 rng(seed);
  portable_shuffle(entries, rng);
  entries.resize(std::min(samples, entries.size()));

  GradientCheck out;
  for (const auto& [p, k] : entries) {
    auto& param = params[p];
    double& x = param.value.data()[k];
    const double saved = x;
    x = saved + h;
    const double up = m.forward_loss(batch, {}).loss;
    x = saved - h;
    const double down = m.forward_loss(batch, {}).loss;
    x = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double analytic = param.grad.data()[k];
    const double rel = std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
    ++out.checked;
    if (std::max(std::abs(analytic), std::abs(numeric)) > floor) ++out.above_floor;
    if (rel > tolerance) ++out.failures;
    if (rel > out.max_relative_error) {
      out.max_relative_error = rel;
      char buf[96];
      std::snprintf(buf, sizeof buf, "] analytic %.6e numeric %.6e", analytic, numeric);
      out.worst = param.name + "[" + std::to_string(k) + buf;
    }
  }
  return out;
}

// Random short pairs over ids [3, vocab).
inline std::vector<model::RepairPair> random_pairs(std::mt19937_64& rng, int vocab, std::size_t n, std::size_t max_len) {
  std::vector<model::RepairPair> out;
  for (std::size_t i = 0; i < n; ++i) {
    model::RepairPair p;
    p.id = "r" + std::to_string(i);
    p.source.push_back(0);
    const std::size_t sl = 1 + pick(rng, max_len);
    for (std::size_t k = 0; k < sl; ++k) p.source.push_back(3 + static_cast<int>(pick(rng, vocab - 3)));
    p.source.push_back(2);
    const std::size_t tl = 1 + pick(rng, max_len);
    for (std::size_t k = 0; k < tl; ++k) p.target.push_back(3 + static_cast<int>(pick(rng, vocab - 3)));
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace apr::testing
