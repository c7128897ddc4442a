#include "apr/model/beam_search.hpp"

#include <algorithm>

#include "apr/tokenizer/vocab.hpp"

namespace apr::model {
namespace {

struct Hypothesis {
  std::vector<int> ids;
  double log_prob = 0.0;
  std::unique_ptr<DecoderState> state;
  nn::Vector next;  // log-probabilities for the following token
};

struct Expansion {
  std::size_t hyp;
  int token;
  double log_prob;
};

Candidate finish(std::vector<int> ids, double log_prob) {
  Candidate c;
  c.score = ids.empty() ? 0.0 : log_prob / static_cast<double>(ids.size());
  c.log_prob = log_prob;
  c.ids = std::move(ids);
  return c;
}

}  // namespace

std::vector<Candidate> beam_search(const Seq2SeqModel& model, std::span<const int> source, std::size_t beam_size,
                                   std::size_t max_len) {
  beam_size = std::max<std::size_t>(beam_size, 1);
  std::vector<Candidate> finished;
  if (max_len == 0) {
    finished.push_back(finish({}, 0.0));
    finished.front().rank = 1;
    return finished;
  }

  std::vector<Hypothesis> live;
  {
    Hypothesis root;
    root.state = model.begin(source);
    root.next = model.step(*root.state, model.bos_id());
    live.push_back(std::move(root));
  }
  const int eos = model.eos_id();

  for (std::size_t t = 0; t < max_len && !live.empty(); ++t) {
    std::vector<Expansion> expansions;
    expansions.reserve(live.size() * static_cast<std::size_t>(model.vocab_size()));
    for (std::size_t h = 0; h < live.size(); ++h)
      for (Eigen::Index tok = 0; tok < live[h].next.size(); ++tok)
        expansions.push_back({h, static_cast<int>(tok), live[h].log_prob + live[h].next(tok)});

    const std::size_t keep = std::min(beam_size, expansions.size());
    std::partial_sort(expansions.begin(), expansions.begin() + static_cast<std::ptrdiff_t>(keep), expansions.end(),
                      [](const Expansion& a, const Expansion& b) {
                        if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
                        if (a.hyp != b.hyp) return a.hyp < b.hyp;
                        return a.token < b.token;
                      });

    std::vector<Hypothesis> next_live;
    const bool last_step = t + 1 == max_len;
    for (std::size_t i = 0; i < keep; ++i) {
      const auto& e = expansions[i];
      std::vector<int> ids = live[e.hyp].ids;
      ids.push_back(e.token);
      if (e.token == eos || last_step) {
        finished.push_back(finish(std::move(ids), e.log_prob));
        continue;
      }
      Hypothesis h;
      h.ids = std::move(ids);
      h.log_prob = e.log_prob;
      h.state = live[e.hyp].state->clone();
      h.next = model.step(*h.state, e.token);
      next_live.push_back(std::move(h));
    }
    live = std::move(next_live);
  }

  std::sort(finished.begin(), finished.end(), [](const Candidate& a, const Candidate& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.ids < b.ids;
  });
  if (finished.size() > beam_size) finished.resize(beam_size);
  for (std::size_t i = 0; i < finished.size(); ++i) finished[i].rank = static_cast<int>(i) + 1;
  return finished;
}

std::vector<Candidate> beam_search(const Seq2SeqModel& model, std::span<const int> source, std::size_t beam_size,
                                   std::size_t max_len, const tokenizer::Vocab& vocab) {
  auto candidates = beam_search(model, source, beam_size, max_len);
  for (auto& c : candidates) c.text = vocab.decode(c.ids);
  return candidates;
}

std::vector<int> greedy_decode(const Seq2SeqModel& model, std::span<const int> source, std::size_t max_len) {
  std::vector<int> ids;
  if (max_len == 0) return ids;
  auto state = model.begin(source);
  nn::Vector next = model.step(*state, model.bos_id());
  while (ids.size() < max_len) {
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < next.size(); ++i)
      if (next(i) > next(best)) best = i;
    ids.push_back(static_cast<int>(best));
    if (best == model.eos_id() || ids.size() == max_len) break;
    next = model.step(*state, static_cast<int>(best));
  }
  return ids;
}

}  // namespace apr::model
