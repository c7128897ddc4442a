#pragma once

#include <span>
#include <string>
#include <vector>

#include "apr/model/seq2seq.hpp"

namespace apr::tokenizer {
class Vocab;
}

namespace apr::model {

struct Candidate {
  std::vector<int> ids;  // generated tokens, ending in EOS unless cut at max length
  std::string text;      // decoded ids, filled when a vocabulary is supplied
  double score = 0.0;    // log_prob / ids.size()
  double log_prob = 0.0;
  int rank = 0;          // 1-based
};

// Length-normalized beam search. Each step expands every live hypothesis and keeps the
// beam_size best expansions by cumulative log-probability; those ending in EOS are
// finished, the rest stay live. Hypotheses still live after max_len tokens are finished
// as they are. Returns min(beam_size, finished) candidates by descending score (ties:
// lexicographically smaller ids first). Never empty: with max_len == 0 a single empty
// candidate is returned.
std::vector<Candidate> beam_search(const Seq2SeqModel& model, std::span<const int> source, std::size_t beam_size,
                                   std::size_t max_len);
std::vector<Candidate> beam_search(const Seq2SeqModel& model, std::span<const int> source, std::size_t beam_size,
                                   std::size_t max_len, const tokenizer::Vocab& vocab);

// Argmax at every step (lowest id on ties) until EOS or max_len.
std::vector<int> greedy_decode(const Seq2SeqModel& model, std::span<const int> source, std::size_t max_len);

}  // namespace apr::model
