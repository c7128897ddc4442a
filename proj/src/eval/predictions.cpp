#include "apr/eval/predictions.hpp"

#include <chrono>

#include "apr/common/errors.hpp"
#include "apr/corpus/corpus.hpp"
#include "apr/tokenizer/vocab.hpp"

namespace apr::eval {

std::vector<PredictionRecord> predict(const model::Seq2SeqModel& model, std::span<const corpus::BugInstance> instances,
                                      const tokenizer::Vocab& vocab, std::size_t beam_size,
                                      const std::string& model_tag) {
  if (beam_size < 1) throw ConfigError("beam size must be at least 1");
  std::vector<PredictionRecord> out;
  out.reserve(instances.size());
  for (const auto& instance : instances) {
    const auto started = std::chrono::steady_clock::now();
    const auto source = tokenizer::encode_code(instance.source_before_fix, vocab, model.max_source_len());
    PredictionRecord record;
    record.instance_id = instance.id;
    record.model_tag = model_tag;
    record.candidates = model::beam_search(model, source.ids, beam_size, model.max_target_len(), vocab);
    const std::chrono::duration<double, std::milli> elapsed = std::chrono::steady_clock::now() - started;
    record.wall_clock_ms = elapsed.count();
    out.push_back(std::move(record));
  }
  return out;
}

std::vector<Json> prediction_lines(std::span<const PredictionRecord> records, bool with_timing) {
  std::vector<Json> lines;
  for (const auto& r : records) {
    for (const auto& c : r.candidates) {
      Json j;
      j["instance_id"] = r.instance_id;
      j["rank"] = c.rank;
      j["text"] = c.text;
      j["score"] = c.score;
      j["log_prob"] = c.log_prob;
      j["model_tag"] = r.model_tag;
      if (with_timing) j["wall_clock_ms"] = r.wall_clock_ms;
      lines.push_back(std::move(j));
    }
  }
  return lines;
}

std::vector<Json> timing_lines(std::span<const PredictionRecord> records) {
  std::vector<Json> lines;
  lines.reserve(records.size());
  for (const auto& r : records) {
    Json j;
    j["instance_id"] = r.instance_id;
    j["wall_clock_ms"] = r.wall_clock_ms;
    lines.push_back(std::move(j));
  }
  return lines;
}

std::vector<PredictionRecord> parse_prediction_lines(const std::vector<Json>& lines, const std::string& origin) {
  std::vector<PredictionRecord> out;
  for (std::size_t n = 0; n < lines.size(); ++n) {
    const auto& j = lines[n];
    const std::string where = origin + ":" + std::to_string(n + 1);
    if (!j.is_object() || !j.contains("instance_id") || !j.contains("rank") || !j.contains("text"))
      throw DataError(where + ": prediction line needs instance_id, rank and text");
    model::Candidate c;
    c.rank = j.at("rank").get<int>();
    c.text = j.at("text").get<std::string>();
    c.score = j.value("score", 0.0);
    c.log_prob = j.value("log_prob", 0.0);
    const auto id = j.at("instance_id").get<std::string>();
    // Rank 1 opens a record; repeated ids are left for scoring to report.
    if (c.rank == 1) {
      PredictionRecord r;
      r.instance_id = id;
      r.model_tag = j.value("model_tag", std::string{});
      r.wall_clock_ms = j.value("wall_clock_ms", 0.0);
      out.push_back(std::move(r));
    } else if (out.empty() || out.back().instance_id != id ||
               c.rank != static_cast<int>(out.back().candidates.size()) + 1) {
      throw DataError(where + ": candidates of " + id + " are not contiguous in rank order");
    }
    out.back().candidates.push_back(std::move(c));
  }
  return out;
}

std::vector<PredictionRecord> read_predictions(const std::filesystem::path& path) {
  return parse_prediction_lines(read_json_lines(path), path.string());
}

}  // namespace apr::eval
