#pragma once

#include <span>
#include <string>
#include <vector>

#include "apr/common/json_lines.hpp"
#include "apr/eval/metrics.hpp"

namespace apr::eval {

// Wall-clock cost of one run, kept apart from the deterministic report.
struct TimingSummary {
  std::string dataset;
  std::string approach;
  double training_seconds = 0.0;
  double inference_ms = 0.0;  // summed over instances
  std::size_t instances = 0;

  double per_instance_ms() const { return instances == 0 ? 0.0 : inference_ms / static_cast<double>(instances); }
  Json to_json() const;
  static TimingSummary from_json(const Json& j);
};

// "9 Hours", "1.6 Minutes", "0.25 Seconds".
std::string format_duration(double seconds);

// Markdown tables.
// Approach | Dataset | Accuracy, one row per report.
std::string render_accuracy_table(std::span<const EvaluationReport> reports);
// Dataset | Training Time | Inference Time.
std::string render_timing_table(std::span<const TimingSummary> rows);
// Dataset | Bug Type | Ratio, top k per report.
std::string render_top_bug_types(std::span<const EvaluationReport> reports, std::size_t k = 3);
// Project | FixCommitSHA1 | Length.
std::string render_longest_patches(const EvaluationReport& report);
// Bucket | Matched | Rate.
std::string render_length_buckets(const EvaluationReport& report);

// Single-run document: accuracy, top bug types, zero-shot projects, lengths, novel fixes.
std::string render_report(const EvaluationReport& report);

// Side-by-side document over several runs. Reports on the same dataset must share a
// test-split checksum, otherwise DataError. An empty list is a ConfigError.
std::string compare_runs(std::span<const EvaluationReport> reports, std::span<const TimingSummary> timings = {});

}  // namespace apr::eval
