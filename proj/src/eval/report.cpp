#include "apr/eval/report.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "apr/common/errors.hpp"
#include "apr/common/text.hpp"

namespace apr::eval {
namespace {

// Up to two decimals, trailing zeros dropped.
std::string trim_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  std::string s = buf;
  while (!s.empty() && s.back() == '0') s.pop_back();
  if (!s.empty() && s.back() == '.') s.pop_back();
  return s;
}

std::string row(std::initializer_list<std::string> cells) {
  std::string out = "|";
  for (const auto& c : cells) out += " " + c + " |";
  return out + "\n";
}

}  // namespace

Json TimingSummary::to_json() const {
  Json j;
  j["dataset"] = dataset;
  j["approach"] = approach;
  j["training_seconds"] = training_seconds;
  j["inference_ms"] = inference_ms;
  j["instances"] = instances;
  j["per_instance_ms"] = per_instance_ms();
  return j;
}

TimingSummary TimingSummary::from_json(const Json& j) {
  TimingSummary t;
  t.dataset = j.value("dataset", std::string{});
  t.approach = j.value("approach", std::string{});
  t.training_seconds = j.value("training_seconds", 0.0);
  t.inference_ms = j.value("inference_ms", 0.0);
  t.instances = j.value("instances", std::size_t{0});
  return t;
}

std::string format_duration(double seconds) {
  if (!(seconds > 0.0)) return "0 Seconds";
  if (seconds >= 3600.0) return trim_number(seconds / 3600.0) + " Hours";
  if (seconds >= 60.0) return trim_number(seconds / 60.0) + " Minutes";
  return trim_number(seconds) + " Seconds";
}

std::string render_accuracy_table(std::span<const EvaluationReport> reports) {
  std::string out = row({"Approach", "Dataset", "Accuracy"}) + row({"---", "---", "---"});
  for (const auto& r : reports) out += row({r.approach, r.dataset, text::ratio_cell(r.matched, r.total)});
  return out;
}

std::string render_timing_table(std::span<const TimingSummary> rows) {
  std::string out = row({"Dataset", "Approach", "Training Time", "Inference Time", "Per Bug"}) +
                    row({"---", "---", "---", "---", "---"});
  for (const auto& t : rows)
    out += row({t.dataset, t.approach, format_duration(t.training_seconds), format_duration(t.inference_ms / 1000.0),
                trim_number(t.per_instance_ms()) + " ms"});
  return out;
}

std::string render_top_bug_types(std::span<const EvaluationReport> reports, std::size_t k) {
  std::string out = row({"Dataset", "Bug Type", "Ratio"}) + row({"---", "---", "---"});
  for (const auto& r : reports)
    for (const auto& e : top_k(r.per_bug_type, k))
      out += row({r.dataset, e.key, e.ratio.percent() + "% (" + std::to_string(e.ratio.matched) + " / " +
                                        std::to_string(e.ratio.total) + ")"});
  return out;
}

std::string render_longest_patches(const EvaluationReport& report) {
  std::string out = row({"Project", "FixCommitSHA1", "Length"}) + row({"---", "---", "---"});
  for (const auto& p : report.lengths.longest) out += row({p.project, p.commit_prefix, std::to_string(p.length)});
  return out;
}

std::string render_length_buckets(const EvaluationReport& report) {
  std::string out = row({"Token Length", "Matched", "Rate"}) + row({"---", "---", "---"});
  for (const auto& b : report.lengths.buckets)
    out += row({b.label, std::to_string(b.ratio.matched) + " / " + std::to_string(b.ratio.total),
                b.ratio.percent() + "%"});
  return out;
}

std::string render_report(const EvaluationReport& report) {
  std::ostringstream out;
  out << "# " << report.approach << " on " << report.dataset << "\n\n";
  out << "Test split sha256: `" << report.split_checksum << "`\n\n";
  out << "## Accuracy\n\n" << render_accuracy_table(std::span(&report, 1)) << "\n";
  out << "## Top bug types\n\n" << render_top_bug_types(std::span(&report, 1)) << "\n";
  out << "## Zero-shot projects\n\n";
  if (report.per_project.zero_shot.empty()) {
    out << "Every test project appears in the training split.\n\n";
  } else {
    out << row({"Project", "Matched", "Ratio"}) << row({"---", "---", "---"});
    for (const auto& z : report.per_project.zero_shot)
      out << row({z.key, std::to_string(z.ratio.matched) + " / " + std::to_string(z.ratio.total),
                  z.ratio.percent() + "%"});
    out << "\n";
  }
  out << "## Patch lengths\n\n" << render_length_buckets(report) << "\n" << render_longest_patches(report) << "\n";
  out << "## Novel fixes\n\n";
  out << report.novel_fixes.size() << " matched patches appear nowhere in the training split.\n";
  for (const auto& id : report.novel_fixes) out << "- " << id << "\n";
  return out.str();
}

std::string compare_runs(std::span<const EvaluationReport> reports, std::span<const TimingSummary> timings) {
  if (reports.empty()) throw ConfigError("compare_runs: no reports given");
  std::map<std::string, const EvaluationReport*> first_of;
  for (const auto& r : reports) {
    auto [it, inserted] = first_of.emplace(r.dataset, &r);
    if (!inserted && it->second->split_checksum != r.split_checksum)
      throw DataError("refusing to compare runs on " + r.dataset + ": test splits differ (" +
                      it->second->approach + " used " + it->second->split_checksum.substr(0, 12) + ", " + r.approach +
                      " used " + r.split_checksum.substr(0, 12) + ")");
  }
  std::ostringstream out;
  out << "# Run comparison\n\n";
  out << "## Accuracy\n\n" << render_accuracy_table(reports) << "\n";
  if (!timings.empty()) out << "## Execution time\n\n" << render_timing_table(timings) << "\n";
  out << "## Top-3 bug types\n\n" << render_top_bug_types(reports) << "\n";
  out << "## Longest matched patches\n\n";
  for (const auto& r : reports) out << "### " << r.approach << " on " << r.dataset << "\n\n" << render_longest_patches(r) << "\n";
  return out.str();
}

}  // namespace apr::eval
