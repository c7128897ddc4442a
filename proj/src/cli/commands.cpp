#include "apr/cli/commands.hpp"

#include <functional>
#include <iostream>

#include "apr/baseline/experiment.hpp"
#include "apr/common/checksum.hpp"
#include "apr/common/errors.hpp"
#include "apr/common/text.hpp"
#include "apr/corpus/corpus.hpp"
#include "apr/eval/report.hpp"
#include "apr/model/checkpoint.hpp"
#include "apr/tokenizer/vocab.hpp"

namespace apr::cli {
namespace fs = std::filesystem;

namespace {

void ensure_dir(const fs::path& dir) {
  if (dir.empty()) throw ConfigError("no output directory given");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw RuntimeFailure("cannot create directory " + dir.string() + ": " + ec.message());
}

std::string approach_for(const std::string& kind) {
  return kind == "baseline" ? baseline::kApproachTag : "transformer";
}

tokenizer::Vocab toy_vocab_for(const corpus::DatasetBundle& bundle, std::size_t merges) {
  std::vector<std::string> lines;
  lines.reserve(bundle.train.size() * 2);
  for (const auto& b : bundle.train) {
    lines.push_back(text::normalize_whitespace(b.source_before_fix));
    lines.push_back(text::normalize_whitespace(b.source_after_fix));
  }
  return tokenizer::train_toy_vocab(lines, merges);
}

const std::vector<corpus::BugInstance>& pick_split(const corpus::DatasetBundle& bundle, const std::string& split) {
  if (split == "train") return bundle.train;
  if (split == "valid") return bundle.valid;
  if (split == "test") return bundle.test;
  throw ConfigError("unknown split '" + split + "' (expected train|valid|test)");
}

}  // namespace

void cmd_prepare(const PrepareArgs& args, std::ostream& out) {
  const auto variant = corpus::parse_variant(args.variant);
  const auto size = corpus::parse_size(args.size);
  ensure_dir(args.out_dir);
  const auto raw = corpus::load_raw(args.raw_path, size);
  auto prepared = corpus::prepare(raw, variant, args.seed);

  const auto vocab = args.vocab_dir.empty() ? tokenizer::Vocab::byte_level() : tokenizer::load_vocab(args.vocab_dir);
  prepared.bundle.stats = corpus::compute_stats(prepared.bundle, vocab);
  corpus::export_bundle(prepared.bundle, args.out_dir);

  std::vector<Json> rejects;
  for (const auto& r : prepared.rejects) {
    Json j;
    j["ordinal"] = r.ordinal;
    j["reason"] = r.reason;
    j["raw"] = r.raw;
    rejects.push_back(std::move(j));
  }
  write_json_lines(args.out_dir / "rejects.jsonl", rejects);

  std::string table = corpus::render_stats_table(prepared.bundle);
  table += "Token lengths counted with " +
           std::string(args.vocab_dir.empty() ? "the byte-level fallback vocabulary" : "vocabulary " + vocab.hash().substr(0, 12)) +
           ".\n";
  write_file(args.out_dir / "stats.md", table);
  out << table;
}

void cmd_train(const TrainArgs& args, std::ostream& out) {
  const auto& cfg = args.config;
  cfg.validate(true);
  if (cfg.dataset.bundle_dir.empty()) throw ConfigError("dataset.bundle_dir is required for training");
  ensure_dir(cfg.out_dir);
  const auto bundle = corpus::load_bundle(cfg.dataset.bundle_dir);

  const auto vocab =
      cfg.tokenizer.vocab_dir.empty() ? toy_vocab_for(bundle, cfg.tokenizer.toy_merges) : tokenizer::load_vocab(cfg.tokenizer.vocab_dir);
  vocab.save(cfg.out_dir / "vocab");
  write_file(cfg.out_dir / "config.ini", cfg.to_ini());

  std::unique_ptr<model::Seq2SeqModel> model;
  const int vocab_size = static_cast<int>(vocab.size());
  if (cfg.model_kind == "transformer") {
    auto mc = cfg.transformer;
    mc.vocab_size = vocab_size;
    auto m = model::build(mc);
    m->set_special_ids(vocab.specials().cls, vocab.specials().eos);
    out << model::parameter_report(m->parameters());
    model = std::move(m);
  } else {
    auto bc = cfg.baseline;
    bc.vocab_size = vocab_size;
    auto m = baseline::build_baseline(bc);
    m->set_special_ids(vocab.specials().cls, vocab.specials().eos);
    model = std::move(m);
  }

  train::FitOptions options;
  options.out_dir = cfg.out_dir;
  options.vocab_hash = vocab.hash();
  options.bundle_name = bundle.name.str();
  options.resume = args.resume;
  options.stop_after = args.stop_after;
  const auto result = train::fit(*model, bundle, vocab, cfg.train, options);

  const auto& log = result.log;
  out << "steps: " << log.steps.size() << ", validations: " << log.validations.size() << "\n";
  if (!result.completed) {
    out << "interrupted after step " << (log.steps.empty() ? 0 : log.steps.back().step) << "; rerun with --resume\n";
  } else {
    out << "stopped: " << log.stop_reason << "\n";
  }
  if (log.best_step >= 0)
    out << "best checkpoint: " << result.best_checkpoint.string() << " (step " << log.best_step
        << ", validation loss " << log.best_loss << ")\n";
}

void cmd_predict(const PredictArgs& args, std::ostream& out) {
  if (args.beam_size < 1) throw ConfigError("beam size must be at least 1");
  model::CheckpointInfo info;
  const auto model = model::load_checkpoint(args.checkpoint, &info);
  const fs::path vocab_dir = args.vocab_dir.empty() ? args.checkpoint.parent_path() / "vocab" : args.vocab_dir;
  const auto vocab = tokenizer::load_vocab(vocab_dir);
  if (vocab.hash() != info.vocab_hash)
    throw DataError("vocabulary " + vocab_dir.string() + " (hash " + vocab.hash().substr(0, 12) +
                    ") does not match the checkpoint (hash " + info.vocab_hash.substr(0, 12) + ")");
  const auto bundle = corpus::load_bundle(args.bundle_dir);
  const auto& split = pick_split(bundle, args.split);
  ensure_dir(args.out_dir);

  const auto tag = approach_for(info.kind);
  const auto records = eval::predict(*model, split, vocab, args.beam_size, tag);
  write_json_lines(args.out_dir / "predictions.jsonl", eval::prediction_lines(records, !args.deterministic));
  write_json_lines(args.out_dir / "predictions.timing.jsonl", eval::timing_lines(records));

  Json meta;
  meta["checkpoint"] = fs::absolute(args.checkpoint).lexically_normal().string();
  meta["checkpoint_sha256"] = sha256_file(args.checkpoint);
  meta["model_kind"] = info.kind;
  meta["model_config"] = info.config;
  meta["model_tag"] = tag;
  meta["vocab_dir"] = fs::absolute(vocab_dir).lexically_normal().string();
  meta["vocab_hash"] = info.vocab_hash;
  meta["dataset"] = bundle.name.str();
  meta["split"] = args.split;
  meta["split_checksum"] = eval::split_checksum(split);
  meta["beam_size"] = args.beam_size;
  meta["deterministic"] = args.deterministic;
  write_json(args.out_dir / "predict_meta.json", meta);

  double total_ms = 0.0;
  for (const auto& r : records) total_ms += r.wall_clock_ms;
  out << records.size() << " instances, beam " << args.beam_size << ", "
      << (records.empty() ? 0.0 : total_ms / static_cast<double>(records.size())) << " ms per instance\n";
}

void cmd_evaluate(const EvaluateArgs& args, std::ostream& out) {
  const auto predictions = eval::read_predictions(args.predictions);
  const fs::path pred_dir = args.predictions.parent_path();
  const fs::path meta_path = pred_dir / "predict_meta.json";
  const Json meta = fs::exists(meta_path) ? read_json(meta_path) : Json::object();

  fs::path vocab_dir = args.vocab_dir;
  if (vocab_dir.empty()) {
    if (!meta.contains("vocab_dir")) throw ConfigError("no vocabulary given and none recorded beside the predictions");
    vocab_dir = meta.at("vocab_dir").get<std::string>();
  }
  const auto vocab = tokenizer::load_vocab(vocab_dir);
  const auto bundle = corpus::load_bundle(args.bundle_dir);

  std::string approach = meta.value("model_tag", std::string{});
  if (approach.empty() && !predictions.empty()) approach = predictions.front().model_tag;
  auto report = eval::score(predictions, bundle.test, bundle.train, vocab, {bundle.name.str(), approach});
  Json provenance;
  provenance["predictions_sha256"] = sha256_file(args.predictions);
  // Paths differ between otherwise identical runs; only content identities are kept.
  Json predict_meta = meta;
  predict_meta.erase("checkpoint");
  predict_meta.erase("vocab_dir");
  provenance["predict"] = predict_meta;
  report.config = provenance;

  ensure_dir(args.out_dir);
  write_json(args.out_dir / "report.json", report.to_json());
  write_file(args.out_dir / "report.md", eval::render_report(report));

  eval::TimingSummary timing;
  timing.dataset = report.dataset;
  timing.approach = report.approach;
  timing.instances = predictions.size();
  const fs::path timing_path = pred_dir / "predictions.timing.jsonl";
  if (fs::exists(timing_path)) {
    for (const auto& row : read_json_lines(timing_path)) timing.inference_ms += row.value("wall_clock_ms", 0.0);
  } else {
    for (const auto& p : predictions) timing.inference_ms += p.wall_clock_ms;
  }
  if (!args.training_log.empty())
    for (const auto& row : read_json_lines(args.training_log))
      if (row.value("phase", std::string{}) == "training") timing.training_seconds += row.value("seconds", 0.0);
  write_json(args.out_dir / "timing.json", timing.to_json());

  out << text::ratio_cell(report.matched, report.total) << " exact match on " << report.dataset << " ("
      << report.approach << "), " << report.novel_fixes.size() << " novel fixes\n";
}

void cmd_report(const ReportArgs& args, std::ostream& out) {
  if (args.run_dirs.empty()) throw ConfigError("report needs at least one evaluated run directory");
  std::vector<eval::EvaluationReport> reports;
  std::vector<eval::TimingSummary> timings;
  for (const auto& dir : args.run_dirs) {
    const auto path = dir / "report.json";
    if (!fs::exists(path)) throw DataError("no report.json in " + dir.string());
    reports.push_back(eval::EvaluationReport::from_json(read_json(path)));
    if (fs::exists(dir / "timing.json")) timings.push_back(eval::TimingSummary::from_json(read_json(dir / "timing.json")));
  }
  const auto doc = eval::compare_runs(reports, timings);
  if (!args.out_file.empty()) {
    if (args.out_file.has_parent_path()) ensure_dir(args.out_file.parent_path());
    write_file(args.out_file, doc);
  }
  out << doc;
}

int run_guarded(const std::function<void()>& body, std::ostream& err) {
  try {
    body();
    return kOk;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigFailure;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kDataFailure;
  } catch (const RuntimeFailure& e) {
    err << "runtime error: " << e.what() << (e.retryable() ? " (retryable)" : "") << "\n";
    return kRuntimeFailure;
  } catch (const Json::exception& e) {
    err << "data error: malformed JSON field: " << e.what() << "\n";
    return kDataFailure;
  } catch (const std::exception& e) {
    err << "runtime error: " << e.what() << "\n";
    return kRuntimeFailure;
  }
}

}  // namespace apr::cli
