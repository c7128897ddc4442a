#include "apr/train/trainer.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "apr/common/errors.hpp"
#include "apr/common/random.hpp"
#include "apr/common/tensor_archive.hpp"
#include "apr/corpus/corpus.hpp"
#include "apr/model/beam_search.hpp"
#include "apr/model/checkpoint.hpp"
#include "apr/nn/adam.hpp"
#include "apr/tokenizer/vocab.hpp"

namespace apr::train {
namespace fs = std::filesystem;

namespace {

constexpr const char* kBestName = "best.ckpt";
constexpr const char* kLastName = "last.ckpt";
constexpr const char* kStateName = "trainer_state.bin";

std::string rng_state(const std::mt19937_64& rng) {
  std::ostringstream out;
  out << rng;
  return out.str();
}

void set_rng_state(std::mt19937_64& rng, const std::string& state) {
  std::istringstream in(state);
  in >> rng;
  if (!in) throw DataError("trainer state: corrupt random generator state");
}

Json step_json(const StepRecord& s) {
  Json j;
  j["type"] = "step";
  j["step"] = s.step;
  j["loss"] = s.loss;
  j["grad_norm"] = s.grad_norm;
  return j;
}

Json validation_json(const ValidationRecord& v) {
  Json j;
  j["type"] = "validation";
  j["step"] = v.step;
  j["loss"] = v.loss;
  j["exact_match"] = v.exact_match;
  j["improved"] = v.improved;
  return j;
}

// Walks a seeded permutation of the training set, reshuffling at each epoch boundary.
struct BatchCursor {
  std::mt19937_64 rng;
  std::vector<std::size_t> order;
  std::size_t position = 0;
  long long epoch = 0;

  BatchCursor(std::size_t n, std::uint64_t seed) : rng(seed), order(n) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    portable_shuffle(order, rng);
  }

  std::vector<std::size_t> next(std::size_t batch) {
    std::vector<std::size_t> out;
    out.reserve(batch);
    while (out.size() < batch) {
      if (position == order.size()) {
        portable_shuffle(order, rng);
        position = 0;
        ++epoch;
      }
      out.push_back(order[position++]);
    }
    return out;
  }
};

struct LoopState {
  long long step = 0;
  int bad_validations = 0;
  TrainLog log;
};

void save_state(const fs::path& path, const LoopState& s, const BatchCursor& cursor, const std::mt19937_64& dropout_rng,
                const nn::Adam& adam) {
  TensorArchive archive;
  adam.export_state(archive);
  archive.meta["format"] = "apr-trainer-state";
  archive.meta["step"] = s.step;
  archive.meta["bad_validations"] = s.bad_validations;
  archive.meta["cursor_rng"] = rng_state(cursor.rng);
  archive.meta["cursor_order"] = cursor.order;
  archive.meta["cursor_position"] = cursor.position;
  archive.meta["cursor_epoch"] = cursor.epoch;
  archive.meta["dropout_rng"] = rng_state(dropout_rng);
  archive.meta["log"] = s.log.records();
  archive.meta["timing"] = s.log.timing_records();
  archive.save(path);
}

void load_state(const fs::path& path, LoopState& s, BatchCursor& cursor, std::mt19937_64& dropout_rng, nn::Adam& adam) {
  const auto archive = TensorArchive::load(path);
  const auto& meta = archive.meta;
  if (meta.value("format", std::string{}) != "apr-trainer-state")
    throw DataError(path.string() + ": not a trainer state file");
  adam.import_state(archive);
  s.step = meta.at("step").get<long long>();
  s.bad_validations = meta.at("bad_validations").get<int>();
  set_rng_state(cursor.rng, meta.at("cursor_rng").get<std::string>());
  auto order = meta.at("cursor_order").get<std::vector<std::size_t>>();
  if (order.size() != cursor.order.size()) throw DataError(path.string() + ": training set size changed since the run began");
  cursor.order = std::move(order);
  cursor.position = meta.at("cursor_position").get<std::size_t>();
  cursor.epoch = meta.at("cursor_epoch").get<long long>();
  set_rng_state(dropout_rng, meta.at("dropout_rng").get<std::string>());
  s.log = TrainLog::from_records(meta.at("log").get<std::vector<Json>>());
  for (const auto& t : meta.at("timing"))
    s.log.timings.push_back({t.at("phase").get<std::string>(), t.at("bundle").get<std::string>(),
                             t.at("seconds").get<double>()});
}

void write_diagnostic(const fs::path& out_dir, long long step, double loss, const std::vector<std::size_t>& batch,
                      std::span<const model::RepairPair> train, const model::Seq2SeqModel& model) {
  Json d;
  d["step"] = step;
  d["loss"] = std::isfinite(loss) ? Json(loss) : Json(std::to_string(loss));
  Json ids = Json::array();
  for (auto i : batch) ids.push_back(train[i].id);
  d["batch_ids"] = ids;
  Json norms = Json::object();
  const auto& params = model.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double n = params[i].value.norm();
    norms[params[i].name] = std::isfinite(n) ? Json(n) : Json(std::to_string(n));
  }
  d["parameter_norms"] = norms;
  write_json(out_dir / "diagnostic.json", d);
}

void write_logs(const fs::path& out_dir, const TrainLog& log) {
  write_json_lines(out_dir / "train_log.jsonl", log.records());
  write_json_lines(out_dir / "timing.jsonl", log.timing_records());
}

}  // namespace

void TrainConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("train config: " + msg); };
  if (!(learning_rate > 0.0)) fail("learning_rate must be positive");
  if (batch_size < 1) fail("batch_size must be positive");
  if (max_steps < 1) fail("max_steps must be positive");
  if (validation_every < 1) fail("validation_every must be positive");
  if (validation_every > max_steps) fail("validation_every must not exceed max_steps");
  if (early_stop_patience < 1) fail("early_stop_patience must be positive");
  if (exact_match_sample < 1) fail("exact_match_sample must be positive");
  if (device != "cpu") fail("unsupported device '" + device + "' (only cpu is available)");
}

Json TrainConfig::to_json() const {
  Json j;
  j["learning_rate"] = learning_rate;
  j["batch_size"] = batch_size;
  j["max_steps"] = max_steps;
  j["validation_every"] = validation_every;
  j["early_stop_patience"] = early_stop_patience;
  j["seed"] = seed;
  j["device"] = device;
  j["exact_match_sample"] = exact_match_sample;
  j["dropout"] = dropout;
  j["clip_norm"] = clip_norm;
  j["stop_on_perfect_sample"] = stop_on_perfect_sample;
  return j;
}

TrainConfig TrainConfig::from_json(const Json& j) {
  TrainConfig c;
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.max_steps = j.value("max_steps", c.max_steps);
  c.validation_every = j.value("validation_every", c.validation_every);
  c.early_stop_patience = j.value("early_stop_patience", c.early_stop_patience);
  c.seed = j.value("seed", c.seed);
  c.device = j.value("device", c.device);
  c.exact_match_sample = j.value("exact_match_sample", c.exact_match_sample);
  c.dropout = j.value("dropout", c.dropout);
  c.clip_norm = j.value("clip_norm", c.clip_norm);
  c.stop_on_perfect_sample = j.value("stop_on_perfect_sample", c.stop_on_perfect_sample);
  return c;
}

double validate(model::Seq2SeqModel& model, std::span<const model::RepairPair> split, Metric metric,
                std::size_t sample) {
  if (split.empty()) throw RuntimeFailure("validate: empty split");
  if (metric == Metric::Loss) {
    double weighted = 0.0;
    std::size_t tokens = 0;
    for (const auto& pair : split) {
      const auto stats = model.forward_loss(std::span(&pair, 1), {});
      weighted += stats.loss * static_cast<double>(stats.tokens);
      tokens += stats.tokens;
    }
    return weighted / static_cast<double>(tokens);
  }
  const std::size_t n = std::min(sample, split.size());
  std::size_t matched = 0;
  for (std::size_t i = 0; i < n; ++i) {
    auto ids = model::greedy_decode(model, split[i].source, model.max_target_len());
    if (!ids.empty() && ids.back() == model.eos_id()) ids.pop_back();
    if (ids == split[i].target) ++matched;
  }
  return static_cast<double>(matched) / static_cast<double>(n);
}

std::string to_string(Phase p) { return p == Phase::Training ? "training" : "inference"; }

std::vector<Json> TrainLog::records() const {
  std::vector<Json> out;
  out.reserve(steps.size() + validations.size() + 1);
  std::size_t v = 0;
  for (const auto& s : steps) {
    out.push_back(step_json(s));
    while (v < validations.size() && validations[v].step == s.step) out.push_back(validation_json(validations[v++]));
  }
  while (v < validations.size()) out.push_back(validation_json(validations[v++]));
  out.push_back(summary());
  return out;
}

std::vector<Json> TrainLog::timing_records() const {
  std::vector<Json> out;
  for (const auto& t : timings) {
    Json j;
    j["phase"] = t.phase;
    j["bundle"] = t.bundle;
    j["seconds"] = t.seconds;
    out.push_back(j);
  }
  return out;
}

Json TrainLog::summary() const {
  Json j;
  j["type"] = "summary";
  j["best_step"] = best_step;
  j["best_loss"] = std::isfinite(best_loss) ? Json(best_loss) : Json(nullptr);
  j["best_checkpoint"] = best_checkpoint;
  j["stop_reason"] = stop_reason;
  j["steps"] = steps.size();
  j["validations"] = validations.size();
  return j;
}

TrainLog TrainLog::from_records(const std::vector<Json>& records) {
  TrainLog log;
  for (const auto& r : records) {
    const auto type = r.at("type").get<std::string>();
    if (type == "step") {
      log.steps.push_back({r.at("step").get<long long>(), r.at("loss").get<double>(), r.at("grad_norm").get<double>()});
    } else if (type == "validation") {
      log.validations.push_back({r.at("step").get<long long>(), r.at("loss").get<double>(),
                                 r.at("exact_match").get<double>(), r.at("improved").get<bool>()});
    } else if (type == "summary") {
      log.best_step = r.at("best_step").get<long long>();
      if (!r.at("best_loss").is_null()) log.best_loss = r.at("best_loss").get<double>();
      log.best_checkpoint = r.at("best_checkpoint").get<std::string>();
      log.stop_reason = r.at("stop_reason").get<std::string>();
    } else {
      throw DataError("train log: unknown record type '" + type + "'");
    }
  }
  return log;
}

const TimingRecord& record_timing(TrainLog& log, Phase phase, const std::string& bundle, double seconds) {
  log.timings.push_back({to_string(phase), bundle, std::max(0.0, seconds)});
  return log.timings.back();
}

FitResult fit(model::Seq2SeqModel& model, std::span<const model::RepairPair> train,
              std::span<const model::RepairPair> valid, const TrainConfig& config, const FitOptions& options) {
  config.validate();
  if (train.empty()) throw DataError("fit: training split is empty");
  if (valid.empty()) throw DataError("fit: validation split is empty");
  if (options.out_dir.empty()) throw ConfigError("fit: no output directory");
  std::error_code ec;
  fs::create_directories(options.out_dir, ec);
  if (ec) throw RuntimeFailure("cannot create " + options.out_dir.string() + ": " + ec.message());

  nn::Adam adam(model.parameters(), {config.learning_rate, 0.9, 0.999, 1e-8, config.clip_norm});
  BatchCursor cursor(train.size(), config.seed);
  std::mt19937_64 dropout_rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  LoopState s;

  const fs::path best_path = options.out_dir / kBestName;
  const fs::path last_path = options.out_dir / kLastName;
  const fs::path state_path = options.out_dir / kStateName;
  if (options.resume && fs::exists(state_path) && fs::exists(last_path)) {
    model::load_weights(model, last_path);
    load_state(state_path, s, cursor, dropout_rng, adam);
    if (!s.log.stop_reason.empty()) {
      // The earlier run finished; nothing left to do.
      if (fs::exists(best_path)) model::load_weights(model, best_path);
      return {s.log, s.log.best_checkpoint.empty() ? fs::path{} : options.out_dir / s.log.best_checkpoint, true};
    }
  }

  const auto started = std::chrono::steady_clock::now();
  const std::size_t batch_size = static_cast<std::size_t>(config.batch_size);
  std::vector<model::RepairPair> batch;
  bool interrupted = false;

  while (s.step < config.max_steps) {
    const auto indices = cursor.next(batch_size);
    batch.clear();
    for (auto i : indices) batch.push_back(train[i]);
    const auto stats = model.forward_loss(batch, {true, config.dropout ? &dropout_rng : nullptr});
    if (!std::isfinite(stats.loss)) {
      write_diagnostic(options.out_dir, s.step + 1, stats.loss, indices, train, model);
      throw RuntimeFailure("non-finite training loss at step " + std::to_string(s.step + 1) + "; see " +
                           (options.out_dir / "diagnostic.json").string());
    }
    const double grad_norm = adam.step();
    ++s.step;
    s.log.steps.push_back({s.step, stats.loss, grad_norm});

    if (s.step % config.validation_every == 0 || s.step == config.max_steps) {
      ValidationRecord v;
      v.step = s.step;
      v.loss = options.metric_override ? options.metric_override(s.step) : validate(model, valid, Metric::Loss);
      v.exact_match = validate(model, valid, Metric::ExactMatchSample, config.exact_match_sample);
      v.improved = v.loss < s.log.best_loss;
      if (v.improved) {
        s.log.best_loss = v.loss;
        s.log.best_step = s.step;
        s.log.best_checkpoint = kBestName;
        s.bad_validations = 0;
        model::save_checkpoint(model, options.vocab_hash, best_path);
      } else {
        ++s.bad_validations;
      }
      s.log.validations.push_back(v);
      if (s.bad_validations >= config.early_stop_patience)
        s.log.stop_reason = "early_stop";
      else if (config.stop_on_perfect_sample && v.exact_match >= 1.0)
        s.log.stop_reason = "perfect_sample";
      else if (s.step == config.max_steps)
        s.log.stop_reason = "max_steps";
      model::save_checkpoint(model, options.vocab_hash, last_path);
      save_state(state_path, s, cursor, dropout_rng, adam);
      if (!s.log.stop_reason.empty()) break;
    }
    if (options.stop_after > 0 && s.step >= options.stop_after) {
      interrupted = true;
      break;
    }
  }

  const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - started;
  record_timing(s.log, Phase::Training, options.bundle_name, elapsed.count());
  write_logs(options.out_dir, s.log);

  FitResult result;
  result.completed = !interrupted;
  if (!s.log.best_checkpoint.empty()) {
    result.best_checkpoint = best_path;
    if (result.completed) model::load_weights(model, best_path);
  }
  result.log = std::move(s.log);
  return result;
}

std::vector<model::RepairPair> make_pairs(std::span<const corpus::BugInstance> instances,
                                          const tokenizer::Vocab& vocab, const model::Seq2SeqModel& model) {
  std::vector<model::RepairPair> pairs;
  pairs.reserve(instances.size());
  for (const auto& b : instances)
    pairs.push_back(model::make_repair_pair(b, vocab, model.max_source_len(), model.max_target_len()));
  return pairs;
}

FitResult fit(model::Seq2SeqModel& model, const corpus::DatasetBundle& bundle, const tokenizer::Vocab& vocab,
              const TrainConfig& config, FitOptions options) {
  if (options.vocab_hash.empty()) options.vocab_hash = vocab.hash();
  if (options.bundle_name == "unnamed") options.bundle_name = bundle.name.str();
  const auto train = make_pairs(bundle.train, vocab, model);
  const auto valid = make_pairs(bundle.valid, vocab, model);
  return fit(model, train, valid, config, options);
}

}  // namespace apr::train
