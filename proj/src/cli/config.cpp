#include "apr/cli/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <functional>
#include <set>
#include <sstream>

#include "apr/common/checksum.hpp"
#include "apr/common/errors.hpp"
#include "apr/corpus/corpus.hpp"

namespace apr::cli {
namespace fs = std::filesystem;
namespace pt = boost::property_tree;

namespace {

std::string format(const std::string& v) { return v; }
std::string format(const fs::path& v) { return v.string(); }
std::string format(bool v) { return v ? "true" : "false"; }
std::string format(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}
template <typename I>
  requires std::is_integral_v<I>
std::string format(I v) {
  return std::to_string(v);
}

template <typename T>
T parse(const std::string& s, const std::string& where) {
  if constexpr (std::is_same_v<T, std::string>) {
    return s;
  } else if constexpr (std::is_same_v<T, fs::path>) {
    return fs::path(s);
  } else if constexpr (std::is_same_v<T, bool>) {
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw ConfigError(where + ": expected a boolean, got '" + s + "'");
  } else {
    T v{};
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc{} || r.ptr != s.data() + s.size())
      throw ConfigError(where + ": cannot parse '" + s + "' as a number");
    return v;
  }
}

struct Field {
  std::string section;
  std::string key;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const std::string&)> set;

  std::string name() const { return section + "." + key; }
};

template <typename T, typename Access>
Field field(const char* section, const char* key, Access access) {
  Field f{section, key, {}, {}};
  const std::string where = f.name();
  f.get = [access](const ExperimentConfig& c) { return format(access(const_cast<ExperimentConfig&>(c))); };
  f.set = [access, where](ExperimentConfig& c, const std::string& v) { access(c) = parse<T>(v, where); };
  return f;
}

#define APR_FIELD(section, key, type, member) \
  field<type>(section, key, [](ExperimentConfig& c) -> type& { return c.member; })

const std::vector<Field>& fields() {
  static const std::vector<Field> all = {
      APR_FIELD("dataset", "variant", std::string, dataset.variant),
      APR_FIELD("dataset", "size", std::string, dataset.size),
      APR_FIELD("dataset", "raw_path", fs::path, dataset.raw_path),
      APR_FIELD("dataset", "seed", std::uint64_t, dataset.seed),
      APR_FIELD("dataset", "bundle_dir", fs::path, dataset.bundle_dir),
      APR_FIELD("tokenizer", "vocab_dir", fs::path, tokenizer.vocab_dir),
      APR_FIELD("tokenizer", "toy_merges", std::size_t, tokenizer.toy_merges),
      APR_FIELD("model", "kind", std::string, model_kind),
      APR_FIELD("transformer", "encoder_source", std::string, transformer.encoder_source),
      APR_FIELD("transformer", "encoder_layers", int, transformer.encoder_layers),
      APR_FIELD("transformer", "decoder_layers", int, transformer.decoder_layers),
      APR_FIELD("transformer", "hidden_dim", int, transformer.hidden_dim),
      APR_FIELD("transformer", "attention_heads", int, transformer.attention_heads),
      APR_FIELD("transformer", "ffn_multiplier", int, transformer.ffn_multiplier),
      APR_FIELD("transformer", "max_source_len", std::size_t, transformer.max_source_len),
      APR_FIELD("transformer", "max_target_len", std::size_t, transformer.max_target_len),
      APR_FIELD("transformer", "beam_size", int, transformer.beam_size),
      APR_FIELD("transformer", "vocab_size", int, transformer.vocab_size),
      APR_FIELD("transformer", "tie_embeddings", bool, transformer.tie_embeddings),
      APR_FIELD("transformer", "dropout", double, transformer.dropout),
      APR_FIELD("transformer", "init_std", double, transformer.init_std),
      APR_FIELD("transformer", "seed", std::uint64_t, transformer.seed),
      APR_FIELD("baseline", "embedding_dim", int, baseline.embedding_dim),
      APR_FIELD("baseline", "hidden_dim", int, baseline.hidden_dim),
      APR_FIELD("baseline", "beam_size", int, baseline.beam_size),
      APR_FIELD("baseline", "batch_size", int, baseline.batch_size),
      APR_FIELD("baseline", "dropout", double, baseline.dropout),
      APR_FIELD("baseline", "max_steps", long long, baseline.max_steps),
      APR_FIELD("baseline", "validation_every", long long, baseline.validation_every),
      APR_FIELD("baseline", "vocab_size", int, baseline.vocab_size),
      APR_FIELD("baseline", "max_source_len", std::size_t, baseline.max_source_len),
      APR_FIELD("baseline", "max_target_len", std::size_t, baseline.max_target_len),
      APR_FIELD("baseline", "init_range", double, baseline.init_range),
      APR_FIELD("baseline", "seed", std::uint64_t, baseline.seed),
      APR_FIELD("train", "learning_rate", double, train.learning_rate),
      APR_FIELD("train", "batch_size", int, train.batch_size),
      APR_FIELD("train", "max_steps", long long, train.max_steps),
      APR_FIELD("train", "validation_every", long long, train.validation_every),
      APR_FIELD("train", "early_stop_patience", int, train.early_stop_patience),
      APR_FIELD("train", "seed", std::uint64_t, train.seed),
      APR_FIELD("train", "device", std::string, train.device),
      APR_FIELD("train", "exact_match_sample", std::size_t, train.exact_match_sample),
      APR_FIELD("train", "dropout", bool, train.dropout),
      APR_FIELD("train", "clip_norm", double, train.clip_norm),
      APR_FIELD("train", "stop_on_perfect_sample", bool, train.stop_on_perfect_sample),
      APR_FIELD("output", "dir", fs::path, out_dir),
      APR_FIELD("output", "deterministic", bool, deterministic),
  };
  return all;
}

#undef APR_FIELD

const Field* find_field(const std::string& section, const std::string& key) {
  for (const auto& f : fields())
    if (f.section == section && f.key == key) return &f;
  return nullptr;
}

}  // namespace

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& f : fields()) out.push_back(f.name());
  return out;
}

ExperimentConfig ExperimentConfig::parse_ini(const std::string& text, const std::string& origin) {
  pt::ptree tree;
  try {
    std::istringstream in(text);
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(origin + ":" + std::to_string(e.line()) + ": " + e.message());
  }
  ExperimentConfig c;
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty())
      throw ConfigError(origin + ": key '" + section + "' must be inside a section");
    for (const auto& [key, value] : body) {
      const auto* f = find_field(section, key);
      if (!f) throw ConfigError(origin + ": unknown setting " + section + "." + key);
      f->set(c, value.data());
    }
  }
  return c;
}

ExperimentConfig ExperimentConfig::load(const fs::path& path) {
  if (!fs::is_regular_file(path)) throw ConfigError("config file not found: " + path.string());
  return parse_ini(read_file(path), path.string());
}

std::string ExperimentConfig::to_ini() const {
  std::string out;
  std::string current;
  for (const auto& f : fields()) {
    if (f.section != current) {
      if (!current.empty()) out += "\n";
      out += "[" + f.section + "]\n";
      current = f.section;
    }
    out += f.key + " = " + f.get(*this) + "\n";
  }
  return out;
}

Json ExperimentConfig::to_json() const {
  Json j = Json::object();
  for (const auto& f : fields()) j[f.section][f.key] = f.get(*this);
  return j;
}

void ExperimentConfig::apply_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  const auto dot = assignment.find('.');
  if (eq == std::string::npos || dot == std::string::npos || dot > eq)
    throw ConfigError("override '" + assignment + "' is not of the form section.key=value");
  const auto* f = find_field(assignment.substr(0, dot), assignment.substr(dot + 1, eq - dot - 1));
  if (!f) throw ConfigError("unknown setting in override '" + assignment + "'");
  f->set(*this, assignment.substr(eq + 1));
}

void ExperimentConfig::validate(bool check_paths) const {
  corpus::parse_variant(dataset.variant);
  corpus::parse_size(dataset.size);
  if (model_kind == "transformer")
    transformer.validate();
  else if (model_kind == "baseline")
    baseline.validate();
  else
    throw ConfigError("model.kind must be 'transformer' or 'baseline', got '" + model_kind + "'");
  train.validate();
  if (check_paths) {
    if (!dataset.raw_path.empty() && !fs::exists(dataset.raw_path))
      throw ConfigError("dataset.raw_path does not exist: " + dataset.raw_path.string());
    if (!dataset.bundle_dir.empty() && !fs::is_directory(dataset.bundle_dir))
      throw ConfigError("dataset.bundle_dir does not exist: " + dataset.bundle_dir.string());
    if (!tokenizer.vocab_dir.empty() && !fs::is_directory(tokenizer.vocab_dir))
      throw ConfigError("tokenizer.vocab_dir does not exist: " + tokenizer.vocab_dir.string());
  }
}

}  // namespace apr::cli
