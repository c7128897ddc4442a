#include "apr/model/transformer.hpp"

#include <cmath>
#include <cstdlib>
#include <map>
#include <sstream>

#include "apr/common/errors.hpp"
#include "apr/common/tensor_archive.hpp"

namespace apr::model {
namespace {

using nn::Matrix;
using nn::RowVector;
using nn::Var;

RowVector layer_norm_row(const RowVector& x, const nn::Parameter& gamma, const nn::Parameter& beta) {
  const double mean = x.mean();
  const double var = (x.array() - mean).square().mean();
  const double inv = 1.0 / std::sqrt(var + 1e-5);
  return ((x.array() - mean) * inv * gamma.value.row(0).array() + beta.value.row(0).array()).matrix();
}

RowVector gelu_row(const RowVector& x) {
  return x.unaryExpr([](double v) { return 0.5 * v * (1.0 + std::erf(v * 0.70710678118654752440)); });
}

RowVector affine(const RowVector& x, const nn::Parameter& w, const nn::Parameter& b) {
  return x * w.value + b.value.row(0);
}

// One query row attending over keys/values, head by head.
RowVector attend(const RowVector& q, const Matrix& keys, const Matrix& values, int heads) {
  const Eigen::Index dh = q.cols() / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  RowVector out(q.cols());
  for (int h = 0; h < heads; ++h) {
    RowVector scores = (q.segment(h * dh, dh) * keys.middleCols(h * dh, dh).transpose()) * scale;
    const double mx = scores.maxCoeff();
    scores = (scores.array() - mx).exp();
    scores /= scores.sum();
    out.segment(h * dh, dh) = scores * values.middleCols(h * dh, dh);
  }
  return out;
}

void append_row(Matrix& m, const RowVector& r) {
  m.conservativeResize(m.rows() + 1, r.cols());
  m.row(m.rows() - 1) = r;
}

std::vector<int> iota_ids(std::size_t n) {
  std::vector<int> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = static_cast<int>(i);
  return ids;
}

}  // namespace

void ModelConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("model config: " + msg); };
  if (encoder_layers < 1 || decoder_layers < 1) fail("layer counts must be positive");
  if (hidden_dim < 1 || attention_heads < 1) fail("hidden_dim and attention_heads must be positive");
  if (hidden_dim % attention_heads != 0)
    fail("hidden_dim " + std::to_string(hidden_dim) + " is not divisible by attention_heads " +
         std::to_string(attention_heads));
  if (ffn_multiplier < 1) fail("ffn_multiplier must be positive");
  if (max_source_len < 3 || max_source_len > 512) fail("max_source_len must be in [3, 512]");
  if (max_target_len < 1) fail("max_target_len must be positive");
  if (beam_size < 1) fail("beam_size must be at least 1");
  if (vocab_size < 3) fail("vocab_size must be at least 3");
  if (dropout < 0.0 || dropout >= 1.0) fail("dropout must be in [0, 1)");
  if (init_std <= 0.0) fail("init_std must be positive");
  if (encoder_source.empty()) fail("encoder_source must not be empty");
}

Json ModelConfig::to_json() const {
  Json j;
  j["encoder_source"] = encoder_source;
  j["encoder_layers"] = encoder_layers;
  j["decoder_layers"] = decoder_layers;
  j["hidden_dim"] = hidden_dim;
  j["attention_heads"] = attention_heads;
  j["ffn_multiplier"] = ffn_multiplier;
  j["max_source_len"] = max_source_len;
  j["max_target_len"] = max_target_len;
  j["beam_size"] = beam_size;
  j["vocab_size"] = vocab_size;
  j["tie_embeddings"] = tie_embeddings;
  j["dropout"] = dropout;
  j["init_std"] = init_std;
  j["seed"] = seed;
  return j;
}

ModelConfig ModelConfig::from_json(const Json& j) {
  ModelConfig c;
  c.encoder_source = j.value("encoder_source", c.encoder_source);
  c.encoder_layers = j.value("encoder_layers", c.encoder_layers);
  c.decoder_layers = j.value("decoder_layers", c.decoder_layers);
  c.hidden_dim = j.value("hidden_dim", c.hidden_dim);
  c.attention_heads = j.value("attention_heads", c.attention_heads);
  c.ffn_multiplier = j.value("ffn_multiplier", c.ffn_multiplier);
  c.max_source_len = j.value("max_source_len", c.max_source_len);
  c.max_target_len = j.value("max_target_len", c.max_target_len);
  c.beam_size = j.value("beam_size", c.beam_size);
  c.vocab_size = j.value("vocab_size", c.vocab_size);
  c.tie_embeddings = j.value("tie_embeddings", c.tie_embeddings);
  c.dropout = j.value("dropout", c.dropout);
  c.init_std = j.value("init_std", c.init_std);
  c.seed = j.value("seed", c.seed);
  return c;
}

class TransformerSeq2Seq::State final : public DecoderState {
 public:
  std::shared_ptr<const std::vector<std::pair<Matrix, Matrix>>> cross_kv;
  std::vector<Matrix> self_k, self_v;
  std::size_t position = 0;

  std::unique_ptr<DecoderState> clone() const override { return std::make_unique<State>(*this); }
};

TransformerSeq2Seq::Attention TransformerSeq2Seq::make_attention(const std::string& prefix) {
  const int d = config_.hidden_dim;
  Attention a{};
  a.wq = &params_.add(prefix + ".q.weight", d, d);
  a.bq = &params_.add(prefix + ".q.bias", 1, d);
  a.wk = &params_.add(prefix + ".k.weight", d, d);
  a.bk = &params_.add(prefix + ".k.bias", 1, d);
  a.wv = &params_.add(prefix + ".v.weight", d, d);
  a.bv = &params_.add(prefix + ".v.bias", 1, d);
  a.wo = &params_.add(prefix + ".o.weight", d, d);
  a.bo = &params_.add(prefix + ".o.bias", 1, d);
  return a;
}

TransformerSeq2Seq::Norm TransformerSeq2Seq::make_norm(const std::string& prefix) {
  return {&params_.add(prefix + ".gamma", 1, config_.hidden_dim), &params_.add(prefix + ".beta", 1, config_.hidden_dim)};
}

TransformerSeq2Seq::FeedForward TransformerSeq2Seq::make_ffn(const std::string& prefix) {
  const int d = config_.hidden_dim;
  const int inner = d * config_.ffn_multiplier;
  return {&params_.add(prefix + ".in.weight", d, inner), &params_.add(prefix + ".in.bias", 1, inner),
          &params_.add(prefix + ".out.weight", inner, d), &params_.add(prefix + ".out.bias", 1, d)};
}

TransformerSeq2Seq::TransformerSeq2Seq(const ModelConfig& config) : config_(config) {
  config_.validate();
  const int d = config_.hidden_dim;
  const auto max_src = static_cast<Eigen::Index>(config_.max_source_len);
  const auto max_tgt = static_cast<Eigen::Index>(config_.max_target_len);

  word_embedding_ = &params_.add("embeddings.word", config_.vocab_size, d);
  source_position_ = &params_.add("embeddings.position", max_src, d);
  embedding_norm_ = make_norm("embeddings.ln");
  for (int l = 0; l < config_.encoder_layers; ++l) {
    const std::string p = "encoder.layer" + std::to_string(l);
    EncoderLayer layer;
    layer.attn = make_attention(p + ".attn");
    layer.ln1 = make_norm(p + ".ln1");
    layer.ffn = make_ffn(p + ".ffn");
    layer.ln2 = make_norm(p + ".ln2");
    encoder_.push_back(layer);
  }
  target_position_ = &params_.add("decoder.position", max_tgt, d);
  target_embedding_norm_ = make_norm("decoder.ln_embedding");
  for (int l = 0; l < config_.decoder_layers; ++l) {
    const std::string p = "decoder.layer" + std::to_string(l);
    DecoderLayer layer;
    layer.self_attn = make_attention(p + ".self");
    layer.ln1 = make_norm(p + ".ln1");
    layer.cross_attn = make_attention(p + ".cross");
    layer.ln2 = make_norm(p + ".ln2");
    layer.ffn = make_ffn(p + ".ffn");
    layer.ln3 = make_norm(p + ".ln3");
    decoder_.push_back(layer);
  }
  output_weight_ = config_.tie_embeddings ? word_embedding_ : &params_.add("output.weight", config_.vocab_size, d);
  output_bias_ = &params_.add("output.bias", 1, config_.vocab_size);

  std::mt19937_64 rng(config_.seed);
  params_.init_normal(rng, config_.init_std);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = params_[i];
    const auto& n = p.name;
    if (n.ends_with(".gamma")) p.value.setOnes();
    if (n.ends_with(".beta") || n.ends_with(".bias")) p.value.setZero();
  }
}

void TransformerSeq2Seq::set_special_ids(int bos, int eos) {
  if (bos < 0 || bos >= config_.vocab_size || eos < 0 || eos >= config_.vocab_size)
    throw ConfigError("special token ids outside the vocabulary");
  bos_ = bos;
  eos_ = eos;
}

Var TransformerSeq2Seq::attention(nn::Tape& tape, const Attention& a, Var query_in, Var memory, bool causal,
                                  std::mt19937_64* rng) {
  const int heads = config_.attention_heads;
  const Eigen::Index dh = config_.hidden_dim / heads;
  const Var q = tape.add_row(tape.matmul(query_in, tape.param(*a.wq)), tape.param(*a.bq));
  const Var k = tape.add_row(tape.matmul(memory, tape.param(*a.wk)), tape.param(*a.bk));
  const Var v = tape.add_row(tape.matmul(memory, tape.param(*a.wv)), tape.param(*a.bv));
  std::vector<Var> outputs;
  outputs.reserve(heads);
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  for (int h = 0; h < heads; ++h) {
    const Var qh = tape.slice_cols(q, h * dh, dh);
    const Var kh = tape.slice_cols(k, h * dh, dh);
    const Var vh = tape.slice_cols(v, h * dh, dh);
    const Var probs = tape.softmax_rows(tape.scale(tape.matmul_nt(qh, kh), scale), causal);
    outputs.push_back(tape.matmul(probs, vh));
  }
  const Var merged = heads == 1 ? outputs[0] : tape.concat_cols(outputs);
  const Var out = tape.add_row(tape.matmul(merged, tape.param(*a.wo)), tape.param(*a.bo));
  return rng ? tape.dropout(out, config_.dropout, *rng) : out;
}

Var TransformerSeq2Seq::norm(nn::Tape& tape, const Norm& n, Var x) {
  return tape.layer_norm(x, tape.param(*n.gamma), tape.param(*n.beta));
}

Var TransformerSeq2Seq::feed_forward(nn::Tape& tape, const FeedForward& f, Var x, std::mt19937_64* rng) {
  const Var h = tape.gelu(tape.add_row(tape.matmul(x, tape.param(*f.w_in)), tape.param(*f.b_in)));
  const Var out = tape.add_row(tape.matmul(h, tape.param(*f.w_out)), tape.param(*f.b_out));
  return rng ? tape.dropout(out, config_.dropout, *rng) : out;
}

Var TransformerSeq2Seq::record_encoder(nn::Tape& tape, std::span<const int> source, std::mt19937_64* rng) {
  check_sequence(source, config_.vocab_size, config_.max_source_len, "source");
  if (source.empty()) throw RuntimeFailure("source sequence is empty");
  const auto positions = iota_ids(source.size());
  Var x = tape.add(tape.gather_rows(tape.param(*word_embedding_), source),
                   tape.gather_rows(tape.param(*source_position_), positions));
  x = norm(tape, embedding_norm_, x);
  if (rng) x = tape.dropout(x, config_.dropout, *rng);
  for (const auto& layer : encoder_) {
    x = norm(tape, layer.ln1, tape.add(x, attention(tape, layer.attn, x, x, false, rng)));
    x = norm(tape, layer.ln2, tape.add(x, feed_forward(tape, layer.ffn, x, rng)));
  }
  return x;
}

Var TransformerSeq2Seq::record_logits(nn::Tape& tape, std::span<const int> source, std::span<const int> decoder_input,
                                      std::mt19937_64* rng) {
  const Var memory = record_encoder(tape, source, rng);
  check_sequence(decoder_input, config_.vocab_size, config_.max_target_len, "decoder input");
  if (decoder_input.empty()) throw RuntimeFailure("decoder input is empty");
  const auto positions = iota_ids(decoder_input.size());
  Var y = tape.add(tape.gather_rows(tape.param(*word_embedding_), decoder_input),
                   tape.gather_rows(tape.param(*target_position_), positions));
  y = norm(tape, target_embedding_norm_, y);
  if (rng) y = tape.dropout(y, config_.dropout, *rng);
  for (const auto& layer : decoder_) {
    y = norm(tape, layer.ln1, tape.add(y, attention(tape, layer.self_attn, y, y, true, rng)));
    y = norm(tape, layer.ln2, tape.add(y, attention(tape, layer.cross_attn, y, memory, false, rng)));
    y = norm(tape, layer.ln3, tape.add(y, feed_forward(tape, layer.ffn, y, rng)));
  }
  return tape.add_row(tape.matmul_nt(y, tape.param(*output_weight_)), tape.param(*output_bias_));
}

Matrix TransformerSeq2Seq::encode(std::span<const int> source) const {
  nn::Tape tape(false);
  auto* self = const_cast<TransformerSeq2Seq*>(this);
  return tape.value(self->record_encoder(tape, source, nullptr));
}

std::unique_ptr<DecoderState> TransformerSeq2Seq::begin(std::span<const int> source) const {
  const Matrix memory = encode(source);
  auto kv = std::make_shared<std::vector<std::pair<Matrix, Matrix>>>();
  for (const auto& layer : decoder_) {
    const auto& a = layer.cross_attn;
    Matrix k = (memory * a.wk->value).rowwise() + a.bk->value.row(0);
    Matrix v = (memory * a.wv->value).rowwise() + a.bv->value.row(0);
    kv->emplace_back(std::move(k), std::move(v));
  }
  auto state = std::make_unique<State>();
  state->cross_kv = std::move(kv);
  state->self_k.assign(decoder_.size(), Matrix(0, config_.hidden_dim));
  state->self_v.assign(decoder_.size(), Matrix(0, config_.hidden_dim));
  return state;
}

nn::Vector TransformerSeq2Seq::step(DecoderState& base, int token) const {
  auto& state = dynamic_cast<State&>(base);
  if (state.position >= config_.max_target_len) throw RuntimeFailure("decoder stepped past max_target_len");
  if (token < 0 || token >= config_.vocab_size) throw RuntimeFailure("decoder token out of range");
  const int heads = config_.attention_heads;

  RowVector x = word_embedding_->value.row(token) + target_position_->value.row(static_cast<Eigen::Index>(state.position));
  x = layer_norm_row(x, *target_embedding_norm_.gamma, *target_embedding_norm_.beta);
  for (std::size_t l = 0; l < decoder_.size(); ++l) {
    const auto& layer = decoder_[l];
    const auto& sa = layer.self_attn;
    append_row(state.self_k[l], affine(x, *sa.wk, *sa.bk));
    append_row(state.self_v[l], affine(x, *sa.wv, *sa.bv));
    RowVector o = affine(attend(affine(x, *sa.wq, *sa.bq), state.self_k[l], state.self_v[l], heads), *sa.wo, *sa.bo);
    x = layer_norm_row(x + o, *layer.ln1.gamma, *layer.ln1.beta);

    const auto& ca = layer.cross_attn;
    const auto& [ck, cv] = (*state.cross_kv)[l];
    o = affine(attend(affine(x, *ca.wq, *ca.bq), ck, cv, heads), *ca.wo, *ca.bo);
    x = layer_norm_row(x + o, *layer.ln2.gamma, *layer.ln2.beta);

    const auto& f = layer.ffn;
    o = affine(gelu_row(affine(x, *f.w_in, *f.b_in)), *f.w_out, *f.b_out);
    x = layer_norm_row(x + o, *layer.ln3.gamma, *layer.ln3.beta);
  }
  ++state.position;
  const nn::Vector logits = (output_weight_->value * x.transpose()) + output_bias_->value.row(0).transpose();
  return log_softmax(logits);
}

std::filesystem::path resolve_encoder_source(const std::string& source) {
  namespace fs = std::filesystem;
  if (fs::is_regular_file(source)) return source;
  if (const char* cache = std::getenv("APR_MODEL_CACHE")) {
    const fs::path candidate = fs::path(cache) / source / "encoder.ckpt";
    if (fs::is_regular_file(candidate)) return candidate;
  }
  return {};
}

std::unique_ptr<TransformerSeq2Seq> build(const ModelConfig& config) {
  auto model = std::make_unique<TransformerSeq2Seq>(config);
  if (config.encoder_source == "toy") return model;

  const auto path = resolve_encoder_source(config.encoder_source);
  if (path.empty())
    throw RuntimeFailure("pretrained encoder '" + config.encoder_source +
                             "' not found (checked the path and $APR_MODEL_CACHE/<id>/encoder.ckpt)",
                         /*retryable=*/true);
  const auto archive = TensorArchive::load(path);
  auto& params = model->parameters();
  std::size_t loaded = 0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    if (!p.name.starts_with("embeddings.") && !p.name.starts_with("encoder.")) continue;
    const auto* t = archive.find(p.name);
    if (!t) throw DataError(path.string() + ": pretrained encoder lacks tensor " + p.name);
    if (t->rows() != p.value.rows() || t->cols() != p.value.cols())
      throw DataError(path.string() + ": dimension mismatch for " + p.name + " (checkpoint " +
                      std::to_string(t->rows()) + "x" + std::to_string(t->cols()) + ", model " +
                      std::to_string(p.value.rows()) + "x" + std::to_string(p.value.cols()) + ")");
    p.value = *t;
    ++loaded;
  }
  if (loaded == 0) throw DataError(path.string() + ": no encoder tensors found");
  return model;
}

std::string parameter_report(const nn::ParameterSet& params) {
  std::map<std::string, std::size_t> groups;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& name = params[i].name;
    groups[name.substr(0, name.find('.'))] += static_cast<std::size_t>(params[i].value.size());
  }
  std::ostringstream os;
  for (const auto& [g, n] : groups) os << g << ": " << n << "\n";
  os << "total: " << params.scalar_count() << "\n";
  return os.str();
}

}  // namespace apr::model
