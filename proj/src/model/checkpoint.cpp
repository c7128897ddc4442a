#include "apr/model/checkpoint.hpp"

#include "apr/baseline/lstm_seq2seq.hpp"
#include "apr/common/errors.hpp"
#include "apr/common/tensor_archive.hpp"
#include "apr/model/transformer.hpp"

namespace apr::model {
namespace {

CheckpointInfo info_from(const TensorArchive& archive, const std::string& origin) {
  const auto& meta = archive.meta;
  if (meta.value("format", std::string{}) != "apr-checkpoint") throw DataError(origin + ": not a model checkpoint");
  const int version = meta.value("checkpoint_version", -1);
  if (version != kCheckpointVersion)
    throw DataError(origin + ": checkpoint version " + std::to_string(version) + " is not supported (expected " +
                    std::to_string(kCheckpointVersion) + ")");
  CheckpointInfo info;
  info.kind = meta.at("kind").get<std::string>();
  info.config = meta.at("config");
  info.vocab_hash = meta.value("vocab_hash", std::string{});
  info.bos_id = meta.value("bos_id", 0);
  info.eos_id = meta.value("eos_id", 2);
  return info;
}

void restore(Seq2SeqModel& model, const TensorArchive& archive, const std::string& origin) {
  auto& params = model.parameters();
  if (archive.tensors.size() != params.size())
    throw DataError(origin + ": checkpoint has " + std::to_string(archive.tensors.size()) + " tensors, model expects " +
                    std::to_string(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    const auto* t = archive.find(p.name);
    if (!t) throw DataError(origin + ": checkpoint lacks parameter " + p.name);
    if (t->rows() != p.value.rows() || t->cols() != p.value.cols())
      throw DataError(origin + ": dimension mismatch for " + p.name + " (checkpoint " + std::to_string(t->rows()) +
                      "x" + std::to_string(t->cols()) + ", model " + std::to_string(p.value.rows()) + "x" +
                      std::to_string(p.value.cols()) + ")");
    p.value = *t;
  }
}

}  // namespace

void save_checkpoint(const Seq2SeqModel& model, const std::string& vocab_hash, const std::filesystem::path& path) {
  TensorArchive archive;
  archive.meta["format"] = "apr-checkpoint";
  archive.meta["checkpoint_version"] = kCheckpointVersion;
  archive.meta["kind"] = model.kind();
  archive.meta["config"] = model.config_json();
  archive.meta["vocab_hash"] = vocab_hash;
  archive.meta["bos_id"] = model.bos_id();
  archive.meta["eos_id"] = model.eos_id();
  const auto& params = model.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) archive.tensors.push_back({params[i].name, params[i].value});
  archive.save(path);
}

CheckpointInfo read_checkpoint_info(const std::filesystem::path& path) {
  return info_from(TensorArchive::load(path), path.string());
}

std::unique_ptr<Seq2SeqModel> load_checkpoint(const std::filesystem::path& path, CheckpointInfo* info_out) {
  const auto archive = TensorArchive::load(path);
  const auto info = info_from(archive, path.string());
  std::unique_ptr<Seq2SeqModel> model;
  if (info.kind == "transformer") {
    // The constructor never touches encoder_source; weights come from the checkpoint.
    auto m = std::make_unique<TransformerSeq2Seq>(ModelConfig::from_json(info.config));
    m->set_special_ids(info.bos_id, info.eos_id);
    model = std::move(m);
  } else if (info.kind == "baseline") {
    auto m = std::make_unique<baseline::LstmSeq2Seq>(baseline::BaselineConfig::from_json(info.config));
    m->set_special_ids(info.bos_id, info.eos_id);
    model = std::move(m);
  } else {
    throw DataError(path.string() + ": unknown model kind '" + info.kind + "'");
  }
  restore(*model, archive, path.string());
  if (info_out) *info_out = info;
  return model;
}

void load_weights(Seq2SeqModel& model, const std::filesystem::path& path) {
  const auto archive = TensorArchive::load(path);
  const auto info = info_from(archive, path.string());
  if (info.kind != model.kind())
    throw DataError(path.string() + ": checkpoint holds a " + info.kind + " model, not " + model.kind());
  restore(model, archive, path.string());
}

}  // namespace apr::model
