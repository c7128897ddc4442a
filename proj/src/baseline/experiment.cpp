#include "apr/baseline/experiment.hpp"

#include "apr/common/errors.hpp"
#include "apr/corpus/corpus.hpp"
#include "apr/tokenizer/vocab.hpp"

namespace apr::baseline {

train::TrainConfig baseline_train_config(const BaselineConfig& config, double learning_rate) {
  train::TrainConfig t;
  t.learning_rate = learning_rate;
  t.batch_size = config.batch_size;
  t.max_steps = config.max_steps;
  t.validation_every = config.validation_every;
  t.seed = config.seed;
  return t;
}

ExperimentResult run_baseline_experiment(const corpus::DatasetBundle& bundle, const tokenizer::Vocab& vocab,
                                         const BaselineConfig& config, const train::TrainConfig& train_config,
                                         const std::filesystem::path& out_dir) {
  if (bundle.test.empty()) throw DataError("baseline experiment: test split of " + bundle.name.str() + " is empty");
  config.validate();
  train_config.validate();
  if (static_cast<std::size_t>(config.vocab_size) != vocab.size())
    throw ConfigError("baseline vocab_size " + std::to_string(config.vocab_size) + " does not match the vocabulary (" +
                      std::to_string(vocab.size()) + ")");

  auto model = build_baseline(config);
  model->set_special_ids(vocab.specials().cls, vocab.specials().eos);

  ExperimentResult result;
  train::FitOptions options;
  options.out_dir = out_dir;
  options.vocab_hash = vocab.hash();
  options.bundle_name = bundle.name.str();
  result.fit = train::fit(*model, bundle, vocab, train_config, options);

  result.predictions = eval::predict(*model, bundle.test, vocab, static_cast<std::size_t>(config.beam_size), kApproachTag);
  result.report = eval::score(result.predictions, bundle.test, bundle.train, vocab, {bundle.name.str(), kApproachTag});
  Json cfg;
  cfg["model"] = config.to_json();
  cfg["train"] = train_config.to_json();
  result.report.config = cfg;
  return result;
}

}  // namespace apr::baseline
