#include <CLI11.hpp>

#include <iostream>

#include "apr/cli/commands.hpp"

namespace {

using apr::cli::ExitCode;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neural program repair pipeline for single-statement Java bugs"};
  app.require_subcommand(1);

  apr::cli::PrepareArgs prep;
  auto* prepare = app.add_subcommand("prepare", "Build a dataset variant from a raw release file");
  prepare->add_option("--raw", prep.raw_path, "ManySStuBs4J release file (JSON array or JSON lines)")->required();
  prepare->add_option("--variant", prep.variant, "Duplicate or Unique")->capture_default_str();
  prepare->add_option("--size", prep.size, "Large or Small")->capture_default_str();
  prepare->add_option("--seed", prep.seed, "Split seed")->capture_default_str();
  prepare->add_option("--out", prep.out_dir, "Bundle output directory")->required();
  prepare->add_option("--vocab", prep.vocab_dir, "Vocabulary directory used for token-length statistics");

  std::string config_path;
  std::vector<std::string> overrides;
  apr::cli::TrainArgs train_args;
  std::string train_out;
  auto* train = app.add_subcommand("train", "Train the configured model on a prepared bundle");
  train->add_option("--config", config_path, "INI run configuration")->required();
  train->add_option("--set", overrides, "Override a setting: section.key=value (repeatable)");
  train->add_option("--out", train_out, "Output directory (overrides output.dir)");
  train->add_flag("--resume", train_args.resume, "Continue from the last saved trainer state");
  train->add_option("--stop-after", train_args.stop_after, "Stop after this many steps, as if interrupted");

  apr::cli::PredictArgs pred;
  bool nondeterministic = false;
  auto* predict = app.add_subcommand("predict", "Beam-search patches for a bundle split");
  predict->add_option("--checkpoint", pred.checkpoint, "Model checkpoint")->required();
  predict->add_option("--bundle", pred.bundle_dir, "Prepared bundle directory")->required();
  predict->add_option("--split", pred.split, "train, valid or test")->capture_default_str();
  predict->add_option("--beam", pred.beam_size, "Beam size")->capture_default_str();
  predict->add_option("--out", pred.out_dir, "Output directory")->required();
  predict->add_option("--vocab", pred.vocab_dir, "Vocabulary directory (default: vocab/ beside the checkpoint)");
  predict->add_flag("--with-timing", nondeterministic, "Write per-instance wall clock into predictions.jsonl");

  apr::cli::EvaluateArgs ev;
  auto* evaluate = app.add_subcommand("evaluate", "Score predictions against the test split");
  evaluate->add_option("--predictions", ev.predictions, "predictions.jsonl")->required();
  evaluate->add_option("--bundle", ev.bundle_dir, "Prepared bundle directory")->required();
  evaluate->add_option("--out", ev.out_dir, "Output directory")->required();
  evaluate->add_option("--vocab", ev.vocab_dir, "Vocabulary directory (default: the one used for prediction)");
  evaluate->add_option("--training-timing", ev.training_log, "timing.jsonl of the training run");

  apr::cli::ReportArgs rep;
  auto* report = app.add_subcommand("report", "Compare evaluated runs");
  report->add_option("runs", rep.run_dirs, "Evaluation output directories")->required();
  report->add_option("--out", rep.out_file, "Write the document here as well as to stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return ExitCode::kConfigFailure;
  }

  return apr::cli::run_guarded(
      [&] {
        if (*prepare) {
          apr::cli::cmd_prepare(prep, std::cout);
        } else if (*train) {
          train_args.config = apr::cli::ExperimentConfig::load(config_path);
          for (const auto& o : overrides) train_args.config.apply_override(o);
          if (!train_out.empty()) train_args.config.out_dir = train_out;
          apr::cli::cmd_train(train_args, std::cout);
        } else if (*predict) {
          pred.deterministic = !nondeterministic;
          apr::cli::cmd_predict(pred, std::cout);
        } else if (*evaluate) {
          apr::cli::cmd_evaluate(ev, std::cout);
        } else if (*report) {
          apr::cli::cmd_report(rep, std::cout);
        }
      },
      std::cerr);
}
