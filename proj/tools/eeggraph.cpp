#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "eeggraph/commands.hpp"

using namespace eeggraph;

namespace {

struct CommonOpts {
  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_set = false;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path, "experiment config JSON");
  cmd->add_option("--seed", opts.seed, "seed override")
      ->each([&](const std::string&) { opts.seed_set = true; });
}

ExperimentConfig resolve_config(const CommonOpts& opts) {
  ExperimentConfig cfg;
  if (!opts.config_path.empty()) cfg = load_config(opts.config_path);
  if (opts.seed_set) cfg.seed = opts.seed;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"EEG window-graph classification pipeline"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand(
      "synth", "generate a labeled synthetic EEG corpus");
  CommonOpts synth_opts;
  std::string synth_out;
  SynthSpec synth_spec;
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--subjects", synth_spec.subjects_per_class,
                    "subjects per class");
  synth->add_option("--duration", synth_spec.duration_s,
                    "seconds of signal per subject");
  synth->add_option("--trials", synth_spec.trials, "trial files per subject");
  synth->add_option("--rate", synth_spec.native_rate_hz, "native sample rate");
  synth->add_option("--separation", synth_spec.separation,
                    "class separation (0 = identical classes)");
  add_common(synth, synth_opts);

  // preprocess
  auto* preprocess = app.add_subcommand(
      "preprocess", "montage, resample, highpass and notch filter");
  CommonOpts pre_opts;
  std::string pre_manifest, pre_out;
  preprocess->add_option("--manifest", pre_manifest, "raw manifest JSON")
      ->required();
  preprocess->add_option("--out", pre_out, "output directory")->required();
  add_common(preprocess, pre_opts);

  // featurize
  auto* featurize = app.add_subcommand(
      "featurize", "band-power features and functional adjacency per window");
  CommonOpts feat_opts;
  std::string feat_in, feat_out;
  featurize->add_option("--in", feat_in, "preprocessed directory")->required();
  featurize->add_option("--out", feat_out, "feature store directory")
      ->required();
  add_common(featurize, feat_opts);

  // train
  auto* train = app.add_subcommand("train", "train one architecture across CV folds");
  CommonOpts train_opts;
  std::string train_store, train_out, train_arch = "shallow";
  double subsample = 1.0;
  train->add_option("--store", train_store, "feature store directory")
      ->required();
  train->add_option("--out", train_out, "run output directory")->required();
  train->add_option("--arch", train_arch, "shallow|deep|fcnn")
      ->check(CLI::IsMember({"shallow", "deep", "fcnn"}));
  train->add_option("--subsample", subsample,
                    "fraction of training subjects kept per fold");
  add_common(train, train_opts);

  // evaluate
  auto* evaluate = app.add_subcommand(
      "evaluate", "held-out metrics, baselines, KS tests and embeddings");
  CommonOpts eval_opts;
  std::string eval_store, eval_run, eval_out;
  evaluate->add_option("--store", eval_store, "feature store directory")
      ->required();
  evaluate->add_option("--run", eval_run, "training run directory")
      ->required();
  evaluate->add_option("--out", eval_out, "report output directory")
      ->required();
  add_common(evaluate, eval_opts);

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) {
      const auto cfg = resolve_config(synth_opts);
      synth_spec.seed = synth_opts.seed_set ? synth_opts.seed : cfg.seed;
      cmd_synth(synth_spec, synth_out);
      std::cout << "synth: wrote " << 2 * synth_spec.subjects_per_class
                << " subjects to " << synth_out << "\n";
    } else if (preprocess->parsed()) {
      const auto cfg = resolve_config(pre_opts);
      const auto result = cmd_preprocess(pre_manifest, pre_out, cfg);
      std::cout << "preprocess: " << result.recordings - result.failures
                << "/" << result.recordings << " recordings ok\n";
      if (result.failures > 0) return 1;
    } else if (featurize->parsed()) {
      const auto cfg = resolve_config(feat_opts);
      cmd_featurize(feat_in, feat_out, cfg);
    } else if (train->parsed()) {
      const auto cfg = resolve_config(train_opts);
      const auto result = cmd_train(train_store, train_out,
                                    architecture_from_string(train_arch), cfg,
                                    subsample);
      for (const auto& run : result.runs)
        std::cout << "train: fold " << run.fold_index << " best val AUC "
                  << run.best_val_auc << " at epoch " << run.best_epoch
                  << "\n";
    } else if (evaluate->parsed()) {
      const auto cfg = resolve_config(eval_opts);
      const auto result = cmd_evaluate(eval_store, eval_run, eval_out, cfg);
      std::cout << "evaluate: wrote " << result.report_path << "\n";
    }
  } catch (const NonFiniteLoss& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 2;
  } catch (const NonFiniteActivation& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 2;
  } catch (const NonFiniteGradient& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
