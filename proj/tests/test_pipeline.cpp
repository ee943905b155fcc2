#include <doctest.h>

#include <filesystem>

#include "eeggraph/commands.hpp"

using namespace eeggraph;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "eeggraph_pipeline" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string file_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

SynthSpec tiny_corpus(std::uint64_t seed) {
  SynthSpec spec;
  spec.subjects_per_class = 10;
  spec.duration_s = 30.0;
  spec.trials = 2;
  spec.native_rate_hz = 500.0;
  spec.separation = 1.0;
  spec.seed = seed;
  return spec;
}

ExperimentConfig tiny_config() {
  ExperimentConfig cfg;
  cfg.k_folds = 3;
  cfg.max_epochs = 4;
  cfg.early_stop_patience = 4;
  cfg.batch_size = 128;
  cfg.seed = 11;
  return cfg;
}

}  // namespace

TEST_CASE("synth corpus is seeded and class-shaped") {
  const auto dir = scratch_dir("synth");
  const auto manifest = cmd_synth(tiny_corpus(5), dir.string());
  CHECK(manifest.recordings.size() == 20);
  CHECK(fs::exists(dir / "manifest.json"));
  CHECK(fs::exists(dir / "signals" / "p000_t0.sig"));

  const auto dir2 = scratch_dir("synth2");
  cmd_synth(tiny_corpus(5), dir2.string());
  CHECK(file_bytes(dir / "signals" / "p000_t0.sig") ==
        file_bytes(dir2 / "signals" / "p000_t0.sig"));
  CHECK(file_bytes(dir / "signals" / "h003_t1.sig") ==
        file_bytes(dir2 / "signals" / "h003_t1.sig"));
  CHECK(file_bytes(dir / "manifest.json") == file_bytes(dir2 / "manifest.json"));

  const auto dir3 = scratch_dir("synth3");
  cmd_synth(tiny_corpus(6), dir3.string());
  CHECK(file_bytes(dir / "signals" / "p000_t0.sig") !=
        file_bytes(dir3 / "signals" / "p000_t0.sig"));

  // Healthy subjects carry more occipital alpha by construction; compare
  // class means so per-subject gain variation averages out.
  auto alpha_power = [](const SignalFile& sig, const std::string& name) {
    for (std::size_t c = 0; c < sig.channel_names.size(); ++c) {
      if (sig.channel_names[c] != name) continue;
      const auto psd = welch_psd(sig.samples[c], sig.sample_rate_hz,
                                 WelchParams{1000, 0.5});
      return band_power(psd, band_definitions()[2]);
    }
    throw std::runtime_error("channel not found");
  };
  double h_alpha = 0.0, p_alpha = 0.0;
  const auto spec = tiny_corpus(5);
  for (std::size_t s = 0; s < spec.subjects_per_class; ++s) {
    const auto healthy = synth_trial(spec, Label::Healthy, s, 0, "h");
    const auto patient = synth_trial(spec, Label::Patient, s, 0, "p");
    for (const char* ch : {"O1", "O2"}) {
      h_alpha += alpha_power(healthy, ch);
      p_alpha += alpha_power(patient, ch);
    }
  }
  CHECK(h_alpha > p_alpha);
}

TEST_CASE("preprocess and featurize chain with digest guards") {
  const auto raw = scratch_dir("chain_raw");
  const auto pre = scratch_dir("chain_pre");
  const auto store = scratch_dir("chain_store");
  cmd_synth(tiny_corpus(21), raw.string());

  const auto cfg = tiny_config();
  const auto result =
      cmd_preprocess((raw / "manifest.json").string(), pre.string(), cfg);
  CHECK(result.recordings == 20);
  CHECK(result.failures == 0);

  const auto pre_manifest = load_manifest((pre / "manifest.json").string());
  CHECK(pre_manifest.stage == "preprocessed");
  CHECK(pre_manifest.config_digest == config_digest(cfg));
  REQUIRE(pre_manifest.recordings.size() == 20);
  const auto sig =
      load_signal((pre / pre_manifest.recordings[0].files[0]).string());
  CHECK(sig.sample_rate_hz == 250.0);
  CHECK(sig.samples.size() == kNumChannels);
  CHECK(sig.channel_names[0] == "F7-F3");
  // 15 s per trial at 250 Hz
  CHECK(sig.samples[0].size() == 3750);

  const auto feat = cmd_featurize(pre.string(), store.string(), cfg);
  // 30 s per subject -> 1 window per 15 s trial, 2 trials.
  CHECK(feat.patient_windows == 20);
  CHECK(feat.healthy_windows == 20);
  CHECK(feat.dropped_windows == 0);
  CHECK_FALSE(feat.skipped);

  // Re-running with the same config is a no-op.
  const auto again = cmd_featurize(pre.string(), store.string(), cfg);
  CHECK(again.skipped);
  CHECK(again.patient_windows == 20);

  // A different config digest is rejected against the preprocessed data.
  auto other = cfg;
  other.notch_hz = 60.0;
  CHECK_THROWS_AS(cmd_featurize(pre.string(), store.string(), other),
                  FormatError);

  const auto loaded = load_feature_store(store.string());
  CHECK(loaded.subjects.size() == 20);
  for (const auto& s : loaded.subjects) CHECK(s.window_count == 2);
  // Window counts at class level reproduce the per-recording counts.
  std::size_t patient_total = 0;
  for (const auto& s : loaded.subjects)
    if (s.label == Label::Patient) patient_total += s.window_count;
  CHECK(patient_total == feat.patient_windows);
}

TEST_CASE("preprocess reports missing files and keeps going") {
  const auto raw = scratch_dir("missing_raw");
  const auto pre = scratch_dir("missing_pre");
  cmd_synth(tiny_corpus(31), raw.string());
  auto manifest = load_manifest((raw / "manifest.json").string());
  manifest.recordings[3].files[0] = "signals/not_there.sig";
  save_manifest(manifest, (raw / "manifest.json").string());

  const auto result =
      cmd_preprocess((raw / "manifest.json").string(), pre.string(),
                     tiny_config());
  CHECK(result.failures == 1);
  const auto out = load_manifest((pre / "manifest.json").string());
  CHECK(out.recordings.size() == 19);
}

TEST_CASE("train and evaluate produce stamped, reproducible artifacts") {
  const auto raw = scratch_dir("train_raw");
  const auto pre = scratch_dir("train_pre");
  const auto store = scratch_dir("train_store");
  cmd_synth(tiny_corpus(41), raw.string());
  const auto cfg = tiny_config();
  cmd_preprocess((raw / "manifest.json").string(), pre.string(), cfg);
  cmd_featurize(pre.string(), store.string(), cfg);

  const auto run_a = scratch_dir("train_run_a");
  const auto result = cmd_train(store.string(), run_a.string(),
                                Architecture::ShallowGcnn, cfg);
  CHECK(result.runs.size() == cfg.k_folds);
  CHECK(fs::exists(run_a / "split.json"));
  for (std::size_t f = 0; f < cfg.k_folds; ++f) {
    CHECK(fs::exists(run_a / "shallow" / ("fold_" + std::to_string(f) +
                                          ".ckpt")));
    CHECK(fs::exists(run_a / "shallow" / ("fold_" + std::to_string(f) +
                                          ".json")));
  }

  // Identical config + seed reruns bit-identically.
  const auto run_b = scratch_dir("train_run_b");
  cmd_train(store.string(), run_b.string(), Architecture::ShallowGcnn, cfg);
  CHECK(file_bytes(run_a / "split.json") == file_bytes(run_b / "split.json"));
  for (std::size_t f = 0; f < cfg.k_folds; ++f) {
    const std::string stem = "fold_" + std::to_string(f);
    CHECK(file_bytes(run_a / "shallow" / (stem + ".ckpt")) ==
          file_bytes(run_b / "shallow" / (stem + ".ckpt")));
    CHECK(file_bytes(run_a / "shallow" / (stem + ".json")) ==
          file_bytes(run_b / "shallow" / (stem + ".json")));
  }

  // Train a second architecture into the same run dir, then evaluate both.
  cmd_train(store.string(), run_a.string(), Architecture::Fcnn, cfg);
  const auto out_a = scratch_dir("eval_a");
  const auto eval = cmd_evaluate(store.string(), run_a.string(),
                                 out_a.string(), cfg);
  CHECK(eval.models.size() == 2);
  CHECK(fs::exists(out_a / "metrics.json"));
  CHECK(fs::exists(out_a / "roc_shallow_fold0.csv"));
  CHECK(fs::exists(out_a / "embeddings_shallow.csv"));
  CHECK(fs::exists(out_a / "embeddings_fcnn.csv"));

  json report;
  std::ifstream(out_a / "metrics.json") >> report;
  CHECK(report.at("models").contains("shallow"));
  CHECK(report.at("models").contains("fcnn"));
  CHECK(report.at("models").contains("trivial_1"));
  CHECK(report.at("models").contains("trivial_2"));
  CHECK(report.at("models").at("shallow").at("auc").contains("report"));
  CHECK(report.at("ks_tests").size() == 1);

  // Evaluation is idempotent.
  const auto out_b = scratch_dir("eval_b");
  cmd_evaluate(store.string(), run_a.string(), out_b.string(), cfg);
  CHECK(file_bytes(out_a / "metrics.json") ==
        file_bytes(out_b / "metrics.json"));
  CHECK(file_bytes(out_a / "embeddings_shallow.csv") ==
        file_bytes(out_b / "embeddings_shallow.csv"));

  // Mixed-digest artifacts are rejected.
  auto other = cfg;
  other.seed = 1234;
  CHECK_THROWS_AS(
      cmd_train(store.string(), scratch_dir("train_bad").string(),
                Architecture::ShallowGcnn, other),
      FormatError);
  CHECK_THROWS_AS(cmd_evaluate(store.string(), run_a.string(),
                               scratch_dir("eval_bad").string(), other),
                  FormatError);
}

TEST_CASE("train --subsample keeps a fraction of training subjects") {
  const auto raw = scratch_dir("sub_raw");
  const auto pre = scratch_dir("sub_pre");
  const auto store = scratch_dir("sub_store");
  cmd_synth(tiny_corpus(61), raw.string());
  const auto cfg = tiny_config();
  cmd_preprocess((raw / "manifest.json").string(), pre.string(), cfg);
  cmd_featurize(pre.string(), store.string(), cfg);

  const auto run = scratch_dir("sub_run");
  const auto result = cmd_train(store.string(), run.string(),
                                Architecture::Fcnn, cfg, 0.5);
  json split;
  std::ifstream(run / "split.json") >> split;
  CHECK(split.at("subsample_fraction").get<double>() == 0.5);
  // 7 train+val subjects per class, k=3 -> full fold train has 9-10
  // subjects; half of each class rounds to 5-ish.
  for (const auto& f : result.plan.folds) {
    CHECK(f.train_subjects.size() >= 4);
    CHECK(f.train_subjects.size() <= 6);
  }
}

TEST_CASE("embedding width matches the architecture") {
  const auto raw = scratch_dir("emb_raw");
  const auto pre = scratch_dir("emb_pre");
  const auto store = scratch_dir("emb_store");
  cmd_synth(tiny_corpus(51), raw.string());
  const auto cfg = tiny_config();
  cmd_preprocess((raw / "manifest.json").string(), pre.string(), cfg);
  cmd_featurize(pre.string(), store.string(), cfg);
  const auto run = scratch_dir("emb_run");
  cmd_train(store.string(), run.string(), Architecture::ShallowGcnn, cfg);
  const auto out = scratch_dir("emb_out");
  cmd_evaluate(store.string(), run.string(), out.string(), cfg);

  std::ifstream csv(out / "embeddings_shallow.csv");
  std::string header;
  REQUIRE(std::getline(csv, header));
  // fold,subject_id,label + e0..e127
  CHECK(std::count(header.begin(), header.end(), ',') == 2 + 128);
  std::string row;
  REQUIRE(std::getline(csv, row));
  CHECK(std::count(row.begin(), row.end(), ',') == 2 + 128);
}
