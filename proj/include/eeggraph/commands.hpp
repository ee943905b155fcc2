#pragma once

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <mutex>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "eeggraph/io.hpp"
#include "eeggraph/metrics.hpp"
#include "eeggraph/synth.hpp"
#include "eeggraph/train.hpp"

namespace eeggraph {

namespace fs = std::filesystem;

inline std::size_t worker_count() {
  if (const char* env = std::getenv("EEGGRAPH_WORKERS")) {
    const long n = std::strtol(env, nullptr, 10);
    if (n > 0) return static_cast<std::size_t>(n);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? hw : 1;
}

// Run fn(i) for i in [0, n) on a small pool. Each index writes only its own
// output slot, so results are identical to the sequential order.
template <typename F>
void parallel_for(std::size_t n, F&& fn,
                  std::size_t workers = worker_count()) {
  workers = std::min(workers, n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mu);
          if (!error) error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

// ---------------------------------------------------------------------------
// preprocess: montage -> resample -> highpass -> notch, per trial file.
// ---------------------------------------------------------------------------

struct PreprocessResult {
  std::size_t recordings = 0;
  std::size_t failures = 0;
  std::string out_manifest;
};

inline MontageRecording preprocess_recording(const Recording& raw,
                                             const ExperimentConfig& cfg) {
  MontageRecording montage = derive_bipolar_montage(raw);
  MontageRecording out = montage;
  out.sample_rate_hz = cfg.target_rate_hz;
  for (auto& chan : out.channels) chan.clear();
  for (int c = 0; c < kNumChannels; ++c) {
    auto x = resample(montage.channels[static_cast<std::size_t>(c)],
                      montage.sample_rate_hz, cfg.target_rate_hz);
    x = highpass_filter(x, cfg.target_rate_hz, cfg.highpass_hz);
    x = notch_filter(x, cfg.target_rate_hz, cfg.notch_hz);
    out.channels[static_cast<std::size_t>(c)] = std::move(x);
  }
  return out;
}

inline PreprocessResult cmd_preprocess(const std::string& manifest_path,
                                       const std::string& out_dir,
                                       const ExperimentConfig& cfg) {
  const Manifest manifest = load_manifest(manifest_path);
  const fs::path base = fs::path(manifest_path).parent_path();
  fs::create_directories(fs::path(out_dir) / "signals");

  PreprocessResult result;
  result.recordings = manifest.recordings.size();
  Manifest out_manifest;
  out_manifest.stage = "preprocessed";
  out_manifest.config_digest = config_digest(cfg);
  out_manifest.recordings.resize(manifest.recordings.size());
  std::vector<char> ok(manifest.recordings.size(), 0);

  parallel_for(manifest.recordings.size(), [&](std::size_t r) {
    const auto& entry = manifest.recordings[r];
    try {
      ManifestEntry out_entry;
      out_entry.subject_id = entry.subject_id;
      out_entry.label = entry.label;
      out_entry.sample_rate_hz = cfg.target_rate_hz;
      for (int c = 0; c < kNumChannels; ++c)
        out_entry.channel_names.push_back(bipolar_name(c));
      for (std::size_t t = 0; t < entry.files.size(); ++t) {
        auto sig = load_signal((base / entry.files[t]).string());
        if (sig.sample_rate_hz != entry.sample_rate_hz)
          throw FormatError("manifest/file sample rate mismatch for " +
                            entry.subject_id);
        Recording raw;
        raw.subject_id = entry.subject_id;
        raw.label = entry.label;
        raw.sample_rate_hz = sig.sample_rate_hz;
        for (std::size_t c = 0; c < sig.channel_names.size(); ++c)
          raw.channels.emplace_back(sig.channel_names[c],
                                    std::move(sig.samples[c]));
        const auto montage = preprocess_recording(raw, cfg);
        SignalFile out_sig;
        out_sig.subject_id = entry.subject_id;
        out_sig.label = entry.label;
        out_sig.sample_rate_hz = montage.sample_rate_hz;
        out_sig.channel_names = out_entry.channel_names;
        for (const auto& chan : montage.channels)
          out_sig.samples.push_back(chan);
        const std::string rel = "signals/" + entry.subject_id + "_t" +
                                std::to_string(t) + ".sig";
        save_signal(out_sig, (fs::path(out_dir) / rel).string());
        out_entry.files.push_back(rel);
      }
      out_manifest.recordings[r] = std::move(out_entry);
      ok[r] = 1;
    } catch (const std::exception& e) {
      std::cerr << "preprocess: " << entry.subject_id << ": " << e.what()
                << "\n";
    }
  });

  Manifest kept;
  kept.stage = out_manifest.stage;
  kept.config_digest = out_manifest.config_digest;
  for (std::size_t r = 0; r < ok.size(); ++r) {
    if (ok[r])
      kept.recordings.push_back(std::move(out_manifest.recordings[r]));
    else
      ++result.failures;
  }
  result.out_manifest = (fs::path(out_dir) / "manifest.json").string();
  save_manifest(kept, result.out_manifest);
  return result;
}

// ---------------------------------------------------------------------------
// featurize: windows -> band-power features + functional adjacency.
// ---------------------------------------------------------------------------

struct FeaturizeResult {
  std::size_t patient_windows = 0;
  std::size_t healthy_windows = 0;
  std::size_t dropped_windows = 0;
  bool skipped = false;  // store already current for this config
};

inline FeaturizeResult cmd_featurize(const std::string& preprocessed_dir,
                                     const std::string& store_dir,
                                     const ExperimentConfig& cfg) {
  const std::string digest = config_digest(cfg);
  if (fs::exists(store_index_path(store_dir))) {
    const auto existing = load_feature_store(store_dir);
    if (existing.config_digest == digest) {
      FeaturizeResult r;
      r.skipped = true;
      r.dropped_windows = existing.dropped_windows;
      for (const auto& s : existing.subjects)
        (s.label == Label::Patient ? r.patient_windows : r.healthy_windows) +=
            s.window_count;
      std::cout << "featurize: store is current for this config, skipping\n";
      return r;
    }
  }

  const Manifest manifest =
      load_manifest((fs::path(preprocessed_dir) / "manifest.json").string());
  if (manifest.stage != "preprocessed")
    throw FormatError("featurize expects a preprocessed manifest");
  if (manifest.config_digest != digest)
    throw FormatError("preprocessed data was built with a different config");

  const auto table = cfg.electrode_table.empty()
                         ? standard_1020_angles()
                         : load_electrode_table(cfg.electrode_table);
  const auto spatial =
      spatial_adjacency(standard_positions(table), cfg.spatial_proximity);

  struct SubjectFeatures {
    std::vector<WindowRecord> records;
    std::size_t dropped = 0;
  };
  std::vector<SubjectFeatures> per_subject(manifest.recordings.size());

  parallel_for(manifest.recordings.size(), [&](std::size_t r) {
    const auto& entry = manifest.recordings[r];
    auto& out = per_subject[r];
    std::size_t window_index = 0;
    for (const auto& file : entry.files) {
      auto sig = load_signal((fs::path(preprocessed_dir) / file).string());
      if (sig.samples.size() != kNumChannels)
        throw FormatError("preprocessed signal must have 8 channels: " + file);
      MontageRecording rec;
      rec.subject_id = entry.subject_id;
      rec.label = entry.label;
      rec.sample_rate_hz = sig.sample_rate_hz;
      for (int c = 0; c < kNumChannels; ++c)
        rec.channels[static_cast<std::size_t>(c)] =
            std::move(sig.samples[static_cast<std::size_t>(c)]);
      for (const auto& window :
           segment_windows(rec, cfg.window_s, window_index)) {
        ++window_index;
        try {
          const auto features = extract_features(window);
          const auto func = functional_adjacency(window);
          WindowRecord record;
          record.subject_index = static_cast<std::uint32_t>(r);
          record.window_index =
              static_cast<std::uint32_t>(window.window_index);
          record.label = static_cast<std::uint32_t>(entry.label);
          for (int c = 0; c < kNumChannels; ++c)
            for (int b = 0; b < kNumBands; ++b)
              record.features[static_cast<std::size_t>(c * kNumBands + b)] =
                  static_cast<float>(features.at(c, b));
          for (std::size_t i = 0; i < record.func_adj.size(); ++i)
            record.func_adj[i] = static_cast<float>(func.values[i]);
          out.records.push_back(record);
        } catch (const DegenerateSignal&) {
          ++out.dropped;
        }
      }
    }
  });

  FeatureStore store;
  store.config_digest = digest;
  store.spatial = spatial;
  FeaturizeResult result;
  for (std::size_t r = 0; r < manifest.recordings.size(); ++r) {
    const auto& entry = manifest.recordings[r];
    if (per_subject[r].records.empty())
      std::cerr << "featurize: warning: " << entry.subject_id
                << " is shorter than one window, no records\n";
    SubjectEntry s;
    s.subject_id = entry.subject_id;
    s.label = entry.label;
    s.window_count = per_subject[r].records.size();
    s.record_offset = store.records.size();
    result.dropped_windows += per_subject[r].dropped;
    (entry.label == Label::Patient ? result.patient_windows
                                   : result.healthy_windows) +=
        s.window_count;
    store.subjects.push_back(std::move(s));
    store.records.insert(store.records.end(), per_subject[r].records.begin(),
                         per_subject[r].records.end());
  }
  store.dropped_windows = result.dropped_windows;
  save_feature_store(store, store_dir);
  std::cout << "featurize: " << result.patient_windows << " patient / "
            << result.healthy_windows << " healthy windows ("
            << result.dropped_windows << " dropped)\n";
  return result;
}

// ---------------------------------------------------------------------------
// train: subject split, 10 CV folds, one checkpoint per fold.
// ---------------------------------------------------------------------------

struct TrainResult {
  std::vector<TrainRun> runs;
  TestSplit split;
  FoldPlan plan;
};

inline void save_split(const TestSplit& split, const FoldPlan& plan,
                       double subsample_fraction, const std::string& digest,
                       const std::string& path) {
  json j;
  j["format"] = "eeggraph.split";
  j["version"] = 1;
  j["config_digest"] = digest;
  j["subsample_fraction"] = subsample_fraction;
  j["test_subjects"] = split.test_subjects;
  json folds = json::array();
  for (const auto& f : plan.folds)
    folds.push_back(json{{"train", f.train_subjects}, {"val", f.val_subjects}});
  j["folds"] = folds;
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write split: " + path);
  out << j.dump(2) << "\n";
}

inline std::pair<TestSplit, FoldPlan> load_split(const std::string& path,
                                                 const std::string& digest) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open split: " + path);
  json j;
  in >> j;
  if (j.value("format", "") != "eeggraph.split")
    throw FormatError("not a split file: " + path);
  if (j.at("config_digest").get<std::string>() != digest)
    throw FormatError("split was built with a different config");
  TestSplit split;
  split.test_subjects = j.at("test_subjects").get<std::vector<std::string>>();
  FoldPlan plan;
  for (const auto& f : j.at("folds")) {
    Fold fold;
    fold.train_subjects = f.at("train").get<std::vector<std::string>>();
    fold.val_subjects = f.at("val").get<std::vector<std::string>>();
    plan.folds.push_back(std::move(fold));
  }
  return {std::move(split), std::move(plan)};
}

inline TrainResult cmd_train(const std::string& store_dir,
                             const std::string& run_dir, Architecture arch,
                             const ExperimentConfig& cfg,
                             double subsample_fraction = 1.0) {
  const std::string digest = config_digest(cfg);
  const auto store = load_feature_store(store_dir);
  if (store.config_digest != digest)
    throw FormatError("feature store was built with a different config");

  const auto index = store.index();
  TrainResult result;
  result.split = split_test(index, cfg.test_fraction, cfg.seed);
  result.plan =
      make_folds(index, result.split.train_val_subjects, cfg.k_folds, cfg.seed);
  if (subsample_fraction < 1.0)
    result.plan = subsample_training(index, result.plan, subsample_fraction,
                                     cfg.seed);

  fs::create_directories(run_dir);
  save_split(result.split, result.plan, subsample_fraction, digest,
             (fs::path(run_dir) / "split.json").string());

  const auto data = prepare_training_data<float>(store, cfg.log_features);
  ModelSpec spec;
  switch (arch) {
    case Architecture::ShallowGcnn:
      spec = ModelSpec::shallow_gcnn();
      break;
    case Architecture::DeepGcnn:
      spec = ModelSpec::deep_gcnn();
      break;
    case Architecture::Fcnn:
      spec = ModelSpec::fcnn();
      break;
  }
  spec.gcn_dropout = cfg.gcn_dropout;
  spec.linear_dropout = cfg.linear_dropout;

  const fs::path arch_dir = fs::path(run_dir) / to_string(arch);
  fs::create_directories(arch_dir);
  const auto trainer_cfg = TrainerConfig::from(cfg);

  std::set<std::string> forbidden(result.split.test_subjects.begin(),
                                  result.split.test_subjects.end());
  result.runs.resize(result.plan.folds.size());
  parallel_for(result.plan.folds.size(), [&](std::size_t f) {
    auto run = train_fold(data, result.plan, f, spec, trainer_cfg, digest);
    // Leakage guard: no gradient-contributing subject may sit in this
    // fold's validation set or in the test set.
    std::set<std::string> blocked = forbidden;
    blocked.insert(result.plan.folds[f].val_subjects.begin(),
                   result.plan.folds[f].val_subjects.end());
    for (const auto& s : run.gradient_subjects)
      if (blocked.count(s))
        throw Error("leakage: subject " + s + " trained in fold " +
                    std::to_string(f) + " but is held out");
    result.runs[f] = std::move(run);
  });

  for (std::size_t f = 0; f < result.runs.size(); ++f) {
    const auto& run = result.runs[f];
    const std::string stem = "fold_" + std::to_string(f);
    save_checkpoint(run.params, cfg.seed, digest,
                    (arch_dir / (stem + ".ckpt")).string());
    json j;
    j["format"] = "eeggraph.trainrun";
    j["version"] = 1;
    j["config_digest"] = digest;
    j["architecture"] = to_string(arch);
    j["fold_index"] = f;
    j["best_epoch"] = run.best_epoch;
    j["best_val_auc"] = run.best_val_auc;
    j["class_weights"] = run.class_weights;
    j["gradient_subjects"] = run.gradient_subjects;
    j["val_subjects"] = result.plan.folds[f].val_subjects;
    json hist = json::array();
    for (const auto& h : run.history)
      hist.push_back(json{{"epoch", h.epoch},
                          {"train_loss", h.train_loss},
                          {"val_auc", h.val_auc}});
    j["history"] = hist;
    std::ofstream out(arch_dir / (stem + ".json"));
    out << j.dump(2) << "\n";
  }
  return result;
}

// ---------------------------------------------------------------------------
// evaluate: per-fold test ROC, aggregate report, trivial baselines, KS
// tests, embedding export.
// ---------------------------------------------------------------------------

struct ModelEvaluation {
  std::string name;
  std::vector<double> fold_aucs;
  std::vector<MetricsReport> fold_metrics;
  double threshold = 0.0;  // pooled-validation Youden threshold
  std::map<std::string, double> fold_avg_scores;  // per test subject
};

struct EvaluateResult {
  std::vector<ModelEvaluation> models;
  std::string report_path;
};

namespace detail {

inline std::pair<double, double> mean_std(const std::vector<double>& v) {
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  var /= static_cast<double>(v.size());
  return {mean, std::sqrt(var)};
}

inline std::string mean_std_str(const std::vector<double>& v) {
  const auto [m, s] = mean_std(v);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f (%.2f)", m, s);
  return buf;
}

}  // namespace detail

inline EvaluateResult cmd_evaluate(const std::string& store_dir,
                                   const std::string& run_dir,
                                   const std::string& out_dir,
                                   const ExperimentConfig& cfg) {
  const std::string digest = config_digest(cfg);
  const auto store = load_feature_store(store_dir);
  if (store.config_digest != digest)
    throw FormatError("feature store was built with a different config");
  auto [split, plan] =
      load_split((fs::path(run_dir) / "split.json").string(), digest);
  const auto data = prepare_training_data<float>(store, cfg.log_features);
  fs::create_directories(out_dir);

  std::map<std::string, Label> subject_labels;
  for (const auto& s : store.subjects) subject_labels[s.subject_id] = s.label;
  std::vector<Label> test_labels;
  for (const auto& id : split.test_subjects)
    test_labels.push_back(subject_labels.at(id));

  EvaluateResult result;
  json report;
  report["format"] = "eeggraph.metrics";
  report["version"] = 1;
  report["config_digest"] = digest;
  report["test_subjects"] = split.test_subjects.size();
  json model_rows = json::object();

  for (const char* arch_name : {"shallow", "deep", "fcnn"}) {
    const fs::path arch_dir = fs::path(run_dir) / arch_name;
    if (!fs::exists(arch_dir / "fold_0.ckpt")) continue;

    ModelEvaluation eval;
    eval.name = arch_name;
    std::vector<double> pooled_val_scores;
    std::vector<Label> pooled_val_labels;
    std::vector<std::vector<SubjectResult>> fold_test_results;
    std::ofstream emb_csv(fs::path(out_dir) /
                          ("embeddings_" + eval.name + ".csv"));

    for (std::size_t f = 0; f < plan.folds.size(); ++f) {
      const std::string path =
          (arch_dir / ("fold_" + std::to_string(f) + ".ckpt")).string();
      if (!fs::exists(path))
        throw MissingCheckpoint("missing checkpoint: " + path);
      auto [model, info] = load_checkpoint<float>(path);
      if (info.config_digest != digest)
        throw FormatError("checkpoint built with a different config: " + path);

      for (const auto& r :
           score_subjects(model, data, plan.folds[f].val_subjects)) {
        pooled_val_scores.push_back(r.pi_hat);
        pooled_val_labels.push_back(r.true_label);
      }

      auto test_results = score_subjects(model, data, split.test_subjects);
      std::vector<double> scores;
      std::vector<Label> labels;
      for (const auto& r : test_results) {
        scores.push_back(r.pi_hat);
        labels.push_back(r.true_label);
        eval.fold_avg_scores[r.subject_id] +=
            r.pi_hat / static_cast<double>(plan.folds.size());
      }
      const auto curve = roc_curve(scores, labels);
      eval.fold_aucs.push_back(curve.auc);
      fold_test_results.push_back(std::move(test_results));

      std::ofstream roc_csv(
          fs::path(out_dir) /
          ("roc_" + eval.name + "_fold" + std::to_string(f) + ".csv"));
      roc_csv << "fpr,tpr,threshold\n";
      for (const auto& p : curve.points)
        roc_csv << p.fpr << "," << p.tpr << "," << p.threshold << "\n";

      if (f == 0) {
        emb_csv << "fold,subject_id,label";
        for (std::size_t j = 0; j < model.spec.embedding_dim(); ++j)
          emb_csv << ",e" << j;
        emb_csv << "\n";
      }
      for (const auto& [id, emb] :
           subject_embeddings(model, data, split.test_subjects)) {
        emb_csv << f << "," << id << "," << to_string(subject_labels.at(id));
        for (double v : emb) emb_csv << "," << v;
        emb_csv << "\n";
      }
    }

    // Operating point chosen on pooled validation scores, applied to test.
    eval.threshold =
        youden_threshold(roc_curve(pooled_val_scores, pooled_val_labels));
    std::vector<double> precisions, recalls, f1s, balanced;
    for (const auto& results : fold_test_results) {
      const auto m = classification_metrics(results, eval.threshold);
      precisions.push_back(m.precision);
      recalls.push_back(m.recall);
      f1s.push_back(m.f1);
      balanced.push_back(m.balanced_accuracy);
      eval.fold_metrics.push_back(m);
    }

    json row;
    row["threshold"] = eval.threshold;
    row["auc"] = {{"mean", detail::mean_std(eval.fold_aucs).first},
                  {"std", detail::mean_std(eval.fold_aucs).second},
                  {"folds", eval.fold_aucs},
                  {"report", detail::mean_std_str(eval.fold_aucs)}};
    auto metric_json = [&](const std::vector<double>& v) {
      return json{{"mean", detail::mean_std(v).first},
                  {"std", detail::mean_std(v).second},
                  {"report", detail::mean_std_str(v)}};
    };
    row["precision"] = metric_json(precisions);
    row["recall"] = metric_json(recalls);
    row["f1"] = metric_json(f1s);
    row["balanced_accuracy"] = metric_json(balanced);
    model_rows[eval.name] = row;
    result.models.push_back(std::move(eval));
  }

  if (result.models.empty())
    throw MissingCheckpoint("no trained models found in " + run_dir);

  // Trivial baselines on the test labels.
  {
    const auto t1 = trivial_classifier(TrivialKind::Imbalanced, test_labels,
                                       0.86, 1000, cfg.seed);
    const auto t2 =
        trivial_classifier(TrivialKind::MajorityAlways, test_labels);
    auto row = [](const TrivialReport& t) {
      char auc_buf[32], prec_buf[32];
      std::snprintf(auc_buf, sizeof(auc_buf), "%.2f (%.2f)", t.mean.auc,
                    t.stdev.auc);
      std::snprintf(prec_buf, sizeof(prec_buf), "%.2f (%.2f)",
                    t.mean.precision, t.stdev.precision);
      return json{{"auc", {{"mean", t.mean.auc}, {"std", t.stdev.auc},
                           {"report", auc_buf}}},
                  {"precision",
                   {{"mean", t.mean.precision}, {"std", t.stdev.precision},
                    {"report", prec_buf}}},
                  {"recall", {{"mean", t.mean.recall}, {"std", t.stdev.recall}}},
                  {"f1", {{"mean", t.mean.f1}, {"std", t.stdev.f1}}},
                  {"balanced_accuracy",
                   {{"mean", t.mean.balanced_accuracy},
                    {"std", t.stdev.balanced_accuracy}}},
                  {"simulations", t.simulations}};
    };
    model_rows["trivial_1"] = row(t1);
    model_rows["trivial_2"] = row(t2);
  }
  report["models"] = model_rows;

  // KS tests between the fold-averaged subject scores of every model pair.
  json ks_rows = json::array();
  for (std::size_t a = 0; a < result.models.size(); ++a)
    for (std::size_t b = a + 1; b < result.models.size(); ++b) {
      std::vector<double> sa, sb;
      for (const auto& [id, s] : result.models[a].fold_avg_scores)
        sa.push_back(s);
      for (const auto& [id, s] : result.models[b].fold_avg_scores)
        sb.push_back(s);
      const auto ks = ks_test(sa, sb);
      ks_rows.push_back(json{{"model_a", result.models[a].name},
                             {"model_b", result.models[b].name},
                             {"statistic", ks.statistic},
                             {"p_value", ks.p_value}});
    }
  report["ks_tests"] = ks_rows;

  result.report_path = (fs::path(out_dir) / "metrics.json").string();
  std::ofstream out(result.report_path);
  out << report.dump(2) << "\n";
  return result;
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

inline Manifest cmd_synth(const SynthSpec& spec, const std::string& out_dir) {
  return generate_synthetic(spec, out_dir);
}

}  // namespace eeggraph
