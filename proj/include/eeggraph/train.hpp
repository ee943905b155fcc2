#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "eeggraph/io.hpp"
#include "eeggraph/metrics.hpp"
#include "eeggraph/model.hpp"
#include "eeggraph/split.hpp"

namespace eeggraph {

// Feature-store records converted into model inputs, adjacency normalized
// once up front.
template <typename T>
struct TrainingData {
  std::vector<Matrix<T>> features;             // 8 x 6 per window
  std::vector<NormalizedAdjacency> adjacencies;
  std::vector<int> labels;                     // class index per window
  std::vector<std::uint32_t> subject_indices;
  std::vector<SubjectEntry> subjects;

  std::size_t size() const { return features.size(); }
};

// Band powers are heavy-tailed; the model consumes them on a log scale by
// default (configurable).
template <typename T>
TrainingData<T> prepare_training_data(const FeatureStore& store,
                                      bool log_features = true) {
  TrainingData<T> data;
  data.subjects = store.subjects;
  data.features.reserve(store.records.size());
  data.adjacencies.reserve(store.records.size());
  for (const auto& rec : store.records) {
    Matrix<T> f(kNumChannels, kNumBands);
    for (std::size_t i = 0; i < rec.features.size(); ++i)
      f.data[i] = log_features
                      ? static_cast<T>(std::log10(
                            static_cast<double>(rec.features[i]) + 1e-12))
                      : static_cast<T>(rec.features[i]);
    AdjacencyMatrix func;
    func.kind = AdjacencyKind::Functional;
    for (std::size_t i = 0; i < rec.func_adj.size(); ++i)
      func.values[i] = rec.func_adj[i];
    const auto combined = combine_adjacency(store.spatial, func);
    data.features.push_back(std::move(f));
    data.adjacencies.push_back(normalize_adjacency(combined));
    data.labels.push_back(static_cast<int>(rec.label));
    data.subject_indices.push_back(rec.subject_index);
  }
  return data;
}

template <typename T>
std::vector<std::size_t> windows_of_subjects(
    const TrainingData<T>& data, const std::vector<std::string>& subjects) {
  std::set<std::string> pool(subjects.begin(), subjects.end());
  std::vector<std::size_t> ids;
  for (std::size_t i = 0; i < data.size(); ++i)
    if (pool.count(data.subjects[data.subject_indices[i]].subject_id))
      ids.push_back(i);
  return ids;
}

// Eval-mode window probabilities (Y_n) for the given window ids.
template <typename T>
std::vector<double> window_probabilities(ModelParams<T>& model,
                                         const TrainingData<T>& data,
                                         const std::vector<std::size_t>& ids,
                                         std::size_t chunk = 1024) {
  std::vector<double> probs(ids.size());
  for (std::size_t start = 0; start < ids.size(); start += chunk) {
    const std::size_t end = std::min(ids.size(), start + chunk);
    std::vector<SampleView<T>> batch;
    batch.reserve(end - start);
    for (std::size_t k = start; k < end; ++k)
      batch.push_back(
          {&data.features[ids[k]], &data.adjacencies[ids[k]], 0});
    auto ctx = forward_batch(model, batch, Mode::Eval);
    const auto p = softmax(ctx.logits);
    for (std::size_t k = start; k < end; ++k)
      probs[k] = static_cast<double>(
          p.at(k - start, static_cast<std::size_t>(kPatientClass)));
  }
  return probs;
}

// Aggregate eval-mode window probabilities into per-subject results.
template <typename T>
std::vector<SubjectResult> score_subjects(
    ModelParams<T>& model, const TrainingData<T>& data,
    const std::vector<std::string>& subjects) {
  const auto ids = windows_of_subjects(data, subjects);
  const auto probs = window_probabilities(model, data, ids);
  std::map<std::string, SubjectResult> by_subject;
  for (std::size_t k = 0; k < ids.size(); ++k) {
    const auto& entry = data.subjects[data.subject_indices[ids[k]]];
    auto& r = by_subject[entry.subject_id];
    r.subject_id = entry.subject_id;
    r.true_label = entry.label;
    r.window_probs.push_back(probs[k]);
  }
  std::vector<SubjectResult> results;
  results.reserve(by_subject.size());
  for (auto& [id, r] : by_subject) {
    r.pi_hat = aggregate_subject(r.window_probs);
    results.push_back(std::move(r));
  }
  return results;
}

// Per-subject embedding export: the mean over a subject's windows of the
// pooled graph embedding (last hidden activation for the Fcnn).
template <typename T>
std::map<std::string, std::vector<double>> subject_embeddings(
    ModelParams<T>& model, const TrainingData<T>& data,
    const std::vector<std::string>& subjects, std::size_t chunk = 1024) {
  const auto ids = windows_of_subjects(data, subjects);
  std::map<std::string, std::vector<double>> sums;
  std::map<std::string, std::size_t> counts;
  for (std::size_t start = 0; start < ids.size(); start += chunk) {
    const std::size_t end = std::min(ids.size(), start + chunk);
    std::vector<SampleView<T>> batch;
    for (std::size_t k = start; k < end; ++k)
      batch.push_back({&data.features[ids[k]], &data.adjacencies[ids[k]], 0});
    auto ctx = forward_batch(model, batch, Mode::Eval);
    const Matrix<T>& emb = model.spec.arch == Architecture::Fcnn
                               ? ctx.classifier_input
                               : ctx.pooled;
    for (std::size_t k = start; k < end; ++k) {
      const auto& id = data.subjects[data.subject_indices[ids[k]]].subject_id;
      auto& sum = sums[id];
      sum.resize(emb.cols, 0.0);
      for (std::size_t j = 0; j < emb.cols; ++j)
        sum[j] += static_cast<double>(emb.at(k - start, j));
      counts[id] += 1;
    }
  }
  for (auto& [id, sum] : sums)
    for (auto& v : sum) v /= static_cast<double>(counts[id]);
  return sums;
}

inline double subject_auc(const std::vector<SubjectResult>& results) {
  std::vector<double> scores;
  std::vector<Label> labels;
  for (const auto& r : results) {
    scores.push_back(r.pi_hat);
    labels.push_back(r.true_label);
  }
  return roc_curve(scores, labels).auc;
}

struct EpochStats {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_auc = 0.0;
};

struct TrainRun {
  std::size_t fold_index = 0;
  Architecture architecture = Architecture::ShallowGcnn;
  ModelParams<float> params;  // checkpoint with the best validation AUC
  std::vector<EpochStats> history;
  double best_val_auc = 0.0;
  std::size_t best_epoch = 0;
  std::array<double, 2> class_weights{0.0, 0.0};
  std::vector<std::string> gradient_subjects;  // leakage instrumentation
  std::string config_digest;
};

struct TrainerConfig {
  double learning_rate = 0.1;
  std::size_t decay_every = 20;
  std::size_t batch_size = 512;
  std::size_t max_epochs = 100;
  std::size_t early_stop_patience = 10;
  std::size_t min_epochs = 40;  // patience only counts past this point
  std::uint64_t seed = 0;

  static TrainerConfig from(const ExperimentConfig& c) {
    return {c.learning_rate, c.decay_every,         c.batch_size,
            c.max_epochs,    c.early_stop_patience, c.min_epochs,
            c.seed};
  }
};

// Train one CV fold: weighted cross-entropy + Adam on the fold's training
// windows, validation AUC tracked per epoch, best-AUC checkpoint returned.
// Production training runs in 32-bit floats.
inline TrainRun train_fold(const TrainingData<float>& data,
                           const FoldPlan& plan, std::size_t fold_index,
                           const ModelSpec& spec, const TrainerConfig& cfg,
                           const std::string& config_digest = "") {
  using T = float;
  const Fold& fold = plan.folds.at(fold_index);
  auto train_ids = windows_of_subjects(data, fold.train_subjects);
  const auto val_ids = windows_of_subjects(data, fold.val_subjects);
  if (train_ids.empty() || val_ids.empty())
    throw TooFewSubjects("fold " + std::to_string(fold_index) +
                         " has no training or validation windows");

  // Inverse window-count class weights over this fold's training windows.
  std::array<std::size_t, 2> counts{0, 0};
  for (auto id : train_ids)
    counts[static_cast<std::size_t>(data.labels[id])] += 1;
  if (counts[0] == 0 || counts[1] == 0)
    throw EmptyClass("training windows of fold " +
                     std::to_string(fold_index) + " miss a class");
  const std::array<double, 2> weights{1.0 / static_cast<double>(counts[0]),
                                      1.0 / static_cast<double>(counts[1])};

  TrainRun run;
  run.fold_index = fold_index;
  run.architecture = spec.arch;
  run.class_weights = weights;
  run.config_digest = config_digest;
  {
    std::set<std::string> seen;
    for (auto id : train_ids)
      seen.insert(data.subjects[data.subject_indices[id]].subject_id);
    run.gradient_subjects.assign(seen.begin(), seen.end());
  }

  auto model =
      init_params<T>(spec, derive_seed(cfg.seed, 1000 + fold_index));
  AdamState<T> adam(model);
  Rng shuffle_rng(derive_seed(cfg.seed, 2000 + fold_index));
  Rng dropout_rng(derive_seed(cfg.seed, 3000 + fold_index));

  ModelParams<T> best = model;
  run.best_val_auc = -1.0;
  double best_score = -1.0;
  double best_loss = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  std::vector<double> val_history;

  for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    const double lr = scheduled_lr(cfg.learning_rate, epoch, cfg.decay_every);
    shuffle_rng.shuffle(train_ids);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < train_ids.size();
         start += cfg.batch_size) {
      const std::size_t end =
          std::min(train_ids.size(), start + cfg.batch_size);
      std::vector<SampleView<T>> batch;
      std::vector<int> labels;
      batch.reserve(end - start);
      for (std::size_t k = start; k < end; ++k) {
        const auto id = train_ids[k];
        batch.push_back(
            {&data.features[id], &data.adjacencies[id], data.labels[id]});
        labels.push_back(data.labels[id]);
      }
      auto ctx = forward_batch(model, batch, Mode::Train, &dropout_rng, true);
      const double loss = weighted_cross_entropy(ctx.logits, labels, weights);
      if (!std::isfinite(loss))
        throw NonFiniteLoss("fold " + std::to_string(fold_index) +
                            " epoch " + std::to_string(epoch) +
                            ": non-finite loss");
      loss_sum += loss * static_cast<double>(end - start);
      const auto dlogits =
          weighted_cross_entropy_grad(ctx.logits, labels, weights);
      const auto grads = backward(model, ctx, dlogits);
      adam_step(model, grads, adam, lr);
    }

    const auto val_results = score_subjects(model, data, fold.val_subjects);
    const double val_auc = subject_auc(val_results);
    const double train_loss =
        loss_sum / static_cast<double>(train_ids.size());
    run.history.push_back({epoch, train_loss, val_auc});
    val_history.push_back(val_auc);

    // Validation sets are small, so a single epoch's AUC is noisy; the
    // checkpoint is selected on a 3-epoch smoothed AUC (saturation-style
    // selection), with ties going to the lower training loss.
    double smoothed = 0.0;
    const std::size_t w = std::min<std::size_t>(3, val_history.size());
    for (std::size_t i = val_history.size() - w; i < val_history.size(); ++i)
      smoothed += val_history[i];
    smoothed /= static_cast<double>(w);

    if (smoothed > best_score) {
      since_best = 0;
      best_score = smoothed;
      run.best_val_auc = val_auc;
      run.best_epoch = epoch;
      best_loss = train_loss;
      best = model;
    } else {
      if (smoothed == best_score && train_loss < best_loss) {
        run.best_val_auc = val_auc;
        run.best_epoch = epoch;
        best_loss = train_loss;
        best = model;
      }
      ++since_best;
    }
    if (since_best >= cfg.early_stop_patience && epoch + 1 >= cfg.min_epochs)
      break;
  }

  run.params = std::move(best);
  return run;
}

}  // namespace eeggraph
