#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "eeggraph/common.hpp"

namespace eeggraph {

struct SubjectResult {
  std::string subject_id;
  Label true_label = Label::Healthy;
  std::vector<double> window_probs;  // Y_n per window
  double pi_hat = 0.0;
};

// Bernoulli MLE of the subject's patient probability: the mean of its
// window-level probabilities.
inline double aggregate_subject(const std::vector<double>& window_probs) {
  if (window_probs.empty())
    throw EmptySubject("subject has no window predictions");
  double sum = 0.0;
  for (double p : window_probs) sum += p;
  return sum / static_cast<double>(window_probs.size());
}

inline SubjectResult make_subject_result(const std::string& id, Label label,
                                         std::vector<double> probs) {
  SubjectResult r;
  r.subject_id = id;
  r.true_label = label;
  r.pi_hat = aggregate_subject(probs);
  r.window_probs = std::move(probs);
  return r;
}

struct RocPoint {
  double fpr;
  double tpr;
  double threshold;
};

struct RocCurve {
  std::vector<RocPoint> points;  // thresholds descending, (0,0) .. (1,1)
  double auc = 0.0;
};

// Threshold sweep over the unique scores (ties grouped), positive class =
// patient, prediction rule: score >= threshold.
inline RocCurve roc_curve(const std::vector<double>& scores,
                          const std::vector<Label>& labels) {
  if (scores.size() != labels.size())
    throw LengthMismatch("scores/labels size mismatch");
  std::size_t n_pos = 0, n_neg = 0;
  for (Label l : labels) (l == Label::Patient ? n_pos : n_neg) += 1;
  if (n_pos == 0 || n_neg == 0)
    throw SingleClass("ROC requires both classes");

  std::vector<std::size_t> order(scores.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b];
  });

  RocCurve curve;
  curve.points.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
  std::size_t tp = 0, fp = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    const double s = scores[order[i]];
    while (i < order.size() && scores[order[i]] == s) {
      (labels[order[i]] == Label::Patient ? tp : fp) += 1;
      ++i;
    }
    curve.points.push_back({static_cast<double>(fp) / n_neg,
                            static_cast<double>(tp) / n_pos, s});
  }
  double auc = 0.0;
  for (std::size_t k = 1; k < curve.points.size(); ++k) {
    const auto& a = curve.points[k - 1];
    const auto& b = curve.points[k];
    auc += (b.fpr - a.fpr) * (a.tpr + b.tpr) / 2.0;
  }
  curve.auc = auc;
  return curve;
}

// Threshold maximizing TPR - FPR; ties resolved toward the lowest
// threshold (more recall on the patient class).
inline double youden_threshold(const RocCurve& curve) {
  double best_j = -std::numeric_limits<double>::infinity();
  double best_t = std::numeric_limits<double>::infinity();
  for (const auto& p : curve.points) {
    const double j = p.tpr - p.fpr;
    if (j >= best_j) {
      best_j = j;
      best_t = p.threshold;
    }
  }
  return best_t;
}

struct MetricsReport {
  double auc = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double balanced_accuracy = 0.0;
  double threshold = 0.0;
};

// Confusion-matrix metrics at a threshold, patient = positive class.
inline MetricsReport classification_metrics(
    const std::vector<SubjectResult>& results, double threshold) {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  for (const auto& r : results) {
    const bool pred_pos = r.pi_hat >= threshold;
    const bool is_pos = r.true_label == Label::Patient;
    if (pred_pos && is_pos)
      ++tp;
    else if (pred_pos && !is_pos)
      ++fp;
    else if (!pred_pos && is_pos)
      ++fn;
    else
      ++tn;
  }
  if (tp + fn == 0 || fp + tn == 0)
    throw SingleClass("balanced accuracy requires both classes");
  MetricsReport m;
  m.threshold = threshold;
  m.precision = (tp + fp) > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
  m.recall = static_cast<double>(tp) / (tp + fn);
  const double recall_neg = static_cast<double>(tn) / (fp + tn);
  m.f1 = (m.precision + m.recall) > 0.0
             ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
             : 0.0;
  m.balanced_accuracy = (m.recall + recall_neg) / 2.0;
  return m;
}

// ---------------------------------------------------------------------------
// Trivial baselines
// ---------------------------------------------------------------------------

enum class TrivialKind { Imbalanced, MajorityAlways };

struct TrivialReport {
  MetricsReport mean;
  MetricsReport stdev;  // zero for MajorityAlways
  std::size_t simulations = 0;
};

inline TrivialReport trivial_classifier(TrivialKind kind,
                                        const std::vector<Label>& labels,
                                        double positive_prob = 0.86,
                                        std::size_t sims = 1000,
                                        std::uint64_t seed = 0) {
  if (labels.empty()) throw EmptySample("no labels");
  TrivialReport report;

  if (kind == TrivialKind::MajorityAlways) {
    std::size_t n_pos = 0;
    for (Label l : labels)
      if (l == Label::Patient) ++n_pos;
    if (n_pos == 0 || n_pos == labels.size())
      throw SingleClass("trivial metrics require both classes");
    report.simulations = 1;
    report.mean.precision =
        static_cast<double>(n_pos) / static_cast<double>(labels.size());
    report.mean.recall = 1.0;
    report.mean.f1 = 2.0 * report.mean.precision /
                     (report.mean.precision + 1.0);
    report.mean.balanced_accuracy = 0.5;
    // Constant scores: every positive-negative pair is tied.
    report.mean.auc = 0.5;
    return report;
  }

  std::vector<double> sum(5, 0.0), sumsq(5, 0.0);
  Rng rng(derive_seed(seed, 0x7121A1));
  for (std::size_t s = 0; s < sims; ++s) {
    std::vector<SubjectResult> results(labels.size());
    std::vector<double> scores(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
      const bool pred_pos = rng.uniform() < positive_prob;
      // Tie-free random score consistent with the prediction.
      scores[i] = pred_pos ? 0.5 + 0.5 * rng.uniform()
                           : 0.5 * rng.uniform();
      results[i].subject_id = std::to_string(i);
      results[i].true_label = labels[i];
      results[i].pi_hat = scores[i];
      results[i].window_probs = {scores[i]};
    }
    const auto m = classification_metrics(results, 0.5);
    const auto curve = roc_curve(scores, labels);
    const double vals[5] = {curve.auc, m.precision, m.recall, m.f1,
                            m.balanced_accuracy};
    for (int k = 0; k < 5; ++k) {
      sum[static_cast<std::size_t>(k)] += vals[k];
      sumsq[static_cast<std::size_t>(k)] += vals[k] * vals[k];
    }
  }
  auto finish = [&](int k) {
    const double mean = sum[static_cast<std::size_t>(k)] /
                        static_cast<double>(sims);
    const double var =
        std::max(0.0, sumsq[static_cast<std::size_t>(k)] /
                              static_cast<double>(sims) -
                          mean * mean);
    return std::pair<double, double>(mean, std::sqrt(var));
  };
  report.simulations = sims;
  std::tie(report.mean.auc, report.stdev.auc) = finish(0);
  std::tie(report.mean.precision, report.stdev.precision) = finish(1);
  std::tie(report.mean.recall, report.stdev.recall) = finish(2);
  std::tie(report.mean.f1, report.stdev.f1) = finish(3);
  std::tie(report.mean.balanced_accuracy, report.stdev.balanced_accuracy) =
      finish(4);
  return report;
}

// ---------------------------------------------------------------------------
// Two-sample Kolmogorov-Smirnov test
// ---------------------------------------------------------------------------

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

inline KsResult ks_test(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw EmptySample("KS test on empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());

  double d = 0.0;
  std::size_t ia = 0, ib = 0;
  while (ia < a.size() && ib < b.size()) {
    const double x = std::min(a[ia], b[ib]);
    while (ia < a.size() && a[ia] <= x) ++ia;
    while (ib < b.size() && b[ib] <= x) ++ib;
    d = std::max(d, std::fabs(static_cast<double>(ia) / na -
                              static_cast<double>(ib) / nb));
  }

  KsResult result;
  result.statistic = d;
  if (d <= 0.0) {
    result.p_value = 1.0;
    return result;
  }
  // Asymptotic two-sided p-value with the Stephens small-sample correction.
  const double ne = std::sqrt(na * nb / (na + nb));
  const double lambda = (ne + 0.12 + 0.11 / ne) * d;
  double sum = 0.0, fac = 2.0, prev_term = 0.0;
  bool converged = false;
  for (int j = 1; j <= 100; ++j) {
    const double term = fac * std::exp(-2.0 * j * j * lambda * lambda);
    sum += term;
    if (std::fabs(term) <= 0.001 * prev_term ||
        std::fabs(term) <= 1e-10 * std::fabs(sum)) {
      converged = true;
      break;
    }
    fac = -fac;
    prev_term = std::fabs(term);
  }
  result.p_value = converged ? std::clamp(sum, 0.0, 1.0) : 1.0;
  return result;
}

}  // namespace eeggraph
