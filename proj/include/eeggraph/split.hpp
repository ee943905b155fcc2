#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "eeggraph/common.hpp"

namespace eeggraph {

struct SubjectEntry {
  std::string subject_id;
  Label label = Label::Healthy;
  std::size_t window_count = 0;
  std::size_t record_offset = 0;  // first record index in the feature store
};

struct DatasetIndex {
  std::vector<SubjectEntry> entries;

  std::size_t window_total(Label l) const {
    std::size_t n = 0;
    for (const auto& e : entries)
      if (e.label == l) n += e.window_count;
    return n;
  }
  std::size_t subject_total(Label l) const {
    std::size_t n = 0;
    for (const auto& e : entries)
      if (e.label == l) ++n;
    return n;
  }
};

struct Fold {
  std::vector<std::string> train_subjects;
  std::vector<std::string> val_subjects;
};

struct FoldPlan {
  std::vector<std::string> test_subjects;
  std::vector<Fold> folds;
  std::uint64_t seed = 0;
};

namespace detail {

// Deterministic order regardless of how the caller built the index.
inline std::vector<const SubjectEntry*> sorted_class_members(
    const DatasetIndex& index, Label label) {
  std::vector<const SubjectEntry*> members;
  for (const auto& e : index.entries)
    if (e.label == label) members.push_back(&e);
  std::sort(members.begin(), members.end(),
            [](const SubjectEntry* a, const SubjectEntry* b) {
              return a->subject_id < b->subject_id;
            });
  return members;
}

}  // namespace detail

struct TestSplit {
  std::vector<std::string> train_val_subjects;
  std::vector<std::string> test_subjects;
};

// Class-stratified held-out split; per class, round(n * fraction) subjects
// go to test.
inline TestSplit split_test(const DatasetIndex& index,
                            double test_fraction = 0.30,
                            std::uint64_t seed = 0) {
  if (!(test_fraction > 0.0) || !(test_fraction < 1.0))
    throw InvalidFraction("test_fraction must be in (0, 1)");
  TestSplit split;
  for (Label label : {Label::Patient, Label::Healthy}) {
    auto members = detail::sorted_class_members(index, label);
    if (members.size() < 10)
      throw TooFewSubjects("need at least 10 subjects per class, got " +
                           std::to_string(members.size()) + " " +
                           to_string(label));
    Rng rng(derive_seed(seed, 0x5917 + static_cast<std::uint64_t>(label)));
    rng.shuffle(members);
    const auto n_test = static_cast<std::size_t>(
        std::lround(static_cast<double>(members.size()) * test_fraction));
    for (std::size_t i = 0; i < members.size(); ++i) {
      auto& dst =
          i < n_test ? split.test_subjects : split.train_val_subjects;
      dst.push_back(members[i]->subject_id);
    }
  }
  std::sort(split.test_subjects.begin(), split.test_subjects.end());
  std::sort(split.train_val_subjects.begin(), split.train_val_subjects.end());
  return split;
}

// Class-stratified subject-level k-fold partition of the train+val pool.
// Every subject lands in exactly one fold's validation set.
inline FoldPlan make_folds(const DatasetIndex& index,
                           const std::vector<std::string>& train_val_subjects,
                           std::size_t k = 10, std::uint64_t seed = 0) {
  if (k < 2) throw InvalidFraction("k must be >= 2");
  std::set<std::string> pool(train_val_subjects.begin(),
                             train_val_subjects.end());

  FoldPlan plan;
  plan.seed = seed;
  plan.folds.resize(k);
  std::vector<std::vector<std::string>> val_sets(k);

  for (Label label : {Label::Patient, Label::Healthy}) {
    std::vector<std::string> members;
    for (const auto* e : detail::sorted_class_members(index, label))
      if (pool.count(e->subject_id)) members.push_back(e->subject_id);
    if (members.size() < k)
      throw TooFewSubjects("fewer than k subjects of class " +
                           std::string(to_string(label)));
    Rng rng(derive_seed(seed, 0xF01D + static_cast<std::uint64_t>(label)));
    rng.shuffle(members);
    for (std::size_t i = 0; i < members.size(); ++i)
      val_sets[i % k].push_back(members[i]);
  }

  for (std::size_t f = 0; f < k; ++f) {
    std::sort(val_sets[f].begin(), val_sets[f].end());
    plan.folds[f].val_subjects = val_sets[f];
    std::set<std::string> val(val_sets[f].begin(), val_sets[f].end());
    for (const auto& s : pool)
      if (!val.count(s)) plan.folds[f].train_subjects.push_back(s);
  }
  return plan;
}

// Inverse window-count class weights over the training windows, indexed by
// Label (healthy, patient).
inline std::array<double, 2> class_weights(
    const DatasetIndex& index, const std::vector<std::string>& train_subjects) {
  std::set<std::string> pool(train_subjects.begin(), train_subjects.end());
  std::array<std::size_t, 2> counts{0, 0};
  for (const auto& e : index.entries)
    if (pool.count(e.subject_id))
      counts[static_cast<std::size_t>(e.label)] += e.window_count;
  if (counts[0] == 0 || counts[1] == 0)
    throw EmptyClass("both classes must be present in the training windows");
  return {1.0 / static_cast<double>(counts[0]),
          1.0 / static_cast<double>(counts[1])};
}

// Per fold, keep a class-stratified random fraction of the training
// subjects; validation (and the test split) stay untouched.
inline FoldPlan subsample_training(const DatasetIndex& index,
                                   const FoldPlan& plan, double fraction,
                                   std::uint64_t seed) {
  if (!(fraction > 0.0) || fraction > 1.0)
    throw InvalidFraction("fraction must be in (0, 1]");
  if (fraction == 1.0) return plan;

  FoldPlan out = plan;
  for (std::size_t f = 0; f < plan.folds.size(); ++f) {
    std::set<std::string> train(plan.folds[f].train_subjects.begin(),
                                plan.folds[f].train_subjects.end());
    std::vector<std::string> kept;
    for (Label label : {Label::Patient, Label::Healthy}) {
      std::vector<std::string> members;
      for (const auto* e : detail::sorted_class_members(index, label))
        if (train.count(e->subject_id)) members.push_back(e->subject_id);
      Rng rng(derive_seed(seed, 0x5AB5 + 131 * f +
                                    static_cast<std::uint64_t>(label)));
      rng.shuffle(members);
      auto n_keep = static_cast<std::size_t>(std::lround(
          static_cast<double>(members.size()) * fraction));
      n_keep = std::max<std::size_t>(1, std::min(n_keep, members.size()));
      members.resize(n_keep);
      kept.insert(kept.end(), members.begin(), members.end());
    }
    std::sort(kept.begin(), kept.end());
    out.folds[f].train_subjects = kept;
  }
  return out;
}

}  // namespace eeggraph
