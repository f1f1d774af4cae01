#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "qrfs/dataset.hpp"
#include "qrfs/matrix.hpp"

namespace qrfs {

// ---------------------------------------------------------------- k-NN

/// Majority vote among the k nearest training rows (Euclidean). Distance ties
/// go to the lower training index, vote ties to the lower class code.
inline std::vector<int> knn_classify(const LabeledDataset& train, const DenseMatrix& queries,
                                     std::size_t k) {
  const std::size_t m = train.samples();
  if (m == 0) throw validation_error("knn: empty training set");
  if (k < 1 || k > m) throw validation_error("knn: k must lie in [1, training size]");
  if (queries.cols() != train.features())
    throw validation_error("knn: query feature count differs from training data");
  std::vector<int> out(queries.rows());
  std::vector<std::pair<double, std::size_t>> dist(m);
  std::vector<std::size_t> votes(static_cast<std::size_t>(std::max(train.class_count, 1)));
  for (std::size_t q = 0; q < queries.rows(); ++q) {
    for (std::size_t i = 0; i < m; ++i) {
      double s = 0.0;
      for (std::size_t c = 0; c < queries.cols(); ++c) {
        const double d = train.x(i, c) - queries(q, c);
        s += d * d;
      }
      dist[i] = {s, i};
    }
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
    std::fill(votes.begin(), votes.end(), 0);
    for (std::size_t t = 0; t < k; ++t) ++votes[static_cast<std::size_t>(train.y[dist[t].second])];
    out[q] = static_cast<int>(std::max_element(votes.begin(), votes.end()) - votes.begin());
  }
  return out;
}

// ---------------------------------------------------------------- tree

/// Axis-aligned binary tree; `x[feature] <= threshold` goes left.
struct TreeModel {
  struct Node {
    std::size_t feature = 0;
    double threshold = 0.0;
    std::size_t left = 0, right = 0;
    int label = 0;
    bool leaf = true;
  };
  std::vector<Node> nodes;
  std::size_t feature_count = 0;

  std::size_t depth() const {
    std::function<std::size_t(std::size_t)> rec = [&](std::size_t i) -> std::size_t {
      if (nodes[i].leaf) return 0;
      return 1 + std::max(rec(nodes[i].left), rec(nodes[i].right));
    };
    return nodes.empty() ? 0 : rec(0);
  }
};

namespace detail {

inline double entropy(const std::vector<std::size_t>& counts, std::size_t total) {
  if (total == 0) return 0.0;
  double h = 0.0;
  for (auto c : counts)
    if (c) {
      const double p = static_cast<double>(c) / static_cast<double>(total);
      h -= p * std::log2(p);
    }
  return h;
}

inline int majority(const std::vector<std::size_t>& counts) {
  return static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
}

} // namespace detail

/// Greedy information-gain tree without pruning. Thresholds are midpoints of
/// consecutive distinct values. Zero-gain splits are accepted on impure nodes
/// (otherwise XOR-like data could never be split); ties go to the lowest
/// feature, then the lowest threshold.
inline TreeModel train_tree(const LabeledDataset& train, std::size_t max_depth = 16,
                            std::size_t min_leaf = 1) {
  if (min_leaf < 1) throw validation_error("tree: min_leaf must be at least 1");
  if (train.samples() == 0) throw validation_error("tree: empty training set");
  const auto nc = static_cast<std::size_t>(std::max(train.class_count, 1));
  TreeModel model;
  model.feature_count = train.features();

  std::function<std::size_t(std::vector<std::size_t>, std::size_t)> grow =
      [&](std::vector<std::size_t> idx, std::size_t depth) -> std::size_t {
    std::vector<std::size_t> counts(nc, 0);
    for (auto i : idx) ++counts[static_cast<std::size_t>(train.y[i])];
    const std::size_t self = model.nodes.size();
    model.nodes.push_back({});
    model.nodes[self].label = detail::majority(counts);
    const bool pure = std::count(counts.begin(), counts.end(), 0) == static_cast<std::ptrdiff_t>(nc - 1);
    if (pure || depth >= max_depth || idx.size() < 2 * min_leaf) return self;

    const double parent = detail::entropy(counts, idx.size());
    double best_gain = -1.0, best_thr = 0.0;
    std::size_t best_f = 0;
    std::vector<std::size_t> order(idx);
    for (std::size_t f = 0; f < train.features(); ++f) {
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) { return train.x(a, f) < train.x(b, f); });
      std::vector<std::size_t> left(nc, 0), right = counts;
      for (std::size_t t = 0; t + 1 < order.size(); ++t) {
        const auto c = static_cast<std::size_t>(train.y[order[t]]);
        ++left[c];
        --right[c];
        const double lo = train.x(order[t], f), hi = train.x(order[t + 1], f);
        if (!(lo < hi)) continue;
        const std::size_t nl = t + 1, nr = order.size() - nl;
        if (nl < min_leaf || nr < min_leaf) continue;
        const double child = (static_cast<double>(nl) * detail::entropy(left, nl) +
                              static_cast<double>(nr) * detail::entropy(right, nr)) /
                             static_cast<double>(order.size());
        const double gain = parent - child;
        // strict improvement beyond roundoff keeps the tie-break stable
        if (gain > best_gain + 1e-12) {
          best_gain = gain;
          best_f = f;
          best_thr = lo + 0.5 * (hi - lo);
        }
      }
    }
    if (best_gain < 0.0) return self;

    std::vector<std::size_t> li, ri;
    for (auto i : idx) (train.x(i, best_f) <= best_thr ? li : ri).push_back(i);
    model.nodes[self].leaf = false;
    model.nodes[self].feature = best_f;
    model.nodes[self].threshold = best_thr;
    const std::size_t l = grow(std::move(li), depth + 1);
    const std::size_t r = grow(std::move(ri), depth + 1);
    model.nodes[self].left = l;
    model.nodes[self].right = r;
    return self;
  };

  std::vector<std::size_t> all(train.samples());
  std::iota(all.begin(), all.end(), std::size_t{0});
  grow(std::move(all), 0);
  return model;
}

inline std::vector<int> tree_classify(const TreeModel& model, const DenseMatrix& queries) {
  if (model.nodes.empty()) throw validation_error("tree: model is empty");
  if (queries.cols() != model.feature_count)
    throw validation_error("tree: query feature count differs from training data");
  std::vector<int> out(queries.rows());
  for (std::size_t q = 0; q < queries.rows(); ++q) {
    std::size_t n = 0;
    while (!model.nodes[n].leaf)
      n = queries(q, model.nodes[n].feature) <= model.nodes[n].threshold ? model.nodes[n].left
                                                                          : model.nodes[n].right;
    out[q] = model.nodes[n].label;
  }
  return out;
}

// ---------------------------------------------------------------- classifier slot

enum class ClassifierKind { knn, tree, majority };

struct ClassifierSpec {
  ClassifierKind kind = ClassifierKind::knn;
  std::size_t knn_k = 5;
  std::size_t max_depth = 16;
  std::size_t min_leaf = 1;
};

inline std::string to_string(ClassifierKind k) {
  switch (k) {
  case ClassifierKind::knn: return "knn";
  case ClassifierKind::tree: return "tree";
  case ClassifierKind::majority: return "majority";
  }
  return "?";
}

inline ClassifierKind classifier_from_string(const std::string& s) {
  if (s == "knn") return ClassifierKind::knn;
  if (s == "tree") return ClassifierKind::tree;
  if (s == "majority") return ClassifierKind::majority;
  throw validation_error("unknown classifier '" + s + "' (expected knn, tree or majority)");
}

/// Fits on `train` and labels `queries`. k-NN clamps k to the training size.
inline std::vector<int> fit_predict(const ClassifierSpec& spec, const LabeledDataset& train,
                                    const DenseMatrix& queries) {
  switch (spec.kind) {
  case ClassifierKind::knn:
    return knn_classify(train, queries, std::min(spec.knn_k, train.samples()));
  case ClassifierKind::tree:
    return tree_classify(train_tree(train, spec.max_depth, spec.min_leaf), queries);
  case ClassifierKind::majority: {
    if (train.samples() == 0) throw validation_error("majority: empty training set");
    std::vector<std::size_t> counts(static_cast<std::size_t>(std::max(train.class_count, 1)), 0);
    for (int c : train.y) ++counts[static_cast<std::size_t>(c)];
    return std::vector<int>(queries.rows(), detail::majority(counts));
  }
  }
  throw validation_error("unknown classifier kind");
}

// ---------------------------------------------------------------- metrics

struct ConfusionCounts {
  std::size_t tp = 0, tn = 0, fp = 0, fn = 0;
  std::size_t total() const noexcept { return tp + tn + fp + fn; }
  ConfusionCounts& operator+=(const ConfusionCounts& o) {
    tp += o.tp;
    tn += o.tn;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
  bool operator==(const ConfusionCounts&) const = default;
};

inline ConfusionCounts confusion(std::span<const int> pred, std::span<const int> truth,
                                 int positive_class = 1) {
  if (pred.size() != truth.size())
    throw validation_error("confusion: prediction and truth lengths differ");
  ConfusionCounts c;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool p = pred[i] == positive_class, t = truth[i] == positive_class;
    if (p && t) ++c.tp;
    else if (!p && !t) ++c.tn;
    else if (p) ++c.fp;
    else ++c.fn;
  }
  return c;
}

/// Absent values mark a 0/0 denominator.
struct MetricVector {
  std::optional<double> accuracy, sensitivity, specificity, g_mean, precision, recall, f1;

  std::vector<std::pair<std::string, std::optional<double>>> entries() const {
    return {{"accuracy", accuracy},       {"sensitivity", sensitivity}, {"specificity", specificity},
            {"g_mean", g_mean},           {"precision", precision},     {"recall", recall},
            {"f1", f1}};
  }
  std::vector<std::string> undefined() const {
    std::vector<std::string> out;
    for (const auto& [name, v] : entries())
      if (!v) out.push_back(name);
    return out;
  }
};

namespace detail {

inline std::optional<double> ratio(double num, double den) {
  if (den == 0.0) return std::nullopt;
  return num / den;
}

} // namespace detail

inline MetricVector metrics(const ConfusionCounts& c) {
  if (c.total() == 0) throw validation_error("metrics: no samples counted");
  const auto tp = static_cast<double>(c.tp), tn = static_cast<double>(c.tn),
             fp = static_cast<double>(c.fp), fn = static_cast<double>(c.fn);
  MetricVector m;
  m.accuracy = (tp + tn) / (tp + tn + fp + fn);
  m.sensitivity = detail::ratio(tp, tp + fn);
  m.specificity = detail::ratio(tn, tn + fp);
  m.precision = detail::ratio(tp, tp + fp);
  m.recall = m.sensitivity;
  if (m.sensitivity && m.specificity) m.g_mean = std::sqrt(*m.sensitivity * *m.specificity);
  m.f1 = detail::ratio(2.0 * tp, 2.0 * tp + fp + fn);
  return m;
}

/// Binary data: metrics for `positive_class`. More than two classes: overall
/// accuracy plus one-vs-rest macro averages over the classes where each
/// metric is defined.
inline MetricVector evaluate_predictions(std::span<const int> pred, std::span<const int> truth,
                                         int class_count, int positive_class = 1) {
  if (class_count <= 2) return metrics(confusion(pred, truth, positive_class));
  MetricVector out;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == truth[i];
  if (pred.empty()) throw validation_error("metrics: no samples counted");
  out.accuracy = static_cast<double>(correct) / static_cast<double>(pred.size());
  using Field = std::optional<double> MetricVector::*;
  const Field fields[] = {&MetricVector::sensitivity, &MetricVector::specificity,
                          &MetricVector::g_mean,      &MetricVector::precision,
                          &MetricVector::recall,      &MetricVector::f1};
  std::vector<MetricVector> per;
  for (int c = 0; c < class_count; ++c) per.push_back(metrics(confusion(pred, truth, c)));
  for (auto f : fields) {
    double s = 0.0;
    std::size_t n = 0;
    for (const auto& m : per)
      if (m.*f) {
        s += *(m.*f);
        ++n;
      }
    if (n) out.*f = s / static_cast<double>(n);
  }
  return out;
}

// ---------------------------------------------------------------- DOB-SCV

struct FoldAssignment {
  std::vector<std::size_t> fold;
  std::size_t n_folds = 0;
  std::uint64_t seed = 0;

  std::vector<std::size_t> test_rows(std::size_t f) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < fold.size(); ++i)
      if (fold[i] == f) out.push_back(i);
    return out;
  }
  std::vector<std::size_t> train_rows(std::size_t f) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < fold.size(); ++i)
      if (fold[i] != f) out.push_back(i);
    return out;
  }
};

/// Distribution-optimally-balanced stratified folds. Per class, a seeded
/// random unassigned sample and its n_folds − 1 nearest unassigned
/// same-class neighbours are dealt to folds 0..n_folds−1; leftovers go to the
/// currently smallest folds. Per-class fold sizes differ by at most one.
inline FoldAssignment dobscv_folds(const LabeledDataset& data, std::size_t n_folds,
                                   std::uint64_t seed) {
  data.validate();
  if (n_folds < 1) throw validation_error("dobscv: n_folds must be at least 1");
  const std::size_t m = data.samples();
  FoldAssignment fa;
  fa.fold.assign(m, 0);
  fa.n_folds = n_folds;
  fa.seed = seed;
  if (n_folds == 1) return fa;

  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(data.class_count));
  for (std::size_t i = 0; i < m; ++i) by_class[static_cast<std::size_t>(data.y[i])].push_back(i);
  for (std::size_t c = 0; c < by_class.size(); ++c)
    if (by_class[c].size() < n_folds)
      throw validation_error("dobscv: class " + std::to_string(c) + " has " +
                             std::to_string(by_class[c].size()) + " samples, fewer than " +
                             std::to_string(n_folds) + " folds");

  std::mt19937_64 gen(seed);
  std::vector<std::size_t> fold_size(n_folds, 0);
  auto d2 = [&](std::size_t a, std::size_t b) {
    double s = 0.0;
    for (std::size_t c = 0; c < data.features(); ++c) {
      const double d = data.x(a, c) - data.x(b, c);
      s += d * d;
    }
    return s;
  };
  for (auto& members : by_class) {
    std::vector<std::size_t> left = members;
    while (left.size() >= n_folds) {
      std::uniform_int_distribution<std::size_t> pick(0, left.size() - 1);
      const std::size_t seed_pos = pick(gen);
      const std::size_t e = left[seed_pos];
      left.erase(left.begin() + static_cast<std::ptrdiff_t>(seed_pos));
      std::stable_sort(left.begin(), left.end(), [&](std::size_t a, std::size_t b) {
        const double da = d2(e, a), db = d2(e, b);
        return da < db || (da == db && a < b);
      });
      fa.fold[e] = 0;
      ++fold_size[0];
      for (std::size_t t = 1; t < n_folds; ++t) {
        fa.fold[left[t - 1]] = t;
        ++fold_size[t];
      }
      left.erase(left.begin(), left.begin() + static_cast<std::ptrdiff_t>(n_folds - 1));
      std::sort(left.begin(), left.end());
    }
    // fewer than n_folds remain: one each to the smallest folds
    std::vector<std::size_t> order(n_folds);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return fold_size[a] < fold_size[b]; });
    for (std::size_t t = 0; t < left.size(); ++t) {
      fa.fold[left[t]] = order[t];
      ++fold_size[order[t]];
    }
  }
  return fa;
}

// ---------------------------------------------------------------- cross-validation

/// Picks feature indices from a training portion.
using FeatureSelector = std::function<std::vector<std::size_t>(const LabeledDataset& train)>;

struct MetricSummary {
  double mean = 0.0;
  double sd = 0.0;
  std::size_t defined_folds = 0;
};

struct FoldReport {
  std::size_t fold = 0;
  std::vector<std::size_t> selected;
  std::vector<int> predictions;
  std::vector<std::size_t> test_rows;
  MetricVector metrics;
};

struct EvaluationReport {
  std::vector<FoldReport> folds;
  /// Metrics over all held-out predictions pooled together.
  MetricVector pooled;
  std::vector<std::pair<std::string, MetricSummary>> summary;
  ClassifierSpec classifier;
  int positive_class = 1;
  std::vector<std::string> warnings;
};

/// Runs the classifier over the folds. When `selector` is set it is called on
/// each training portion only, so selection never sees held-out rows; an
/// empty selector with empty `fixed` uses every feature.
inline EvaluationReport cross_validate(const LabeledDataset& data, const FoldAssignment& folds,
                                       const ClassifierSpec& classifier,
                                       const FeatureSelector& selector = {},
                                       std::vector<std::size_t> fixed = {},
                                       int positive_class = 1) {
  data.validate();
  if (folds.fold.size() != data.samples())
    throw validation_error("cross_validate: fold assignment does not match the sample count");
  if (selector && !fixed.empty())
    throw validation_error("cross_validate: give either a selector or a fixed subset");
  for (auto j : fixed)
    if (j >= data.features()) throw validation_error("cross_validate: feature index out of range");

  EvaluationReport rep;
  rep.classifier = classifier;
  rep.positive_class = positive_class;
  std::vector<int> all_pred, all_truth;
  const bool single = folds.n_folds == 1;
  for (std::size_t f = 0; f < folds.n_folds; ++f) {
    FoldReport fr;
    fr.fold = f;
    fr.test_rows = folds.test_rows(f);
    if (fr.test_rows.empty()) continue;
    // with one fold there is no held-out data; train and test coincide
    const auto train_rows = single ? fr.test_rows : folds.train_rows(f);
    auto train = data.rows(train_rows);
    auto test = data.rows(fr.test_rows);
    if (selector) fr.selected = selector(train);
    else if (!fixed.empty()) fr.selected = fixed;
    else {
      fr.selected.resize(data.features());
      std::iota(fr.selected.begin(), fr.selected.end(), std::size_t{0});
    }
    if (fr.selected.empty()) throw validation_error("cross_validate: selector returned no features");
    fr.predictions = fit_predict(classifier, train.columns(fr.selected), test.x.select_columns(fr.selected));
    fr.metrics = evaluate_predictions(fr.predictions, test.y, data.class_count, positive_class);
    all_pred.insert(all_pred.end(), fr.predictions.begin(), fr.predictions.end());
    all_truth.insert(all_truth.end(), test.y.begin(), test.y.end());
    rep.folds.push_back(std::move(fr));
  }
  rep.pooled = evaluate_predictions(all_pred, all_truth, data.class_count, positive_class);
  for (const auto& [name, value] : rep.pooled.entries()) {
    (void)value;
    std::vector<double> vals;
    for (const auto& fr : rep.folds)
      for (const auto& [n2, v] : fr.metrics.entries())
        if (n2 == name && v) vals.push_back(*v);
    MetricSummary s;
    s.defined_folds = vals.size();
    if (!vals.empty()) {
      s.mean = std::accumulate(vals.begin(), vals.end(), 0.0) / static_cast<double>(vals.size());
      double ss = 0.0;
      for (double v : vals) ss += (v - s.mean) * (v - s.mean);
      s.sd = vals.size() > 1 ? std::sqrt(ss / static_cast<double>(vals.size() - 1)) : 0.0;
    }
    if (s.defined_folds < rep.folds.size())
      rep.warnings.push_back("undefined_metric: " + name + " undefined in " +
                             std::to_string(rep.folds.size() - s.defined_folds) + " fold(s)");
    rep.summary.emplace_back(name, s);
  }
  return rep;
}

} // namespace qrfs
