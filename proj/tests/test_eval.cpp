#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include "fixtures.hpp"
#include "qrfs/eval.hpp"

using qrfs::DenseMatrix;
using qrfs::LabeledDataset;

namespace {

LabeledDataset make(DenseMatrix x, std::vector<int> y, int classes = 2) {
  LabeledDataset d;
  d.x = std::move(x);
  d.y = std::move(y);
  d.class_count = classes;
  return d;
}

LabeledDataset random_labeled(std::size_t m, std::size_t n, int classes, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  LabeledDataset d;
  d.x = DenseMatrix(m, n);
  d.class_count = classes;
  for (std::size_t i = 0; i < m; ++i) {
    d.y.push_back(static_cast<int>(i % static_cast<std::size_t>(classes)));
    for (std::size_t j = 0; j < n; ++j) d.x(i, j) = z(gen) + d.y.back();
  }
  return d;
}

// Sort every training row by (distance, index) and vote.
std::vector<int> knn_oracle(const LabeledDataset& tr, const DenseMatrix& q, std::size_t k) {
  std::vector<int> out;
  for (std::size_t r = 0; r < q.rows(); ++r) {
    std::vector<std::pair<long double, std::size_t>> d;
    for (std::size_t i = 0; i < tr.samples(); ++i) {
      long double s = 0;
      for (std::size_t c = 0; c < q.cols(); ++c) s += (long double)(tr.x(i, c) - q(r, c)) * (tr.x(i, c) - q(r, c));
      d.emplace_back(s, i);
    }
    std::sort(d.begin(), d.end());
    std::map<int, int> votes;
    for (std::size_t t = 0; t < k; ++t) ++votes[tr.y[d[t].second]];
    int best = -1, label = 0;
    for (auto [c, v] : votes)
      if (v > best) {
        best = v;
        label = c;
      }
    out.push_back(label);
  }
  return out;
}

} // namespace

TEST(Knn, ExactPointAndNearestSide) {
  auto tr = make(DenseMatrix{{0.0}, {10.0}}, {0, 1});
  EXPECT_EQ(qrfs::knn_classify(tr, DenseMatrix{{10.0}}, 1), std::vector<int>{1});
  EXPECT_EQ(qrfs::knn_classify(tr, DenseMatrix{{2.0}}, 1), std::vector<int>{0});
}

TEST(Knn, TiesGoToLowerIndexThenLowerClass) {
  auto tr = make(DenseMatrix{{-1.0}, {1.0}}, {1, 0});
  // equidistant: lower training index wins for k = 1
  EXPECT_EQ(qrfs::knn_classify(tr, DenseMatrix{{0.0}}, 1), std::vector<int>{1});
  // one vote each: lower class code wins
  EXPECT_EQ(qrfs::knn_classify(tr, DenseMatrix{{0.0}}, 2), std::vector<int>{0});
}

TEST(Knn, MatchesAllDistancesOracle) {
  auto tr = random_labeled(50, 4, 3, 7);
  auto q = random_labeled(20, 4, 3, 8).x;
  EXPECT_EQ(qrfs::knn_classify(tr, q, 5), knn_oracle(tr, q, 5));
}

TEST(Knn, FullNeighbourhoodIsGlobalMajority) {
  auto tr = make(DenseMatrix{{0.0}, {1.0}, {2.0}, {50.0}, {51.0}}, {1, 1, 0, 0, 0});
  auto pred = qrfs::knn_classify(tr, DenseMatrix{{0.0}, {1.0}, {100.0}}, 5);
  EXPECT_EQ(pred, (std::vector<int>{0, 0, 0}));
}

TEST(Knn, Validation) {
  auto tr = make(DenseMatrix{{0.0}, {1.0}}, {0, 1});
  EXPECT_THROW(qrfs::knn_classify(tr, DenseMatrix{{0.0}}, 0), qrfs::validation_error);
  EXPECT_THROW(qrfs::knn_classify(tr, DenseMatrix{{0.0}}, 3), qrfs::validation_error);
  EXPECT_THROW(qrfs::knn_classify(make(DenseMatrix(0, 1), {}), DenseMatrix{{0.0}}, 1),
               qrfs::validation_error);
}

TEST(Tree, ThresholdSeparableIsDepthOne) {
  auto tr = make(DenseMatrix{{0.0}, {1.0}, {2.0}, {5.0}, {6.0}}, {0, 0, 0, 1, 1});
  auto t = qrfs::train_tree(tr);
  EXPECT_EQ(t.depth(), 1u);
  EXPECT_DOUBLE_EQ(t.nodes[0].threshold, 3.5);
  EXPECT_EQ(qrfs::tree_classify(t, tr.x), tr.y);
}

TEST(Tree, SingleClassIsConstant) {
  auto tr = make(DenseMatrix{{0.0}, {1.0}, {2.0}}, {1, 1, 1});
  auto t = qrfs::train_tree(tr);
  EXPECT_EQ(t.depth(), 0u);
  EXPECT_EQ(qrfs::tree_classify(t, DenseMatrix{{-5.0}, {9.0}}), (std::vector<int>{1, 1}));
}

TEST(Tree, SolvesXor) {
  auto tr = make(DenseMatrix{{0, 0}, {0, 1}, {1, 0}, {1, 1}}, {0, 1, 1, 0});
  auto t = qrfs::train_tree(tr, 2);
  EXPECT_EQ(t.depth(), 2u);
  EXPECT_EQ(qrfs::tree_classify(t, tr.x), tr.y);
  // the first split has zero gain everywhere, so the tie-break picks feature 0
  EXPECT_EQ(t.nodes[0].feature, 0u);
  EXPECT_DOUBLE_EQ(t.nodes[0].threshold, 0.5);
}

TEST(Tree, RespectsMinLeafAndDepth) {
  auto tr = random_labeled(40, 3, 2, 4);
  auto t = qrfs::train_tree(tr, 3, 5);
  EXPECT_LE(t.depth(), 3u);
  EXPECT_THROW(qrfs::train_tree(tr, 3, 0), qrfs::validation_error);
}

TEST(Confusion, HandCounts) {
  std::vector<int> pred{1, 1, 0, 1, 0}, truth{1, 0, 0, 1, 1};
  auto c = qrfs::confusion(pred, truth);
  EXPECT_EQ(c, (qrfs::ConfusionCounts{2, 1, 1, 1}));
  std::vector<int> ones{1, 1, 1};
  EXPECT_EQ(qrfs::confusion(ones, ones), (qrfs::ConfusionCounts{3, 0, 0, 0}));
  std::vector<int> a{1, 0, 1}, b{0, 1, 0};
  auto flip = qrfs::confusion(a, b);
  EXPECT_EQ(flip.tp + flip.tn, 0u);
  std::vector<int> shorter{1};
  EXPECT_THROW(qrfs::confusion(shorter, b), qrfs::validation_error);
}

TEST(Metrics, HandExample) {
  auto m = qrfs::metrics({2, 1, 1, 1});
  EXPECT_DOUBLE_EQ(*m.accuracy, 0.6);
  EXPECT_DOUBLE_EQ(*m.sensitivity, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(*m.specificity, 0.5);
  EXPECT_DOUBLE_EQ(*m.precision, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(*m.f1, 2.0 / 3.0);
  EXPECT_NEAR(*m.g_mean, 0.5773502691896258, 1e-15);
  EXPECT_EQ(*m.recall, *m.sensitivity);
}

TEST(Metrics, AllCorrectAndUndefined) {
  auto m = qrfs::metrics({3, 2, 0, 0});
  for (const auto& [name, v] : m.entries()) {
    ASSERT_TRUE(v) << name;
    EXPECT_EQ(*v, 1.0) << name;
  }
  auto u = qrfs::metrics({0, 4, 0, 0});
  EXPECT_FALSE(u.sensitivity);
  EXPECT_FALSE(u.recall);
  EXPECT_FALSE(u.g_mean);
  EXPECT_FALSE(u.precision);
  EXPECT_FALSE(u.f1);
  EXPECT_EQ(*u.specificity, 1.0);
  EXPECT_EQ(u.undefined().size(), 5u);
  EXPECT_THROW(qrfs::metrics({}), qrfs::validation_error);
}

TEST(Metrics, IdentitiesOnRandomCounts) {
  std::mt19937_64 gen(12);
  std::uniform_int_distribution<std::size_t> cnt(0, 30);
  for (int t = 0; t < 500; ++t) {
    qrfs::ConfusionCounts c{cnt(gen), cnt(gen), cnt(gen), cnt(gen)};
    if (c.total() == 0) continue;
    auto m = qrfs::metrics(c);
    if (m.sensitivity && m.specificity) {
      EXPECT_NEAR(*m.g_mean * *m.g_mean, *m.sensitivity * *m.specificity, 1e-12);
    }
    if (m.precision && m.recall && *m.precision + *m.recall > 0) {
      EXPECT_NEAR(*m.f1, 2 * *m.precision * *m.recall / (*m.precision + *m.recall), 1e-12);
    }
  }
}

TEST(Metrics, MulticlassMacroAverage) {
  std::vector<int> truth{0, 1, 2, 0, 1, 2}, pred{0, 1, 1, 0, 2, 2};
  auto m = qrfs::evaluate_predictions(pred, truth, 3);
  EXPECT_DOUBLE_EQ(*m.accuracy, 4.0 / 6.0);
  // per-class recall 1, 0.5, 0.5
  EXPECT_DOUBLE_EQ(*m.sensitivity, 2.0 / 3.0);
}

TEST(DobScv, TenSamplesFiveFolds) {
  auto d = random_labeled(10, 2, 2, 3);
  auto f = qrfs::dobscv_folds(d, 5, 1);
  for (std::size_t k = 0; k < 5; ++k) {
    auto rows = f.test_rows(k);
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_NE(d.y[rows[0]], d.y[rows[1]]);
  }
}

TEST(DobScv, SingleFoldHoldsEverything) {
  auto d = random_labeled(7, 2, 2, 3);
  auto f = qrfs::dobscv_folds(d, 1, 1);
  EXPECT_EQ(f.test_rows(0).size(), 7u);
}

TEST(DobScv, BalanceOnRandomSets) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::mt19937_64 gen(seed);
    const int classes = 2 + static_cast<int>(seed % 3);
    const std::size_t folds = 2 + seed % 5;
    std::uniform_int_distribution<std::size_t> extra(0, 12);
    LabeledDataset d;
    d.class_count = classes;
    std::normal_distribution<double> z(0.0, 1.0);
    for (int c = 0; c < classes; ++c)
      for (std::size_t t = 0; t < folds + extra(gen); ++t) d.y.push_back(c);
    d.x = DenseMatrix(d.y.size(), 3);
    for (std::size_t i = 0; i < d.y.size(); ++i)
      for (std::size_t j = 0; j < 3; ++j) d.x(i, j) = z(gen);
    auto f = qrfs::dobscv_folds(d, folds, seed);
    for (int c = 0; c < classes; ++c) {
      std::vector<std::size_t> per(folds, 0);
      for (std::size_t i = 0; i < d.y.size(); ++i)
        if (d.y[i] == c) ++per[f.fold[i]];
      auto [lo, hi] = std::minmax_element(per.begin(), per.end());
      EXPECT_LE(*hi - *lo, 1u) << "seed " << seed << " class " << c;
    }
  }
}

TEST(DobScv, NeighbourGroupsAreSpreadAcrossFolds) {
  // two tight pairs per class: each pair lands in different folds
  auto d = make(DenseMatrix{{0.0}, {0.1}, {10.0}, {10.1}}, {0, 0, 0, 0}, 1);
  auto f = qrfs::dobscv_folds(d, 2, 5);
  EXPECT_NE(f.fold[0], f.fold[1]);
  EXPECT_NE(f.fold[2], f.fold[3]);
}

TEST(DobScv, SmallClassNamesTheClass) {
  auto d = make(DenseMatrix{{0.0}, {1.0}, {2.0}, {3.0}}, {0, 0, 0, 1});
  try {
    qrfs::dobscv_folds(d, 2, 0);
    FAIL();
  } catch (const qrfs::validation_error& e) {
    EXPECT_NE(std::string(e.what()).find("class 1"), std::string::npos);
  }
}

TEST(DobScv, DeterministicPerSeed) {
  auto d = random_labeled(30, 3, 3, 9);
  EXPECT_EQ(qrfs::dobscv_folds(d, 5, 4).fold, qrfs::dobscv_folds(d, 5, 4).fold);
}

TEST(CrossValidate, SeparableDataIsPerfect) {
  auto d = fixtures::planted_classification(40, 2, 0, 0, 1, 20.0);
  auto f = qrfs::dobscv_folds(d, 5, 0);
  auto rep = qrfs::cross_validate(d, f, {qrfs::ClassifierKind::knn, 1});
  EXPECT_EQ(*rep.pooled.accuracy, 1.0);
  EXPECT_EQ(rep.folds.size(), 5u);
}

TEST(CrossValidate, ConstantClassifierOnBalancedData) {
  auto d = random_labeled(40, 2, 2, 2);
  auto rep = qrfs::cross_validate(d, qrfs::dobscv_folds(d, 5, 0), {qrfs::ClassifierKind::majority});
  EXPECT_NEAR(*rep.pooled.accuracy, 0.5, 0.1);
}

TEST(CrossValidate, SelectionSeesOnlyTrainingRows) {
  auto d = random_labeled(30, 4, 2, 6);
  // feature 3 carries the row id so the selector can report what it saw
  for (std::size_t i = 0; i < d.samples(); ++i) d.x(i, 3) = static_cast<double>(i);
  auto folds = qrfs::dobscv_folds(d, 5, 2);
  std::vector<std::set<std::size_t>> seen;
  qrfs::FeatureSelector sel = [&](const LabeledDataset& train) {
    std::set<std::size_t> ids;
    for (std::size_t i = 0; i < train.samples(); ++i) ids.insert(static_cast<std::size_t>(train.x(i, 3)));
    seen.push_back(ids);
    return std::vector<std::size_t>{0, 1};
  };
  auto rep = qrfs::cross_validate(d, folds, {}, sel);
  ASSERT_EQ(seen.size(), 5u);
  for (std::size_t f = 0; f < 5; ++f) {
    for (auto r : rep.folds[f].test_rows) EXPECT_EQ(seen[f].count(r), 0u);
    EXPECT_EQ(seen[f].size() + rep.folds[f].test_rows.size(), 30u);
    EXPECT_EQ(rep.folds[f].selected, (std::vector<std::size_t>{0, 1}));
  }
}

TEST(CrossValidate, DeterministicAndSummarized) {
  auto d = fixtures::planted_classification(60, 3, 3, 10, 4);
  auto f = qrfs::dobscv_folds(d, 5, 3);
  auto a = qrfs::cross_validate(d, f, {qrfs::ClassifierKind::tree});
  auto b = qrfs::cross_validate(d, f, {qrfs::ClassifierKind::tree});
  ASSERT_EQ(a.folds.size(), b.folds.size());
  for (std::size_t i = 0; i < a.folds.size(); ++i) EXPECT_EQ(a.folds[i].predictions, b.folds[i].predictions);
  ASSERT_EQ(a.summary.size(), 7u);
  EXPECT_EQ(a.summary[0].first, "accuracy");
  EXPECT_EQ(a.summary[0].second.defined_folds, 5u);
  double mean = 0;
  for (const auto& fr : a.folds) mean += *fr.metrics.accuracy;
  EXPECT_NEAR(a.summary[0].second.mean, mean / 5.0, 1e-15);
}

TEST(CrossValidate, Validation) {
  auto d = random_labeled(20, 2, 2, 1);
  auto f = qrfs::dobscv_folds(d, 2, 0);
  EXPECT_THROW(qrfs::cross_validate(d, f, {}, {}, {7}), qrfs::validation_error);
  qrfs::FoldAssignment bad = f;
  bad.fold.pop_back();
  EXPECT_THROW(qrfs::cross_validate(d, bad, {}), qrfs::validation_error);
}
