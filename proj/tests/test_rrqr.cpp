#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "qrfs/kahan.hpp"
#include "qrfs/rrqr.hpp"

using qrfs::DenseMatrix;

namespace {

// |det R'11| / |det R11| after exchanging columns i and k+j of R, computed by
// re-orthogonalizing the permuted leading columns from scratch.
double det_ratio_oracle(const DenseMatrix& r, std::size_t k, std::size_t i, std::size_t j) {
  DenseMatrix p = r;
  p.swap_columns(i, k + j);
  auto before = oracle::gram_schmidt_diagonal(r.block(0, 0, r.rows(), k));
  auto after = oracle::gram_schmidt_diagonal(p.block(0, 0, p.rows(), k));
  long double ratio = 1;
  for (std::size_t t = 0; t < k; ++t) ratio *= after[t] / before[t];
  return static_cast<double>(ratio);
}

DenseMatrix random_upper(std::size_t n, std::uint64_t seed) {
  auto a = oracle::random_matrix(n, n, seed);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = j + 1; i < n; ++i) a(i, j) = 0.0;
  for (std::size_t i = 0; i < n; ++i) a(i, i) = std::abs(a(i, i)) + 0.1;
  return a;
}

double sigma_min(const DenseMatrix& a) { return qrfs::jacobi_svd(a).singular_values.back(); }

void expect_valid_permutation(const std::vector<std::size_t>& perm, std::size_t n) {
  ASSERT_EQ(perm.size(), n);
  std::set<std::size_t> seen(perm.begin(), perm.end());
  EXPECT_EQ(seen.size(), n);
  EXPECT_LT(*seen.rbegin(), n);
}

} // namespace

TEST(Omega, DiagonalInverse) {
  auto w = qrfs::omega(DenseMatrix{{2, 0}, {0, 4}});
  EXPECT_DOUBLE_EQ(w[0], 0.5);
  EXPECT_DOUBLE_EQ(w[1], 0.25);
  auto e = qrfs::omega(DenseMatrix::identity(4));
  for (double v : e) EXPECT_DOUBLE_EQ(v, 1.0);
}

TEST(Omega, TwoByTwoHandInverse) {
  // inverse [[1, -1], [0, 1]]
  auto w = qrfs::omega(DenseMatrix{{1, 1}, {0, 1}});
  EXPECT_NEAR(w[0], std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(w[1], 1.0, 1e-15);
}

TEST(Omega, SingularCarriesIndex) {
  try {
    qrfs::omega(DenseMatrix{{1, 2, 3}, {0, 1, 1}, {0, 0, 0}});
    FAIL();
  } catch (const qrfs::rank_deficiency_error& e) {
    EXPECT_EQ(e.index(), 2u);
  }
}

TEST(Gamma, ColumnNorms) {
  auto g = qrfs::gamma(DenseMatrix{{3, 0}, {4, 0}, {0, 5}});
  EXPECT_DOUBLE_EQ(g[0], 5.0);
  EXPECT_DOUBLE_EQ(g[1], 5.0);
  for (double v : qrfs::gamma(DenseMatrix(3, 4))) EXPECT_EQ(v, 0.0);
  auto a = oracle::random_matrix(6, 3, 77);
  auto ga = qrfs::gamma(a);
  for (std::size_t j = 0; j < 3; ++j) {
    double s = 0;
    for (std::size_t i = 0; i < 6; ++i) s += a(i, j) * a(i, j);
    EXPECT_NEAR(ga[j], std::sqrt(s), 1e-14);
  }
}

TEST(SwapCriterion, ExactlyRankKGivesZero) {
  DenseMatrix r{{2, 1, 0, 0}, {0, 3, 0, 0}, {0, 0, 0, 0}};
  auto c = qrfs::criterion_matrix(r, 2);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j) EXPECT_EQ(c(i, j), 0.0);
}

TEST(SwapCriterion, ScalarCase) {
  const double x = 0.7, y = -1.3;
  DenseMatrix r{{1, x}, {0, y}};
  EXPECT_NEAR(qrfs::swap_criterion(r, 1, 0, 0), x * x + y * y, 1e-15);
}

TEST(SwapCriterion, MatchesDeterminantRatioOracle) {
  auto r = random_upper(5, 31);
  const std::size_t k = 2;
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < 5 - k; ++j) {
      const double ratio = det_ratio_oracle(r, k, i, j);
      const double crit = qrfs::swap_criterion(r, k, i, j);
      EXPECT_NEAR(std::sqrt(crit) / ratio, 1.0, 1e-8) << i << "," << j;
    }
}

TEST(SwapCriterion, DeterminantRatioOnRandomTuples) {
  std::mt19937_64 gen(5);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 3 + gen() % 8, k = 1 + gen() % (n - 1);
    auto r = random_upper(n, gen());
    const std::size_t i = gen() % k, j = gen() % (n - k);
    const double ratio = det_ratio_oracle(r, k, i, j);
    EXPECT_NEAR(std::sqrt(qrfs::swap_criterion(r, k, i, j)) / ratio, 1.0, 1e-8);
  }
}

TEST(StrongRrqr, AlreadyOptimalNeedsNoSwaps) {
  qrfs::RrqrConfig cfg;
  cfg.k = 2;
  auto fact = qrfs::strong_rrqr(DenseMatrix{{3, 0, 0}, {0, 2, 0}, {0, 0, 1}}, cfg);
  EXPECT_EQ(fact.perm[0], 0u);
  EXPECT_EQ(fact.perm[1], 1u);
  EXPECT_EQ(fact.swaps_performed, 0u);
}

TEST(StrongRrqr, DuplicateColumnPickedOnce) {
  // columns (c, c, d) with c ⊥ d
  DenseMatrix a{{1, 1, 0}, {2, 2, 0}, {0, 0, 1.5}, {0, 0, 0.5}};
  qrfs::RrqrConfig cfg;
  cfg.k = 2;
  auto fact = qrfs::strong_rrqr(a, cfg);
  std::set<std::size_t> sel{fact.perm[0], fact.perm[1]};
  EXPECT_TRUE(sel.count(2));
  EXPECT_TRUE(sel.count(0) != sel.count(1));
  EXPECT_LE(qrfs::frobenius_norm(fact.r22()), 1e-12);

  // brute force over all 2-subsets maximizing σ_min
  double best = -1;
  std::set<std::size_t> best_set;
  for (auto s : oracle::subsets(3, 2)) {
    const double v = sigma_min(a.select_columns(s));
    if (v > best + 1e-12) {
      best = v;
      best_set = {s.begin(), s.end()};
    }
  }
  EXPECT_NEAR(sigma_min(a.select_columns(std::vector<std::size_t>(sel.begin(), sel.end()))),
              best, 1e-12);
}

TEST(StrongRrqr, KahanRecoversTrailingSingularValue) {
  const std::size_t n = 32, k = 31;
  const double f = 1.1;
  auto a = qrfs::kahan_matrix(n, 0.2, 25.0);
  const double sk = qrfs::jacobi_svd(a).singular_values[k - 1];

  auto base = qrfs::column_pivoted_qr(a);
  const double base_min = sigma_min(base.qr.r.block(0, 0, k, k));
  EXPECT_GE(sk / base_min, 10.0);

  qrfs::RrqrConfig cfg;
  cfg.k = k;
  cfg.f = f;
  auto fact = qrfs::strong_rrqr(a, cfg);
  EXPECT_GT(fact.swaps_performed, 0u);
  const double bound = sk / std::sqrt(1.0 + f * f * double(k) * double(n - k));
  EXPECT_GE(sigma_min(fact.r11()), bound);
  EXPECT_LE(fact.certificate, f * f + 1e-8);
}

TEST(StrongRrqr, DeterminantGrowsByMoreThanFPerSwap) {
  std::size_t total = 0;
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    auto a = fixtures::correlated_matrix(14, 9, seed);
    qrfs::RrqrConfig cfg;
    cfg.k = 3 + seed % 4;
    cfg.f = 1.05;
    cfg.pivoted_start = false;
    auto fact = qrfs::strong_rrqr(a, cfg);
    ASSERT_EQ(fact.log_det_trace.size(), fact.swaps_performed + 1);
    total += fact.swaps_performed;
    for (std::size_t s = 1; s < fact.log_det_trace.size(); ++s)
      EXPECT_GT(fact.log_det_trace[s] - fact.log_det_trace[s - 1], std::log(cfg.f) - 1e-12);
  }
  EXPECT_GT(total, 8u);
}

TEST(StrongRrqr, CertificateByExhaustiveDeterminantScan) {
  // independent of criterion_matrix: every exchange is re-orthogonalized
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    auto a = fixtures::correlated_matrix(14, 9, seed);
    qrfs::RrqrConfig cfg;
    cfg.k = 3 + seed % 4;
    cfg.f = 1.1;
    cfg.pivoted_start = seed % 2 == 0;
    auto fact = qrfs::strong_rrqr(a, cfg);
    expect_valid_permutation(fact.perm, 9);
    for (std::size_t i = 0; i < cfg.k; ++i)
      for (std::size_t j = 0; j < 9 - cfg.k; ++j) {
        const double ratio = det_ratio_oracle(fact.r, cfg.k, i, j);
        EXPECT_LE(ratio * ratio, cfg.f * cfg.f + 1e-8);
      }
  }
}

TEST(StrongRrqr, ResidualEqualsLargestTrailingSingularValue) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto a = fixtures::correlated_matrix(20, 12, 100 + seed);
    qrfs::RrqrConfig cfg;
    cfg.k = 4;
    auto fact = qrfs::strong_rrqr(a, cfg);
    auto q1 = fact.q.block(0, 0, a.rows(), cfg.k);
    auto top = fact.r.block(0, 0, cfg.k, a.cols());
    auto resid = qrfs::permute_columns(a, fact.perm) - q1 * top;
    const double lhs = qrfs::spectral_norm(resid), rhs = qrfs::spectral_norm(fact.r22());
    EXPECT_NEAR(lhs / rhs, 1.0, 1e-8);
  }
}

TEST(StrongRrqr, DeterminantIdentityOnSquareInput) {
  // ∏σ(R11)·∏σ(R22) = √det(AᵀA) = |det A|
  auto a = oracle::random_matrix(9, 9, 4242);
  qrfs::RrqrConfig cfg;
  cfg.k = 4;
  auto fact = qrfs::strong_rrqr(a, cfg);
  long double prod = 1;
  for (double s : qrfs::jacobi_svd(fact.r11()).singular_values) prod *= s;
  for (double s : qrfs::jacobi_svd(fact.r22()).singular_values) prod *= s;
  const long double det = std::fabs(oracle::lu_determinant(a));
  EXPECT_LT(std::fabs(prod - det) / det, 1e-6L);
}

TEST(StrongRrqr, ConfigValidation) {
  auto a = oracle::random_matrix(5, 4, 1);
  qrfs::RrqrConfig cfg;
  cfg.k = 2;
  cfg.f = 1.0;
  EXPECT_THROW(qrfs::strong_rrqr(a, cfg), qrfs::validation_error);
  cfg.f = 1.1;
  cfg.k = 0;
  EXPECT_THROW(qrfs::strong_rrqr(a, cfg), qrfs::validation_error);
  cfg.k = 5;
  EXPECT_THROW(qrfs::strong_rrqr(a, cfg), qrfs::validation_error);
}

TEST(StrongRrqr, SwapCapRaisesNontermination) {
  auto a = fixtures::correlated_matrix(14, 9, 4);
  qrfs::RrqrConfig cfg;
  cfg.k = 3;
  cfg.pivoted_start = false;
  cfg.max_swaps = 1;
  auto full = cfg;
  full.max_swaps = 0;
  ASSERT_GT(qrfs::strong_rrqr(a, full).swaps_performed, 1u);
  EXPECT_THROW(qrfs::strong_rrqr(a, cfg), qrfs::nontermination_error);
}

TEST(StrongRrqr, RankDeficientCarriesPartialResult) {
  auto b = oracle::random_matrix(6, 2, 3);
  DenseMatrix a(6, 4);
  for (std::size_t i = 0; i < 6; ++i) {
    a(i, 0) = b(i, 0);
    a(i, 1) = b(i, 1);
    a(i, 2) = b(i, 0) - b(i, 1);
    a(i, 3) = 2 * b(i, 1);
  }
  qrfs::RrqrConfig cfg;
  cfg.k = 3;
  try {
    qrfs::strong_rrqr(a, cfg);
    FAIL();
  } catch (const qrfs::rrqr_rank_deficiency_error& e) {
    EXPECT_EQ(e.index(), 2u);
    expect_valid_permutation(e.partial().perm, 4);
  }
}

TEST(SelectRrqr, DiagonalData) {
  auto sel = qrfs::select_features_rrqr(DenseMatrix{{5, 0, 0}, {0, 3, 0}, {0, 0, 1}}, 2, 1.1);
  EXPECT_EQ(sel.selected, (std::vector<std::size_t>{0, 1}));
  EXPECT_NEAR(sel.scores[0], 5.0, 1e-14);
  EXPECT_NEAR(sel.scores[1], 3.0, 1e-14);
  EXPECT_EQ(sel.method, "rrqr");
  EXPECT_TRUE(sel.warnings.empty());
}

TEST(SelectRrqr, PlantedRecoveryReconstructsAllColumns) {
  const double noise = 1e-3;
  auto data = fixtures::planted_copies(100, 50, 5, noise, 17);
  auto sel = qrfs::select_features_rrqr(data, 5, 1.1);
  ASSERT_EQ(sel.selected.size(), 5u);
  const double resid = oracle::least_squares_residual(data.select_columns(sel.selected), data);
  // noise floor: ‖noise‖_F over the 45 noisy copies
  const double floor = noise * std::sqrt(100.0 * 45.0);
  EXPECT_LE(resid, 10.0 * floor);
}

TEST(SelectRrqr, FullRankMakesTrailingBlockNegligible) {
  auto a = oracle::random_matrix(12, 7, 8);
  qrfs::RrqrConfig cfg;
  cfg.k = 7;
  auto fact = qrfs::strong_rrqr(a, cfg);
  EXPECT_LE(qrfs::frobenius_norm(fact.r22()), 1e-10 * qrfs::frobenius_norm(a));
  auto sel = qrfs::select_features_rrqr(a, 7);
  EXPECT_EQ(sel.selected.size(), 7u);
}

TEST(SelectRrqr, TruncatesAboveRankWithWarning) {
  auto data = fixtures::duplicated_features(30, 6, 9); // 12 columns, rank 6
  auto sel = qrfs::select_features_rrqr(data, 10);
  EXPECT_EQ(sel.selected.size(), 6u);
  ASSERT_EQ(sel.warnings.size(), 1u);
  EXPECT_NE(sel.warnings[0].find("rank_truncation"), std::string::npos);
  std::set<std::size_t> originals;
  for (auto s : sel.selected) originals.insert(s % 6);
  EXPECT_EQ(originals.size(), 6u);
}

TEST(SelectRrqr, Deterministic) {
  auto data = fixtures::correlated_matrix(40, 25, 3);
  auto a = qrfs::select_features_rrqr(data, 8);
  auto b = qrfs::select_features_rrqr(data, 8);
  EXPECT_EQ(a.selected, b.selected);
  EXPECT_EQ(a.scores, b.scores);
  EXPECT_THROW(qrfs::select_features_rrqr(data, 26), qrfs::validation_error);
}
