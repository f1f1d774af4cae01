#pragma once

// Seeded synthetic datasets shared by the unit and acceptance suites.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "qrfs/dataset.hpp"
#include "qrfs/matrix.hpp"

namespace fixtures {

using qrfs::DenseMatrix;

/// Low-rank-plus-noise matrix with uneven column scales, so pivoted QR is
/// usually not already strong and a few swaps happen.
inline DenseMatrix correlated_matrix(std::size_t m, std::size_t n, std::uint64_t seed,
                                     std::size_t latent = 3, double noise = 0.05) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_real_distribution<double> scale(0.3, 3.0);
  DenseMatrix b(m, latent), c(latent, n), a(m, n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t l = 0; l < latent; ++l) b(i, l) = z(gen);
  for (std::size_t l = 0; l < latent; ++l)
    for (std::size_t j = 0; j < n; ++j) c(l, j) = z(gen);
  for (std::size_t j = 0; j < n; ++j) {
    const double s = scale(gen);
    for (std::size_t i = 0; i < m; ++i) {
      double v = 0;
      for (std::size_t l = 0; l < latent; ++l) v += b(i, l) * c(l, j);
      a(i, j) = s * (v + noise * z(gen));
    }
  }
  return a;
}

/// Columns 0..signals-1 are independent Gaussian signals; every later column
/// j is a copy of column j mod signals plus `noise`·N(0, 1).
inline DenseMatrix planted_copies(std::size_t m, std::size_t n, std::size_t signals, double noise,
                                  std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  DenseMatrix a(m, n);
  for (std::size_t j = 0; j < signals; ++j)
    for (std::size_t i = 0; i < m; ++i) a(i, j) = z(gen);
  for (std::size_t j = signals; j < n; ++j)
    for (std::size_t i = 0; i < m; ++i) a(i, j) = a(i, j % signals) + noise * z(gen);
  return a;
}

/// `base` random columns followed by exact copies: column base + j equals
/// column j.
inline DenseMatrix duplicated_features(std::size_t m, std::size_t base, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  DenseMatrix a(m, 2 * base);
  for (std::size_t j = 0; j < base; ++j)
    for (std::size_t i = 0; i < m; ++i) a(i, j) = a(i, j + base) = z(gen);
  return a;
}

/// Nonnegative planted NMF fixture: `groups` orthogonal signals with
/// disjoint sample supports, each duplicated with small noise until there
/// are n features. Feature j belongs to group j mod groups.
inline DenseMatrix planted_groups(std::size_t m, std::size_t n, std::size_t groups, double noise,
                                  std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(0.5, 1.5);
  std::normal_distribution<double> z(0.0, 1.0);
  DenseMatrix a(m, n);
  for (std::size_t g = 0; g < groups; ++g)
    for (std::size_t i = 0; i < m; ++i)
      if (i % groups == g) a(i, g) = u(gen);
  for (std::size_t j = groups; j < n; ++j)
    for (std::size_t i = 0; i < m; ++i)
      a(i, j) = std::abs(a(i, j % groups) + noise * z(gen));
  return a;
}

/// Two-class labeled set: `informative` features carry a class-dependent
/// mean shift, `redundant` features are noisy mixtures of the informative
/// ones, and the rest are pure noise with a larger variance.
inline qrfs::LabeledDataset planted_classification(std::size_t m, std::size_t informative,
                                                   std::size_t redundant, std::size_t noise_features,
                                                   std::uint64_t seed, double shift = 1.5,
                                                   double noise_scale = 3.0) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick(0, informative - 1);
  const std::size_t n = informative + redundant + noise_features;
  qrfs::LabeledDataset d;
  d.x = DenseMatrix(m, n);
  d.y.resize(m);
  d.class_count = 2;
  for (std::size_t i = 0; i < m; ++i) {
    d.y[i] = static_cast<int>(i % 2);
    const double sign = d.y[i] ? 1.0 : -1.0;
    for (std::size_t j = 0; j < informative; ++j) d.x(i, j) = sign * shift * 0.5 + z(gen);
  }
  for (std::size_t j = informative; j < informative + redundant; ++j) {
    const std::size_t a = pick(gen), b = pick(gen);
    const double wa = 0.5 + 0.5 * std::abs(z(gen)), wb = 0.5 * z(gen);
    for (std::size_t i = 0; i < m; ++i)
      d.x(i, j) = wa * d.x(i, a) + wb * d.x(i, b) + 0.3 * z(gen);
  }
  for (std::size_t j = informative + redundant; j < n; ++j)
    for (std::size_t i = 0; i < m; ++i) d.x(i, j) = noise_scale * z(gen);
  return d;
}

} // namespace fixtures
