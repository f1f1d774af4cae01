#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "qrfs/dataset.hpp"
#include "qrfs/eval.hpp"
#include "qrfs/rrqr.hpp"
#include "qrfs/selection.hpp"

namespace qrfs {

using Bits = std::vector<std::uint8_t>;

/// Maps a most-significant-bit-first segment with integer value ρ onto
/// min + (max − min)·ρ/(2^l − 1). Both endpoints are returned exactly.
inline double decode_segment(std::span<const std::uint8_t> bits, double min_p, double max_p) {
  const std::size_t l = bits.size();
  if (l < 1 || l > 52) throw validation_error("decode_segment: bit length must lie in [1, 52]");
  std::uint64_t rho = 0;
  for (auto b : bits) rho = (rho << 1) | (b ? 1u : 0u);
  const std::uint64_t top = (std::uint64_t{1} << l) - 1;
  if (rho == 0) return min_p;
  if (rho == top) return max_p;
  const long double step =
      (static_cast<long double>(max_p) - min_p) / static_cast<long double>(top);
  return static_cast<double>(min_p + step * static_cast<long double>(rho));
}

/// ω·error + (1 − ω)·size/total; lower is better.
inline double fitness(double cv_error, std::size_t subset_size, std::size_t total,
                      double omega_weight) {
  if (!(omega_weight > 0.0 && omega_weight < 1.0))
    throw validation_error("fitness: omega_weight must lie in (0, 1)");
  if (!(cv_error >= 0.0 && cv_error <= 1.0)) throw validation_error("fitness: error must lie in [0, 1]");
  if (subset_size == 0 || subset_size > total)
    throw validation_error("fitness: subset size must lie in [1, total]");
  return omega_weight * cv_error +
         (1.0 - omega_weight) * (static_cast<double>(subset_size) / static_cast<double>(total));
}

struct HyperSegment {
  std::string name;
  std::size_t bits = 4;
  double min_p = 0.0;
  double max_p = 1.0;
};

/// Hyperparameter segments first, then one bit per candidate feature.
struct ChromosomeLayout {
  std::vector<HyperSegment> segments;
  std::size_t feature_bits = 0;

  std::size_t hyper_bits() const {
    std::size_t s = 0;
    for (const auto& g : segments) s += g.bits;
    return s;
  }
  std::size_t total_bits() const { return hyper_bits() + feature_bits; }

  void validate() const {
    if (feature_bits < 1) throw validation_error("layout: need at least one feature bit");
    for (const auto& g : segments) {
      if (g.bits < 1 || g.bits > 52)
        throw validation_error("layout: segment '" + g.name + "' bit length must lie in [1, 52]");
      if (!(g.max_p > g.min_p))
        throw validation_error("layout: segment '" + g.name + "' needs max_p > min_p");
    }
  }
};

/// Default k-NN layout: k decoded from 4 bits over [1, 15].
inline ChromosomeLayout knn_layout(std::size_t feature_bits) {
  return {{{"k", 4, 1.0, 15.0}}, feature_bits};
}

inline ChromosomeLayout tree_layout(std::size_t feature_bits) {
  return {{{"max_depth", 4, 1.0, 16.0}, {"min_leaf", 3, 1.0, 8.0}}, feature_bits};
}

/// Two-segment RBF-SVM layout (C and gamma). There is no SVM engine here, so
/// evaluating it fails; it shows how segment lists are written.
inline ChromosomeLayout svm_layout_example(std::size_t feature_bits) {
  return {{{"C", 10, 0.1, 100.0}, {"gamma", 10, 0.0001, 1.0}}, feature_bits};
}

struct Chromosome {
  Bits bits;

  std::span<const std::uint8_t> segment(const ChromosomeLayout& layout, std::size_t s) const {
    std::size_t off = 0;
    for (std::size_t t = 0; t < s; ++t) off += layout.segments[t].bits;
    return std::span<const std::uint8_t>(bits).subspan(off, layout.segments[s].bits);
  }
  std::span<const std::uint8_t> feature_mask(const ChromosomeLayout& layout) const {
    return std::span<const std::uint8_t>(bits).subspan(layout.hyper_bits(), layout.feature_bits);
  }
  std::vector<std::size_t> features(const ChromosomeLayout& layout) const {
    std::vector<std::size_t> out;
    const auto mask = feature_mask(layout);
    for (std::size_t j = 0; j < mask.size(); ++j)
      if (mask[j]) out.push_back(j);
    return out;
  }
  std::map<std::string, double> decode(const ChromosomeLayout& layout) const {
    std::map<std::string, double> out;
    for (std::size_t s = 0; s < layout.segments.size(); ++s)
      out[layout.segments[s].name] =
          decode_segment(segment(layout, s), layout.segments[s].min_p, layout.segments[s].max_p);
    return out;
  }
  bool operator==(const Chromosome&) const = default;
};

struct GaConfig {
  double omega_weight = 0.8;
  std::size_t population = 50;
  std::size_t generations = 100;
  double crossover_rate = 0.9;
  /// Per-bit; 0 means 1/total_bits.
  double mutation_rate = 0.0;
  std::size_t tournament_size = 3;
  std::size_t elitism = 2;
  std::uint64_t seed = 0;
  std::size_t cv_folds = 5;
  double rrqr_f = 1.1;
  ClassifierKind classifier = ClassifierKind::knn;

  void validate() const {
    if (!(omega_weight > 0.0 && omega_weight < 1.0))
      throw validation_error("ga: omega_weight must lie in (0, 1)");
    if (population < 2) throw validation_error("ga: population must be at least 2");
    if (!(crossover_rate >= 0.0 && crossover_rate <= 1.0))
      throw validation_error("ga: crossover_rate must lie in [0, 1]");
    if (!(mutation_rate >= 0.0 && mutation_rate <= 1.0))
      throw validation_error("ga: mutation_rate must lie in [0, 1]");
    if (tournament_size < 1) throw validation_error("ga: tournament_size must be at least 1");
    if (elitism > population) throw validation_error("ga: elitism exceeds the population");
    if (cv_folds < 1) throw validation_error("ga: cv_folds must be at least 1");
    if (!(rrqr_f > 1.0)) throw validation_error("ga: rrqr_f must be > 1");
  }
};

struct FitnessRecord {
  double fitness = 0.0;
  double cv_error = 0.0;
  std::size_t subset_size = 0;
  std::size_t total_features = 0;
  std::map<std::string, double> decoded_params;
  Chromosome chromosome;
  /// Folds whose classifier threw; each counted as error 1.
  std::size_t failed_folds = 0;
};

struct GenerationStats {
  double best = 0.0;
  double mean = 0.0;
};

struct GaResult {
  FitnessRecord best;
  /// Entry 0 is the initial population, then one entry per generation.
  std::vector<GenerationStats> history;
  SelectionResult selection;
  std::size_t evaluations = 0;
  std::size_t cache_hits = 0;
};

/// Turns decoded segment values into a classifier. Unknown segment names are
/// rejected so a layout cannot silently do nothing.
inline ClassifierSpec classifier_for(ClassifierKind kind, const std::map<std::string, double>& params,
                                     std::size_t train_size) {
  ClassifierSpec spec;
  spec.kind = kind;
  auto as_count = [](double v) {
    return static_cast<std::size_t>(std::max(1.0, std::round(v)));
  };
  for (const auto& [name, v] : params) {
    if (name == "k" && kind == ClassifierKind::knn) spec.knn_k = std::min(as_count(v), train_size);
    else if (name == "max_depth" && kind == ClassifierKind::tree) spec.max_depth = as_count(v);
    else if (name == "min_leaf" && kind == ClassifierKind::tree) spec.min_leaf = as_count(v);
    else
      throw validation_error("ga: no " + to_string(kind) + " engine parameter named '" + name + "'");
  }
  return spec;
}

/// Cross-validated fitness with a per-run cache keyed by the bit string.
/// Folds are drawn once from the seed so every chromosome sees the same
/// splits.
class FitnessEvaluator {
public:
  FitnessEvaluator(const LabeledDataset& data, ChromosomeLayout layout, const GaConfig& cfg)
      : data_(data), layout_(std::move(layout)), cfg_(cfg) {
    cfg_.validate();
    layout_.validate();
    data_.validate();
    if (data_.features() != layout_.feature_bits)
      throw validation_error("ga: layout feature bits differ from the data's feature count");
    folds_ = dobscv_folds(data_, cfg_.cv_folds, cfg_.seed);
  }

  const ChromosomeLayout& layout() const noexcept { return layout_; }
  std::size_t evaluations() const noexcept { return evaluations_; }
  std::size_t cache_hits() const noexcept { return hits_; }

  const FitnessRecord& evaluate(const Chromosome& c) {
    if (c.bits.size() != layout_.total_bits())
      throw validation_error("ga: chromosome length differs from the layout");
    if (auto it = cache_.find(c.bits); it != cache_.end()) {
      ++hits_;
      return it->second;
    }
    ++evaluations_;
    FitnessRecord rec;
    rec.chromosome = c;
    rec.decoded_params = c.decode(layout_);
    const auto feats = c.features(layout_);
    if (feats.empty()) throw validation_error("ga: chromosome selects no features");
    rec.subset_size = feats.size();
    rec.total_features = layout_.feature_bits;

    double err_sum = 0.0;
    std::size_t counted = 0;
    const bool single = folds_.n_folds == 1;
    for (std::size_t f = 0; f < folds_.n_folds; ++f) {
      const auto test_rows = folds_.test_rows(f);
      if (test_rows.empty()) continue;
      ++counted;
      try {
        const auto train = data_.rows(single ? test_rows : folds_.train_rows(f)).columns(feats);
        const auto test = data_.rows(test_rows);
        const auto spec = classifier_for(cfg_.classifier, rec.decoded_params, train.samples());
        const auto pred = fit_predict(spec, train, test.x.select_columns(feats));
        std::size_t wrong = 0;
        for (std::size_t i = 0; i < pred.size(); ++i) wrong += pred[i] != test.y[i];
        err_sum += static_cast<double>(wrong) / static_cast<double>(pred.size());
      } catch (const std::exception&) {
        err_sum += 1.0;
        ++rec.failed_folds;
      }
    }
    rec.cv_error = err_sum / static_cast<double>(counted);
    rec.fitness = fitness(rec.cv_error, rec.subset_size, rec.total_features, cfg_.omega_weight);
    return cache_.emplace(c.bits, std::move(rec)).first->second;
  }

private:
  LabeledDataset data_;
  ChromosomeLayout layout_;
  GaConfig cfg_;
  FoldAssignment folds_;
  std::map<Bits, FitnessRecord> cache_;
  std::size_t evaluations_ = 0;
  std::size_t hits_ = 0;
};

namespace detail {

// An empty feature mask gets one uniformly chosen bit switched on.
inline void repair(Chromosome& c, const ChromosomeLayout& layout, std::mt19937_64& gen) {
  const std::size_t off = layout.hyper_bits();
  for (std::size_t j = 0; j < layout.feature_bits; ++j)
    if (c.bits[off + j]) return;
  std::uniform_int_distribution<std::size_t> pick(0, layout.feature_bits - 1);
  c.bits[off + pick(gen)] = 1;
}

} // namespace detail

/// Generational GA: tournament selection, single-point crossover, per-bit
/// mutation, empty-mask repair and elitism. Returns the best record seen.
inline GaResult ga_run(const LabeledDataset& data, const ChromosomeLayout& layout,
                       const GaConfig& cfg) {
  FitnessEvaluator eval(data, layout, cfg);
  const std::size_t nbits = layout.total_bits();
  const double pmut = cfg.mutation_rate > 0.0 ? cfg.mutation_rate : 1.0 / static_cast<double>(nbits);
  std::mt19937_64 gen(cfg.seed);
  std::bernoulli_distribution coin(0.5), do_cross(cfg.crossover_rate), do_mut(pmut);
  std::uniform_int_distribution<std::size_t> pick(0, cfg.population - 1);

  std::vector<Chromosome> pop(cfg.population);
  for (auto& c : pop) {
    c.bits.resize(nbits);
    for (auto& b : c.bits) b = coin(gen) ? 1 : 0;
    detail::repair(c, layout, gen);
  }

  GaResult res;
  bool have_best = false;
  std::vector<double> fit(cfg.population);
  auto score = [&] {
    double sum = 0.0, best = 0.0;
    for (std::size_t i = 0; i < pop.size(); ++i) {
      const auto& rec = eval.evaluate(pop[i]);
      fit[i] = rec.fitness;
      sum += rec.fitness;
      if (i == 0 || rec.fitness < best) best = rec.fitness;
      if (!have_best || rec.fitness < res.best.fitness) {
        res.best = rec;
        have_best = true;
      }
    }
    res.history.push_back({best, sum / static_cast<double>(pop.size())});
  };
  score();

  auto tournament = [&]() -> const Chromosome& {
    std::size_t win = pick(gen);
    for (std::size_t t = 1; t < cfg.tournament_size; ++t) {
      const std::size_t c = pick(gen);
      if (fit[c] < fit[win] || (fit[c] == fit[win] && c < win)) win = c;
    }
    return pop[win];
  };

  for (std::size_t g = 0; g < cfg.generations; ++g) {
    std::vector<std::size_t> order(pop.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return fit[a] < fit[b]; });
    std::vector<Chromosome> next;
    next.reserve(pop.size());
    for (std::size_t e = 0; e < cfg.elitism; ++e) next.push_back(pop[order[e]]);
    while (next.size() < pop.size()) {
      Chromosome a = tournament(), b = tournament();
      if (nbits > 1 && do_cross(gen)) {
        std::uniform_int_distribution<std::size_t> cut(1, nbits - 1);
        const std::size_t p = cut(gen);
        std::swap_ranges(a.bits.begin() + static_cast<std::ptrdiff_t>(p), a.bits.end(),
                         b.bits.begin() + static_cast<std::ptrdiff_t>(p));
      }
      for (auto* c : {&a, &b}) {
        for (auto& bit : c->bits)
          if (do_mut(gen)) bit ^= 1;
        detail::repair(*c, layout, gen);
      }
      next.push_back(std::move(a));
      if (next.size() < pop.size()) next.push_back(std::move(b));
    }
    pop = std::move(next);
    score();
  }

  res.evaluations = eval.evaluations();
  res.cache_hits = eval.cache_hits();
  res.selection.method = "qr-ga";
  res.selection.selected = res.best.chromosome.features(layout);
  res.selection.params = res.best.decoded_params;
  res.selection.params["fitness"] = res.best.fitness;
  res.selection.params["cv_error"] = res.best.cv_error;
  res.selection.params["omega_weight"] = cfg.omega_weight;
  if (res.best.failed_folds)
    res.selection.warnings.push_back("classifier_failure: " + std::to_string(res.best.failed_folds) +
                                     " fold(s) of the best chromosome failed and counted as error 1");
  return res;
}

struct QrGaResult {
  SelectionResult selection;
  GaResult ga;
  /// Original indices kept by the filter phase, in RRQR order.
  std::vector<std::size_t> survivors;
};

/// Two phases: strong RRQR at k = numerical rank drops dependent features,
/// then the GA searches masks over the survivors. The selection is reported
/// in original feature indices, ascending.
inline QrGaResult qr_ga_select(const LabeledDataset& data, const GaConfig& cfg,
                               ChromosomeLayout layout = {}) {
  cfg.validate();
  data.validate();
  const std::size_t rank = detail::selection_rank(data.x);
  if (rank == 0) throw rank_deficiency_error("qr-ga: data matrix is numerically zero", 0);
  const auto filter = select_features_rrqr(data.x, rank, cfg.rrqr_f);

  QrGaResult out;
  out.survivors = filter.selected;
  std::vector<std::size_t> sorted = out.survivors;
  std::sort(sorted.begin(), sorted.end());
  if (layout.segments.empty() && layout.feature_bits == 0)
    layout = cfg.classifier == ClassifierKind::tree ? tree_layout(0) : knn_layout(0);
  if (cfg.classifier == ClassifierKind::majority) layout.segments.clear();
  layout.feature_bits = sorted.size();

  out.ga = ga_run(data.columns(sorted), layout, cfg);
  out.selection = out.ga.selection;
  out.selection.selected.clear();
  std::map<std::size_t, double> filter_score;
  for (std::size_t t = 0; t < filter.selected.size(); ++t) filter_score[filter.selected[t]] = filter.scores[t];
  // scores are the filter phase's |R11| diagonal entries of the kept features
  for (auto j : out.ga.best.chromosome.features(layout)) {
    out.selection.selected.push_back(sorted[j]);
    out.selection.scores.push_back(filter_score[sorted[j]]);
  }
  out.selection.params["rank"] = static_cast<double>(rank);
  out.selection.params["survivors"] = static_cast<double>(sorted.size());
  out.selection.params["rrqr_f"] = cfg.rrqr_f;
  out.selection.params["evaluations"] = static_cast<double>(out.ga.evaluations);
  out.selection.params["cache_hits"] = static_cast<double>(out.ga.cache_hits);
  for (const auto& w : filter.warnings) out.selection.warnings.push_back(w);
  return out;
}

} // namespace qrfs
