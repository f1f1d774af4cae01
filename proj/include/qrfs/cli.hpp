#pragma once

// Command runners behind the qrfs tool. Each run takes fully merged settings
// and returns the report document; printing and exit codes live in the tool.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "qrfs/eval.hpp"
#include "qrfs/ga.hpp"
#include "qrfs/io.hpp"
#include "qrfs/nmfqr.hpp"
#include "qrfs/rrqr.hpp"

#ifndef QRFS_VERSION
#define QRFS_VERSION "0.0.0"
#endif

namespace qrfs {

enum class SettingType { text, real, count, flag };

struct SettingDef {
  std::string key;
  SettingType type;
  std::string fallback;
  std::string help;
  /// Space-separated commands the key applies to.
  std::string commands;
};

inline const std::vector<SettingDef>& setting_table() {
  static const std::vector<SettingDef> t = {
      {"data", SettingType::text, "", "input CSV (rows = samples)", "select evaluate f-sweep factorize"},
      {"label_col", SettingType::text, "last", "label column name, 0-based index, 'last' or 'none'",
       "select evaluate f-sweep factorize"},
      {"transpose", SettingType::flag, "false", "file stores features as rows", "select evaluate f-sweep factorize"},
      {"out", SettingType::text, "", "report path (stdout when empty)", "select evaluate f-sweep factorize"},
      {"format", SettingType::text, "json", "report format: json or csv", "select evaluate f-sweep factorize"},
      {"seed", SettingType::count, "0", "seed for W init, GA and fold assignment", "select evaluate f-sweep"},
      {"method", SettingType::text, "rrqr", "selector: rrqr, nmfqr or qr-ga", "select evaluate"},
      {"top_k", SettingType::count, "10", "features to select (rrqr, nmfqr) or R11 size (factorize)",
       "select evaluate f-sweep factorize"},
      {"f", SettingType::real, "1.1", "strong RRQR bound, > 1", "select evaluate factorize"},
      {"alpha", SettingType::real, "1", "NMF-QR structure weight", "select evaluate"},
      {"beta", SettingType::real, "100", "NMF-QR orthogonality penalty", "select evaluate"},
      {"gamma_sparse", SettingType::real, "1", "NMF-QR row-sparsity weight", "select evaluate"},
      {"epsilon", SettingType::real, "1e-8", "NMF-QR stability constant", "select evaluate"},
      {"nmf_knn_k", SettingType::count, "5", "NMF-QR affinity neighbours", "select evaluate"},
      {"kernel_bandwidth", SettingType::real, "0", "NMF-QR heat-kernel width, 0 = mean squared distance",
       "select evaluate"},
      {"max_iters", SettingType::count, "200", "NMF-QR iterations", "select evaluate"},
      {"rank_k", SettingType::count, "0", "NMF-QR subspace rank, 0 = numerical rank", "select evaluate"},
      {"nmf_normalize", SettingType::text, "rows", "NMF-QR W normalization: rows or columns", "select evaluate"},
      {"omega_weight", SettingType::real, "0.8", "GA fitness weight on error", "select evaluate"},
      {"population", SettingType::count, "50", "GA population", "select evaluate"},
      {"generations", SettingType::count, "100", "GA generations", "select evaluate"},
      {"crossover_rate", SettingType::real, "0.9", "GA single-point crossover rate", "select evaluate"},
      {"mutation_rate", SettingType::real, "0", "GA per-bit mutation, 0 = 1/bits", "select evaluate"},
      {"tournament_size", SettingType::count, "3", "GA tournament size", "select evaluate"},
      {"elitism", SettingType::count, "2", "GA elite count", "select evaluate"},
      {"cv_folds", SettingType::count, "5", "GA fitness folds", "select evaluate"},
      {"classifier", SettingType::text, "knn", "knn, tree or majority", "select evaluate f-sweep"},
      {"classifier_k", SettingType::count, "5", "k for the k-NN classifier", "select evaluate f-sweep"},
      {"max_depth", SettingType::count, "16", "tree depth limit", "select evaluate f-sweep"},
      {"min_leaf", SettingType::count, "1", "tree minimum leaf size", "select evaluate f-sweep"},
      {"folds", SettingType::count, "5", "evaluation folds (DOB-SCV)", "select evaluate f-sweep"},
      {"positive_class", SettingType::count, "1", "positive label code for binary metrics",
       "select evaluate f-sweep"},
      {"evaluate", SettingType::flag, "false", "also cross-validate the selection", "select"},
      {"features", SettingType::text, "", "comma-separated feature indices to evaluate", "evaluate"},
      {"f_grid", SettingType::text, "1.02:1.30:0.02", "start:stop:step or comma list", "f-sweep"},
  };
  return t;
}

inline const SettingDef& setting_def(const std::string& key) {
  for (const auto& d : setting_table())
    if (d.key == key) return d;
  throw validation_error("unknown setting '" + key + "'");
}

inline bool setting_applies(const SettingDef& d, const std::string& command) {
  std::istringstream in(d.commands);
  std::string c;
  while (in >> c)
    if (c == command) return true;
  return false;
}

/// Defaults, then config-file values, then command-line values; later
/// layers win.
class Settings {
public:
  explicit Settings(std::string command) : command_(std::move(command)) {
    static const std::set<std::string> known{"select", "evaluate", "f-sweep", "factorize"};
    if (!known.count(command_)) throw validation_error("unknown command '" + command_ + "'");
    for (const auto& d : setting_table())
      if (setting_applies(d, command_)) values_[d.key] = d.fallback;
  }

  const std::string& command() const noexcept { return command_; }

  void set(std::string key, const std::string& value) {
    std::replace(key.begin(), key.end(), '-', '_');
    const auto& d = setting_def(key);
    if (!setting_applies(d, command_))
      throw validation_error("setting '" + key + "' does not apply to '" + command_ + "'");
    values_[key] = value;
  }

  /// Config files may carry keys for other commands; those are skipped.
  void merge_file(const std::map<std::string, std::string>& kv) {
    for (const auto& [k, v] : kv) {
      const auto& d = setting_def(k);
      if (setting_applies(d, command_)) values_[k] = v;
    }
  }

  const std::string& text(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw validation_error("setting '" + key + "' is not available here");
    return it->second;
  }
  double real(const std::string& key) const {
    auto v = detail::parse_number(text(key));
    if (!v || !std::isfinite(*v))
      throw validation_error("setting '" + key + "' expects a number, got '" + text(key) + "'");
    return *v;
  }
  std::size_t count(const std::string& key) const {
    const double v = real(key);
    if (v < 0 || v != std::floor(v) || v > 9.0e15)
      throw validation_error("setting '" + key + "' expects a nonnegative integer, got '" + text(key) + "'");
    return static_cast<std::size_t>(v);
  }
  bool flag(const std::string& key) const {
    const auto& s = text(key);
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    throw validation_error("setting '" + key + "' expects true or false, got '" + s + "'");
  }

  /// Typed echo of every applicable key; also validates every value.
  json resolved() const {
    json j = json::object();
    for (const auto& d : setting_table()) {
      if (!setting_applies(d, command_)) continue;
      switch (d.type) {
      case SettingType::text: j[d.key] = text(d.key); break;
      case SettingType::real: j[d.key] = real(d.key); break;
      case SettingType::count: j[d.key] = count(d.key); break;
      case SettingType::flag: j[d.key] = flag(d.key); break;
      }
    }
    return j;
  }

private:
  std::string command_;
  std::map<std::string, std::string> values_;
};

namespace detail {

class Stopwatch {
public:
  double lap() {
    const auto now = std::chrono::steady_clock::now();
    const double s = std::chrono::duration<double>(now - last_).count();
    last_ = now;
    return s;
  }

private:
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

inline std::vector<std::size_t> parse_index_list(const std::string& s, std::size_t n) {
  std::vector<std::size_t> out;
  std::istringstream in(s);
  std::string tok;
  while (std::getline(in, tok, ',')) {
    tok = trim(tok);
    if (tok.empty()) continue;
    auto v = parse_number(tok);
    if (!v || *v < 0 || *v != std::floor(*v) || *v >= static_cast<double>(n))
      throw validation_error("feature index '" + tok + "' is not in [0, " + std::to_string(n) + ")");
    out.push_back(static_cast<std::size_t>(*v));
  }
  std::set<std::size_t> uniq(out.begin(), out.end());
  if (uniq.size() != out.size()) throw validation_error("feature list has duplicates");
  return out;
}

inline std::vector<double> parse_f_grid(const std::string& s) {
  std::vector<double> grid;
  if (s.find(':') != std::string::npos) {
    std::vector<double> p;
    std::istringstream in(s);
    std::string tok;
    while (std::getline(in, tok, ':')) {
      auto v = parse_number(trim(tok));
      if (!v) throw validation_error("f_grid: '" + tok + "' is not a number");
      p.push_back(*v);
    }
    if (p.size() != 3 || !(p[2] > 0.0) || p[1] < p[0])
      throw validation_error("f_grid: expected start:stop:step with step > 0 and stop >= start");
    const auto steps = static_cast<std::size_t>(std::floor((p[1] - p[0]) / p[2] + 1e-9));
    if (steps > 10000) throw validation_error("f_grid: more than 10000 points");
    for (std::size_t i = 0; i <= steps; ++i)
      grid.push_back(std::round((p[0] + static_cast<double>(i) * p[2]) * 1e10) / 1e10);
  } else {
    std::istringstream in(s);
    std::string tok;
    while (std::getline(in, tok, ',')) {
      auto v = parse_number(trim(tok));
      if (!v) throw validation_error("f_grid: '" + tok + "' is not a number");
      grid.push_back(*v);
    }
  }
  if (grid.empty()) throw validation_error("f_grid is empty");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] > 1.0)) throw validation_error("f_grid: every f must be > 1");
    if (i && !(grid[i] > grid[i - 1])) throw validation_error("f_grid must be strictly increasing");
  }
  return grid;
}

inline NmfQrConfig nmf_config(const Settings& s) {
  NmfQrConfig c;
  c.alpha = s.real("alpha");
  c.beta = s.real("beta");
  c.gamma_sparse = s.real("gamma_sparse");
  c.epsilon = s.real("epsilon");
  c.knn_k = s.count("nmf_knn_k");
  c.kernel_bandwidth = s.real("kernel_bandwidth");
  c.max_iters = s.count("max_iters");
  c.rank_k = s.count("rank_k");
  c.seed = s.count("seed");
  const auto& norm = s.text("nmf_normalize");
  if (norm == "rows") c.normalization = NmfNormalization::rows;
  else if (norm == "columns") c.normalization = NmfNormalization::columns;
  else throw validation_error("nmf_normalize must be rows or columns");
  return c;
}

inline GaConfig ga_config(const Settings& s) {
  GaConfig c;
  c.omega_weight = s.real("omega_weight");
  c.population = s.count("population");
  c.generations = s.count("generations");
  c.crossover_rate = s.real("crossover_rate");
  c.mutation_rate = s.real("mutation_rate");
  c.tournament_size = s.count("tournament_size");
  c.elitism = s.count("elitism");
  c.seed = s.count("seed");
  c.cv_folds = s.count("cv_folds");
  c.rrqr_f = s.real("f");
  c.classifier = classifier_from_string(s.text("classifier"));
  return c;
}

inline ClassifierSpec classifier_spec(const Settings& s) {
  ClassifierSpec c;
  c.kind = classifier_from_string(s.text("classifier"));
  c.knn_k = s.count("classifier_k");
  c.max_depth = s.count("max_depth");
  c.min_leaf = s.count("min_leaf");
  if (c.knn_k < 1) throw validation_error("classifier_k must be at least 1");
  if (c.min_leaf < 1) throw validation_error("min_leaf must be at least 1");
  return c;
}

inline void require_labels(const LoadedData& d, const std::string& what) {
  if (!d.has_labels || d.data.class_count < 2)
    throw validation_error(what + " needs a label column with at least two classes");
}

struct Selected {
  SelectionResult selection;
  std::vector<std::string> notes;
};

inline Selected run_selector(const std::string& method, const LabeledDataset& data, const Settings& s) {
  Selected out;
  if (method == "rrqr") {
    out.selection = select_features_rrqr(data.x, s.count("top_k"), s.real("f"));
  } else if (method == "nmfqr") {
    out.selection = nmfqr_select(data.x, nmf_config(s), s.count("top_k"));
  } else if (method == "qr-ga") {
    auto r = qr_ga_select(data, ga_config(s));
    out.selection = std::move(r.selection);
    out.notes.push_back("cache_stats: " + std::to_string(r.ga.evaluations) + " evaluations, " +
                        std::to_string(r.ga.cache_hits) + " cache hits");
  } else {
    throw validation_error("unknown method '" + method + "' (expected rrqr, nmfqr or qr-ga)");
  }
  return out;
}

inline json dataset_json(const LoadedData& d, const Settings& s) {
  json j;
  j["path"] = s.text("data");
  j["samples"] = d.data.samples();
  j["features"] = d.data.features();
  if (d.has_labels) {
    j["classes"] = d.data.class_count;
    json lm = json::object();
    for (const auto& [label, code] : d.label_map) lm[label] = code;
    j["label_map"] = lm;
  }
  return j;
}

} // namespace detail

/// Executes one command and returns the report (status "ok").
inline json run_command(const Settings& s) {
  json report;
  report["schema_version"] = kReportSchemaVersion;
  report["status"] = "ok";
  report["tool"] = "qrfs";
  report["version"] = QRFS_VERSION;
  report["command"] = s.command();
  report["config"] = s.resolved();

  const std::string& cmd = s.command();
  if (s.text("data").empty()) throw validation_error("no input: set data (--data)");
  const auto fmt = s.text("format");
  if (fmt != "json" && fmt != "csv") throw validation_error("format must be json or csv");

  detail::Stopwatch clock;
  json timing = json::object();
  std::vector<std::string> warnings;

  CsvOptions copt;
  copt.label_col = s.text("label_col");
  copt.transpose = s.flag("transpose");
  const auto loaded = load_csv(s.text("data"), copt);
  const auto& data = loaded.data;
  report["dataset"] = detail::dataset_json(loaded, s);
  timing["load_s"] = clock.lap();

  if (cmd == "select") {
    const auto method = s.text("method");
    if (method == "qr-ga" || s.flag("evaluate")) detail::require_labels(loaded, "method " + method);
    auto sel = detail::run_selector(method, data, s);
    timing["select_s"] = clock.lap();
    report["selection"] = to_json(sel.selection, data.feature_names);
    warnings.insert(warnings.end(), sel.selection.warnings.begin(), sel.selection.warnings.end());
    warnings.insert(warnings.end(), sel.notes.begin(), sel.notes.end());
    if (s.flag("evaluate")) {
      const auto folds = dobscv_folds(data, s.count("folds"), s.count("seed"));
      auto ev = cross_validate(data, folds, detail::classifier_spec(s), {}, sel.selection.selected,
                               static_cast<int>(s.count("positive_class")));
      timing["evaluate_s"] = clock.lap();
      report["evaluation"] = to_json(ev);
      warnings.insert(warnings.end(), ev.warnings.begin(), ev.warnings.end());
    }
  } else if (cmd == "evaluate") {
    detail::require_labels(loaded, "evaluate");
    const auto folds = dobscv_folds(data, s.count("folds"), s.count("seed"));
    FeatureSelector selector;
    std::vector<std::size_t> fixed;
    const auto features = s.text("features");
    if (!features.empty()) {
      fixed = detail::parse_index_list(features, data.features());
      if (fixed.empty()) throw validation_error("features list is empty");
      report["selection"] = to_json(SelectionResult{fixed, {}, "fixed", {}, {}}, data.feature_names);
    } else {
      // selection is re-run inside every training fold
      const auto method = s.text("method");
      selector = [&s, method](const LabeledDataset& train) {
        return detail::run_selector(method, train, s).selection.selected;
      };
    }
    auto ev = cross_validate(data, folds, detail::classifier_spec(s), selector, fixed,
                             static_cast<int>(s.count("positive_class")));
    timing["evaluate_s"] = clock.lap();
    report["evaluation"] = to_json(ev);
    warnings.insert(warnings.end(), ev.warnings.begin(), ev.warnings.end());
  } else if (cmd == "f-sweep") {
    detail::require_labels(loaded, "f-sweep");
    const auto grid = detail::parse_f_grid(s.text("f_grid"));
    const std::size_t k = s.count("top_k");
    const auto folds = dobscv_folds(data, s.count("folds"), s.count("seed"));
    const auto spec = detail::classifier_spec(s);
    json rows = json::array();
    for (double f : grid) {
      const auto full = select_features_rrqr(data.x, k, f);
      FeatureSelector selector = [k, f](const LabeledDataset& train) {
        return select_features_rrqr(train.x, k, f).selected;
      };
      auto ev = cross_validate(data, folds, spec, selector, {},
                               static_cast<int>(s.count("positive_class")));
      json r;
      r["f"] = f;
      r["accuracy"] = ev.pooled.accuracy ? json(*ev.pooled.accuracy) : json(nullptr);
      r["certificate"] = full.params.at("certificate");
      r["f_squared"] = f * f;
      r["swaps"] = static_cast<std::size_t>(full.params.at("swaps"));
      r["selected"] = full.selected;
      rows.push_back(r);
      for (const auto& w : full.warnings) warnings.push_back("f=" + json(f).dump() + ": " + w);
    }
    timing["sweep_s"] = clock.lap();
    report["sweep"] = rows;
  } else if (cmd == "factorize") {
    RrqrConfig cfg;
    cfg.k = s.count("top_k");
    cfg.f = s.real("f");
    const auto fact = strong_rrqr(data.x, cfg);
    timing["factorize_s"] = clock.lap();
    json fz;
    fz["k"] = fact.k;
    fz["f"] = fact.f;
    fz["perm"] = fact.perm;
    std::vector<double> diag;
    for (std::size_t i = 0; i < fact.k; ++i) diag.push_back(fact.r(i, i));
    fz["r11_diagonal"] = diag;
    fz["certificate"] = fact.certificate;
    fz["swaps"] = fact.swaps_performed;
    fz["log_abs_det_r11"] = fact.log_det_trace.back();
    report["factorization"] = fz;
  }
  report["timing"] = timing;
  report["warnings"] = warnings;
  return report;
}

} // namespace qrfs
