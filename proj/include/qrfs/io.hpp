#pragma once

// Dataset loading, flat key=value settings and report emission for the
// command-line tool.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "qrfs/dataset.hpp"
#include "qrfs/error.hpp"
#include "qrfs/eval.hpp"
#include "qrfs/selection.hpp"

namespace qrfs {

using json = nlohmann::ordered_json;

inline constexpr int kReportSchemaVersion = 1;

// ---------------------------------------------------------------- CSV

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

// One record; double quotes may wrap a field and "" escapes a quote.
inline std::vector<std::string> split_csv_line(const std::string& line, std::size_t line_no) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false, was_quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = was_quoted = true;
    } else if (c == ',') {
      out.push_back(was_quoted ? cur : trim(cur));
      cur.clear();
      was_quoted = false;
    } else {
      cur += c;
    }
  }
  if (quoted) throw io_error("csv: unterminated quote on line " + std::to_string(line_no));
  out.push_back(was_quoted ? cur : trim(cur));
  return out;
}

inline std::optional<double> parse_number(const std::string& s) {
  if (s.empty()) return std::nullopt;
  const char* b = s.data();
  const char* e = s.data() + s.size();
  if (*b == '+') ++b;
  double v = 0.0;
  auto [p, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || p != e) return std::nullopt;
  return v;
}

} // namespace detail

struct CsvOptions {
  /// Label column by header name or 0-based index; "last" picks the last
  /// column and "none" loads every column as a feature.
  std::string label_col = "last";
  /// Features are rows in the file: the header holds sample ids, the first
  /// column holds feature names, and the label is the row named label_col.
  bool transpose = false;
};

struct LoadedData {
  LabeledDataset data;
  /// Original label text → dense code.
  std::vector<std::pair<std::string, int>> label_map;
  bool has_labels = true;
};

/// Reads a header-first CSV. Labels are recoded densely: numeric order when
/// every label parses as a number, lexicographic order otherwise. Errors name
/// the file line and column.
inline LoadedData load_csv_text(const std::string& text, const CsvOptions& opt = {},
                                const std::string& origin = "<memory>") {
  std::vector<std::vector<std::string>> grid;
  std::vector<std::size_t> line_of;
  {
    std::istringstream in(text);
    std::string line;
    std::size_t no = 0;
    while (std::getline(in, line)) {
      ++no;
      if (no == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
      if (detail::trim(line).empty()) continue;
      grid.push_back(detail::split_csv_line(line, no));
      line_of.push_back(no);
    }
  }
  if (grid.size() < 2) throw io_error(origin + ": need a header and at least one data row");
  for (std::size_t r = 1; r < grid.size(); ++r)
    if (grid[r].size() != grid[0].size())
      throw io_error(origin + ": line " + std::to_string(line_of[r]) + " has " +
                     std::to_string(grid[r].size()) + " fields, header has " +
                     std::to_string(grid[0].size()));

  // cell locations for error messages, in file terms
  auto where = [&](std::size_t r, std::size_t c) {
    if (!opt.transpose)
      return "row " + std::to_string(r) + " (line " + std::to_string(line_of[r]) + "), column " +
             grid[0][c];
    return "line " + std::to_string(line_of[r]) + ", field " + std::to_string(c + 1) + " (sample " +
           grid[0][c] + ", row " + grid[r][0] + ")";
  };
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::vector<std::string>> loc;
  if (!opt.transpose) {
    header = grid[0];
    for (std::size_t r = 1; r < grid.size(); ++r) {
      rows.push_back(grid[r]);
      loc.emplace_back();
      for (std::size_t c = 0; c < grid[r].size(); ++c) loc.back().push_back(where(r, c));
    }
  } else {
    // drop the sample-id header cell and the feature-name column
    for (std::size_t r = 1; r < grid.size(); ++r) header.push_back(grid[r][0]);
    for (std::size_t c = 1; c < grid[0].size(); ++c) {
      rows.emplace_back();
      loc.emplace_back();
      for (std::size_t r = 1; r < grid.size(); ++r) {
        rows.back().push_back(grid[r][c]);
        loc.back().push_back(where(r, c));
      }
    }
  }
  const std::size_t ncol = header.size();

  std::optional<std::size_t> label;
  if (opt.label_col == "last") label = ncol - 1;
  else if (opt.label_col != "none") {
    auto it = std::find(header.begin(), header.end(), opt.label_col);
    if (it != header.end()) label = static_cast<std::size_t>(it - header.begin());
    else if (auto v = detail::parse_number(opt.label_col);
             v && *v >= 0 && *v == std::floor(*v) && *v < static_cast<double>(ncol))
      label = static_cast<std::size_t>(*v);
    else throw validation_error(origin + ": label column '" + opt.label_col + "' not found");
  }

  LoadedData out;
  out.has_labels = label.has_value();
  auto& d = out.data;
  const std::size_t m = rows.size();
  const std::size_t n = ncol - (label ? 1 : 0);
  if (n == 0) throw validation_error(origin + ": no feature columns");
  d.x = DenseMatrix(m, n);
  for (std::size_t c = 0; c < ncol; ++c)
    if (!label || c != *label) d.feature_names.push_back(header[c]);

  for (std::size_t i = 0; i < m; ++i) {
    std::size_t j = 0;
    for (std::size_t c = 0; c < ncol; ++c) {
      if (label && c == *label) continue;
      const auto v = detail::parse_number(rows[i][c]);
      if (!v)
        throw validation_error(origin + ": non-numeric value '" + rows[i][c] + "' at " + loc[i][c]);
      if (!std::isfinite(*v))
        throw validation_error(origin + ": non-finite value '" + rows[i][c] + "' at " + loc[i][c]);
      d.x(i, j++) = *v;
    }
  }

  if (label) {
    std::vector<std::string> raw(m);
    for (std::size_t i = 0; i < m; ++i) {
      raw[i] = rows[i][*label];
      if (raw[i].empty()) throw validation_error(origin + ": empty label at " + loc[i][*label]);
    }
    std::vector<std::string> uniq = raw;
    std::sort(uniq.begin(), uniq.end());
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
    const bool numeric = std::all_of(uniq.begin(), uniq.end(),
                                     [](const std::string& s) { return detail::parse_number(s).has_value(); });
    if (numeric)
      std::stable_sort(uniq.begin(), uniq.end(), [](const std::string& a, const std::string& b) {
        return *detail::parse_number(a) < *detail::parse_number(b);
      });
    std::map<std::string, int> code;
    for (std::size_t c = 0; c < uniq.size(); ++c) {
      code[uniq[c]] = static_cast<int>(c);
      out.label_map.emplace_back(uniq[c], static_cast<int>(c));
      d.class_names.push_back(uniq[c]);
    }
    for (const auto& s : raw) d.y.push_back(code[s]);
    d.class_count = static_cast<int>(uniq.size());
  } else {
    d.y.assign(m, 0);
    d.class_count = 1;
  }
  return out;
}

inline LoadedData load_csv(const std::string& path, const CsvOptions& opt = {}) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return load_csv_text(ss.str(), opt, path);
}

// ---------------------------------------------------------------- settings

/// Flat key=value text; '#' starts a comment. Keys may use '-' or '_'.
inline std::map<std::string, std::string> parse_config_text(const std::string& text,
                                                            const std::string& origin = "<config>") {
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string line;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw validation_error(origin + ": line " + std::to_string(no) + " is not key=value");
    std::string key = detail::trim(line.substr(0, eq));
    std::replace(key.begin(), key.end(), '-', '_');
    if (key.empty()) throw validation_error(origin + ": empty key on line " + std::to_string(no));
    out[key] = detail::trim(line.substr(eq + 1));
  }
  return out;
}

inline std::map<std::string, std::string> load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open config '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path);
}

// ---------------------------------------------------------------- report

inline json to_json(const SelectionResult& s, const std::vector<std::string>& names = {}) {
  json j;
  j["method"] = s.method;
  j["selected"] = s.selected;
  if (!names.empty()) {
    json n = json::array();
    for (auto i : s.selected) n.push_back(i < names.size() ? names[i] : std::string());
    j["selected_names"] = n;
  }
  j["scores"] = s.scores;
  json p = json::object();
  for (const auto& [k, v] : s.params) p[k] = v;
  j["params"] = p;
  return j;
}

inline json to_json(const MetricVector& m) {
  json j = json::object();
  for (const auto& [name, v] : m.entries())
    if (v) j[name] = *v;
  j["undefined"] = m.undefined();
  return j;
}

inline json to_json(const EvaluationReport& r) {
  json j;
  j["classifier"] = {{"kind", to_string(r.classifier.kind)},
                     {"knn_k", r.classifier.knn_k},
                     {"max_depth", r.classifier.max_depth},
                     {"min_leaf", r.classifier.min_leaf}};
  j["positive_class"] = r.positive_class;
  j["pooled"] = to_json(r.pooled);
  json s = json::object();
  for (const auto& [name, v] : r.summary)
    s[name] = {{"mean", v.mean}, {"sd", v.sd}, {"defined_folds", v.defined_folds}};
  j["summary"] = s;
  json folds = json::array();
  for (const auto& f : r.folds)
    folds.push_back({{"fold", f.fold},
                     {"test_size", f.test_rows.size()},
                     {"selected", f.selected},
                     {"metrics", to_json(f.metrics)}});
  j["folds"] = folds;
  return j;
}

namespace detail {

// Same text as the JSON number, so CSV and JSON agree digit for digit.
inline std::string number_text(const json& v) { return v.is_null() ? std::string() : v.dump(); }

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
  return q + "\"";
}

} // namespace detail

/// Flat CSV view of a report: one `section,key,value` row per scalar.
inline std::string report_to_csv(const json& report) {
  std::ostringstream out;
  out << "section,key,value\n";
  auto row = [&](const std::string& sec, const std::string& key, const json& v) {
    out << sec << ',' << detail::csv_field(key) << ','
        << detail::csv_field(v.is_string() ? v.get<std::string>() : detail::number_text(v)) << '\n';
  };
  if (report.contains("selection")) {
    const auto& s = report["selection"];
    row("selection", "method", s["method"]);
    for (std::size_t r = 0; r < s["selected"].size(); ++r) {
      row("selected", std::to_string(r), s["selected"][r]);
      if (r < s["scores"].size()) row("score", std::to_string(r), s["scores"][r]);
    }
    for (const auto& [k, v] : s["params"].items()) row("param", k, v);
  }
  auto metrics_rows = [&](const std::string& sec, const json& ev) {
    for (const auto& [k, v] : ev["pooled"].items())
      if (k != "undefined") row(sec + ".pooled", k, v);
    for (const auto& [k, v] : ev["summary"].items()) {
      row(sec + ".mean", k, v["mean"]);
      row(sec + ".sd", k, v["sd"]);
    }
  };
  if (report.contains("evaluation")) metrics_rows("evaluation", report["evaluation"]);
  if (report.contains("sweep"))
    for (const auto& r : report["sweep"]) {
      const std::string f = detail::number_text(r["f"]);
      row("sweep.accuracy", f, r["accuracy"]);
      row("sweep.certificate", f, r["certificate"]);
      row("sweep.swaps", f, r["swaps"]);
    }
  if (report.contains("factorization")) {
    const auto& fz = report["factorization"];
    for (std::size_t r = 0; r < fz["perm"].size(); ++r) row("perm", std::to_string(r), fz["perm"][r]);
    for (std::size_t r = 0; r < fz["r11_diagonal"].size(); ++r)
      row("r11_diagonal", std::to_string(r), fz["r11_diagonal"][r]);
    row("factorization", "certificate", fz["certificate"]);
    row("factorization", "swaps", fz["swaps"]);
  }
  for (const auto& w : report.value("warnings", json::array())) row("warning", "", w);
  return out.str();
}

/// Writes the report as pretty JSON or as the flat CSV view.
inline void emit_report(const json& report, const std::string& path, const std::string& format) {
  std::string text;
  if (format == "json") text = report.dump(2) + "\n";
  else if (format == "csv") text = report_to_csv(report);
  else throw validation_error("unknown format '" + format + "' (expected json or csv)");
  if (path.empty() || path == "-") {
    std::cout << text;
    std::cout.flush();
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw io_error("write to '" + path + "' failed");
}

/// Structured error body used for nonzero exits.
inline json error_json(const std::exception& e) {
  json j;
  j["schema_version"] = kReportSchemaVersion;
  j["status"] = "error";
  json err;
  if (const auto* q = dynamic_cast<const error*>(&e)) err["kind"] = q->kind();
  else err["kind"] = "internal";
  err["message"] = e.what();
  if (const auto* r = dynamic_cast<const rank_deficiency_error*>(&e)) err["index"] = r->index();
  if (const auto* n = dynamic_cast<const numerical_error*>(&e)) err["iteration"] = n->iteration();
  j["error"] = err;
  return j;
}

} // namespace qrfs
