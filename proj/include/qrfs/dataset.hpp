#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "qrfs/matrix.hpp"

namespace qrfs {

/// Samples × features matrix with densely coded class labels.
struct LabeledDataset {
  DenseMatrix x;
  std::vector<int> y;
  int class_count = 0;
  std::vector<std::string> feature_names;
  /// class_names[c] is the original label text of code c, when known.
  std::vector<std::string> class_names;

  std::size_t samples() const noexcept { return x.rows(); }
  std::size_t features() const noexcept { return x.cols(); }

  void validate() const {
    if (y.size() != x.rows()) throw validation_error("dataset: label count differs from rows");
    if (class_count < 1) throw validation_error("dataset: class_count must be positive");
    std::vector<std::size_t> seen(static_cast<std::size_t>(class_count), 0);
    for (int c : y) {
      if (c < 0 || c >= class_count) throw validation_error("dataset: label code out of range");
      ++seen[static_cast<std::size_t>(c)];
    }
    for (std::size_t c = 0; c < seen.size(); ++c)
      if (seen[c] == 0)
        throw validation_error("dataset: class " + std::to_string(c) + " has no samples");
    x.require_finite("dataset");
  }

  /// Rows subset; class_count and names are kept so codes stay comparable.
  LabeledDataset rows(std::span<const std::size_t> idx) const {
    LabeledDataset d;
    d.x = x.select_rows(idx);
    d.y.reserve(idx.size());
    for (auto i : idx) d.y.push_back(y[i]);
    d.class_count = class_count;
    d.feature_names = feature_names;
    d.class_names = class_names;
    return d;
  }

  LabeledDataset columns(std::span<const std::size_t> idx) const {
    LabeledDataset d;
    d.x = x.select_columns(idx);
    d.y = y;
    d.class_count = class_count;
    d.class_names = class_names;
    if (!feature_names.empty())
      for (auto j : idx) d.feature_names.push_back(feature_names[j]);
    return d;
  }
};

} // namespace qrfs
