#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

namespace qrfs {

/// Ranked feature indices produced by one of the selectors.
struct SelectionResult {
  std::vector<std::size_t> selected;
  std::vector<double> scores;
  /// "rrqr", "nmfqr" or "qr-ga".
  std::string method;
  /// Echo of the configuration that produced the selection.
  std::map<std::string, double> params;
  std::vector<std::string> warnings;
};

} // namespace qrfs
