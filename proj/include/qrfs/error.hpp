#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace qrfs {

/// Base class for every error raised by the library.
class error : public std::runtime_error {
public:
  explicit error(const std::string& what) : std::runtime_error(what) {}
  /// Short machine-readable tag used in structured CLI errors.
  virtual const char* kind() const noexcept { return "error"; }
};

class validation_error : public error {
public:
  using error::error;
  const char* kind() const noexcept override { return "validation"; }
};

/// A desk-scale routine refused an input that exceeds its configured cap.
class capacity_error : public error {
public:
  using error::error;
  const char* kind() const noexcept override { return "capacity"; }
};

class rank_deficiency_error : public error {
public:
  rank_deficiency_error(const std::string& what, std::size_t index)
      : error(what), index_(index) {}
  const char* kind() const noexcept override { return "rank_deficiency"; }
  /// Diagonal position of the offending (numerically zero) pivot.
  std::size_t index() const noexcept { return index_; }

private:
  std::size_t index_;
};

class nontermination_error : public error {
public:
  using error::error;
  const char* kind() const noexcept override { return "nontermination"; }
};

class numerical_error : public error {
public:
  numerical_error(const std::string& what, std::size_t iteration)
      : error(what), iteration_(iteration) {}
  const char* kind() const noexcept override { return "numerical"; }
  std::size_t iteration() const noexcept { return iteration_; }

private:
  std::size_t iteration_;
};

class degenerate_state_error : public error {
public:
  using error::error;
  const char* kind() const noexcept override { return "degenerate_state"; }
};

class io_error : public error {
public:
  using error::error;
  const char* kind() const noexcept override { return "io"; }
};

} // namespace qrfs
