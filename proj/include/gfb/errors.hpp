#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace gfb {

/// Shape or arity mismatch between operands.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A scalar parameter outside its admissible range.
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Solver configuration rejected; carries every violated condition.
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(std::vector<std::string> violations)
      : std::invalid_argument(join(violations)), violations_(std::move(violations)) {}

  const std::vector<std::string>& violations() const noexcept { return violations_; }

 private:
  static std::string join(const std::vector<std::string>& v) {
    std::string out = "invalid configuration";
    for (const auto& s : v) {
      out += "\n  - ";
      out += s;
    }
    return out;
  }
  std::vector<std::string> violations_;
};

/// Non-finite value produced during an iteration.
class NumericalError : public std::runtime_error {
 public:
  NumericalError(std::size_t iteration, const std::string& what)
      : std::runtime_error("numerical failure at iteration " + std::to_string(iteration) + ": " +
                           what),
        iteration_(iteration) {}

  std::size_t iteration() const noexcept { return iteration_; }

 private:
  std::size_t iteration_;
};

/// A bound was requested outside the hypotheses that make it valid.
class RegimeError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Rate constants need per-iteration data that the trace did not keep.
class MissingHistoryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed matrix file; `offset` is the byte position where parsing failed.
class FormatError : public std::runtime_error {
 public:
  FormatError(std::size_t offset, const std::string& what)
      : std::runtime_error(what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

}  // namespace gfb
