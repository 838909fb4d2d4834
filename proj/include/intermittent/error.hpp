#pragma once

#include <stdexcept>
#include <string>

namespace intermittent {

/// Thrown when an argument lies outside the documented domain of an operation.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown when an iterative numerical procedure fails to converge.
/// Carries the last bracket (or residual) so the caller can diagnose it.
class NumericFailure : public std::runtime_error {
 public:
  NumericFailure(const std::string& what, double lo, double hi)
      : std::runtime_error(what), lo_(lo), hi_(hi) {}

  double lo() const noexcept { return lo_; }
  double hi() const noexcept { return hi_; }

 private:
  double lo_;
  double hi_;
};

/// A deterministic orbit or ladder lookup ran past the precomputed ladder.
class LadderExhausted : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

inline void require(bool ok, const std::string& message) {
  if (!ok) throw InvalidInput(message);
}

}  // namespace intermittent
