#pragma once

#include <stdexcept>
#include <string>

namespace samtwostep {

// Numeric failure of a linear system (near-singular debias matrix, rank
// deficient smoother design, ...). Carries the offending condition number
// when one is available.
class SingularSystemError : public std::runtime_error {
 public:
  explicit SingularSystemError(const std::string& what, double condition = 0.0)
      : std::runtime_error(what), condition_(condition) {}
  double condition() const { return condition_; }

 private:
  double condition_;
};

class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace samtwostep
