#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace sgld {

using Vec = std::vector<double>;

/// Raised when an operation does not apply to the given potential or schedule
/// (e.g. drawing a batch from a potential without finite-sum structure).
class Unsupported : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// A chain produced a non-finite coordinate.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(std::size_t chain, std::size_t step, const std::string& what)
      : std::runtime_error(what), chain_(chain), step_(step) {}

  std::size_t chain() const noexcept { return chain_; }
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t chain_;
  std::size_t step_;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw std::invalid_argument(message);
}

inline bool all_finite(std::span<const double> x) {
  for (double v : x)
    if (!std::isfinite(v)) return false;
  return true;
}

inline double dot(std::span<const double> x, std::span<const double> y) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

inline double norm2(std::span<const double> x) { return std::sqrt(dot(x, x)); }

inline double max_abs_diff(std::span<const double> x,
                           std::span<const double> y) {
  double m = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i)
    m = std::max(m, std::abs(x[i] - y[i]));
  return m;
}

inline double dist2(std::span<const double> x, std::span<const double> y) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - y[i]) * (x[i] - y[i]);
  return std::sqrt(s);
}

}  // namespace sgld
