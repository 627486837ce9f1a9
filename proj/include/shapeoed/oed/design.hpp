#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "shapeoed/errors.hpp"
#include "shapeoed/oed/criterion.hpp"

namespace shapeoed::oed {

/// Weights below this are reported as zero, above 1 − this as one.
inline constexpr double kWeightThreshold = 1e-6;

/// Validates C_w as an integer in [1, n).
inline std::size_t integer_budget(double c_w, std::size_t n) {
  if (!std::isfinite(c_w) || c_w != std::floor(c_w)) throw NonIntegerBudget("budget C_w must be an integer");
  if (c_w < 1.0 || c_w >= static_cast<double>(n))
    throw NonIntegerBudget("budget C_w must satisfy 1 ≤ C_w < " + std::to_string(n));
  return static_cast<std::size_t>(c_w);
}

namespace detail {

/// Indices ordered by key ascending, ties by index.
template <class Key>
std::vector<std::size_t> order_by(std::size_t n, Key key) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return key(a) < key(b); });
  return idx;
}

} // namespace detail

/// Binary design with ones at the C_w most negative gradient entries.
inline std::vector<double> vertex_oracle(std::span<const double> g, double c_w) {
  const std::size_t cw = integer_budget(c_w, g.size());
  const auto idx = detail::order_by(g.size(), [&](std::size_t i) { return g[i]; });
  std::vector<double> v(g.size(), 0.0);
  for (std::size_t i = 0; i < cw; ++i) v[idx[i]] = 1.0;
  return v;
}

/// Largest C_w weights set to one, the rest to zero.
inline std::vector<double> round_design(std::span<const double> w, double c_w) {
  const std::size_t cw = integer_budget(c_w, w.size());
  const auto idx = detail::order_by(w.size(), [&](std::size_t i) { return -w[i]; });
  std::vector<double> v(w.size(), 0.0);
  for (std::size_t i = 0; i < cw; ++i) v[idx[i]] = 1.0;
  return v;
}

inline std::vector<double> uniform_design(std::size_t n, double c_w) {
  return std::vector<double>(n, c_w / static_cast<double>(n));
}

struct WeightCounts {
  std::size_t zero = 0, fractional = 0, one = 0;
};

inline WeightCounts count_weights(std::span<const double> w) {
  WeightCounts c;
  for (double x : w) {
    if (x < kWeightThreshold) ++c.zero;
    else if (x > 1.0 - kWeightThreshold) ++c.one;
    else ++c.fractional;
  }
  return c;
}

struct OptimalityResidual {
  double xi = 0.0;
  std::vector<double> violations;

  double max_violation() const { return violations.empty() ? 0.0 : *std::max_element(violations.begin(), violations.end()); }
  bool satisfied(double tol) const { return max_violation() <= tol * xi; }
};

/// ξ is the mean of −g over fractional weights, or the C_w-th largest −g
/// when no weight is fractional.
inline OptimalityResidual optimality_residual(std::span<const double> w, std::span<const double> g, double c_w) {
  if (w.size() != g.size()) throw DimensionMismatch("optimality_residual: weights and gradient differ in size");
  const std::size_t cw = integer_budget(c_w, w.size());
  OptimalityResidual r;
  double sum = 0.0;
  std::size_t nfrac = 0;
  for (std::size_t i = 0; i < w.size(); ++i)
    if (w[i] >= kWeightThreshold && w[i] <= 1.0 - kWeightThreshold) {
      sum += -g[i];
      ++nfrac;
    }
  if (nfrac > 0) {
    r.xi = sum / static_cast<double>(nfrac);
  } else {
    std::vector<double> ng(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) ng[i] = -g[i];
    std::nth_element(ng.begin(), ng.begin() + static_cast<std::ptrdiff_t>(cw - 1), ng.end(), std::greater<>());
    r.xi = ng[cw - 1];
  }
  r.violations.resize(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double ng = -g[i];
    if (w[i] < kWeightThreshold) r.violations[i] = std::max(0.0, ng - r.xi);
    else if (w[i] > 1.0 - kWeightThreshold) r.violations[i] = std::max(0.0, r.xi - ng);
    else r.violations[i] = std::abs(ng - r.xi);
  }
  return r;
}

inline OptimalityResidual optimality_residual(std::span<const double> w, const FimTensor& t, double c_w) {
  const Vector g = gradient(w, t);
  return optimality_residual(w, g, c_w);
}

} // namespace shapeoed::oed
