#pragma once

#include <cstdint>
#include <random>

#include "shapeoed/numerics/dense.hpp"

namespace testsupport {

using shapeoed::numerics::DenseMatrix;

inline std::mt19937_64& rng(std::uint64_t reseed = 0) {
  static std::mt19937_64 g(20240611);
  if (reseed) g.seed(reseed);
  return g;
}

inline double uniform(double lo = -1.0, double hi = 1.0) {
  return std::uniform_real_distribution<double>(lo, hi)(rng());
}

inline DenseMatrix random_matrix(std::size_t r, std::size_t c) {
  DenseMatrix m(r, c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) m(i, j) = uniform();
  return m;
}

inline DenseMatrix random_symmetric(std::size_t n) {
  DenseMatrix m = random_matrix(n, n);
  m.symmetrize();
  return m;
}

/// AᵀA + shift·I
inline DenseMatrix random_spd(std::size_t n, double shift = 1.0) {
  const DenseMatrix a = random_matrix(n, n);
  DenseMatrix s = a.transposed() * a;
  for (std::size_t i = 0; i < n; ++i) s(i, i) += shift;
  s.symmetrize();
  return s;
}

inline std::vector<double> random_vector(std::size_t n, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = uniform(lo, hi);
  return v;
}

} // namespace testsupport
