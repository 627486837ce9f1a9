#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "shapeoed/numerics/dense.hpp"

namespace shapeoed::numerics {

/// Eigenvalues in ascending order; column i of `vectors` belongs to values[i].
struct EigenDecomposition {
  Vector values;
  DenseMatrix vectors;
};

inline constexpr int kJacobiMaxSweeps = 50;

namespace detail {

inline double off_diagonal_norm(const DenseMatrix& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a.size(); ++j)
      if (i != j) s += a(i, j) * a(i, j);
  return std::sqrt(s);
}

inline EigenDecomposition sorted(Vector values, const DenseMatrix& vectors) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  EigenDecomposition out{Vector(n), DenseMatrix(n)};
  for (std::size_t c = 0; c < n; ++c) {
    out.values[c] = values[order[c]];
    for (std::size_t r = 0; r < n; ++r) out.vectors(r, c) = vectors(r, order[c]);
  }
  return out;
}

} // namespace detail

/// Cyclic Jacobi eigenvalue iteration for a dense symmetric matrix.
/// Converged when ‖offdiag‖_F ≤ 1e-12 · ‖A‖_F.
inline EigenDecomposition jacobi_eigensym(const DenseMatrix& input) {
  if (!input.square()) throw DimensionMismatch("jacobi_eigensym: matrix is not square");
  const std::size_t n = input.size();
  DenseMatrix a = input;
  a.symmetrize();
  DenseMatrix v = DenseMatrix::identity(n);
  const double target = 1e-12 * a.frobenius_norm();

  int sweep = 0;
  while (detail::off_diagonal_norm(a) > target) {
    if (sweep++ >= kJacobiMaxSweeps)
      throw NoConvergence("jacobi_eigensym: no convergence within 50 sweeps");
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  Vector values(n);
  for (std::size_t i = 0; i < n; ++i) values[i] = a(i, i);
  return detail::sorted(std::move(values), v);
}

/// Symmetric-definite pencil A v = Λ B v. Reduced to standard form through
/// B = L Lᵀ and C = L⁻¹ A L⁻ᵀ; eigenvectors come back B-orthonormal.
inline EigenDecomposition generalized_eig(const DenseMatrix& a, const DenseMatrix& b) {
  if (!a.square() || !b.square() || a.size() != b.size())
    throw DimensionMismatch("generalized_eig: pencil dimensions differ");
  const std::size_t n = a.size();
  const DenseMatrix l = cholesky(b);

  const DenseMatrix c = congruence_inverse(l, a);
  Vector col(n);

  EigenDecomposition std_form = jacobi_eigensym(c);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < n; ++i) col[i] = std_form.vectors(i, j);
    backward_substitute(l, col);
    for (std::size_t i = 0; i < n; ++i) std_form.vectors(i, j) = col[i];
  }
  return std_form;
}

} // namespace shapeoed::numerics
