#pragma once

#include <limits>
#include <optional>
#include <vector>

#include "shapeoed/errors.hpp"
#include "shapeoed/fim/tensor.hpp"
#include "shapeoed/numerics/dense.hpp"

namespace shapeoed::oed {

using fim::FimTensor;
using numerics::DenseMatrix;
using numerics::Vector;

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

namespace detail {

inline bool is_identity(const DenseMatrix& b) {
  for (std::size_t i = 0; i < b.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j)
      if (b(i, j) != (i == j ? 1.0 : 0.0)) return false;
  return true;
}

/// Υ in a B-orthonormal basis, C = L⁻¹ΥL⁻ᵀ with B = LLᵀ, so that
/// trace(BΥ⁻¹) = trace(C⁻¹) is conditioned by the pencil, not by Υ alone.
struct Reduced {
  std::optional<DenseMatrix> l;  // empty when B = I
  DenseMatrix c;
};

inline Reduced reduce(const DenseMatrix& upsilon, const DenseMatrix& b) {
  if (upsilon.rows() != b.rows() || !upsilon.square() || !b.square()) throw DimensionMismatch("a_criterion: Υ and B differ in size");
  if (is_identity(b)) return {std::nullopt, upsilon};
  auto l = numerics::try_cholesky(b);
  if (!l) throw DegenerateInput("a_criterion: Gramian is not positive definite");
  DenseMatrix c = numerics::congruence_inverse(*l, upsilon);
  return {std::move(l), std::move(c)};
}

} // namespace detail

/// Φ_A = trace(B Υ⁻¹); +∞ when Υ is rank deficient.
inline double a_criterion(const DenseMatrix& upsilon, const DenseMatrix& b) {
  const auto red = detail::reduce(upsilon, b);
  const auto lc = numerics::try_cholesky(red.c);
  if (!lc) return kInfinity;
  return numerics::cholesky_solve(*lc, DenseMatrix::identity(red.c.rows())).trace();
}

inline double a_criterion(std::span<const double> w, const FimTensor& t) {
  return a_criterion(fim::combined_matrix(w, t), t.gramian);
}

/// G = Υ⁻¹ B Υ⁻¹ = L⁻ᵀC⁻²L⁻¹, so that ∂Φ_A/∂w_{k,ℓ} = −⟨G, Υ_{k,ℓ}⟩.
inline DenseMatrix criterion_kernel(const DenseMatrix& upsilon, const DenseMatrix& b) {
  const auto red = detail::reduce(upsilon, b);
  const auto lc = numerics::try_cholesky(red.c);
  if (!lc) throw SingularInformation("gradient: combined information matrix is rank deficient");
  const DenseMatrix inv = numerics::cholesky_solve(*lc, DenseMatrix::identity(red.c.rows()));
  DenseMatrix g = inv * inv;
  if (red.l) {
    const std::size_t n = g.rows();
    Vector col(n);
    DenseMatrix h(n);
    for (std::size_t j = 0; j < n; ++j) {  // h = L⁻ᵀ g
      for (std::size_t i = 0; i < n; ++i) col[i] = g(i, j);
      numerics::backward_substitute(*red.l, col);
      for (std::size_t i = 0; i < n; ++i) h(i, j) = col[i];
    }
    for (std::size_t i = 0; i < n; ++i) {  // g = h L⁻¹ = (L⁻ᵀ hᵀ)ᵀ
      for (std::size_t j = 0; j < n; ++j) col[j] = h(i, j);
      numerics::backward_substitute(*red.l, col);
      for (std::size_t j = 0; j < n; ++j) g(i, j) = col[j];
    }
  }
  g.symmetrize();
  return g;
}

struct Evaluation {
  double phi = kInfinity;
  Vector gradient;
};

inline Vector gradient_from_kernel(const DenseMatrix& g, std::span<const DenseMatrix> blocks) {
  Vector out(blocks.size());
  for (std::size_t i = 0; i < blocks.size(); ++i) out[i] = -numerics::frobenius_inner(g, blocks[i]);
  return out;
}

inline Vector gradient(std::span<const double> w, const FimTensor& t) {
  const DenseMatrix g = criterion_kernel(fim::combined_matrix(w, t), t.gramian);
  return gradient_from_kernel(g, t.blocks);
}

inline Evaluation evaluate(std::span<const double> w, const FimTensor& t) {
  const DenseMatrix y = fim::combined_matrix(w, t);
  const DenseMatrix g = criterion_kernel(y, t.gramian);
  return {a_criterion(y, t.gramian), gradient_from_kernel(g, t.blocks)};
}

} // namespace shapeoed::oed
