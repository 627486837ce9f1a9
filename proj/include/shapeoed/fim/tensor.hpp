#pragma once

#include <numeric>
#include <vector>

#include "shapeoed/errors.hpp"
#include "shapeoed/fem/heat.hpp"
#include "shapeoed/fim/sensor.hpp"
#include "shapeoed/numerics/dense.hpp"

namespace shapeoed::fim {

using numerics::DenseMatrix;

/// Elementary FIMs Υ_{k,ℓ}, stored (k, ℓ) row-major, and the Gramian B.
struct FimTensor {
  std::size_t n_obs = 0;
  std::size_t n_time = 0;
  std::size_t n_basis = 0;
  std::vector<DenseMatrix> blocks;
  DenseMatrix gramian;

  std::size_t size() const { return n_obs * n_time; }
  std::size_t index(std::size_t k, std::size_t l) const { return k * n_time + l; }
  const DenseMatrix& block(std::size_t k, std::size_t l) const { return blocks[index(k, l)]; }
  const DenseMatrix& operator[](std::size_t idx) const { return blocks[idx]; }

  void check() const {
    if (blocks.size() != size()) throw DimensionMismatch("fim tensor: block count differs from n_obs·n_time");
    for (const auto& b : blocks)
      if (b.rows() != n_basis || b.cols() != n_basis) throw DimensionMismatch("fim tensor: block is not n_basis × n_basis");
    if (gramian.rows() != n_basis || gramian.cols() != n_basis) throw DimensionMismatch("fim tensor: Gramian size differs");
  }
};

inline std::vector<std::size_t> all_instants(const fem::Trajectory& t) {
  std::vector<std::size_t> out(t.size());
  std::iota(out.begin(), out.end(), std::size_t{0});
  return out;
}

/// (Υ_{k,ℓ})_ij = (A d_i)ᵀ M_s (A d_j) with d_i the patch restriction of
/// sensitivity i at instant ℓ.
inline FimTensor elementary_fims(std::span<const fem::Trajectory> sensitivities, std::span<const SensorModel> sensors,
                                 std::span<const std::size_t> instants, const DenseMatrix& gramian) {
  if (sensitivities.empty()) throw DimensionMismatch("elementary_fims: no sensitivities");
  const std::size_t nb = sensitivities.size();
  const std::size_t n_traj = sensitivities[0].size();
  for (const auto& s : sensitivities)
    if (s.size() != n_traj) throw DimensionMismatch("elementary_fims: trajectories have different lengths");
  for (std::size_t l : instants)
    if (l >= n_traj) throw InstantOutOfRange("elementary_fims: instant " + std::to_string(l) + " beyond trajectory");
  if (gramian.rows() != nb || gramian.cols() != nb) throw DimensionMismatch("elementary_fims: Gramian size differs from basis");

  FimTensor t;
  t.n_obs = sensors.size();
  t.n_time = instants.size();
  t.n_basis = nb;
  t.gramian = gramian;
  t.blocks.reserve(t.size());
  std::vector<Vector> ad(nb);
  for (const auto& s : sensors)
    for (std::size_t l : instants) {
      for (std::size_t i = 0; i < nb; ++i) ad[i] = s.apply_A(s.restrict(sensitivities[i][l]));
      DenseMatrix y(nb, nb);
      for (std::size_t i = 0; i < nb; ++i)
        for (std::size_t j = i; j < nb; ++j) y(i, j) = s.inner(ad[i], ad[j]);
      for (std::size_t i = 0; i < nb; ++i)
        for (std::size_t j = 0; j < i; ++j) y(i, j) = y(j, i);
      t.blocks.push_back(std::move(y));
    }
  return t;
}

inline FimTensor elementary_fims(std::span<const fem::Trajectory> sensitivities, std::span<const SensorModel> sensors,
                                 const DenseMatrix& gramian) {
  const auto inst = all_instants(sensitivities.front());
  return elementary_fims(sensitivities, sensors, inst, gramian);
}

/// The same experiment in a B-orthonormal basis: blocks L⁻¹Υ_{k,ℓ}L⁻ᵀ with
/// B = LLᵀ, Gramian I. Φ_A and its gradient are unchanged, but they no longer
/// inherit the conditioning of B.
inline FimTensor whitened(const FimTensor& t) {
  t.check();
  const DenseMatrix l = numerics::cholesky(t.gramian);
  FimTensor r{t.n_obs, t.n_time, t.n_basis, {}, DenseMatrix::identity(t.n_basis)};
  r.blocks.reserve(t.blocks.size());
  for (const auto& b : t.blocks) r.blocks.push_back(numerics::congruence_inverse(l, b));
  return r;
}

struct CombinedFim {
  DenseMatrix matrix;
  std::vector<double> weights;
};

/// Υ(w) = Σ w_{k,ℓ} Υ_{k,ℓ}, summed in enumeration order; zero weights skipped.
inline DenseMatrix combined_matrix(std::span<const double> w, const FimTensor& t) {
  if (w.size() != t.size()) throw DimensionMismatch("combine: design has " + std::to_string(w.size()) + " weights, tensor " + std::to_string(t.size()));
  DenseMatrix y(t.n_basis, t.n_basis);
  const std::size_t nn = t.n_basis * t.n_basis;
  for (std::size_t idx = 0; idx < w.size(); ++idx) {
    if (w[idx] == 0.0) continue;
    const double* src = t.blocks[idx].data().data();
    double* dst = y.data().data();
    for (std::size_t q = 0; q < nn; ++q) dst[q] += w[idx] * src[q];
  }
  return y;
}

inline CombinedFim combine(std::span<const double> w, const FimTensor& t) {
  return {combined_matrix(w, t), std::vector<double>(w.begin(), w.end())};
}

/// Υ_k = Σ_ℓ Υ_{k,ℓ}, ℓ ascending.
inline std::vector<DenseMatrix> aggregate_spatial(const FimTensor& t) {
  std::vector<DenseMatrix> out;
  for (std::size_t k = 0; k < t.n_obs; ++k) {
    DenseMatrix s(t.n_basis, t.n_basis);
    for (std::size_t l = 0; l < t.n_time; ++l) s = s + t.block(k, l);
    out.push_back(std::move(s));
  }
  return out;
}

/// The aggregated blocks as a tensor with a single instant.
inline FimTensor spatial_tensor(const FimTensor& t) {
  FimTensor s;
  s.n_obs = t.n_obs;
  s.n_time = 1;
  s.n_basis = t.n_basis;
  s.blocks = aggregate_spatial(t);
  s.gramian = t.gramian;
  return s;
}

} // namespace shapeoed::fim
