#pragma once

#include <vector>

#include "shapeoed/errors.hpp"
#include "shapeoed/fem/p1.hpp"
#include "shapeoed/mesh/mesh.hpp"
#include "shapeoed/numerics/sparse.hpp"

namespace shapeoed::fim {

using numerics::SparseMatrix;
using numerics::Vector;

struct NoiseParams {
  double alpha0 = 0.01;
  double alpha1 = 1.0;
};

/// Measurement on one observation patch with covariance C = A⁻², where
/// A = −α₀Δ + α₁ id under natural boundary conditions on the patch.
class SensorModel {
public:
  SensorModel(mesh::Patch patch, NoiseParams noise = {}) : patch_(std::move(patch)), noise_(noise) {
    if (!(noise.alpha0 >= 0.0) || !(noise.alpha1 > 0.0))
      throw DegenerateInput("sensor model: need α₀ ≥ 0 and α₁ > 0");
    if (patch_.elements.empty()) throw DegenerateInput("sensor model: empty patch");
    const std::size_t n = patch_.node_count();
    const mesh::Mesh& m = *patch_.mesh;
    numerics::TripletBuilder b(n, n);
    b.reserve(9 * patch_.elements.size());
    lumped_.assign(n, 0.0);
    for (std::size_t e : patch_.elements) {
      const fem::P1Element el = fem::p1_element(m, e);
      std::array<std::size_t, 3> loc{};
      for (std::size_t i = 0; i < 3; ++i) loc[i] = static_cast<std::size_t>(patch_.global_to_local[m.triangles[e][i]]);
      for (std::size_t i = 0; i < 3; ++i) {
        lumped_[loc[i]] += el.area / 3.0;
        for (std::size_t j = 0; j < 3; ++j) b.add(loc[i], loc[j], el.area * mesh::dot(el.grad[i], el.grad[j]));
      }
    }
    stiffness_ = b.build();
  }

  const mesh::Patch& patch() const { return patch_; }
  const NoiseParams& noise() const { return noise_; }
  const SparseMatrix& stiffness() const { return stiffness_; }
  const Vector& lumped_mass() const { return lumped_; }
  std::size_t node_count() const { return patch_.node_count(); }

  Vector restrict(std::span<const double> global) const {
    if (global.size() != patch_.mesh->node_count()) throw DimensionMismatch("sensor: field is not a nodal vector of the mesh");
    Vector d(node_count());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = global[patch_.local_to_global[i]];
    return d;
  }

  /// M_s⁻¹(α₀K_s + α₁M_s)·d
  Vector apply_A(std::span<const double> d) const {
    if (d.size() != node_count()) throw DimensionMismatch("apply_A: field is not a patch vector");
    Vector out = stiffness_ * d;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = noise_.alpha0 * out[i] / lumped_[i] + noise_.alpha1 * d[i];
    return out;
  }

  /// aᵀ M_s b
  double inner(std::span<const double> a, std::span<const double> b) const {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += lumped_[i] * a[i] * b[i];
    return s;
  }

private:
  mesh::Patch patch_;
  NoiseParams noise_;
  SparseMatrix stiffness_;
  Vector lumped_;
};

inline Vector apply_Ak(const SensorModel& s, std::span<const double> d) { return s.apply_A(d); }

/// One model per sensor of the mesh, in mesh.sensor_ids order.
inline std::vector<SensorModel> sensor_models(const mesh::Mesh& m, NoiseParams noise = {}) {
  if (m.sensor_ids.empty()) throw MissingTag("mesh has no sensor patches");
  std::vector<SensorModel> out;
  for (int id : m.sensor_ids) out.emplace_back(mesh::extract_patch(m, mesh::PatchTag{mesh::PatchTag::Kind::Sensor, id}), noise);
  return out;
}

} // namespace shapeoed::fim
