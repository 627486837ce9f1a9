#pragma once

#include <array>
#include <vector>

#include "shapeoed/errors.hpp"
#include "shapeoed/fem/p1.hpp"
#include "shapeoed/numerics/dense.hpp"
#include "shapeoed/numerics/sparse.hpp"
#include "shapeoed/shape/curve.hpp"

namespace shapeoed::shape {

using numerics::SparseMatrix;
using numerics::Vector;

/// Nodal 2-vectors on every mesh node; zero outside the hold-all domain.
struct VelocityField {
  std::vector<Point2> values;
};

struct Lame {
  double lambda = 0.01;
  double mu = 0.495;
};

/// Elements of the hold-all domain D (bulk and inclusion).
inline std::vector<std::size_t> holdall_elements(const Mesh& m) {
  std::vector<std::size_t> el;
  for (std::size_t e = 0; e < m.element_count(); ++e)
    if (m.in_holdall[e]) el.push_back(e);
  return el;
}

/// Vector P1 stiffness for ∫ 2μ ε(V):ε(W) + λ div V div W over `elements`;
/// DOF 2i is the x-component at node i, 2i+1 the y-component.
inline SparseMatrix assemble_elasticity(const Mesh& m, std::span<const std::size_t> elements, const Lame& lame) {
  numerics::TripletBuilder b(2 * m.node_count(), 2 * m.node_count());
  b.reserve(36 * elements.size());
  const double l = lame.lambda, mu = lame.mu;
  for (std::size_t e : elements) {
    const fem::P1Element el = fem::p1_element(m, e);
    const auto& t = m.triangles[e];
    // strain rows (ε_xx, ε_yy, γ_xy) per DOF
    std::array<std::array<double, 3>, 6> B{};
    for (std::size_t i = 0; i < 3; ++i) {
      B[2 * i] = {el.grad[i].x, 0.0, el.grad[i].y};
      B[2 * i + 1] = {0.0, el.grad[i].y, el.grad[i].x};
    }
    const double D[3][3] = {{l + 2 * mu, l, 0}, {l, l + 2 * mu, 0}, {0, 0, mu}};
    for (std::size_t p = 0; p < 6; ++p)
      for (std::size_t q = 0; q < 6; ++q) {
        double s = 0.0;
        for (std::size_t r = 0; r < 3; ++r)
          for (std::size_t c = 0; c < 3; ++c) s += B[p][r] * D[r][c] * B[q][c];
        b.add(2 * t[p / 2] + p % 2, 2 * t[q / 2] + q % 2, el.area * s);
      }
  }
  return b.build();
}

namespace detail {

inline Vector flatten(std::span<const Point2> v) {
  Vector f(2 * v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    f[2 * i] = v[i].x;
    f[2 * i + 1] = v[i].y;
  }
  return f;
}

} // namespace detail

/// Linear-elasticity extension of interface data into D: V = V̄ on Γ_inc,
/// V = 0 on ∂D, zero outside D.
class VelocityExtender {
public:
  VelocityExtender(const Mesh& m, const InterfaceCurve& curve, const Lame& lame = {}, double cg_tol = 1e-12)
      : mesh_(m), curve_(curve), tol_(cg_tol) {
    const auto elements = holdall_elements(m);
    if (elements.empty()) throw MissingTag("extend_velocity: mesh has no hold-all elements");
    stiffness_ = assemble_elasticity(m, elements, lame);

    // DOF classes: 0 outside D, 1 free, 2 interface, 3 ∂D
    std::vector<int> kind(m.node_count(), 0);
    for (std::size_t e : elements)
      for (std::size_t n : m.triangles[e]) kind[n] = 1;
    for (std::size_t n : m.nodes_with_tag(mesh::SegmentKind::Holdall)) kind[n] = 3;
    for (std::size_t n : curve.nodes) kind[n] = 2;
    free_.assign(2 * m.node_count(), -1);
    for (std::size_t n = 0; n < m.node_count(); ++n)
      if (kind[n] == 1) {
        free_[2 * n] = static_cast<std::int64_t>(n_free_++);
        free_[2 * n + 1] = static_cast<std::int64_t>(n_free_++);
      }
    free_block_ = stiffness_.submatrix(free_, n_free_, free_, n_free_);
  }

  VelocityField extend(const BoundaryField& data) const {
    if (data.values.size() != curve_.size()) throw DimensionMismatch("extend_velocity: boundary field size differs from curve");
    const std::size_t n = mesh_.node_count();
    Vector lift(2 * n, 0.0);
    for (std::size_t v = 0; v < curve_.size(); ++v) {
      lift[2 * curve_.nodes[v]] = data.values[v].x;
      lift[2 * curve_.nodes[v] + 1] = data.values[v].y;
    }
    const Vector klift = stiffness_ * lift;
    Vector rhs(n_free_);
    for (std::size_t i = 0; i < 2 * n; ++i)
      if (free_[i] >= 0) rhs[static_cast<std::size_t>(free_[i])] = -klift[i];
    const Vector x = numerics::cg_solve(free_block_, rhs, tol_);
    VelocityField out{std::vector<Point2>(n, {0.0, 0.0})};
    for (std::size_t i = 0; i < n; ++i) {
      const double vx = free_[2 * i] >= 0 ? x[static_cast<std::size_t>(free_[2 * i])] : lift[2 * i];
      const double vy = free_[2 * i + 1] >= 0 ? x[static_cast<std::size_t>(free_[2 * i + 1])] : lift[2 * i + 1];
      out.values[i] = {vx, vy};
    }
    return out;
  }

  /// ∫_D ε(V):σ(ε(V))
  double energy(const VelocityField& v) const {
    const Vector f = detail::flatten(v.values);
    return stiffness_.bilinear(f, f);
  }

  const SparseMatrix& stiffness() const { return stiffness_; }
  bool is_free_node(std::size_t n) const { return free_[2 * n] >= 0; }

private:
  const Mesh& mesh_;
  const InterfaceCurve& curve_;
  double tol_;
  SparseMatrix stiffness_;
  std::vector<std::int64_t> free_;
  std::size_t n_free_ = 0;
  SparseMatrix free_block_;
};

inline VelocityField extend_velocity(const Mesh& m, const InterfaceCurve& curve, const BoundaryField& data, const Lame& lame = {}) {
  return VelocityExtender(m, curve, lame).extend(data);
}

/// B_ij = ∫_D ∇V_i : ∇V_j over hold-all elements.
inline numerics::DenseMatrix gramian(const Mesh& m, std::span<const VelocityField> fields) {
  const std::size_t nb = fields.size();
  numerics::DenseMatrix b(nb, nb);
  const auto elements = holdall_elements(m);
  std::vector<std::array<double, 4>> g(nb);
  for (std::size_t e : elements) {
    const fem::P1Element el = fem::p1_element(m, e);
    const auto& t = m.triangles[e];
    for (std::size_t f = 0; f < nb; ++f) {
      g[f] = {0, 0, 0, 0};
      for (std::size_t i = 0; i < 3; ++i) {
        const Point2 v = fields[f].values[t[i]];
        g[f][0] += v.x * el.grad[i].x;
        g[f][1] += v.x * el.grad[i].y;
        g[f][2] += v.y * el.grad[i].x;
        g[f][3] += v.y * el.grad[i].y;
      }
    }
    for (std::size_t i = 0; i < nb; ++i)
      for (std::size_t j = i; j < nb; ++j)
        b(i, j) += el.area * (g[i][0] * g[j][0] + g[i][1] * g[j][1] + g[i][2] * g[j][2] + g[i][3] * g[j][3]);
  }
  for (std::size_t i = 0; i < nb; ++i)
    for (std::size_t j = 0; j < i; ++j) b(i, j) = b(j, i);
  return b;
}

} // namespace shapeoed::shape
