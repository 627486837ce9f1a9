#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "shapeoed/errors.hpp"
#include "shapeoed/mesh/mesh.hpp"
#include "shapeoed/numerics/sparse.hpp"

namespace shapeoed::fem {

using mesh::Mesh;
using mesh::Point2;
using numerics::SparseMatrix;
using numerics::TripletBuilder;
using numerics::Vector;

/// Area and constant shape-function gradients of one linear triangle.
struct P1Element {
  double area = 0.0;
  std::array<Point2, 3> grad{};
};

inline P1Element p1_element(Point2 a, Point2 b, Point2 c) {
  const double twice = mesh::orient2d(a, b, c);
  P1Element el;
  el.area = 0.5 * twice;
  // ∇φ_i = rot90(opposite edge) / (2A)
  el.grad[0] = {(b.y - c.y) / twice, (c.x - b.x) / twice};
  el.grad[1] = {(c.y - a.y) / twice, (a.x - c.x) / twice};
  el.grad[2] = {(a.y - b.y) / twice, (b.x - a.x) / twice};
  return el;
}

inline P1Element p1_element(const Mesh& m, std::size_t e) {
  const auto c = m.corners(e);
  return p1_element(c[0], c[1], c[2]);
}

/// Symmetric 6-point quadrature of degree 4 on the reference triangle:
/// barycentric points and weights summing to one.
struct TriangleRule {
  std::array<std::array<double, 3>, 6> points;
  std::array<double, 6> weights;
};

inline const TriangleRule& degree4_rule() {
  static const TriangleRule rule = [] {
    const double a = 0.445948490915965, b = 0.091576213509771;
    const double wa = 0.223381589678011, wb = 0.109951743655322;
    return TriangleRule{{{{a, a, 1 - 2 * a}, {a, 1 - 2 * a, a}, {1 - 2 * a, a, a},
                          {b, b, 1 - 2 * b}, {b, 1 - 2 * b, b}, {1 - 2 * b, b, b}}},
                        {wa, wa, wa, wb, wb, wb}};
  }();
  return rule;
}

/// Full P1 sparsity pattern: every pair of nodes sharing an element, with
/// explicit zeros. Matrices built on it combine entry by entry.
inline TripletBuilder pattern_builder(const Mesh& m) {
  TripletBuilder b(m.node_count(), m.node_count());
  b.reserve(9 * m.element_count() + 4 * m.segments.size());
  for (const auto& t : m.triangles)
    for (std::size_t i : t)
      for (std::size_t j : t) b.add(i, j, 0.0);
  return b;
}

/// Consistent mass matrix, optionally weighted by an element-wise constant.
inline SparseMatrix assemble_mass(const Mesh& m, std::span<const double> element_weight = {}) {
  TripletBuilder b = pattern_builder(m);
  for (std::size_t e = 0; e < m.element_count(); ++e) {
    const double w = element_weight.empty() ? 1.0 : element_weight[e];
    if (w == 0.0) continue;
    const double area = p1_element(m, e).area;
    const auto& t = m.triangles[e];
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 3; ++j) b.add(t[i], t[j], w * area * (i == j ? 2.0 : 1.0) / 12.0);
  }
  return b.build();
}

/// Stiffness ∫ k ∇φ_i·∇φ_j with element-wise k.
inline SparseMatrix assemble_stiffness(const Mesh& m, std::span<const double> kappa) {
  TripletBuilder b = pattern_builder(m);
  for (std::size_t e = 0; e < m.element_count(); ++e) {
    const P1Element el = p1_element(m, e);
    const auto& t = m.triangles[e];
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 3; ++j) b.add(t[i], t[j], kappa[e] * el.area * mesh::dot(el.grad[i], el.grad[j]));
  }
  return b.build();
}

/// Boundary mass ∫ β φ_i φ_j ds over Robin segments, β per robin id.
inline SparseMatrix assemble_robin(const Mesh& m, std::span<const double> beta_by_id) {
  TripletBuilder b = pattern_builder(m);
  for (const auto& s : m.segments) {
    if (s.tag.kind != mesh::SegmentKind::Robin) continue;
    const double beta = beta_by_id[static_cast<std::size_t>(s.tag.id)];
    if (beta == 0.0) continue;
    const double len = mesh::distance(m.nodes[s.nodes[0]], m.nodes[s.nodes[1]]);
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t j = 0; j < 2; ++j) b.add(s.nodes[i], s.nodes[j], beta * len * (i == j ? 2.0 : 1.0) / 6.0);
  }
  return b.build();
}

using SourceFunction = std::function<double(Point2, double)>;

/// Load vector ∫ f(·, t) φ_i with the degree-4 rule.
inline Vector assemble_load(const Mesh& m, const SourceFunction& f, double t) {
  Vector out(m.node_count(), 0.0);
  const auto& rule = degree4_rule();
  for (std::size_t e = 0; e < m.element_count(); ++e) {
    const auto c = m.corners(e);
    const double area = mesh::triangle_area(c[0], c[1], c[2]);
    const auto& tri = m.triangles[e];
    for (std::size_t q = 0; q < 6; ++q) {
      const auto& l = rule.points[q];
      const Point2 x{l[0] * c[0].x + l[1] * c[1].x + l[2] * c[2].x, l[0] * c[0].y + l[1] * c[1].y + l[2] * c[2].y};
      const double fx = f(x, t) * rule.weights[q] * area;
      for (std::size_t i = 0; i < 3; ++i) out[tri[i]] += fx * l[i];
    }
  }
  return out;
}

/// L² norm of (P1 field − exact) evaluated with the degree-4 rule.
inline double l2_error(const Mesh& m, std::span<const double> uh, const std::function<double(Point2)>& exact) {
  const auto& rule = degree4_rule();
  double s = 0.0;
  for (std::size_t e = 0; e < m.element_count(); ++e) {
    const auto c = m.corners(e);
    const double area = mesh::triangle_area(c[0], c[1], c[2]);
    const auto& tri = m.triangles[e];
    for (std::size_t q = 0; q < 6; ++q) {
      const auto& l = rule.points[q];
      const Point2 x{l[0] * c[0].x + l[1] * c[1].x + l[2] * c[2].x, l[0] * c[0].y + l[1] * c[1].y + l[2] * c[2].y};
      const double d = l[0] * uh[tri[0]] + l[1] * uh[tri[1]] + l[2] * uh[tri[2]] - exact(x);
      s += rule.weights[q] * area * d * d;
    }
  }
  return std::sqrt(s);
}

} // namespace shapeoed::fem
