#pragma once

#include <cmath>
#include <map>
#include <vector>

#include "shapeoed/errors.hpp"
#include "shapeoed/mesh/mesh.hpp"

namespace shapeoed::shape {

using mesh::Mesh;
using mesh::Point2;

/// Closed polygonal discretization of the interface, counter-clockwise
/// around the inclusion.
struct InterfaceCurve {
  std::vector<std::size_t> nodes;  // mesh node ids in loop order
  std::vector<Point2> points;
  std::vector<double> arc;  // r_i, arc[0] = 0
  std::vector<Point2> normals;  // outward (inclusion → bulk)
  double length = 0.0;

  std::size_t size() const { return nodes.size(); }
  double segment_length(std::size_t i) const { return mesh::distance(points[i], points[(i + 1) % size()]); }
};

/// Builds the curve directly from a vertex loop (no mesh), e.g. for tests.
/// The loop is reoriented counter-clockwise and rotated to start at the
/// lexicographically smallest vertex.
inline InterfaceCurve curve_from_polygon(std::vector<Point2> loop, std::vector<std::size_t> ids = {}) {
  const std::size_t n = loop.size();
  if (n < 3) throw OpenLoop("interface: fewer than three vertices");
  if (ids.empty())
    for (std::size_t i = 0; i < n; ++i) ids.push_back(i);
  if (mesh::polygon_area(loop) < 0) {
    std::reverse(loop.begin(), loop.end());
    std::reverse(ids.begin(), ids.end());
  }
  std::size_t start = 0;
  for (std::size_t i = 1; i < n; ++i)
    if (loop[i].x < loop[start].x || (loop[i].x == loop[start].x && loop[i].y < loop[start].y)) start = i;
  std::rotate(loop.begin(), loop.begin() + static_cast<std::ptrdiff_t>(start), loop.end());
  std::rotate(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(start), ids.end());

  InterfaceCurve c;
  c.nodes = std::move(ids);
  c.points = std::move(loop);
  c.arc.resize(n);
  double r = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    c.arc[i] = r;
    r += c.segment_length(i);
  }
  c.length = r;

  c.normals.resize(n);
  auto edge_normal = [&](std::size_t i) {
    const Point2 d = c.points[(i + 1) % n] - c.points[i];
    const double len = mesh::norm(d);
    return Point2{d.y / len, -d.x / len};  // right of a CCW edge points outwards
  };
  for (std::size_t i = 0; i < n; ++i) {
    const Point2 a = edge_normal((i + n - 1) % n), b = edge_normal(i);
    const Point2 s = a + b;
    c.normals[i] = (1.0 / mesh::norm(s)) * s;
  }
  return c;
}

/// Extracts Γ_inc from the interface-tagged segments of a mesh and checks
/// that the normals point from inclusion into bulk elements.
inline InterfaceCurve interface_from_mesh(const Mesh& m) {
  std::map<std::size_t, std::vector<std::size_t>> adj;
  for (const auto& s : m.segments)
    if (s.tag.kind == mesh::SegmentKind::Interface) {
      adj[s.nodes[0]].push_back(s.nodes[1]);
      adj[s.nodes[1]].push_back(s.nodes[0]);
    }
  if (adj.empty()) throw OpenLoop("interface: mesh has no interface segments");
  for (const auto& [v, nb] : adj) {
    if (nb.size() == 1) throw OpenLoop("interface: loop is not closed at node " + std::to_string(v));
    if (nb.size() > 2) throw MultipleLoops("interface: node " + std::to_string(v) + " joins more than two segments");
  }
  std::vector<std::size_t> order{adj.begin()->first};
  std::size_t prev = order[0], cur = adj.begin()->second[0];
  while (cur != order[0]) {
    order.push_back(cur);
    const auto& nb = adj[cur];
    const std::size_t next = nb[0] == prev ? nb[1] : nb[0];
    prev = cur;
    cur = next;
  }
  if (order.size() != adj.size()) throw MultipleLoops("interface: segments form more than one loop");

  std::vector<Point2> pts;
  for (std::size_t v : order) pts.push_back(m.nodes[v]);
  InterfaceCurve c = curve_from_polygon(std::move(pts), std::move(order));

  // Orientation check against region tags: the element on the left of each
  // directed edge must be inclusion, the one on the right bulk.
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> directed;
  for (std::size_t e = 0; e < m.element_count(); ++e) {
    const auto& t = m.triangles[e];
    for (std::size_t i = 0; i < 3; ++i) directed[{t[i], t[(i + 1) % 3]}] = e;
  }
  for (std::size_t i = 0; i < c.size(); ++i) {
    const std::size_t a = c.nodes[i], b = c.nodes[(i + 1) % c.size()];
    const auto left = directed.find({a, b}), right = directed.find({b, a});
    if (left == directed.end() || right == directed.end() || m.regions[left->second] != mesh::Region::Inclusion ||
        m.regions[right->second] != mesh::Region::Bulk)
      throw InvalidGeometry("interface: normals do not point from inclusion to bulk");
  }
  return c;
}

/// Per-vertex vector values on the interface.
struct BoundaryField {
  std::vector<Point2> values;
};

/// Wrap-around arc-length distance on a closed curve of length L.
inline double wrap_distance(double r, double ri, double L) {
  const double d = std::abs(r - ri);
  return std::min(d, L - d);
}

/// The unsimplified three-way form min(|r − r_i|, L − r + r_i, L − r_i + r).
inline double wrap_distance_unsimplified(double r, double ri, double L) {
  return std::min(std::abs(r - ri), std::min(L - r + ri, L - ri + r));
}

inline std::vector<double> equidistant_centers(const InterfaceCurve& c, std::size_t count) {
  std::vector<double> r;
  for (std::size_t i = 0; i < count; ++i) r.push_back(c.length * static_cast<double>(i) / static_cast<double>(count));
  return r;
}

/// Gaussian bumps n(r)·exp(−s·d(r, r_i)²) at the given centres, followed by
/// the constant normal field; N_basis = centers.size() + 1.
inline std::vector<BoundaryField> gaussian_bump_basis(const InterfaceCurve& c, std::size_t n_basis, double s,
                                                      std::span<const double> centers) {
  if (!(s > 0.0)) throw DegenerateInput("gaussian_bump_basis: slope factor must be positive");
  if (n_basis == 0 || centers.size() + 1 != n_basis)
    throw CentersOutOfRange("gaussian_bump_basis: need exactly N_basis − 1 centres");
  for (double r : centers)
    if (!(r >= 0.0 && r < c.length)) throw CentersOutOfRange("gaussian_bump_basis: centre outside [0, L)");
  std::vector<BoundaryField> out;
  for (double ri : centers) {
    BoundaryField f;
    for (std::size_t v = 0; v < c.size(); ++v) {
      const double d = wrap_distance(c.arc[v], ri, c.length);
      f.values.push_back(std::exp(-s * d * d) * c.normals[v]);
    }
    out.push_back(std::move(f));
  }
  out.push_back(BoundaryField{c.normals});
  return out;
}

} // namespace shapeoed::shape
