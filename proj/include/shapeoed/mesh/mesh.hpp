#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "shapeoed/errors.hpp"
#include "shapeoed/mesh/geometry.hpp"
#include "shapeoed/mesh/triangulation.hpp"

namespace shapeoed::mesh {

enum class Region : std::uint8_t { Bulk = 0, Inclusion = 1 };

enum class SegmentKind : std::uint8_t { Dirichlet, Robin, Interface, Holdall, Sensor };

struct SegmentTag {
  SegmentKind kind = SegmentKind::Robin;
  int id = 0;  // robin piece id or sensor id; unused otherwise

  friend bool operator==(const SegmentTag&, const SegmentTag&) = default;
  friend auto operator<=>(const SegmentTag&, const SegmentTag&) = default;

  int encode() const { return static_cast<int>(kind) * 1000 + id; }
  static SegmentTag decode(int code) { return {static_cast<SegmentKind>(code / 1000), code % 1000}; }
};

struct Segment {
  std::array<std::size_t, 2> nodes{};
  SegmentTag tag;
};

enum class Side : std::uint8_t { Bottom, Right, Top, Left };

inline const char* side_name(Side s) {
  switch (s) {
    case Side::Bottom: return "bottom";
    case Side::Right: return "right";
    case Side::Top: return "top";
    case Side::Left: return "left";
  }
  return "?";
}

/// A stretch [from, to] of one side of the unit square, measured along the
/// side's coordinate (x for bottom/top, y for left/right).
struct RobinPiece {
  std::string name;
  Side side = Side::Bottom;
  double from = 0.0;
  double to = 1.0;
};

struct SensorBox {
  int id = 1;
  Box box;
};

struct GeometrySpec {
  Box holdall{{0.35, 0.35}, {0.65, 0.65}};
  /// Closed polygon; empty means no inclusion.
  std::vector<Point2> inclusion;
  std::vector<SensorBox> sensors;
  std::vector<Side> dirichlet_sides{Side::Top};
  std::vector<RobinPiece> robin_pieces;
  double h = 0.04;
  double min_angle_deg = 20.0;
  std::size_t max_nodes = 200000;

  bool is_dirichlet(Side s) const {
    return std::find(dirichlet_sides.begin(), dirichlet_sides.end(), s) != dirichlet_sides.end();
  }

  void validate() const {
    const Box unit{{0.0, 0.0}, {1.0, 1.0}};
    if (!(h > 0.0)) throw InvalidGeometry("geometry: target edge length h must be positive");
    if (!unit.strictly_contains(holdall)) throw InvalidGeometry("geometry: hold-all D must lie strictly inside the unit square");
    for (const Point2& p : inclusion)
      if (!holdall.contains(p)) throw InvalidGeometry("geometry: inclusion must lie strictly inside D");
    if (!inclusion.empty() && inclusion.size() < 3) throw InvalidGeometry("geometry: inclusion polygon needs at least 3 vertices");
    std::set<int> ids;
    for (std::size_t i = 0; i < sensors.size(); ++i) {
      const Box& b = sensors[i].box;
      if (!ids.insert(sensors[i].id).second) throw InvalidGeometry("geometry: duplicate sensor id " + std::to_string(sensors[i].id));
      if (!(b.lo.x < b.hi.x && b.lo.y < b.hi.y)) throw InvalidGeometry("geometry: empty sensor box");
      if (!unit.strictly_contains(b)) throw InvalidGeometry("geometry: sensor must lie strictly inside the unit square");
      if (b.overlaps_or_touches(holdall)) throw InvalidGeometry("geometry: sensor must not intersect D");
      for (std::size_t j = 0; j < i; ++j)
        if (b.overlaps_or_touches(sensors[j].box)) throw InvalidGeometry("geometry: sensors must be pairwise disjoint");
    }
    for (const auto& r : robin_pieces) {
      if (!(r.from >= 0.0 && r.to <= 1.0 && r.from < r.to)) throw InvalidGeometry("geometry: robin piece '" + r.name + "' has an invalid range");
      if (is_dirichlet(r.side)) throw InvalidGeometry("geometry: robin piece '" + r.name + "' lies on a Dirichlet side");
    }
    for (std::size_t i = 0; i < robin_pieces.size(); ++i)
      for (std::size_t j = 0; j < i; ++j)
        if (robin_pieces[i].side == robin_pieces[j].side && robin_pieces[i].from < robin_pieces[j].to &&
            robin_pieces[j].from < robin_pieces[i].to)
          throw InvalidGeometry("geometry: robin pieces overlap");
    if (inclusion.size() >= 3) {
      const std::size_t n = inclusion.size();
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 2; j < n; ++j) {
          if (i == 0 && j == n - 1) continue;
          if (segments_cross(inclusion[i], inclusion[(i + 1) % n], inclusion[j], inclusion[(j + 1) % n]))
            throw InvalidGeometry("geometry: inclusion polygon self-intersects");
        }
    }
  }
};

/// Conforming triangulation of the unit square with region and segment tags.
struct Mesh {
  std::vector<Point2> nodes;
  std::vector<std::array<std::size_t, 3>> triangles;
  std::vector<Region> regions;
  /// 1 when the element lies in the hold-all domain D.
  std::vector<std::uint8_t> in_holdall;
  std::vector<Segment> segments;
  std::vector<int> sensor_ids;
  /// Elements of each sensor, parallel to sensor_ids.
  std::vector<std::vector<std::size_t>> sensor_elements;
  /// Robin piece names; index is the robin id, id 0 is the untagged remainder.
  std::vector<std::string> robin_names{"default"};

  std::size_t node_count() const { return nodes.size(); }
  std::size_t element_count() const { return triangles.size(); }

  std::array<Point2, 3> corners(std::size_t e) const {
    const auto& t = triangles[e];
    return {nodes[t[0]], nodes[t[1]], nodes[t[2]]};
  }

  double element_area(std::size_t e) const {
    const auto c = corners(e);
    return triangle_area(c[0], c[1], c[2]);
  }

  double total_area() const {
    double a = 0.0;
    for (std::size_t e = 0; e < element_count(); ++e) a += element_area(e);
    return a;
  }

  double region_area(Region r) const {
    double a = 0.0;
    for (std::size_t e = 0; e < element_count(); ++e)
      if (regions[e] == r) a += element_area(e);
    return a;
  }

  std::ptrdiff_t sensor_index(int id) const {
    const auto it = std::find(sensor_ids.begin(), sensor_ids.end(), id);
    return it == sensor_ids.end() ? -1 : it - sensor_ids.begin();
  }

  int robin_id(const std::string& name) const {
    const auto it = std::find(robin_names.begin(), robin_names.end(), name);
    return it == robin_names.end() ? -1 : static_cast<int>(it - robin_names.begin());
  }

  /// Sorted unique nodes on segments matching `pred`.
  template <class Pred>
  std::vector<std::size_t> segment_nodes(Pred pred) const {
    std::set<std::size_t> s;
    for (const auto& seg : segments)
      if (pred(seg.tag)) s.insert(seg.nodes.begin(), seg.nodes.end());
    return {s.begin(), s.end()};
  }

  std::vector<std::size_t> nodes_with_tag(SegmentKind kind) const {
    return segment_nodes([kind](const SegmentTag& t) { return t.kind == kind; });
  }
};

// ---------------------------------------------------------------------------
// geometry helpers

/// Closed uniform cubic B-spline through `control` (periodic), sampled at
/// `samples` uniform parameter values. Returned loop is counter-clockwise.
inline std::vector<Point2> sample_closed_bspline(std::span<const Point2> control, std::size_t samples) {
  const std::size_t n = control.size();
  if (n < 4) throw InvalidGeometry("bspline: need at least 4 control points");
  std::vector<Point2> out;
  out.reserve(samples);
  for (std::size_t j = 0; j < samples; ++j) {
    const double u = static_cast<double>(j) * static_cast<double>(n) / static_cast<double>(samples);
    const auto seg = static_cast<std::size_t>(u);
    const double t = u - static_cast<double>(seg);
    const double t2 = t * t, t3 = t2 * t;
    const double b0 = (1 - t) * (1 - t) * (1 - t) / 6.0;
    const double b1 = (3 * t3 - 6 * t2 + 4) / 6.0;
    const double b2 = (-3 * t3 + 3 * t2 + 3 * t + 1) / 6.0;
    const double b3 = t3 / 6.0;
    const Point2 p0 = control[(seg + n - 1) % n], p1 = control[seg % n];
    const Point2 p2 = control[(seg + 1) % n], p3 = control[(seg + 2) % n];
    out.push_back({b0 * p0.x + b1 * p1.x + b2 * p2.x + b3 * p3.x, b0 * p0.y + b1 * p1.y + b2 * p2.y + b3 * p3.y});
  }
  if (polygon_area(out) < 0) std::reverse(out.begin(), out.end());
  return out;
}

/// Kidney-shaped control polygon used as the default inclusion.
inline std::vector<Point2> default_inclusion_controls() {
  return {{0.400, 0.360}, {0.485, 0.445}, {0.555, 0.360}, {0.640, 0.445},
          {0.625, 0.570}, {0.530, 0.640}, {0.400, 0.610}, {0.360, 0.485}};
}

inline std::vector<Point2> regular_polygon(Point2 center, double radius, std::size_t n, double phase = 0.0) {
  std::vector<Point2> p;
  const double pi = std::acos(-1.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double a = phase + 2.0 * pi * static_cast<double>(i) / static_cast<double>(n);
    p.push_back({center.x + radius * std::cos(a), center.y + radius * std::sin(a)});
  }
  return p;
}

/// Eight 0.3 × 0.3 sensors on a 3 × 3 grid around D, numbered
/// counter-clockwise from the bottom-left corner.
inline std::vector<SensorBox> default_sensor_layout() {
  const double lo[3] = {0.025, 0.35, 0.675};
  const int cells[8][2] = {{0, 0}, {1, 0}, {2, 0}, {2, 1}, {2, 2}, {1, 2}, {0, 2}, {0, 1}};
  std::vector<SensorBox> s;
  for (int k = 0; k < 8; ++k) {
    const double x = lo[cells[k][0]], y = lo[cells[k][1]];
    s.push_back({k + 1, Box{{x, y}, {x + 0.3, y + 0.3}}});
  }
  return s;
}

inline std::vector<RobinPiece> default_robin_pieces() {
  return {{"bottom_left", Side::Bottom, 0.0, 0.5}, {"bottom_right", Side::Bottom, 0.5, 1.0}};
}

inline GeometrySpec default_geometry() {
  GeometrySpec g;
  g.inclusion = sample_closed_bspline(default_inclusion_controls(), 64);
  g.sensors = default_sensor_layout();
  g.robin_pieces = default_robin_pieces();
  return g;
}

// ---------------------------------------------------------------------------

namespace detail {

inline Point2 side_point(Side s, double t) {
  switch (s) {
    case Side::Bottom: return {t, 0.0};
    case Side::Right: return {1.0, t};
    case Side::Top: return {t, 1.0};
    case Side::Left: return {0.0, t};
  }
  return {};
}

struct Pslg {
  std::vector<Point2> points;
  std::map<std::pair<double, double>, int> index;
  std::vector<InputSegment> segments;

  int vertex(Point2 p) {
    const auto [it, fresh] = index.emplace(std::pair{p.x, p.y}, static_cast<int>(points.size()));
    if (fresh) points.push_back(p);
    return it->second;
  }
  void segment(Point2 a, Point2 b, SegmentTag tag) { segments.push_back({vertex(a), vertex(b), tag.encode()}); }
};

} // namespace detail

/// Tag elements and constrained edges of a finished triangulation.
inline Mesh mesh_from_triangulation(const Triangulation& tri, const GeometrySpec& spec) {
  Mesh m;
  m.nodes.assign(tri.points().begin(), tri.points().end());
  for (const auto& t : tri.triangles())
    m.triangles.push_back({static_cast<std::size_t>(t[0]), static_cast<std::size_t>(t[1]), static_cast<std::size_t>(t[2])});
  for (const auto& [k, code] : tri.constraints()) {
    if (code < 0) continue;
    m.segments.push_back({{static_cast<std::size_t>(k.first), static_cast<std::size_t>(k.second)}, SegmentTag::decode(code)});
  }
  for (const auto& r : spec.robin_pieces) m.robin_names.push_back(r.name);
  for (const auto& s : spec.sensors) m.sensor_ids.push_back(s.id);
  m.sensor_elements.resize(spec.sensors.size());
  m.regions.resize(m.triangles.size(), Region::Bulk);
  m.in_holdall.resize(m.triangles.size(), 0);
  for (std::size_t e = 0; e < m.triangles.size(); ++e) {
    const auto c = m.corners(e);
    const Point2 g = centroid(c[0], c[1], c[2]);
    if (!spec.inclusion.empty() && point_in_polygon(g, spec.inclusion)) m.regions[e] = Region::Inclusion;
    if (spec.holdall.contains(g)) m.in_holdall[e] = 1;
    for (std::size_t s = 0; s < spec.sensors.size(); ++s)
      if (spec.sensors[s].box.contains(g)) m.sensor_elements[s].push_back(e);
  }
  return m;
}

/// Mesh the unit square with D, the inclusion interface, sensor boxes and
/// boundary pieces as constrained edges, then refine to quality.
inline Mesh build_mesh(const GeometrySpec& spec) {
  spec.validate();
  detail::Pslg g;

  for (Side side : {Side::Bottom, Side::Right, Side::Top, Side::Left}) {
    std::vector<double> cuts{0.0, 1.0};
    for (const auto& r : spec.robin_pieces)
      if (r.side == side) {
        cuts.push_back(r.from);
        cuts.push_back(r.to);
      }
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
      SegmentTag tag{SegmentKind::Dirichlet, 0};
      if (!spec.is_dirichlet(side)) {
        tag = {SegmentKind::Robin, 0};
        const double mid = 0.5 * (cuts[i] + cuts[i + 1]);
        for (std::size_t r = 0; r < spec.robin_pieces.size(); ++r)
          if (spec.robin_pieces[r].side == side && mid > spec.robin_pieces[r].from && mid < spec.robin_pieces[r].to)
            tag.id = static_cast<int>(r) + 1;
      }
      g.segment(detail::side_point(side, cuts[i]), detail::side_point(side, cuts[i + 1]), tag);
    }
  }

  const auto dc = spec.holdall.corners();
  for (std::size_t i = 0; i < 4; ++i) g.segment(dc[i], dc[(i + 1) % 4], {SegmentKind::Holdall, 0});
  for (const auto& s : spec.sensors) {
    const auto c = s.box.corners();
    for (std::size_t i = 0; i < 4; ++i) g.segment(c[i], c[(i + 1) % 4], {SegmentKind::Sensor, s.id});
  }
  const std::size_t ni = spec.inclusion.size();
  for (std::size_t i = 0; i < ni; ++i)
    g.segment(spec.inclusion[i], spec.inclusion[(i + 1) % ni], {SegmentKind::Interface, 0});

  auto dt = delaunay_triangulate(g.points);
  for (std::size_t i = 0; i < dt.vertex_of_input.size(); ++i)
    if (dt.vertex_of_input[i] != static_cast<int>(i)) throw DegenerateInput("build_mesh: coincident PSLG vertices");
  recover_constraints(dt.tri, g.segments);
  refine(dt.tri, {spec.min_angle_deg, spec.h, spec.max_nodes});
  return mesh_from_triangulation(dt.tri, spec);
}

/// Uniform n × n grid of the unit square, each cell cut along its
/// (0,0)–(1,1) diagonal, or with alternating diagonals when `union_jack`
/// (mirror symmetric for even n). Boundary edges on `dirichlet_sides` are
/// Dirichlet, the rest untagged Robin.
inline Mesh structured_unit_square(std::size_t n, std::vector<Side> dirichlet_sides = {Side::Bottom, Side::Right, Side::Top, Side::Left},
                                   bool union_jack = false) {
  Mesh m;
  auto id = [n](std::size_t i, std::size_t j) { return j * (n + 1) + i; };
  const double h = 1.0 / static_cast<double>(n);
  for (std::size_t j = 0; j <= n; ++j)
    for (std::size_t i = 0; i <= n; ++i)
      m.nodes.push_back({i == n ? 1.0 : static_cast<double>(i) * h, j == n ? 1.0 : static_cast<double>(j) * h});
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < n; ++i) {
      if (union_jack && (i + j) % 2 == 1) {
        m.triangles.push_back({id(i, j), id(i + 1, j), id(i, j + 1)});
        m.triangles.push_back({id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)});
      } else {
        m.triangles.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
        m.triangles.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
      }
    }
  m.regions.assign(m.triangles.size(), Region::Bulk);
  m.in_holdall.assign(m.triangles.size(), 0);
  auto tag_for = [&](Side s) {
    const bool dir = std::find(dirichlet_sides.begin(), dirichlet_sides.end(), s) != dirichlet_sides.end();
    return dir ? SegmentTag{SegmentKind::Dirichlet, 0} : SegmentTag{SegmentKind::Robin, 0};
  };
  for (std::size_t i = 0; i < n; ++i) {
    m.segments.push_back({{id(i, 0), id(i + 1, 0)}, tag_for(Side::Bottom)});
    m.segments.push_back({{id(n, i), id(n, i + 1)}, tag_for(Side::Right)});
    m.segments.push_back({{id(i, n), id(i + 1, n)}, tag_for(Side::Top)});
    m.segments.push_back({{id(0, i), id(0, i + 1)}, tag_for(Side::Left)});
  }
  return m;
}

// ---------------------------------------------------------------------------
// patches

struct PatchTag {
  enum class Kind { Bulk, Inclusion, Holdall, HoldallDomain, Sensor };
  Kind kind = Kind::Bulk;
  int id = 0;

  /// "bulk", "inclusion", "holdall" (D without the inclusion),
  /// "holdall_domain" (all of D), or "sensor:<id>".
  static PatchTag parse(const std::string& s) {
    if (s == "bulk") return {Kind::Bulk, 0};
    if (s == "inclusion") return {Kind::Inclusion, 0};
    if (s == "holdall") return {Kind::Holdall, 0};
    if (s == "holdall_domain") return {Kind::HoldallDomain, 0};
    if (s.rfind("sensor:", 0) == 0) {
      try {
        return {Kind::Sensor, std::stoi(s.substr(7))};
      } catch (const std::exception&) {
      }
    }
    throw UnknownTag("unknown patch tag '" + s + "'");
  }
};

/// Element subset of a mesh with a compact local node numbering.
struct Patch {
  const Mesh* mesh = nullptr;
  std::vector<std::size_t> elements;
  std::vector<std::size_t> local_to_global;
  /// −1 for nodes outside the patch.
  std::vector<std::int64_t> global_to_local;

  std::size_t node_count() const { return local_to_global.size(); }
  double area() const {
    double a = 0.0;
    for (std::size_t e : elements) a += mesh->element_area(e);
    return a;
  }
};

inline Patch make_patch(const Mesh& mesh, std::vector<std::size_t> elements) {
  Patch p;
  p.mesh = &mesh;
  p.elements = std::move(elements);
  p.global_to_local.assign(mesh.node_count(), -1);
  std::set<std::size_t> nodes;
  for (std::size_t e : p.elements) nodes.insert(mesh.triangles[e].begin(), mesh.triangles[e].end());
  for (std::size_t n : nodes) {
    p.global_to_local[n] = static_cast<std::int64_t>(p.local_to_global.size());
    p.local_to_global.push_back(n);
  }
  return p;
}

inline Patch extract_patch(const Mesh& mesh, const PatchTag& tag) {
  std::vector<std::size_t> el;
  switch (tag.kind) {
    case PatchTag::Kind::Bulk:
    case PatchTag::Kind::Inclusion: {
      const Region want = tag.kind == PatchTag::Kind::Bulk ? Region::Bulk : Region::Inclusion;
      for (std::size_t e = 0; e < mesh.element_count(); ++e)
        if (mesh.regions[e] == want) el.push_back(e);
      break;
    }
    case PatchTag::Kind::Holdall:
      for (std::size_t e = 0; e < mesh.element_count(); ++e)
        if (mesh.in_holdall[e] && mesh.regions[e] == Region::Bulk) el.push_back(e);
      break;
    case PatchTag::Kind::HoldallDomain:
      for (std::size_t e = 0; e < mesh.element_count(); ++e)
        if (mesh.in_holdall[e]) el.push_back(e);
      break;
    case PatchTag::Kind::Sensor: {
      const auto idx = mesh.sensor_index(tag.id);
      if (idx < 0) throw UnknownTag("no sensor with id " + std::to_string(tag.id));
      el = mesh.sensor_elements[static_cast<std::size_t>(idx)];
      break;
    }
  }
  return make_patch(mesh, std::move(el));
}

inline Patch extract_patch(const Mesh& mesh, const std::string& tag) { return extract_patch(mesh, PatchTag::parse(tag)); }

// ---------------------------------------------------------------------------
// validation

struct MeshQuality {
  double min_angle_deg = 180.0;
  double max_edge = 0.0;
  double min_area = 0.0;
};

inline MeshQuality mesh_quality(const Mesh& m) {
  MeshQuality q;
  q.min_area = std::numeric_limits<double>::infinity();
  for (std::size_t e = 0; e < m.element_count(); ++e) {
    const auto c = m.corners(e);
    q.min_angle_deg = std::min(q.min_angle_deg, min_angle_deg(c[0], c[1], c[2]));
    q.max_edge = std::max(q.max_edge, max_edge_length(c[0], c[1], c[2]));
    q.min_area = std::min(q.min_area, triangle_area(c[0], c[1], c[2]));
  }
  return q;
}

/// Structural problems of a mesh (empty when valid): orientation, edge-use
/// counts, constrained segments present as edges, interface separating the
/// two regions, and area partition.
inline std::vector<std::string> check_mesh(const Mesh& m) {
  std::vector<std::string> problems;
  std::map<std::pair<std::size_t, std::size_t>, std::vector<std::size_t>> uses;
  for (std::size_t e = 0; e < m.element_count(); ++e) {
    if (!(m.element_area(e) > 0.0)) problems.push_back("element " + std::to_string(e) + " has non-positive area");
    const auto& t = m.triangles[e];
    for (int i = 0; i < 3; ++i) {
      const std::size_t a = t[static_cast<std::size_t>(i)], b = t[static_cast<std::size_t>((i + 1) % 3)];
      uses[{std::min(a, b), std::max(a, b)}].push_back(e);
    }
  }
  std::size_t boundary_edges = 0;
  for (const auto& [k, els] : uses) {
    if (els.size() > 2) problems.push_back("edge used more than twice");
    if (els.size() == 1) {
      ++boundary_edges;
      const Point2 a = m.nodes[k.first], b = m.nodes[k.second];
      const bool on_box = (a.x == 0 && b.x == 0) || (a.x == 1 && b.x == 1) || (a.y == 0 && b.y == 0) || (a.y == 1 && b.y == 1);
      if (!on_box) problems.push_back("edge used once away from the outer boundary (hanging node)");
    }
  }
  std::set<std::pair<std::size_t, std::size_t>> interface_edges;
  for (const auto& s : m.segments) {
    const auto k = std::pair{std::min(s.nodes[0], s.nodes[1]), std::max(s.nodes[0], s.nodes[1])};
    if (!uses.count(k)) problems.push_back("constrained segment is not a mesh edge");
    if (s.tag.kind == SegmentKind::Interface) interface_edges.insert(k);
  }
  for (const auto& [k, els] : uses) {
    const bool separating = els.size() == 2 && m.regions[els[0]] != m.regions[els[1]];
    if (separating != (interface_edges.count(k) != 0)) {
      problems.push_back("interface edges do not coincide with region boundary");
      break;
    }
  }
  if (std::abs(m.total_area() - 1.0) > 1e-9) problems.push_back("element areas do not sum to 1");
  return problems;
}

} // namespace shapeoed::mesh
