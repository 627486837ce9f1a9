#pragma once

// Incremental constrained Delaunay triangulation with Lawson flips,
// constraint recovery by edge flips, and Ruppert-style quality refinement.

#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "shapeoed/errors.hpp"
#include "shapeoed/mesh/geometry.hpp"

namespace shapeoed::mesh {

inline constexpr int kNoTriangle = -1;
/// Tag given to convex-hull edges that refine() constrains implicitly.
inline constexpr int kHullTag = -1;

struct InputSegment {
  int a = 0;
  int b = 0;
  int tag = 0;
};

class Triangulation {
public:
  /// Vertices are counter-clockwise; nbr[i] is the triangle across the edge
  /// opposite v[i], i.e. the edge (v[i+1], v[i+2]).
  struct Triangle {
    std::array<int, 3> v{};
    std::array<int, 3> nbr{kNoTriangle, kNoTriangle, kNoTriangle};
    bool alive = true;
  };

  enum class Location { Inside, OnEdge, OnVertex, Outside };
  struct Located {
    Location where = Location::Outside;
    int triangle = kNoTriangle;
    int index = -1;  // edge index (OnEdge) or vertex id (OnVertex)
  };

  using EdgeKey = std::pair<int, int>;
  static EdgeKey key(int a, int b) { return a < b ? EdgeKey{a, b} : EdgeKey{b, a}; }

  // -------------------------------------------------------------------------
  // accessors

  std::span<const Point2> points() const { return points_; }
  Point2 point(int v) const { return points_[static_cast<std::size_t>(v)]; }
  std::size_t vertex_count() const { return points_.size(); }
  const std::vector<Triangle>& raw_triangles() const { return tris_; }
  const std::map<EdgeKey, int>& constraints() const { return constraints_; }

  std::vector<std::array<int, 3>> triangles() const {
    std::vector<std::array<int, 3>> out;
    for (const auto& t : tris_)
      if (t.alive) out.push_back(t.v);
    return out;
  }
  std::size_t triangle_count() const {
    std::size_t n = 0;
    for (const auto& t : tris_) n += t.alive ? 1 : 0;
    return n;
  }

  bool is_constrained(int a, int b) const { return constraints_.count(key(a, b)) != 0; }
  std::optional<int> constraint_tag(int a, int b) const {
    const auto it = constraints_.find(key(a, b));
    if (it == constraints_.end()) return std::nullopt;
    return it->second;
  }
  void set_constraint(int a, int b, int tag) { constraints_[key(a, b)] = tag; }

  bool has_edge(int a, int b) const { return find_edge(a, b).has_value(); }

  /// (triangle, edge index) holding edge {a, b}.
  std::optional<std::pair<int, int>> find_edge(int a, int b) const {
    const int start = vert_tri_[static_cast<std::size_t>(a)];
    if (start == kNoTriangle) return std::nullopt;
    for (int dir = 1; dir <= 2; ++dir) {
      int t = start;
      for (std::size_t guard = 0; guard < tris_.size() + 1; ++guard) {
        const Triangle& tri = tris_[static_cast<std::size_t>(t)];
        const int k = index_in(tri, a);
        for (int i = 0; i < 3; ++i)
          if (tri.v[static_cast<std::size_t>(i)] == b) return std::pair{t, 3 - k - i};
        t = tri.nbr[static_cast<std::size_t>((k + dir) % 3)];
        if (t == kNoTriangle || t == start) break;
      }
    }
    return std::nullopt;
  }

  // -------------------------------------------------------------------------
  // construction primitives

  int add_vertex(Point2 p) {
    points_.push_back(p);
    vert_tri_.push_back(kNoTriangle);
    return static_cast<int>(points_.size()) - 1;
  }

  int add_triangle(int a, int b, int c) {
    Triangle t;
    t.v = {a, b, c};
    tris_.push_back(t);
    const int id = static_cast<int>(tris_.size()) - 1;
    touch(id);
    return id;
  }

  /// Rebuild neighbour links from vertex triples (drops dead triangles).
  void rebuild_adjacency() {
    std::vector<Triangle> alive;
    for (const auto& t : tris_)
      if (t.alive) alive.push_back(t);
    tris_ = std::move(alive);
    std::map<EdgeKey, std::pair<int, int>> owner;
    for (std::size_t t = 0; t < tris_.size(); ++t) {
      auto& tri = tris_[t];
      tri.nbr = {kNoTriangle, kNoTriangle, kNoTriangle};
      for (int i = 0; i < 3; ++i) {
        const EdgeKey k = key(tri.v[static_cast<std::size_t>((i + 1) % 3)], tri.v[static_cast<std::size_t>((i + 2) % 3)]);
        const auto it = owner.find(k);
        if (it == owner.end()) {
          owner.emplace(k, std::pair{static_cast<int>(t), i});
        } else {
          const auto [u, j] = it->second;
          tri.nbr[static_cast<std::size_t>(i)] = u;
          tris_[static_cast<std::size_t>(u)].nbr[static_cast<std::size_t>(j)] = static_cast<int>(t);
        }
      }
    }
    std::fill(vert_tri_.begin(), vert_tri_.end(), kNoTriangle);
    for (std::size_t t = 0; t < tris_.size(); ++t) touch(static_cast<int>(t));
  }

  /// Remove the given vertices, their incident triangles and constraints, and
  /// renumber the remaining vertices in order.
  void remove_vertices(std::span<const int> doomed) {
    std::vector<char> kill(points_.size(), 0);
    for (int v : doomed) kill[static_cast<std::size_t>(v)] = 1;
    std::vector<int> remap(points_.size(), -1);
    std::vector<Point2> kept;
    for (std::size_t v = 0; v < points_.size(); ++v)
      if (!kill[v]) {
        remap[v] = static_cast<int>(kept.size());
        kept.push_back(points_[v]);
      }
    for (auto& t : tris_) {
      if (!t.alive) continue;
      for (int& v : t.v) {
        if (kill[static_cast<std::size_t>(v)]) t.alive = false;
      }
      if (t.alive)
        for (int& v : t.v) v = remap[static_cast<std::size_t>(v)];
    }
    std::map<EdgeKey, int> cons;
    for (const auto& [k, tag] : constraints_)
      if (!kill[static_cast<std::size_t>(k.first)] && !kill[static_cast<std::size_t>(k.second)])
        cons.emplace(key(remap[static_cast<std::size_t>(k.first)], remap[static_cast<std::size_t>(k.second)]), tag);
    constraints_ = std::move(cons);
    points_ = std::move(kept);
    vert_tri_.assign(points_.size(), kNoTriangle);
    rebuild_adjacency();
  }

  // -------------------------------------------------------------------------
  // point location

  Located locate(Point2 p, int hint = kNoTriangle) const {
    int t = hint;
    if (t == kNoTriangle || !tris_[static_cast<std::size_t>(t)].alive) t = any_alive();
    if (t == kNoTriangle) return {};
    const std::size_t budget = 4 * tris_.size() + 16;
    for (std::size_t step = 0; step < budget; ++step) {
      const Triangle& tri = tris_[static_cast<std::size_t>(t)];
      int exit = -1;
      for (int r = 0; r < 3; ++r) {
        const int i = static_cast<int>((r + step) % 3);
        const Point2 a = point(tri.v[static_cast<std::size_t>((i + 1) % 3)]);
        const Point2 b = point(tri.v[static_cast<std::size_t>((i + 2) % 3)]);
        const double len2 = dot(b - a, b - a);
        if (orient2d(a, b, p) < -1e-13 * len2) {
          exit = i;
          break;
        }
      }
      if (exit < 0) return classify(t, p);
      const int next = tri.nbr[static_cast<std::size_t>(exit)];
      if (next == kNoTriangle) return {Location::Outside, t, exit};
      t = next;
    }
    // Walk did not terminate; fall back to a scan.
    for (std::size_t s = 0; s < tris_.size(); ++s) {
      if (!tris_[s].alive) continue;
      const auto& v = tris_[s].v;
      bool inside = true;
      for (int i = 0; i < 3 && inside; ++i) {
        const Point2 a = point(v[static_cast<std::size_t>((i + 1) % 3)]);
        const Point2 b = point(v[static_cast<std::size_t>((i + 2) % 3)]);
        inside = orient2d(a, b, p) >= -1e-13 * dot(b - a, b - a);
      }
      if (inside) return classify(static_cast<int>(s), p);
    }
    return {};
  }

  // -------------------------------------------------------------------------
  // insertion

  /// Insert p, keeping the triangulation constrained-Delaunay. Returns the new
  /// vertex id, or the id of an existing vertex within 1e-12 of p.
  int insert_point(Point2 p, int hint = kNoTriangle) {
    const Located loc = locate(p, hint);
    switch (loc.where) {
      case Location::OnVertex: return loc.index;
      case Location::Inside: return insert_in_triangle(p, loc.triangle);
      case Location::OnEdge: return insert_on_edge(p, loc.triangle, loc.index);
      case Location::Outside: break;
    }
    throw DegenerateInput("insert_point: point outside the triangulated region");
  }

  int insert_in_triangle(Point2 p, int t) {
    const int pv = add_vertex(p);
    const Triangle old = tris_[static_cast<std::size_t>(t)];
    const int a = old.v[0], b = old.v[1], c = old.v[2];
    const int n_bc = old.nbr[0], n_ca = old.nbr[1], n_ab = old.nbr[2];
    const int t0 = t;
    const int t1 = add_triangle(pv, c, a);
    const int t2 = add_triangle(pv, a, b);
    auto& T0 = tris_[static_cast<std::size_t>(t0)];
    T0.v = {pv, b, c};
    T0.nbr = {n_bc, t1, t2};
    tris_[static_cast<std::size_t>(t1)].nbr = {n_ca, t2, t0};
    tris_[static_cast<std::size_t>(t2)].nbr = {n_ab, t0, t1};
    relink(n_ca, t, t1);
    relink(n_ab, t, t2);
    touch(t0);
    touch(t1);
    touch(t2);
    legalize(pv, {{t0, 0}, {t1, 0}, {t2, 0}});
    return pv;
  }

  /// Insert p on edge `i` of triangle `t`. A constrained edge is split into two
  /// constrained halves carrying the same tag.
  int insert_on_edge(Point2 p, int t, int i) {
    const int pv = add_vertex(p);
    const Triangle T = tris_[static_cast<std::size_t>(t)];
    const auto ui = static_cast<std::size_t>(i);
    const int a = T.v[ui], b = T.v[(ui + 1) % 3], c = T.v[(ui + 2) % 3];
    const int n_ca = T.nbr[(ui + 1) % 3], n_ab = T.nbr[(ui + 2) % 3];
    const int u = T.nbr[ui];

    std::optional<int> tag = constraint_tag(b, c);
    if (tag) {
      constraints_.erase(key(b, c));
      constraints_[key(b, pv)] = *tag;
      constraints_[key(pv, c)] = *tag;
    }

    const int t0 = t;
    const int t1 = add_triangle(a, pv, c);
    int u0 = kNoTriangle, u1 = kNoTriangle;
    if (u != kNoTriangle) {
      const Triangle U = tris_[static_cast<std::size_t>(u)];
      const auto j = static_cast<std::size_t>(index_of_neighbor(U, t));
      const int d = U.v[j];
      const int n_bd = U.nbr[(j + 1) % 3], n_dc = U.nbr[(j + 2) % 3];
      u0 = u;
      u1 = add_triangle(d, pv, b);
      auto& U0 = tris_[static_cast<std::size_t>(u0)];
      U0.v = {d, c, pv};
      U0.nbr = {t1, u1, n_dc};
      tris_[static_cast<std::size_t>(u1)].nbr = {t0, n_bd, u0};
      relink(n_bd, u, u1);
      touch(u0);
      touch(u1);
    }
    auto& T0 = tris_[static_cast<std::size_t>(t0)];
    T0.v = {a, b, pv};
    T0.nbr = {u1, t1, n_ab};
    tris_[static_cast<std::size_t>(t1)].nbr = {u0, n_ca, t0};
    relink(n_ca, t, t1);
    touch(t0);
    touch(t1);

    std::vector<std::pair<int, int>> stack{{t0, 2}, {t1, 1}};
    if (u != kNoTriangle) {
      stack.emplace_back(u0, 2);
      stack.emplace_back(u1, 1);
    }
    legalize(pv, std::move(stack));
    return pv;
  }

  /// Flip the edge opposite v[i] of triangle t. Afterwards t = (a, b, d) and
  /// its former neighbour = (a, d, c), with a = old v[i].
  void flip(int t, int i) {
    const Triangle T = tris_[static_cast<std::size_t>(t)];
    const auto ui = static_cast<std::size_t>(i);
    const int a = T.v[ui], b = T.v[(ui + 1) % 3], c = T.v[(ui + 2) % 3];
    const int u = T.nbr[ui];
    const Triangle U = tris_[static_cast<std::size_t>(u)];
    const auto j = static_cast<std::size_t>(index_of_neighbor(U, t));
    const int d = U.v[j];
    const int n_ca = T.nbr[(ui + 1) % 3], n_ab = T.nbr[(ui + 2) % 3];
    const int n_bd = U.nbr[(j + 1) % 3], n_dc = U.nbr[(j + 2) % 3];
    auto& NT = tris_[static_cast<std::size_t>(t)];
    NT.v = {a, b, d};
    NT.nbr = {n_bd, u, n_ab};
    auto& NU = tris_[static_cast<std::size_t>(u)];
    NU.v = {a, d, c};
    NU.nbr = {n_dc, n_ca, t};
    relink(n_bd, u, t);
    relink(n_ca, t, u);
    touch(t);
    touch(u);
  }

  /// Opposite vertex across edge i of t, or −1 on the hull.
  int opposite_vertex(int t, int i) const {
    const Triangle& T = tris_[static_cast<std::size_t>(t)];
    const int u = T.nbr[static_cast<std::size_t>(i)];
    if (u == kNoTriangle) return -1;
    const Triangle& U = tris_[static_cast<std::size_t>(u)];
    return U.v[static_cast<std::size_t>(index_of_neighbor(U, t))];
  }

  /// True when edge i of t is not locally Delaunay and may be flipped.
  bool should_flip(int t, int i) const {
    const Triangle& T = tris_[static_cast<std::size_t>(t)];
    const auto ui = static_cast<std::size_t>(i);
    const int b = T.v[(ui + 1) % 3], c = T.v[(ui + 2) % 3];
    if (is_constrained(b, c)) return false;
    const int d = opposite_vertex(t, i);
    if (d < 0) return false;
    const Point2 pa = point(T.v[0]), pb = point(T.v[1]), pc = point(T.v[2]), pd = point(d);
    const double scale = std::max({dot(pa - pd, pa - pd), dot(pb - pd, pb - pd), dot(pc - pd, pc - pd)});
    return incircle(pa, pb, pc, pd) > 1e-12 * scale * scale;
  }

  /// Lawson flips over every unconstrained edge until all are locally
  /// Delaunay. Returns the number of flips.
  std::size_t make_delaunay() {
    std::size_t flips = 0;
    for (bool changed = true; changed;) {
      changed = false;
      for (std::size_t t = 0; t < tris_.size(); ++t) {
        if (!tris_[t].alive) continue;
        for (int i = 0; i < 3; ++i) {
          const int u = tris_[t].nbr[static_cast<std::size_t>(i)];
          if (u == kNoTriangle || u < static_cast<int>(t)) continue;
          if (should_flip(static_cast<int>(t), i)) {
            flip(static_cast<int>(t), i);
            ++flips;
            changed = true;
            break;
          }
        }
      }
    }
    return flips;
  }

  int any_alive() const {
    for (std::size_t t = 0; t < tris_.size(); ++t)
      if (tris_[t].alive) return static_cast<int>(t);
    return kNoTriangle;
  }

  int vertex_triangle(int v) const { return vert_tri_[static_cast<std::size_t>(v)]; }

  /// Alive triangles incident to vertex v.
  std::vector<int> triangles_around(int v) const {
    std::vector<int> out;
    const int start = vert_tri_[static_cast<std::size_t>(v)];
    if (start == kNoTriangle) return out;
    out.push_back(start);
    int t = start;
    bool closed = false;
    for (std::size_t guard = 0; guard < tris_.size(); ++guard) {
      const Triangle& tri = tris_[static_cast<std::size_t>(t)];
      t = tri.nbr[static_cast<std::size_t>((index_in(tri, v) + 1) % 3)];
      if (t == kNoTriangle) break;
      if (t == start) {
        closed = true;
        break;
      }
      out.push_back(t);
    }
    if (!closed) {
      t = start;
      for (std::size_t guard = 0; guard < tris_.size(); ++guard) {
        const Triangle& tri = tris_[static_cast<std::size_t>(t)];
        t = tri.nbr[static_cast<std::size_t>((index_in(tri, v) + 2) % 3)];
        if (t == kNoTriangle || t == start) break;
        out.push_back(t);
      }
    }
    return out;
  }

  static int index_in(const Triangle& t, int v) {
    for (int i = 0; i < 3; ++i)
      if (t.v[static_cast<std::size_t>(i)] == v) return i;
    return -1;
  }

private:
  static int index_of_neighbor(const Triangle& t, int n) {
    for (int i = 0; i < 3; ++i)
      if (t.nbr[static_cast<std::size_t>(i)] == n) return i;
    return -1;
  }

  void relink(int n, int from, int to) {
    if (n == kNoTriangle) return;
    for (int& x : tris_[static_cast<std::size_t>(n)].nbr)
      if (x == from) {
        x = to;
        return;
      }
  }

  void touch(int t) {
    for (int v : tris_[static_cast<std::size_t>(t)].v) vert_tri_[static_cast<std::size_t>(v)] = t;
  }

  Located classify(int t, Point2 p) const {
    const Triangle& tri = tris_[static_cast<std::size_t>(t)];
    for (int v : tri.v)
      if (distance(point(v), p) <= 1e-12) return {Location::OnVertex, t, v};
    for (int i = 0; i < 3; ++i) {
      const Point2 a = point(tri.v[static_cast<std::size_t>((i + 1) % 3)]);
      const Point2 b = point(tri.v[static_cast<std::size_t>((i + 2) % 3)]);
      if (std::abs(orient2d(a, b, p)) <= 1e-13 * dot(b - a, b - a)) return {Location::OnEdge, t, i};
    }
    return {Location::Inside, t, -1};
  }

  /// Each stack entry is (triangle, index of the new vertex in it).
  void legalize(int pv, std::vector<std::pair<int, int>> stack) {
    while (!stack.empty()) {
      const auto [t, k] = stack.back();
      stack.pop_back();
      const Triangle& T = tris_[static_cast<std::size_t>(t)];
      if (T.v[static_cast<std::size_t>(k)] != pv) continue;
      if (!should_flip(t, k)) continue;
      const int u = T.nbr[static_cast<std::size_t>(k)];
      flip(t, k);
      stack.emplace_back(t, 0);
      stack.emplace_back(u, 0);
    }
  }

  std::vector<Point2> points_;
  std::vector<int> vert_tri_;
  std::vector<Triangle> tris_;
  std::map<EdgeKey, int> constraints_;
};

// ---------------------------------------------------------------------------

struct DelaunayResult {
  Triangulation tri;
  /// Vertex id of each input point (duplicates share an id).
  std::vector<int> vertex_of_input;
};

/// Bowyer–Watson style incremental Delaunay triangulation (Lawson-flip
/// variant) inside a large enclosing triangle that is removed at the end.
/// Points are inserted in input order.
inline DelaunayResult delaunay_triangulate(std::span<const Point2> input) {
  if (input.size() < 3) throw DegenerateInput("delaunay_triangulate: need at least 3 points");
  bool collinear = true;
  for (std::size_t i = 2; i < input.size() && collinear; ++i)
    collinear = std::abs(orient2d(input[0], input[1], input[i])) <= 1e-14;
  if (collinear) throw DegenerateInput("delaunay_triangulate: all points are collinear");

  Point2 lo = input[0], hi = input[0];
  for (const Point2& p : input) {
    lo = {std::min(lo.x, p.x), std::min(lo.y, p.y)};
    hi = {std::max(hi.x, p.x), std::max(hi.y, p.y)};
  }
  const Point2 c = midpoint(lo, hi);
  const double s = std::max({hi.x - lo.x, hi.y - lo.y, 1e-6});

  DelaunayResult out;
  Triangulation& tri = out.tri;
  const int s0 = tri.add_vertex({c.x - 60.0 * s, c.y - 40.0 * s});
  const int s1 = tri.add_vertex({c.x + 60.0 * s, c.y - 40.0 * s});
  const int s2 = tri.add_vertex({c.x, c.y + 60.0 * s});
  tri.add_triangle(s0, s1, s2);

  std::vector<int> ids;
  ids.reserve(input.size());
  int hint = 0;
  for (const Point2& p : input) {
    const int v = tri.insert_point(p, hint);
    ids.push_back(v);
    hint = tri.vertex_triangle(v);
  }
  const std::array<int, 3> super{s0, s1, s2};
  tri.remove_vertices(super);
  for (int& v : ids) v -= 3;
  out.vertex_of_input = std::move(ids);
  return out;
}

/// Force every segment to be a triangle edge by flipping crossing edges, mark
/// them constrained with their tags, then restore the Delaunay property on
/// the unconstrained edges.
inline void recover_constraints(Triangulation& tri, std::span<const InputSegment> segments) {
  const auto nv = static_cast<int>(tri.vertex_count());
  for (const auto& s : segments)
    if (s.a < 0 || s.b < 0 || s.a >= nv || s.b >= nv || s.a == s.b)
      throw DegenerateInput("recover_constraints: segment endpoints are not distinct mesh vertices");

  for (std::size_t i = 0; i < segments.size(); ++i) {
    const Point2 p1 = tri.point(segments[i].a), p2 = tri.point(segments[i].b);
    for (std::size_t j = i + 1; j < segments.size(); ++j)
      if (segments_cross(p1, p2, tri.point(segments[j].a), tri.point(segments[j].b)))
        throw ConstraintCrossing("recover_constraints: segments " + std::to_string(i) + " and " +
                                 std::to_string(j) + " intersect");
    for (int v = 0; v < nv; ++v)
      if (v != segments[i].a && v != segments[i].b && on_segment_interior(tri.point(v), p1, p2))
        throw ConstraintCrossing("recover_constraints: vertex " + std::to_string(v) +
                                 " lies on segment " + std::to_string(i));
  }

  for (const auto& seg : segments) {
    const int a = seg.a, b = seg.b;
    if (!tri.has_edge(a, b)) {
      const Point2 pa = tri.point(a), pb = tri.point(b);
      // Collect edges crossed by (a, b).
      std::deque<std::pair<int, int>> crossing;
      int t = kNoTriangle, k = -1;
      for (int cand : tri.triangles_around(a)) {
        const auto& T = tri.raw_triangles()[static_cast<std::size_t>(cand)];
        const int ka = Triangulation::index_in(T, a);
        const int p = T.v[static_cast<std::size_t>((ka + 1) % 3)], q = T.v[static_cast<std::size_t>((ka + 2) % 3)];
        if (orient2d(pa, tri.point(p), pb) > 0 && orient2d(pa, tri.point(q), pb) < 0) {
          t = cand;
          k = ka;
          break;
        }
      }
      if (t == kNoTriangle) throw ConstraintCrossing("recover_constraints: segment leaves the triangulation");
      {
        const auto& T = tri.raw_triangles()[static_cast<std::size_t>(t)];
        int p = T.v[static_cast<std::size_t>((k + 1) % 3)], q = T.v[static_cast<std::size_t>((k + 2) % 3)];
        int cur_t = t, cur_e = k;
        for (std::size_t guard = 0; guard < 4 * tri.raw_triangles().size(); ++guard) {
          crossing.emplace_back(p, q);
          const int r = tri.opposite_vertex(cur_t, cur_e);
          if (r < 0) throw ConstraintCrossing("recover_constraints: segment leaves the triangulation");
          if (r == b) break;
          const int next_t = tri.raw_triangles()[static_cast<std::size_t>(cur_t)].nbr[static_cast<std::size_t>(cur_e)];
          // p is right of (a,b), q is left.
          if (orient2d(pa, pb, tri.point(r)) > 0)
            q = r;
          else
            p = r;
          const auto& N = tri.raw_triangles()[static_cast<std::size_t>(next_t)];
          const int opp = 3 - Triangulation::index_in(N, p) - Triangulation::index_in(N, q);
          cur_t = next_t;
          cur_e = opp;
        }
      }
      for (std::size_t guard = 0; !crossing.empty(); ++guard) {
        if (guard > 100000) throw ConstraintCrossing("recover_constraints: flip loop did not terminate");
        const auto [p, q] = crossing.front();
        crossing.pop_front();
        const auto e = tri.find_edge(p, q);
        if (!e) continue;
        const auto [et, ei] = *e;
        const int apex = tri.raw_triangles()[static_cast<std::size_t>(et)].v[static_cast<std::size_t>(ei)];
        const int opp = tri.opposite_vertex(et, ei);
        if (!segments_cross(tri.point(apex), tri.point(opp), tri.point(p), tri.point(q))) {
          crossing.emplace_back(p, q);
          continue;
        }
        tri.flip(et, ei);
        if (apex != a && apex != b && opp != a && opp != b &&
            segments_cross(tri.point(apex), tri.point(opp), pa, pb))
          crossing.emplace_back(apex, opp);
      }
      if (!tri.has_edge(a, b)) throw ConstraintCrossing("recover_constraints: failed to recover segment");
    }
    tri.set_constraint(a, b, seg.tag);
  }
  tri.make_delaunay();
}

struct RefineOptions {
  double min_angle_deg = 20.0;
  double max_edge = std::numeric_limits<double>::infinity();
  std::size_t max_vertices = 200000;
};

namespace detail {

inline bool encroaches(Point2 a, Point2 b, Point2 p) {
  const Point2 m = midpoint(a, b);
  const double r2 = 0.25 * dot(b - a, b - a);
  return dot(p - m, p - m) < r2 * (1.0 - 1e-9);
}

} // namespace detail

/// Ruppert-style refinement: split constrained segments that are encroached
/// (diametral circle) or longer than max_edge, and insert circumcentres of
/// triangles with an angle below min_angle_deg or an edge above max_edge.
/// Hull edges are treated as constrained.
inline void refine(Triangulation& tri, const RefineOptions& opt = {}) {
  if (opt.min_angle_deg > 25.0) throw DegenerateInput("refine: min angle above 25 degrees is not supported");

  for (std::size_t t = 0; t < tri.raw_triangles().size(); ++t) {
    const auto& T = tri.raw_triangles()[t];
    if (!T.alive) continue;
    for (int i = 0; i < 3; ++i)
      if (T.nbr[static_cast<std::size_t>(i)] == kNoTriangle) {
        const int a = T.v[static_cast<std::size_t>((i + 1) % 3)], b = T.v[static_cast<std::size_t>((i + 2) % 3)];
        if (!tri.is_constrained(a, b)) tri.set_constraint(a, b, kHullTag);
      }
  }

  auto check_budget = [&]() {
    if (tri.vertex_count() > opt.max_vertices)
      throw RefinementBudgetExceeded("refine: vertex budget of " + std::to_string(opt.max_vertices) + " exceeded");
  };

  auto segment_needs_split = [&](int a, int b) {
    const Point2 pa = tri.point(a), pb = tri.point(b);
    if (distance(pa, pb) > opt.max_edge) return true;
    const auto e = tri.find_edge(a, b);
    if (!e) return false;
    const auto [t, i] = *e;
    const int apex = tri.raw_triangles()[static_cast<std::size_t>(t)].v[static_cast<std::size_t>(i)];
    if (detail::encroaches(pa, pb, tri.point(apex))) return true;
    const int opp = tri.opposite_vertex(t, i);
    return opp >= 0 && detail::encroaches(pa, pb, tri.point(opp));
  };

  auto triangle_is_bad = [&](int t) {
    const auto& T = tri.raw_triangles()[static_cast<std::size_t>(t)];
    if (!T.alive) return false;
    const Point2 a = tri.point(T.v[0]), b = tri.point(T.v[1]), c = tri.point(T.v[2]);
    return min_angle_deg(a, b, c) < opt.min_angle_deg || max_edge_length(a, b, c) > opt.max_edge;
  };

  std::deque<std::pair<int, int>> seg_queue;
  std::deque<int> tri_queue;

  auto enqueue_around = [&](int v) {
    for (int t : tri.triangles_around(v)) {
      tri_queue.push_back(t);
      const auto& T = tri.raw_triangles()[static_cast<std::size_t>(t)];
      for (int i = 0; i < 3; ++i) {
        const int a = T.v[static_cast<std::size_t>((i + 1) % 3)], b = T.v[static_cast<std::size_t>((i + 2) % 3)];
        if (tri.is_constrained(a, b) && segment_needs_split(a, b)) seg_queue.emplace_back(a, b);
      }
    }
  };

  auto split_segment = [&](int a, int b) {
    const auto e = tri.find_edge(a, b);
    if (!e || !tri.is_constrained(a, b)) return;
    const int v = tri.insert_on_edge(midpoint(tri.point(a), tri.point(b)), e->first, e->second);
    check_budget();
    enqueue_around(v);
  };

  auto drain_segments = [&]() {
    while (!seg_queue.empty()) {
      const auto [a, b] = seg_queue.front();
      seg_queue.pop_front();
      if (tri.is_constrained(a, b) && segment_needs_split(a, b)) split_segment(a, b);
    }
  };

  for (const auto& [k, tag] : tri.constraints())
    if (segment_needs_split(k.first, k.second)) seg_queue.push_back(k);
  drain_segments();

  for (std::size_t t = 0; t < tri.raw_triangles().size(); ++t) tri_queue.push_back(static_cast<int>(t));

  while (!tri_queue.empty()) {
    const int t = tri_queue.front();
    tri_queue.pop_front();
    if (!triangle_is_bad(t)) continue;

    const auto T = tri.raw_triangles()[static_cast<std::size_t>(t)];
    const Point2 a = tri.point(T.v[0]), b = tri.point(T.v[1]), c = tri.point(T.v[2]);
    const Point2 cc = circumcenter(a, b, c);
    const Point2 start = centroid(a, b, c);

    // Straight-line walk from the centroid towards the circumcentre; a
    // constrained edge in the way is split instead.
    int cur = t;
    std::optional<std::pair<int, int>> blocking;
    bool found = false;
    for (std::size_t guard = 0; guard < 4 * tri.raw_triangles().size() + 16; ++guard) {
      const auto& C = tri.raw_triangles()[static_cast<std::size_t>(cur)];
      int exit = -1;
      for (int i = 0; i < 3; ++i) {
        const Point2 p = tri.point(C.v[static_cast<std::size_t>((i + 1) % 3)]);
        const Point2 q = tri.point(C.v[static_cast<std::size_t>((i + 2) % 3)]);
        if (orient2d(p, q, cc) >= -1e-13 * dot(q - p, q - p)) continue;
        const double o1 = orient2d(start, cc, p), o2 = orient2d(start, cc, q);
        if ((o1 >= 0 && o2 <= 0) || (o1 <= 0 && o2 >= 0)) {
          exit = i;
          break;
        }
      }
      if (exit < 0) {
        found = true;
        break;
      }
      const int p = C.v[static_cast<std::size_t>((exit + 1) % 3)], q = C.v[static_cast<std::size_t>((exit + 2) % 3)];
      if (tri.is_constrained(p, q) || C.nbr[static_cast<std::size_t>(exit)] == kNoTriangle) {
        blocking = std::pair{p, q};
        break;
      }
      cur = C.nbr[static_cast<std::size_t>(exit)];
    }

    if (blocking) {
      split_segment(blocking->first, blocking->second);
      drain_segments();
      tri_queue.push_back(t);
      continue;
    }
    if (!found) continue;

    std::vector<std::pair<int, int>> encroached;
    for (const auto& [k, tag] : tri.constraints())
      if (detail::encroaches(tri.point(k.first), tri.point(k.second), cc)) encroached.push_back(k);
    if (!encroached.empty()) {
      for (const auto& [p, q] : encroached) split_segment(p, q);
      drain_segments();
      tri_queue.push_back(t);
      continue;
    }

    const auto loc = tri.locate(cc, cur);
    int v = -1;
    if (loc.where == Triangulation::Location::Inside) {
      v = tri.insert_in_triangle(cc, loc.triangle);
    } else if (loc.where == Triangulation::Location::OnEdge) {
      const auto& L = tri.raw_triangles()[static_cast<std::size_t>(loc.triangle)];
      const int p = L.v[static_cast<std::size_t>((loc.index + 1) % 3)], q = L.v[static_cast<std::size_t>((loc.index + 2) % 3)];
      if (tri.is_constrained(p, q)) {
        split_segment(p, q);
        drain_segments();
        tri_queue.push_back(t);
        continue;
      }
      v = tri.insert_on_edge(cc, loc.triangle, loc.index);
    } else {
      continue;
    }
    check_budget();
    enqueue_around(v);
    drain_segments();
  }
}

} // namespace shapeoed::mesh
