#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

namespace shapeoed::mesh {

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point2&, const Point2&) = default;
  friend Point2 operator+(Point2 a, Point2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Point2 operator-(Point2 a, Point2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Point2 operator*(double s, Point2 a) { return {s * a.x, s * a.y}; }
};

inline double dot(Point2 a, Point2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Point2 a, Point2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Point2 a) { return std::hypot(a.x, a.y); }
inline double distance(Point2 a, Point2 b) { return norm(a - b); }
inline Point2 midpoint(Point2 a, Point2 b) { return {0.5 * (a.x + b.x), 0.5 * (a.y + b.y)}; }

/// Twice the signed area of (a, b, c); positive for counter-clockwise order.
/// Evaluated in extended precision.
inline double orient2d(Point2 a, Point2 b, Point2 c) {
  const long double acx = static_cast<long double>(a.x) - c.x;
  const long double bcx = static_cast<long double>(b.x) - c.x;
  const long double acy = static_cast<long double>(a.y) - c.y;
  const long double bcy = static_cast<long double>(b.y) - c.y;
  return static_cast<double>(acx * bcy - acy * bcx);
}

/// Positive when d lies strictly inside the circumcircle of the
/// counter-clockwise triangle (a, b, c).
inline double incircle(Point2 a, Point2 b, Point2 c, Point2 d) {
  const long double adx = static_cast<long double>(a.x) - d.x, ady = static_cast<long double>(a.y) - d.y;
  const long double bdx = static_cast<long double>(b.x) - d.x, bdy = static_cast<long double>(b.y) - d.y;
  const long double cdx = static_cast<long double>(c.x) - d.x, cdy = static_cast<long double>(c.y) - d.y;
  const long double alift = adx * adx + ady * ady;
  const long double blift = bdx * bdx + bdy * bdy;
  const long double clift = cdx * cdx + cdy * cdy;
  return static_cast<double>(alift * (bdx * cdy - cdx * bdy) + blift * (cdx * ady - adx * cdy) +
                             clift * (adx * bdy - bdx * ady));
}

inline double triangle_area(Point2 a, Point2 b, Point2 c) { return 0.5 * orient2d(a, b, c); }

inline Point2 centroid(Point2 a, Point2 b, Point2 c) {
  return {(a.x + b.x + c.x) / 3.0, (a.y + b.y + c.y) / 3.0};
}

inline Point2 circumcenter(Point2 a, Point2 b, Point2 c) {
  const Point2 ba = b - a, ca = c - a;
  const double d = 2.0 * cross(ba, ca);
  const double bl = dot(ba, ba), cl = dot(ca, ca);
  return {a.x + (ca.y * bl - ba.y * cl) / d, a.y + (ba.x * cl - ca.x * bl) / d};
}

inline double circumradius(Point2 a, Point2 b, Point2 c) { return distance(circumcenter(a, b, c), a); }

/// Smallest interior angle in degrees.
inline double min_angle_deg(Point2 a, Point2 b, Point2 c) {
  auto angle = [](Point2 p, Point2 q, Point2 r) {
    const Point2 u = q - p, v = r - p;
    return std::atan2(std::abs(cross(u, v)), dot(u, v));
  };
  const double m = std::min({angle(a, b, c), angle(b, c, a), angle(c, a, b)});
  return m * 180.0 / std::acos(-1.0);
}

inline double max_edge_length(Point2 a, Point2 b, Point2 c) {
  return std::max({distance(a, b), distance(b, c), distance(c, a)});
}

/// True when the open segments (p1,p2) and (q1,q2) cross at a single interior
/// point of both.
inline bool segments_cross(Point2 p1, Point2 p2, Point2 q1, Point2 q2) {
  const double d1 = orient2d(q1, q2, p1), d2 = orient2d(q1, q2, p2);
  const double d3 = orient2d(p1, p2, q1), d4 = orient2d(p1, p2, q2);
  return ((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0));
}

/// True when p lies in the relative interior of segment (a, b), within a
/// tolerance relative to the segment length.
inline bool on_segment_interior(Point2 p, Point2 a, Point2 b, double rel_tol = 1e-12) {
  const double len = distance(a, b);
  if (len == 0.0) return false;
  if (std::abs(orient2d(a, b, p)) > rel_tol * len * len) return false;
  const double t = dot(p - a, b - a) / (len * len);
  return t > rel_tol && t < 1.0 - rel_tol;
}

/// Even-odd point-in-polygon test (polygon given as a closed vertex loop).
inline bool point_in_polygon(Point2 p, std::span<const Point2> poly) {
  bool inside = false;
  const std::size_t n = poly.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Point2 a = poly[i], b = poly[j];
    if ((a.y > p.y) != (b.y > p.y)) {
      const double x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
      if (p.x < x) inside = !inside;
    }
  }
  return inside;
}

/// Signed shoelace area; positive for counter-clockwise loops.
inline double polygon_area(std::span<const Point2> poly) {
  double s = 0.0;
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) s += cross(poly[i], poly[(i + 1) % n]);
  return 0.5 * s;
}

struct Box {
  Point2 lo;
  Point2 hi;

  bool contains(Point2 p) const { return p.x > lo.x && p.x < hi.x && p.y > lo.y && p.y < hi.y; }
  bool contains_closed(Point2 p, double eps = 0.0) const {
    return p.x >= lo.x - eps && p.x <= hi.x + eps && p.y >= lo.y - eps && p.y <= hi.y + eps;
  }
  /// Strict containment of another box (no shared boundary).
  bool strictly_contains(const Box& o) const {
    return o.lo.x > lo.x && o.lo.y > lo.y && o.hi.x < hi.x && o.hi.y < hi.y;
  }
  bool overlaps_or_touches(const Box& o) const {
    return !(o.lo.x > hi.x || o.hi.x < lo.x || o.lo.y > hi.y || o.hi.y < lo.y);
  }
  double area() const { return (hi.x - lo.x) * (hi.y - lo.y); }
  /// Corners counter-clockwise from lo.
  std::vector<Point2> corners() const { return {lo, {hi.x, lo.y}, hi, {lo.x, hi.y}}; }
};

} // namespace shapeoed::mesh
