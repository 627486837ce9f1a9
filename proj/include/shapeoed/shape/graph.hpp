#pragma once

#include <limits>
#include <vector>

#include "shapeoed/errors.hpp"
#include "shapeoed/numerics/dense.hpp"
#include "shapeoed/shape/curve.hpp"

namespace shapeoed::shape {

using numerics::DenseMatrix;

struct WeightedEdge {
  std::size_t a = 0;
  std::size_t b = 0;
  double weight = 0.0;
};

/// All-pairs shortest paths (Floyd–Warshall) of an undirected graph.
inline DenseMatrix graph_geodesics(std::size_t n, std::span<const WeightedEdge> edges) {
  const double inf = std::numeric_limits<double>::infinity();
  DenseMatrix d(n, n, inf);
  for (std::size_t i = 0; i < n; ++i) d(i, i) = 0.0;
  for (const auto& e : edges) {
    if (e.a >= n || e.b >= n) throw DimensionMismatch("graph_geodesics: edge endpoint out of range");
    if (!(e.weight > 0.0)) throw DegenerateInput("graph_geodesics: edge weights must be positive");
    d(e.a, e.b) = std::min(d(e.a, e.b), e.weight);
    d(e.b, e.a) = d(e.a, e.b);
  }
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i) {
      const double dik = d(i, k);
      if (dik == inf) continue;
      for (std::size_t j = 0; j < n; ++j) {
        const double via = dik + d(k, j);
        if (via < d(i, j)) d(i, j) = via;
      }
    }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (d(i, j) == inf) throw DisconnectedGraph("graph_geodesics: graph is not connected");
  return d;
}

inline std::vector<WeightedEdge> curve_graph(const InterfaceCurve& c) {
  std::vector<WeightedEdge> e;
  for (std::size_t i = 0; i < c.size(); ++i) e.push_back({i, (i + 1) % c.size(), c.segment_length(i)});
  return e;
}

inline DenseMatrix graph_geodesics(const InterfaceCurve& c) {
  const auto e = curve_graph(c);
  return graph_geodesics(c.size(), e);
}

/// Greedy centre selection: starting from {seed}, repeatedly add the vertex
/// maximizing the minimum pairwise distance of the enlarged set. Ties go to
/// the lowest vertex id.
inline std::vector<std::size_t> farthest_point_centers(const DenseMatrix& dist, std::size_t count, std::size_t seed) {
  const std::size_t n = dist.rows();
  if (count == 0 || count > n) throw DegenerateInput("farthest_point_centers: need 1 ≤ count ≤ node count");
  if (seed >= n) throw DegenerateInput("farthest_point_centers: seed out of range");
  std::vector<std::size_t> s{seed};
  std::vector<bool> in(n, false);
  in[seed] = true;
  double pair_min = std::numeric_limits<double>::infinity();  // over S
  while (s.size() < count) {
    std::size_t best = n;
    double best_score = -1.0;
    for (std::size_t x = 0; x < n; ++x) {
      if (in[x]) continue;
      double score = pair_min;
      for (std::size_t v : s) score = std::min(score, dist(x, v));
      if (score > best_score) {
        best_score = score;
        best = x;
      }
    }
    s.push_back(best);
    in[best] = true;
    pair_min = best_score;
  }
  return s;
}

} // namespace shapeoed::shape
