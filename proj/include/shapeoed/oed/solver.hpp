#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "shapeoed/errors.hpp"
#include "shapeoed/numerics/eigen.hpp"
#include "shapeoed/oed/criterion.hpp"
#include "shapeoed/oed/design.hpp"

namespace shapeoed::oed {

/// Active binary vertices and barycentric coordinates γ.
struct VertexSet {
  std::vector<std::vector<double>> vertices;
  std::vector<double> gamma;

  std::size_t size() const { return vertices.size(); }

  std::vector<double> design() const {
    std::vector<double> w(vertices.empty() ? 0 : vertices[0].size(), 0.0);
    for (std::size_t j = 0; j < size(); ++j)
      for (std::size_t i = 0; i < w.size(); ++i) w[i] += gamma[j] * vertices[j][i];
    return w;
  }

  std::ptrdiff_t find(std::span<const double> v) const {
    for (std::size_t j = 0; j < size(); ++j)
      if (std::equal(v.begin(), v.end(), vertices[j].begin(), vertices[j].end())) return static_cast<std::ptrdiff_t>(j);
    return -1;
  }
};

struct MasterOptions {
  double tol = 1e-4;
  std::size_t max_iter = 200000;
  /// γ_j at or below this is outside the support for the stopping test.
  double support = 1e-10;
};

struct MasterResult {
  std::vector<double> gamma;
  double phi = kInfinity;
  std::size_t iterations = 0;
  bool converged = false;
};

namespace detail {

inline DenseMatrix mix(std::span<const DenseMatrix> ups, std::span<const double> gamma) {
  DenseMatrix y(ups[0].rows(), ups[0].cols());
  const std::size_t nn = y.rows() * y.cols();
  for (std::size_t j = 0; j < ups.size(); ++j) {
    if (gamma[j] == 0.0) continue;
    const auto src = ups[j].data();
    auto dst = y.data();
    for (std::size_t q = 0; q < nn; ++q) dst[q] += gamma[j] * src[q];
  }
  return y;
}

} // namespace detail

/// Torsney iteration γ_j ← γ_j·(−g_j)/Σγ_m(−g_m) on the hull of the active
/// vertices. Steps that would increase Φ_A are averaged with the previous γ
/// until they do not.
inline MasterResult torsney_master(const VertexSet& set, const FimTensor& t, const MasterOptions& opt = {}) {
  if (set.size() == 0) throw DegenerateInput("torsney_master: empty vertex set");
  std::vector<DenseMatrix> ups;
  for (const auto& v : set.vertices) ups.push_back(fim::combined_matrix(v, t));
  MasterResult r;
  r.gamma = set.gamma;
  r.phi = a_criterion(detail::mix(ups, r.gamma), t.gramian);
  if (!std::isfinite(r.phi)) throw SingularInformation("torsney_master: starting point has singular information");
  if (set.size() == 1) {
    r.converged = true;
    return r;
  }
  const std::size_t m = set.size();
  std::vector<double> g(m), next(m);
  for (; r.iterations < opt.max_iter; ++r.iterations) {
    const DenseMatrix kernel = criterion_kernel(detail::mix(ups, r.gamma), t.gramian);
    double gbar = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      g[j] = -numerics::frobenius_inner(kernel, ups[j]);
      gbar += r.gamma[j] * g[j];
    }
    double spread = 0.0;
    for (std::size_t j = 0; j < m; ++j)
      if (r.gamma[j] > opt.support) spread = std::max(spread, std::abs(g[j] - gbar) / std::abs(gbar));
    if (spread < opt.tol) {
      r.converged = true;
      break;
    }
    for (std::size_t j = 0; j < m; ++j) next[j] = r.gamma[j] * g[j] / gbar;
    double phi = a_criterion(detail::mix(ups, next), t.gramian);
    int damp = 0;
    for (; !(phi <= r.phi) && damp < 60; ++damp) {
      for (std::size_t j = 0; j < m; ++j) next[j] = 0.5 * (next[j] + r.gamma[j]);
      phi = a_criterion(detail::mix(ups, next), t.gramian);
    }
    if (!(phi <= r.phi)) break;  // no representable descent left
    const double sum = std::accumulate(next.begin(), next.end(), 0.0);
    for (double& x : next) x /= sum;
    r.gamma = next;
    r.phi = a_criterion(detail::mix(ups, r.gamma), t.gramian);
  }
  return r;
}

struct SolverOptions {
  double tol_outer = 1e-3;
  std::size_t max_outer = 500;
  MasterOptions master{};
  /// Vertices with γ below this are dropped after each master solve.
  double prune = 1e-12;
};

struct OEDResult {
  std::vector<double> w;
  double c_w = 0.0;
  std::size_t n_obs = 0, n_time = 0;
  double phi = kInfinity;
  double initial_phi = kInfinity;  // at the uniform design
  std::vector<double> phi_history;
  std::vector<double> change_history;  // ‖Δw‖₁ per outer iteration
  double xi = 0.0;
  std::vector<double> violations;
  std::vector<double> eigenvalues;  // Λ_i ascending
  DenseMatrix eigenvectors;  // B-orthonormal columns
  WeightCounts counts;
  std::size_t outer_iterations = 0;
  std::size_t master_iterations = 0;
  std::size_t active_vertices = 0;
  bool converged = false;

  double max_violation() const { return violations.empty() ? 0.0 : *std::max_element(violations.begin(), violations.end()); }
};

/// Fills Φ_A, ξ, residuals, counts and the eigenpairs of (Υ(w), B).
inline void finalize(OEDResult& r, const FimTensor& t) {
  const DenseMatrix y = fim::combined_matrix(r.w, t);
  r.phi = a_criterion(y, t.gramian);
  r.counts = count_weights(r.w);
  r.n_obs = t.n_obs;
  r.n_time = t.n_time;
  if (std::isfinite(r.phi)) {
    const auto res = optimality_residual(r.w, gradient(r.w, t), r.c_w);
    r.xi = res.xi;
    r.violations = res.violations;
    const auto eig = numerics::generalized_eig(y, t.gramian);
    r.eigenvalues = eig.values;
    r.eigenvectors = eig.vectors;
  }
}

/// Evaluates a fixed design without optimizing.
inline OEDResult evaluate_design(std::span<const double> w, const FimTensor& t, double c_w) {
  OEDResult r;
  r.w.assign(w.begin(), w.end());
  r.c_w = c_w;
  finalize(r, t);
  r.initial_phi = r.phi;
  r.phi_history = {r.phi};
  r.change_history = {0.0};
  return r;
}

namespace detail {

/// argmin over θ ∈ [0, 1] of Φ_A((1−θ)Υ_a + θΥ_b) by golden section.
inline double line_search(const DenseMatrix& ya, const DenseMatrix& yb, const DenseMatrix& b) {
  auto f = [&](double th) { return a_criterion((1.0 - th) * ya + th * yb, b); };
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double lo = 0.0, hi = 1.0;
  double x1 = hi - phi * (hi - lo), x2 = lo + phi * (hi - lo);
  double f1 = f(x1), f2 = f(x2);
  for (int it = 0; it < 80 && hi - lo > 1e-12; ++it) {
    if (f1 <= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - phi * (hi - lo);
      f1 = f(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + phi * (hi - lo);
      f2 = f(x2);
    }
  }
  const double th = 0.5 * (lo + hi);
  const double f0 = f(0.0);
  if (f(1.0) <= std::min(f(th), f0)) return 1.0;
  return f(th) <= f0 ? th : 0.0;
}

inline double l1_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s;
}

/// Vertices that together cover every index, used when the first oracle
/// vertex alone has singular information.
inline VertexSet covering_set(std::span<const double> g, std::size_t cw) {
  const std::size_t n = g.size();
  const auto order = order_by(n, [&](std::size_t i) { return g[i]; });
  VertexSet s;
  const std::size_t count = (n + cw - 1) / cw;
  for (std::size_t r = 0; r < count; ++r) {
    std::vector<double> v(n, 0.0);
    for (std::size_t i = 0; i < cw; ++i) v[order[(r * cw + i) % n]] = 1.0;
    if (s.find(v) < 0) s.vertices.push_back(std::move(v));
  }
  s.gamma.assign(s.size(), 1.0 / static_cast<double>(s.size()));
  return s;
}

inline void prune(VertexSet& s, double threshold, const FimTensor& t) {
  VertexSet kept;
  for (std::size_t j = 0; j < s.size(); ++j)
    if (s.gamma[j] >= threshold) {
      kept.vertices.push_back(s.vertices[j]);
      kept.gamma.push_back(s.gamma[j]);
    }
  if (kept.size() == s.size() || kept.size() == 0) return;
  const double sum = std::accumulate(kept.gamma.begin(), kept.gamma.end(), 0.0);
  for (double& x : kept.gamma) x /= sum;
  if (a_criterion(kept.design(), t) <= a_criterion(s.design(), t)) s = std::move(kept);
}

} // namespace detail

/// Simplicial decomposition for min Φ_A(Υ(w)) over 0 ≤ w ≤ 1, Σw ≤ C_w.
inline OEDResult simplicial_decomposition(const FimTensor& input, double c_w, const SolverOptions& opt = {}) {
  const FimTensor t = fim::whitened(input);
  const std::size_t n = t.size();
  const std::size_t cw = integer_budget(c_w, n);
  OEDResult r;
  r.c_w = c_w;

  const std::vector<double> w0 = uniform_design(n, c_w);
  r.initial_phi = a_criterion(w0, t);
  if (!std::isfinite(r.initial_phi)) throw Infeasible("no design yields a nonsingular information matrix");

  const Vector g0 = gradient(w0, t);
  VertexSet set;
  set.vertices.push_back(vertex_oracle(g0, c_w));
  set.gamma = {1.0};
  if (!std::isfinite(a_criterion(set.vertices[0], t))) set = detail::covering_set(g0, cw);

  MasterOptions mopt = opt.master;
  MasterResult master = torsney_master(set, t, mopt);
  set.gamma = master.gamma;
  r.master_iterations += master.iterations;
  detail::prune(set, opt.prune, t);

  std::vector<double> w = set.design();
  r.phi_history.push_back(a_criterion(w, t));
  r.change_history.push_back(detail::l1_distance(w, w0));

  for (std::size_t outer = 0;; ++outer) {
    const Evaluation ev = evaluate(w, t);
    if (optimality_residual(w, ev.gradient, c_w).satisfied(opt.tol_outer)) {
      r.converged = true;
      break;
    }
    if (outer >= opt.max_outer)
      throw MaxIterations("simplicial decomposition: no certified optimum after " + std::to_string(opt.max_outer) + " outer iterations");

    const std::vector<double> v = vertex_oracle(ev.gradient, c_w);
    const auto existing = set.find(v);
    if (existing >= 0) {
      // the oracle vertex is already active: the master problem is not
      // solved tightly enough for the outer tolerance
      if (master.converged) mopt.tol = std::max(mopt.tol * 0.1, 1e-14);
      if (set.gamma[static_cast<std::size_t>(existing)] < mopt.support) {
        const double th = detail::line_search(fim::combined_matrix(w, t), fim::combined_matrix(v, t), t.gramian);
        for (double& x : set.gamma) x *= 1.0 - th;
        set.gamma[static_cast<std::size_t>(existing)] += th;
      }
    } else {
      const double th = detail::line_search(fim::combined_matrix(w, t), fim::combined_matrix(v, t), t.gramian);
      for (double& x : set.gamma) x *= 1.0 - th;
      set.vertices.push_back(v);
      set.gamma.push_back(th);
    }
    master = torsney_master(set, t, mopt);
    set.gamma = master.gamma;
    r.master_iterations += master.iterations;
    detail::prune(set, opt.prune, t);

    const std::vector<double> next = set.design();
    r.change_history.push_back(detail::l1_distance(next, w));
    w = next;
    r.phi_history.push_back(a_criterion(w, t));
    r.outer_iterations = outer + 1;
  }
  r.w = w;
  r.active_vertices = set.size();
  finalize(r, input);
  return r;
}

/// Spatial-only design: each sensor is on for the whole horizon or off.
inline OEDResult solve_spatial(const FimTensor& t, double c_w, const SolverOptions& opt = {}) {
  return simplicial_decomposition(fim::spatial_tensor(t), c_w, opt);
}

} // namespace shapeoed::oed
