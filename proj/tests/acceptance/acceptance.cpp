// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.
// Usage: acceptance [criterion numbers...]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <optional>
#include <queue>
#include <random>
#include <set>
#include <sstream>

#include "shapeoed/fem/heat.hpp"
#include "shapeoed/mesh/mesh.hpp"
#include "shapeoed/numerics/eigen.hpp"
#include "shapeoed/pipeline/pipeline.hpp"
#include "shapeoed/shape/graph.hpp"

using namespace shapeoed;
using mesh::Point2;
using numerics::DenseMatrix;
using numerics::Vector;
namespace fs = std::filesystem;

namespace {

const double kPi = std::acos(-1.0);

using Clock = std::chrono::steady_clock;
double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void check(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " FAILED{" << what << "}";
    }
  }
};

std::mt19937_64 rng(20240611);
double uniform(double lo = -1.0, double hi = 1.0) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

DenseMatrix random_spd(std::size_t n, double shift = 1.0) {
  DenseMatrix a(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) a(i, j) = uniform();
  DenseMatrix s = a.transposed() * a;
  for (std::size_t i = 0; i < n; ++i) s(i, i) += shift;
  s.symmetrize();
  return s;
}

/// Rank-r PSD blocks with an SPD Gramian.
fim::FimTensor random_tensor(std::size_t n_obs, std::size_t n_time, std::size_t nb, std::size_t rank) {
  fim::FimTensor t{n_obs, n_time, nb, {}, random_spd(nb, 0.5)};
  for (std::size_t i = 0; i < n_obs * n_time; ++i) {
    DenseMatrix b(nb);
    for (std::size_t r = 0; r < rank; ++r) {
      Vector v(nb);
      for (double& x : v) x = uniform();
      for (std::size_t p = 0; p < nb; ++p)
        for (std::size_t q = 0; q < nb; ++q) b(p, q) += v[p] * v[q];
    }
    t.blocks.push_back(b);
  }
  return t;
}

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

// ---------------------------------------------------------------------------
// Shared 2D runs

struct Context {
  fs::path dir = fs::temp_directory_path() / "shapeoed_acceptance";
  std::optional<pipeline::Pipeline> full;
  double full_seconds = 0.0;
  std::optional<std::vector<pipeline::CaseRow>> cases;
  double cases_seconds = 0.0;

  Context() {
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Context() { fs::remove_all(dir); }

  pipeline::Pipeline& full_run() {
    if (!full) {
      const auto t0 = Clock::now();
      full.emplace(pipeline::parse_config(pipeline::read_json_file(fs::path(SHAPEOED_CONFIGS) / "full_2d.json")),
                    dir / "full", dir / "cache-full");
      full->run_all();
      full_seconds = seconds_since(t0);
    }
    return *full;
  }

  const std::vector<pipeline::CaseRow>& case_rows() {
    if (!cases) {
      const auto t0 = Clock::now();
      const auto cfgs = pipeline::resolve_all_cases(pipeline::read_json_file(fs::path(SHAPEOED_CONFIGS) / "cases_2d.json"));
      cases = pipeline::compare_cases(cfgs, dir / "cases", dir / "cache-cases");
      cases_seconds = seconds_since(t0);
    }
    return *cases;
  }
};

// ---------------------------------------------------------------------------
// 1. manufactured solution

void fem_convergence(Context&, Outcome& o) {
  const auto t0 = Clock::now();
  auto exact = [](Point2 x, double t) { return std::exp(-t) * std::sin(kPi * x.x) * std::sin(kPi * x.y); };
  auto error = [&](std::size_t n) {
    const mesh::Mesh m = mesh::structured_unit_square(n);
    fem::HeatPhysics p;
    p.kappa_bulk = p.kappa_inc = 1.0;
    p.u_D = 0.0;
    const auto ops = fem::assemble_heat(m, p, [&](Point2 x, double t) { return (2 * kPi * kPi - 1) * exact(x, t); });
    const fem::TimeGrid grid{0.1, 400};
    Vector u0(m.node_count());
    for (std::size_t i = 0; i < u0.size(); ++i) u0[i] = exact(m.nodes[i], 0.0);
    const auto u = fem::solve_forward(ops, grid, 1e-12, u0);
    return fem::l2_error(m, u.states.back(), [&](Point2 x) { return exact(x, grid.T); });
  };
  const double e8 = error(8), e16 = error(16);
  const double ratio = e8 / e16, s = seconds_since(t0);
  o.detail << "L2 error h=1/8 " << fmt(e8) << ", h=1/16 " << fmt(e16) << ", ratio " << fmt(ratio) << " in [3.4, 4.6]; " << fmt(s, 3)
           << " s < 60 s";
  o.check(ratio >= 3.4 && ratio <= 4.6, "ratio");
  o.check(s < 60.0, "runtime");
}

// ---------------------------------------------------------------------------
// 2. material derivative vs mesh-deformation finite differences

void material_derivative(Context&, Outcome& o) {
  mesh::GeometrySpec g = mesh::default_geometry();
  g.h = 0.08;
  const mesh::Mesh m = mesh::build_mesh(g);
  fem::HeatPhysics p;
  p.beta["bottom_left"] = 10.0;
  const fem::TimeGrid grid{};
  const auto ops = fem::assemble_heat(m, p);
  const auto u = fem::solve_forward(ops, grid, 1e-13);
  std::vector<Point2> v(m.node_count(), {0.0, 0.0});
  for (std::size_t i = 0; i < m.node_count(); ++i) {
    const Point2 x = m.nodes[i];
    if (x.x <= 0.35 || x.x >= 0.65 || x.y <= 0.35 || x.y >= 0.65) continue;
    const double s = std::sin(kPi * (x.x - 0.35) / 0.3) * std::sin(kPi * (x.y - 0.35) / 0.3);
    v[i] = (s * s) * (x - Point2{0.5, 0.5});
  }
  const auto du = fem::solve_sensitivity(ops, u, v, 1e-13);
  std::set<std::size_t> nodes;
  for (const auto& els : m.sensor_elements)
    for (std::size_t e : els) nodes.insert(m.triangles[e].begin(), m.triangles[e].end());
  auto rel_error = [&](const fem::Trajectory& fd) {
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < du.size(); ++k)
      for (std::size_t i : nodes) {
        num += (du[k][i] - fd[k][i]) * (du[k][i] - fd[k][i]);
        den += du[k][i] * du[k][i];
      }
    return std::sqrt(num / den);
  };
  const double e3 = rel_error(fem::fd_material_derivative_oracle(m, p, grid, v, 1e-3));
  const double e4 = rel_error(fem::fd_material_derivative_oracle(m, p, grid, v, 1e-4));
  o.detail << "sensor rel. error tau=1e-3 " << fmt(e3) << ", tau=1e-4 " << fmt(e4) << " <= 3e-2, ratio " << fmt(e3 / e4)
           << " in [5, 15]";
  o.check(e4 <= 3e-2, "error at 1e-4");
  o.check(e3 / e4 >= 5.0 && e3 / e4 <= 15.0, "ratio");
}

// ---------------------------------------------------------------------------
// 3. gradient vs central differences on the 2D tensor, in the B-orthonormal
// basis the optimizer works in (in the raw bump basis Φ_A carries rounding
// noise of order eps·cond(B), too coarse for differences at step 1e-5)

void gradient_check(Context& ctx, Outcome& o) {
  const auto t = fim::whitened(ctx.full_run().design_tensor());
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> w(t.size());
    for (double& x : w) x = uniform(0.05, 1.0);
    const Vector g = oed::gradient(w, t);
    double gmax = 0.0, err = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double h = 1e-5;
      std::vector<double> wp = w, wm = w;
      wp[i] += h;
      wm[i] -= h;
      const double fd = (oed::a_criterion(wp, t) - oed::a_criterion(wm, t)) / (2 * h);
      gmax = std::max(gmax, std::abs(g[i]));
      err = std::max(err, std::abs(fd - g[i]));
    }
    worst = std::max(worst, err / gmax);
  }
  o.detail << "max over 20 designs of |g - g_fd|_inf / |g|_inf = " << fmt(worst, 3) << " <= 1e-5";
  o.check(worst <= 1e-5, "gradient");
}

// ---------------------------------------------------------------------------
// 4. trace identity and the published spectrum

void criterion_identities(Context&, Outcome& o) {
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + static_cast<std::size_t>(uniform(0, 8));
    const DenseMatrix y = random_spd(n, 0.1), b = random_spd(n, 0.1);
    const double phi = oed::a_criterion(y, b);
    double sum = 0.0;
    for (double l : numerics::generalized_eig(y, b).values) sum += 1.0 / l;
    worst = std::max(worst, std::abs(phi - sum) / std::abs(phi));
  }
  const std::vector<double> published{0.27, 0.49, 0.77, 1.04, 1.24, 2.58, 3.39, 6.68, 16.48};
  const double sum = std::accumulate(published.begin(), published.end(), 0.0);
  // nine entries rounded to 0.01 and Φ_A rounded to 0.01
  const double slack = 9 * 0.005 + 0.005;
  o.detail << "50 pencils max rel. |trace(BY^-1) - sum 1/Lambda| = " << fmt(worst, 3) << " <= 1e-8; published sum " << fmt(sum)
           << " vs 32.93 (rounding slack " << fmt(slack, 2) << ")";
  o.check(worst <= 1e-8, "identity");
  o.check(std::abs(sum - 32.93) <= slack, "published row");
}

// ---------------------------------------------------------------------------
// 5. simplicial decomposition vs exhaustive grid search

void small_scale_optimum(Context&, Outcome& o) {
  const auto t0 = Clock::now();
  double worst = 0.0;
  int problems = 0;
  for (int trial = 0; trial < 10; ++trial)
    for (double cw : {1.0, 2.0}) {
      const auto t = random_tensor(3, 1, 2, 1);
      const auto r = oed::simplicial_decomposition(t, cw);
      // grid over {w ∈ [0,1]³ : Σw = C_w} with step 1e-3
      const int n = 1000;
      double best = oed::kInfinity;
      for (int i = 0; i <= n; ++i)
        for (int j = 0; j <= n; ++j) {
          const double w0 = i / double(n), w1 = j / double(n), w2 = cw - w0 - w1;
          if (w2 < -1e-12 || w2 > 1.0 + 1e-12) continue;
          const std::vector<double> w{w0, w1, std::clamp(w2, 0.0, 1.0)};
          best = std::min(best, oed::a_criterion(w, t));
        }
      worst = std::max(worst, std::abs(r.phi - best) / best);
      ++problems;
    }
  const double s = seconds_since(t0);
  o.detail << problems << " problems (N_basis=2, 3 weights, C_w in {1,2}): max rel. |Phi_sd - Phi_grid| = " << fmt(worst, 3)
           << " <= 1e-4; " << fmt(s, 3) << " s < 10 s";
  o.check(worst <= 1e-4, "match");
  o.check(s < 10.0, "runtime");
}

// ---------------------------------------------------------------------------
// 6. full-size 2D run

void full_size_run(Context& ctx, Outcome& o) {
  auto& p = ctx.full_run();
  const auto& r = p.design();
  const double sum = std::accumulate(r.w.begin(), r.w.end(), 0.0);
  const auto res = oed::optimality_residual(r.w, oed::gradient(r.w, p.design_tensor()), r.c_w);
  const std::size_t n = r.w.size(), nb = p.config().basis.n_basis;
  o.detail << n << " weights: |sum w - C_w| = " << fmt(std::abs(sum - r.c_w), 3) << "; zeros " << r.counts.zero << " (>= "
           << std::ceil(0.85 * n) << "), fractional " << r.counts.fractional << " (<= " << nb + 2 << "), ones " << r.counts.one
           << "; max violation / xi = " << fmt(res.max_violation() / res.xi, 3) << " <= 1e-3 after " << r.outer_iterations
           << " outer iterations; pipeline " << fmt(ctx.full_seconds, 3) << " s < 300 s";
  o.check(n == 176 && nb == 9 && r.c_w == 10.0, "problem size");
  o.check(std::abs(sum - r.c_w) <= 1e-8, "budget");
  o.check(static_cast<double>(r.counts.zero) >= 0.85 * static_cast<double>(n), "zeros");
  o.check(r.counts.fractional <= nb + 2, "fractional");
  o.check(res.satisfied(1e-3), "optimality");
  o.check(ctx.full_seconds < 300.0, "runtime");
}

// ---------------------------------------------------------------------------
// 7. five-case comparison

void case_ordering(Context& ctx, Outcome& o) {
  const auto& rows = ctx.case_rows();
  std::map<std::string, double> phi;
  for (const auto& r : rows) phi[r.label] = r.phi;
  const double r13 = phi["case3"] / phi["case1"], r45 = phi["case5"] / phi["case4"];
  bool worst = true;
  for (const auto& [l, v] : phi) worst = worst && v <= phi["case5"];
  std::vector<std::string> order;
  for (const auto& [l, v] : phi) order.push_back(l);
  std::sort(order.begin(), order.end(), [&](const auto& a, const auto& b) { return phi[a] < phi[b]; });
  o.detail << "Phi_A";
  for (const auto& [l, v] : phi) o.detail << " " << l << "=" << fmt(v);
  o.detail << "; case3/case1 " << fmt(r13, 3) << " >= 2, case5/case4 " << fmt(r45, 3) << " >= 2; order";
  for (std::size_t i = 0; i < order.size(); ++i) o.detail << (i ? " < " : " ") << order[i];
  o.detail << "; " << fmt(ctx.cases_seconds, 3) << " s";
  o.check(phi.size() == 5, "five cases");
  o.check(phi["case1"] < phi["case3"] && r13 >= 2.0, "case1 vs case3");
  o.check(phi["case4"] < phi["case5"] && r45 >= 2.0, "case4 vs case5");
  o.check(worst, "case5 worst");
}

// ---------------------------------------------------------------------------
// 8. gap between the two largest reciprocal eigenvalues

void eigen_gap(Context& ctx, Outcome& o) {
  const auto& r = ctx.full_run().design();
  std::vector<double> inv;
  for (double l : r.eigenvalues) inv.push_back(1.0 / l);
  std::sort(inv.rbegin(), inv.rend());
  const double gap = inv[0] / inv[1];
  o.detail << "Lambda^-1 largest " << fmt(inv[0]) << ", second " << fmt(inv[1]) << ", ratio " << fmt(gap, 3) << " >= 1.5";
  o.check(gap >= 1.5, "gap");
}

// ---------------------------------------------------------------------------
// 9. spatial-only consistency

void spatial_consistency(Context& ctx, Outcome& o) {
  double wdiff = 0.0;
  for (int trial = 0; trial < 5; ++trial) {
    const auto t = random_tensor(8, 1, 4, 2);
    const auto a = oed::solve_spatial(t, 3.0), b = oed::simplicial_decomposition(t, 3.0);
    for (std::size_t i = 0; i < a.w.size(); ++i) wdiff = std::max(wdiff, std::abs(a.w[i] - b.w[i]));
  }
  const auto& t = ctx.full_run().fim();
  const auto agg = fim::aggregate_spatial(t);
  double idiff = 0.0;
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<double> ws(t.n_obs), w(t.size());
    for (std::size_t k = 0; k < t.n_obs; ++k) {
      ws[k] = uniform(0.0, 1.0);
      for (std::size_t l = 0; l < t.n_time; ++l) w[t.index(k, l)] = ws[k];
    }
    const DenseMatrix full = fim::combined_matrix(w, t);
    DenseMatrix spatial(t.n_basis);
    for (std::size_t k = 0; k < t.n_obs; ++k) spatial = spatial + ws[k] * agg[k];
    double scale = 0.0, diff = 0.0;
    for (std::size_t i = 0; i < t.n_basis; ++i)
      for (std::size_t j = 0; j < t.n_basis; ++j) {
        scale = std::max(scale, std::abs(full(i, j)));
        diff = std::max(diff, std::abs(full(i, j) - spatial(i, j)));
      }
    idiff = std::max(idiff, diff / scale);
  }
  o.detail << "N_time=1 max |w_spatial - w_space-time| = " << fmt(wdiff, 3) << " <= 1e-10; aggregation identity rel. "
           << fmt(idiff, 3) << " <= 1e-12";
  o.check(wdiff <= 1e-10, "N_time=1");
  o.check(idiff <= 1e-12, "aggregation");
}

// ---------------------------------------------------------------------------
// 10. geometry and graph suites

std::vector<double> dijkstra(std::size_t n, std::span<const shape::WeightedEdge> edges, std::size_t src) {
  std::vector<std::vector<std::pair<std::size_t, double>>> adj(n);
  for (const auto& e : edges) {
    adj[e.a].emplace_back(e.b, e.weight);
    adj[e.b].emplace_back(e.a, e.weight);
  }
  std::vector<double> d(n, std::numeric_limits<double>::infinity());
  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  d[src] = 0.0;
  pq.push({0.0, src});
  while (!pq.empty()) {
    const auto [du, u] = pq.top();
    pq.pop();
    if (du > d[u]) continue;
    for (const auto& [v, w] : adj[u])
      if (du + w < d[v]) {
        d[v] = du + w;
        pq.push({d[v], v});
      }
  }
  return d;
}

void geometry_graphs(Context&, Outcome& o) {
  std::size_t violations = 0, triangles = 0;
  for (std::size_t npts : {200u, 2000u}) {
    std::vector<Point2> pts;
    for (std::size_t i = 0; i < npts; ++i) pts.push_back({uniform(0, 1), uniform(0, 1)});
    const auto r = mesh::delaunay_triangulate(pts);
    const auto p = r.tri.points();
    for (const auto& t : r.tri.triangles()) {
      ++triangles;
      const Point2 a = p[t[0]], b = p[t[1]], c = p[t[2]];
      const double rad = mesh::circumradius(a, b, c);
      for (std::size_t q = 0; q < p.size(); ++q) {
        if (static_cast<int>(q) == t[0] || static_cast<int>(q) == t[1] || static_cast<int>(q) == t[2]) continue;
        if (mesh::incircle(a, b, c, p[q]) > 1e-12 * rad * rad * rad * rad) ++violations;
      }
    }
  }

  double graph_err = 0.0;
  for (int rep = 0; rep < 10; ++rep) {
    const std::size_t n = 30;
    std::vector<shape::WeightedEdge> e;
    for (std::size_t i = 1; i < n; ++i) e.push_back({i, static_cast<std::size_t>(uniform(0, static_cast<double>(i))), uniform(0.1, 2.0)});
    for (int k = 0; k < 40; ++k) {
      const auto a = static_cast<std::size_t>(uniform(0, n)), b = static_cast<std::size_t>(uniform(0, n));
      if (a != b) e.push_back({a, b, uniform(0.1, 2.0)});
    }
    const auto d = shape::graph_geodesics(n, e);
    for (std::size_t s = 0; s < n; ++s) {
      const auto ref = dijkstra(n, e, s);
      for (std::size_t t = 0; t < n; ++t) graph_err = std::max(graph_err, std::abs(d(s, t) - ref[t]));
    }
  }

  bool antipodal = true, deterministic = true;
  for (std::size_t n : {8u, 20u, 64u}) {
    const auto c = shape::curve_from_polygon(mesh::regular_polygon({0.5, 0.5}, 0.1, n));
    const auto d = shape::graph_geodesics(c);
    for (std::size_t seed : {std::size_t{0}, n / 4 + 1}) {
      const auto s = shape::farthest_point_centers(d, 2, seed);
      antipodal = antipodal && s[1] == (seed + n / 2) % n;
      deterministic = deterministic && shape::farthest_point_centers(d, 6, seed) == shape::farthest_point_centers(d, 6, seed);
    }
  }
  o.detail << "Delaunay " << triangles << " triangles, " << violations << " circumcircle violations; Floyd-Warshall vs Dijkstra max "
           << fmt(graph_err, 3) << "; farthest-point antipodal " << (antipodal ? "yes" : "no") << ", deterministic "
           << (deterministic ? "yes" : "no");
  o.check(violations == 0, "delaunay");
  o.check(graph_err <= 1e-12, "geodesics");
  o.check(antipodal, "antipodal");
  o.check(deterministic, "determinism");
}

} // namespace

int main(int argc, char** argv) {
  struct Criterion {
    int id;
    const char* name;
    std::function<void(Context&, Outcome&)> run;
  };
  const std::vector<Criterion> all{{1, "FEM convergence", fem_convergence},
                                   {2, "material derivative oracle", material_derivative},
                                   {3, "gradient check", gradient_check},
                                   {4, "criterion identities", criterion_identities},
                                   {5, "small-scale optimum", small_scale_optimum},
                                   {6, "full-size 2D run", full_size_run},
                                   {7, "case ordering", case_ordering},
                                   {8, "eigen-gap", eigen_gap},
                                   {9, "spatial-only consistency", spatial_consistency},
                                   {10, "geometry and graph suites", geometry_graphs}};
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  Context ctx;
  int failed = 0;
  for (const auto& c : all) {
    if (!only.empty() && !only.count(c.id)) continue;
    Outcome o;
    const auto t0 = Clock::now();
    try {
      c.run(ctx, o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << " exception: " << e.what();
    }
    failed += !o.pass;
    std::printf("[%s] %2d %s: %s (%.2f s)\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.str().c_str(), seconds_since(t0));
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
