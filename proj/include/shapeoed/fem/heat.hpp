#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "shapeoed/errors.hpp"
#include "shapeoed/fem/p1.hpp"

namespace shapeoed::fem {

struct HeatPhysics {
  double kappa_bulk = 1e-1;
  double kappa_inc = 1e-3;
  /// Robin coefficient per named boundary piece; unnamed pieces get 0.
  std::map<std::string, double> beta;
  double u_D = 1.0;
};

/// Discretized forward operators on one mesh. All matrices share the P1
/// pattern so they combine entry-wise.
struct HeatOperators {
  const Mesh* mesh = nullptr;
  SparseMatrix M;
  SparseMatrix K;
  SparseMatrix R;
  Vector kappa;  // per element
  double u_D = 1.0;
  std::vector<std::size_t> dirichlet;
  std::vector<std::int64_t> free_index;  // −1 on Dirichlet nodes
  std::size_t n_free = 0;
  /// Volume source, verification only.
  SourceFunction source;

  bool is_dirichlet(std::size_t node) const { return free_index[node] < 0; }
};

inline Vector element_kappa(const Mesh& m, double kappa_bulk, double kappa_inc) {
  Vector k(m.element_count());
  for (std::size_t e = 0; e < m.element_count(); ++e) k[e] = m.regions[e] == mesh::Region::Inclusion ? kappa_inc : kappa_bulk;
  return k;
}

inline HeatOperators assemble_heat(const Mesh& m, const HeatPhysics& phys, SourceFunction source = {}) {
  if (!(phys.kappa_bulk > 0.0 && phys.kappa_inc > 0.0)) throw DegenerateInput("assemble_heat: diffusion coefficients must be positive");
  Vector beta_by_id(m.robin_names.size(), 0.0);
  for (const auto& [name, beta] : phys.beta) {
    const int id = m.robin_id(name);
    if (id < 0) throw MissingTag("assemble_heat: mesh has no Robin piece named '" + name + "'");
    if (beta < 0.0) throw DegenerateInput("assemble_heat: Robin coefficient must be nonnegative");
    beta_by_id[static_cast<std::size_t>(id)] = beta;
  }

  HeatOperators ops;
  ops.mesh = &m;
  ops.kappa = element_kappa(m, phys.kappa_bulk, phys.kappa_inc);
  ops.M = assemble_mass(m);
  ops.K = assemble_stiffness(m, ops.kappa);
  ops.R = assemble_robin(m, beta_by_id);
  ops.u_D = phys.u_D;
  ops.source = std::move(source);
  ops.dirichlet = m.nodes_with_tag(mesh::SegmentKind::Dirichlet);
  if (ops.dirichlet.empty()) throw MissingTag("assemble_heat: mesh has no Dirichlet segments");
  ops.free_index.assign(m.node_count(), 0);
  for (std::size_t n : ops.dirichlet) ops.free_index[n] = -1;
  for (auto& f : ops.free_index)
    if (f == 0) f = static_cast<std::int64_t>(ops.n_free++);
  return ops;
}

struct TimeGrid {
  double T = 10.0;
  std::size_t steps = 21;

  double tau() const { return T / static_cast<double>(steps); }
  double time(std::size_t m) const { return m == steps ? T : static_cast<double>(m) * tau(); }
  std::size_t instants() const { return steps + 1; }
};

/// Nodal values at t_0 = 0, …, t_N = T.
struct Trajectory {
  std::vector<double> times;
  std::vector<Vector> states;

  std::size_t size() const { return states.size(); }
  const Vector& operator[](std::size_t m) const { return states[m]; }
};

namespace detail {

inline Vector restrict_free(const HeatOperators& ops, std::span<const double> full) {
  Vector out(ops.n_free);
  for (std::size_t i = 0; i < full.size(); ++i)
    if (ops.free_index[i] >= 0) out[static_cast<std::size_t>(ops.free_index[i])] = full[i];
  return out;
}

/// Backward-Euler stepper for (M + τ(K+R)) x^m = M x^{m−1} + τ b^m with
/// prescribed Dirichlet values.
class Stepper {
public:
  Stepper(const HeatOperators& ops, double tau, double cg_tol)
      : ops_(ops), tau_(tau), tol_(cg_tol), system_(ops.M.combined(1.0, ops.K.combined(1.0, ops.R, 1.0), tau)) {
    system_free_ = system_.submatrix(ops.free_index, ops.n_free, ops.free_index, ops.n_free);
  }

  /// `prev` and the Dirichlet entries of `next` are inputs; free entries of
  /// `next` are overwritten. `load` may be empty.
  void step(std::span<const double> prev, std::span<const double> load, Vector& next) const {
    const std::size_t n = prev.size();
    Vector rhs = ops_.M * prev;
    if (!load.empty())
      for (std::size_t i = 0; i < n; ++i) rhs[i] += tau_ * load[i];
    Vector lift(n, 0.0);
    bool lifted = false;
    for (std::size_t d : ops_.dirichlet) {
      lift[d] = next[d];
      lifted = lifted || next[d] != 0.0;
    }
    if (lifted) {
      const Vector s = system_ * lift;
      for (std::size_t i = 0; i < n; ++i) rhs[i] -= s[i];
    }
    const Vector guess = restrict_free(ops_, prev);
    const Vector x = numerics::cg_solve(system_free_, restrict_free(ops_, rhs), tol_, guess);
    for (std::size_t i = 0; i < n; ++i)
      if (ops_.free_index[i] >= 0) next[i] = x[static_cast<std::size_t>(ops_.free_index[i])];
  }

private:
  const HeatOperators& ops_;
  double tau_;
  double tol_;
  SparseMatrix system_;
  SparseMatrix system_free_;
};

} // namespace detail

/// Backward Euler from u(·,0) = 0 (or `initial`). Dirichlet nodes carry u_D
/// from the first step on; the t = 0 snapshot keeps zeros there.
inline Trajectory solve_forward(const HeatOperators& ops, const TimeGrid& grid, double cg_tol = 1e-10,
                                std::span<const double> initial = {}) {
  if (!(grid.T > 0.0) || grid.steps == 0) throw DegenerateInput("solve_forward: need T > 0 and at least one step");
  const std::size_t n = ops.mesh->node_count();
  const double tau = grid.tau();
  const detail::Stepper stepper(ops, tau, cg_tol);
  Trajectory traj;
  traj.times.push_back(0.0);
  traj.states.emplace_back(n, 0.0);
  if (!initial.empty()) {
    if (initial.size() != n) throw DimensionMismatch("solve_forward: initial state has the wrong length");
    traj.states.back().assign(initial.begin(), initial.end());
  }
  for (std::size_t m = 1; m <= grid.steps; ++m) {
    const double t = grid.time(m);
    Vector next(n, 0.0);
    for (std::size_t d : ops.dirichlet) next[d] = ops.u_D;
    Vector load;
    if (ops.source) load = assemble_load(*ops.mesh, ops.source, t);
    stepper.step(traj.states.back(), load, next);
    traj.times.push_back(t);
    traj.states.push_back(std::move(next));
  }
  return traj;
}

/// Element-wise DV (row a = ∇V_a) and div V of a P1 vector field.
struct ElementJacobian {
  double dv[2][2] = {{0, 0}, {0, 0}};
  double div = 0.0;
  bool zero = true;
};

inline ElementJacobian element_jacobian(const Mesh& m, std::size_t e, const P1Element& el, std::span<const Point2> V) {
  ElementJacobian j;
  const auto& t = m.triangles[e];
  for (std::size_t i = 0; i < 3; ++i) {
    const Point2 v = V[t[i]];
    if (v.x != 0.0 || v.y != 0.0) j.zero = false;
    j.dv[0][0] += v.x * el.grad[i].x;
    j.dv[0][1] += v.x * el.grad[i].y;
    j.dv[1][0] += v.y * el.grad[i].x;
    j.dv[1][1] += v.y * el.grad[i].y;
  }
  j.div = j.dv[0][0] + j.dv[1][1];
  return j;
}

/// Right side of the sensitivity equation at one step (without the factor
/// τ): −∫ div V u̇ φ_i + ∫ k ∇uᵀ (DV + DVᵀ − div V I) ∇φ_i, with
/// u̇ = (u − u_prev)/τ. Elements where V vanishes contribute exactly zero.
inline Vector sensitivity_load(const HeatOperators& ops, std::span<const double> u, std::span<const double> u_prev, double tau,
                               std::span<const Point2> V) {
  const Mesh& m = *ops.mesh;
  Vector out(m.node_count(), 0.0);
  for (std::size_t e = 0; e < m.element_count(); ++e) {
    const P1Element el = p1_element(m, e);
    const ElementJacobian J = element_jacobian(m, e, el, V);
    if (J.zero) continue;
    const auto& t = m.triangles[e];

    // mass term weighted by div V
    double udot[3];
    for (std::size_t i = 0; i < 3; ++i) udot[i] = (u[t[i]] - u_prev[t[i]]) / tau;
    const double s = udot[0] + udot[1] + udot[2];
    for (std::size_t i = 0; i < 3; ++i) out[t[i]] -= J.div * el.area * (s + udot[i]) / 12.0;

    // stiffness-like term
    Point2 gu{0.0, 0.0};
    for (std::size_t i = 0; i < 3; ++i) gu = gu + u[t[i]] * el.grad[i];
    const double a00 = 2 * J.dv[0][0] - J.div, a11 = 2 * J.dv[1][1] - J.div;
    const double a01 = J.dv[0][1] + J.dv[1][0];
    const Point2 agu{a00 * gu.x + a01 * gu.y, a01 * gu.x + a11 * gu.y};
    const double k = ops.kappa[e] * el.area;
    for (std::size_t i = 0; i < 3; ++i) out[t[i]] += k * mesh::dot(agu, el.grad[i]);
  }
  return out;
}

/// Material derivative δu along V: same left operator as the forward
/// solve with homogeneous Dirichlet data and δu(·,0) = 0.
inline Trajectory solve_sensitivity(const HeatOperators& ops, const Trajectory& forward, std::span<const Point2> V,
                                    double cg_tol = 1e-10) {
  const Mesh& m = *ops.mesh;
  if (V.size() != m.node_count()) throw DimensionMismatch("solve_sensitivity: velocity field size differs from node count");
  if (forward.size() < 2) throw DegenerateInput("solve_sensitivity: forward trajectory has no steps");
  const std::size_t n = m.node_count();
  Trajectory out;
  out.times = forward.times;
  out.states.emplace_back(n, 0.0);
  std::unique_ptr<detail::Stepper> stepper;
  double stepper_tau = -1.0;
  for (std::size_t k = 1; k < forward.size(); ++k) {
    const double tau = forward.times[k] - forward.times[k - 1];
    if (!stepper || std::abs(tau - stepper_tau) > 1e-14 * std::abs(tau)) {
      stepper = std::make_unique<detail::Stepper>(ops, tau, cg_tol);
      stepper_tau = tau;
    }
    const Vector load = sensitivity_load(ops, forward[k], forward[k - 1], tau, V);
    Vector next(n, 0.0);
    stepper->step(out.states.back(), load, next);
    out.states.push_back(std::move(next));
  }
  return out;
}

inline double min_element_area(const Mesh& m) {
  double a = std::numeric_limits<double>::infinity();
  for (std::size_t e = 0; e < m.element_count(); ++e) a = std::min(a, m.element_area(e));
  return a;
}

/// Copy of `m` with nodes moved to x + t·V(x); connectivity and tags kept.
inline Mesh displaced_mesh(const Mesh& m, std::span<const Point2> V, double t) {
  Mesh d = m;
  for (std::size_t i = 0; i < d.nodes.size(); ++i) d.nodes[i] = d.nodes[i] + t * V[i];
  if (!(min_element_area(d) > 0.0)) throw MeshInversion("displaced mesh has an element with non-positive area");
  return d;
}

enum class FdScheme { Forward, Central };

/// Finite-difference material derivative: forward solves on node-displaced
/// meshes, differenced nodewise.
inline Trajectory fd_material_derivative_oracle(const Mesh& m, const HeatPhysics& phys, const TimeGrid& grid,
                                                std::span<const Point2> V, double tau_fd, FdScheme scheme = FdScheme::Forward,
                                                double cg_tol = 1e-13) {
  if (V.size() != m.node_count()) throw DimensionMismatch("fd oracle: velocity field size differs from node count");
  auto solve_on = [&](double t) {
    const Mesh d = displaced_mesh(m, V, t);
    return solve_forward(assemble_heat(d, phys), grid, cg_tol);
  };
  const Trajectory plus = solve_on(tau_fd);
  const Trajectory base = scheme == FdScheme::Forward ? solve_on(0.0) : solve_on(-tau_fd);
  const double h = scheme == FdScheme::Forward ? tau_fd : 2.0 * tau_fd;
  Trajectory out;
  out.times = base.times;
  for (std::size_t k = 0; k < base.size(); ++k) {
    Vector d(m.node_count());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = (plus[k][i] - base[k][i]) / h;
    out.states.push_back(std::move(d));
  }
  return out;
}

/// ‖x‖_M
inline double mass_norm(const HeatOperators& ops, std::span<const double> x) { return std::sqrt(ops.M.bilinear(x, x)); }

} // namespace shapeoed::fem
