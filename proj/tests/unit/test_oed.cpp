#include <gtest/gtest.h>

#include <numeric>

#include "shapeoed/numerics/eigen.hpp"
#include "shapeoed/oed/solver.hpp"
#include "support.hpp"

using namespace shapeoed;
using namespace shapeoed::oed;

namespace {

DenseMatrix outer(std::span<const double> a) {
  DenseMatrix m(a.size(), a.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a.size(); ++j) m(i, j) = a[i] * a[j];
  return m;
}

/// Blocks of the given rank built from random vectors; B random SPD.
FimTensor random_tensor(std::size_t n_obs, std::size_t n_time, std::size_t nb, std::size_t rank = 1) {
  FimTensor t;
  t.n_obs = n_obs;
  t.n_time = n_time;
  t.n_basis = nb;
  for (std::size_t i = 0; i < n_obs * n_time; ++i) {
    DenseMatrix b(nb, nb);
    for (std::size_t r = 0; r < rank; ++r) b = b + outer(testsupport::random_vector(nb));
    t.blocks.push_back(b);
  }
  t.gramian = testsupport::random_spd(nb);
  return t;
}

std::vector<double> random_feasible(std::size_t n, double cw) {
  // interior point of Δ_{C_w}: mix of uniform and a random point, rescaled
  std::vector<double> w(n);
  for (auto& x : w) x = testsupport::uniform(0.2, 1.0);
  const double s = std::accumulate(w.begin(), w.end(), 0.0);
  for (auto& x : w) x = std::min(1.0, x * cw / s);
  return w;
}

double sum(std::span<const double> w) { return std::accumulate(w.begin(), w.end(), 0.0); }

} // namespace

TEST(Criterion, IdentityGivesBasisSize) {
  EXPECT_DOUBLE_EQ(a_criterion(DenseMatrix::identity(9), DenseMatrix::identity(9)), 9.0);
}

TEST(Criterion, SingularInformationIsInfinite) {
  DenseMatrix y = DenseMatrix::identity(3);
  y(2, 2) = 0.0;
  EXPECT_EQ(a_criterion(y, DenseMatrix::identity(3)), kInfinity);
  EXPECT_THROW(criterion_kernel(y, DenseMatrix::identity(3)), SingularInformation);
}

TEST(Criterion, TraceEqualsReciprocalEigenvalueSum) {
  testsupport::rng(101);
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t n = 2 + rep % 8;
    const DenseMatrix y = testsupport::random_spd(n, 0.1), b = testsupport::random_spd(n, 0.1);
    const auto eig = numerics::generalized_eig(y, b);
    double s = 0.0;
    for (double l : eig.values) s += 1.0 / l;
    const double phi = a_criterion(y, b);
    EXPECT_NEAR(phi, s, 1e-8 * phi);
  }
}

TEST(Criterion, PublishedSpectrumIsConsistentWithPublishedValue) {
  const double inv[] = {0.27, 0.49, 0.77, 1.04, 1.24, 2.58, 3.39, 6.68, 16.48};
  const double s = std::accumulate(std::begin(inv), std::end(inv), 0.0);
  EXPECT_NEAR(s, 32.94, 1e-12);
  // nine values rounded to 0.005 each, plus the rounding of the total
  EXPECT_LE(std::abs(s - 32.93), 9 * 0.005 + 0.005);
}

TEST(Gradient, TrivialCases) {
  FimTensor t;
  t.n_obs = 2;
  t.n_time = 1;
  t.n_basis = 4;
  t.blocks = {DenseMatrix::identity(4), DenseMatrix(4, 4)};
  t.gramian = DenseMatrix::identity(4);
  const std::vector<double> w{1.0, 0.0};
  const Vector g = gradient(w, t);
  EXPECT_DOUBLE_EQ(g[0], -4.0);
  EXPECT_EQ(g[1], 0.0);
  const std::vector<double> zero{0.0, 1.0};
  EXPECT_THROW(gradient(zero, t), SingularInformation);
}

TEST(Gradient, MatchesCentralFiniteDifferences) {
  testsupport::rng(102);
  const FimTensor t = random_tensor(4, 5, 3);
  for (int rep = 0; rep < 20; ++rep) {
    const auto w = random_feasible(t.size(), 6.0);
    const Vector g = gradient(w, t);
    const double h = 1e-6;
    for (std::size_t i = 0; i < w.size(); ++i) {
      auto wp = w, wm = w;
      wp[i] += h;
      wm[i] -= h;
      const double fd = (a_criterion(wp, t) - a_criterion(wm, t)) / (2 * h);
      EXPECT_LE(std::abs(fd - g[i]), 1e-5 * std::abs(g[i]) + 1e-12) << "index " << i;
      EXPECT_LE(g[i], 0.0);
    }
  }
}

// B = QDQᵀ with cond(B) = 1e8 and Y = B^½ S B^½ share the nearly null
// direction; trace(BY⁻¹) = trace(S⁻¹) only depends on the well-conditioned S.
TEST(Criterion, AccurateWhenGramianIsIllConditioned) {
  testsupport::rng(77);
  const std::size_t n = 6;
  for (int trial = 0; trial < 10; ++trial) {
    const DenseMatrix q = numerics::jacobi_eigensym(testsupport::random_symmetric(n)).vectors;
    DenseMatrix root(n), b(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        for (std::size_t k = 0; k < n; ++k) {
          const double d = std::pow(10.0, -8.0 * static_cast<double>(k) / static_cast<double>(n - 1));
          root(i, j) += q(i, k) * std::sqrt(d) * q(j, k);
          b(i, j) += q(i, k) * d * q(j, k);
        }
    const DenseMatrix s = testsupport::random_spd(n, 1.0);
    DenseMatrix y = root * s * root;
    y.symmetrize();
    b.symmetrize();
    const double expect = numerics::cholesky_solve(numerics::cholesky(s), DenseMatrix::identity(n)).trace();
    EXPECT_NEAR(a_criterion(y, b), expect, 1e-6 * expect);
    // ⟨Y⁻¹BY⁻¹, Y⟩ = trace(Y⁻¹B)
    EXPECT_NEAR(numerics::frobenius_inner(criterion_kernel(y, b), y), expect, 1e-6 * expect);
  }
}

TEST(Criterion, WhitenedTensorPreservesCriterionAndGradient) {
  testsupport::rng(78);
  const FimTensor t = random_tensor(3, 4, 4, 2);
  const FimTensor wt = fim::whitened(t);
  const auto w = uniform_design(t.size(), 3.0);
  EXPECT_NEAR(a_criterion(w, wt), a_criterion(w, t), 1e-10 * a_criterion(w, t));
  const auto g = gradient(w, t), gw = gradient(w, wt);
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(gw[i], g[i], 1e-9 * std::abs(g[i]) + 1e-12);
}

TEST(Criterion, ConvexAlongSegments) {
  testsupport::rng(103);
  const FimTensor t = random_tensor(3, 4, 3);
  for (int rep = 0; rep < 30; ++rep) {
    const auto a = random_feasible(t.size(), 5.0), b = random_feasible(t.size(), 5.0);
    const double fa = a_criterion(a, t), fb = a_criterion(b, t);
    for (double lam : {0.25, 0.5, 0.75}) {
      std::vector<double> m(a.size());
      for (std::size_t i = 0; i < m.size(); ++i) m[i] = lam * a[i] + (1 - lam) * b[i];
      EXPECT_LE(a_criterion(m, t), lam * fa + (1 - lam) * fb + 1e-9);
    }
  }
}

TEST(Criterion, AddingInformationNeverHurts) {
  testsupport::rng(104);
  const FimTensor t = random_tensor(3, 4, 3);
  for (int rep = 0; rep < 10; ++rep) {
    const auto w = random_feasible(t.size(), 4.0);
    const double f = a_criterion(w, t);
    for (std::size_t i = 0; i < w.size(); ++i) {
      auto up = w;
      up[i] += 1.0;
      EXPECT_LE(a_criterion(up, t), f);
    }
  }
}

TEST(VertexOracle, Examples) {
  const std::vector<double> g{-3, -1, -2};
  EXPECT_EQ(vertex_oracle(g, 2), (std::vector<double>{1, 0, 1}));
  const std::vector<double> flat(5, -1.0);
  EXPECT_EQ(vertex_oracle(flat, 2), (std::vector<double>{1, 1, 0, 0, 0}));
  EXPECT_THROW(vertex_oracle(g, 1.5), NonIntegerBudget);
  EXPECT_THROW(vertex_oracle(g, 3), NonIntegerBudget);
}

TEST(VertexOracle, MatchesFullSort) {
  testsupport::rng(105);
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t n = 5 + rep % 40;
    std::vector<double> g(n);
    for (auto& x : g) x = std::round(testsupport::uniform(-5, 0) * 2) / 2;  // plenty of ties
    const std::size_t cw = 1 + rep % (n - 1);
    std::vector<std::pair<double, std::size_t>> keyed;
    for (std::size_t i = 0; i < n; ++i) keyed.push_back({g[i], i});
    std::sort(keyed.begin(), keyed.end());
    std::vector<double> ref(n, 0.0);
    for (std::size_t i = 0; i < cw; ++i) ref[keyed[i].second] = 1.0;
    EXPECT_EQ(vertex_oracle(g, static_cast<double>(cw)), ref);
  }
}

TEST(RoundDesign, Examples) {
  const std::vector<double> bin{0, 1, 1, 0};
  EXPECT_EQ(round_design(bin, 2), bin);
  const std::vector<double> w{0.9, 0.5, 0.5, 0.1};
  EXPECT_EQ(round_design(w, 2), (std::vector<double>{1, 1, 0, 0}));
}

TEST(Residual, Examples) {
  const std::vector<double> w{1.0, 0.5, 0.0}, g{-3, -2, -1};
  const auto r = optimality_residual(w, g, 2);
  EXPECT_DOUBLE_EQ(r.xi, 2.0);
  EXPECT_EQ(r.violations, (std::vector<double>{0, 0, 0}));

  const std::vector<double> interior{0.5, 0.5, 0.5, 0.5}, flat{-2, -2, -2, -2};
  EXPECT_EQ(optimality_residual(interior, flat, 2).max_violation(), 0.0);

  const std::vector<double> binary{1, 0, 0}, g2{-1, -3, -2};
  const auto b = optimality_residual(binary, g2, 1);
  EXPECT_DOUBLE_EQ(b.xi, 3.0);  // C_w-th largest −g
  EXPECT_EQ(b.violations, (std::vector<double>{2, 0, 0}));
}

TEST(Torsney, SingleVertex) {
  testsupport::rng(106);
  const FimTensor t = random_tensor(2, 2, 2, 2);
  VertexSet s{{{1, 0, 1, 0}}, {1.0}};
  const auto r = torsney_master(s, t);
  EXPECT_EQ(r.gamma, (std::vector<double>{1.0}));
  EXPECT_EQ(r.iterations, 0u);
}

TEST(Torsney, SymmetricPairStaysBalanced) {
  testsupport::rng(107);
  FimTensor t = random_tensor(2, 1, 3, 3);
  t.blocks[1] = t.blocks[0];
  VertexSet s{{{1, 0}, {0, 1}}, {0.5, 0.5}};
  const auto r = torsney_master(s, t);
  EXPECT_NEAR(r.gamma[0], 0.5, 1e-15);
  EXPECT_NEAR(r.gamma[1], 0.5, 1e-15);
}

TEST(Torsney, MatchesGridSearchOnTwoSimplex) {
  testsupport::rng(108);
  for (int rep = 0; rep < 5; ++rep) {
    const FimTensor t = random_tensor(3, 1, 2);
    VertexSet s{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}, {1.0 / 3, 1.0 / 3, 1.0 / 3}};
    MasterOptions opt;
    opt.tol = 1e-9;
    const auto r = torsney_master(s, t, opt);
    double best = kInfinity;
    for (int i = 0; i <= 1000; ++i)
      for (int j = 0; i + j <= 1000; ++j) {
        const std::vector<double> w{i * 1e-3, j * 1e-3, (1000 - i - j) * 1e-3};
        best = std::min(best, a_criterion(w, t));
      }
    EXPECT_LE(r.phi, best * (1 + 1e-4));
    EXPECT_GE(r.phi, best * (1 - 1e-4));
  }
}

TEST(Torsney, ObjectiveNeverIncreases) {
  testsupport::rng(109);
  const FimTensor t = random_tensor(4, 3, 3);
  VertexSet s;
  for (int j = 0; j < 5; ++j) s.vertices.push_back(vertex_oracle(testsupport::random_vector(12), 4));
  s.gamma.assign(s.size(), 0.2);
  double prev = a_criterion(s.design(), t);
  for (std::size_t cap : {1u, 2u, 5u, 10u, 50u}) {
    MasterOptions opt;
    opt.max_iter = cap;
    opt.tol = 0.0;
    const auto r = torsney_master(s, t, opt);
    EXPECT_LE(r.phi, prev);
    EXPECT_NEAR(sum(r.gamma), 1.0, 1e-14);
  }
}

TEST(Solver, DominantIndexIsSelected) {
  testsupport::rng(110);
  FimTensor t = random_tensor(3, 2, 3, 3);
  t.blocks[4] = 10.0 * DenseMatrix::identity(3);
  for (std::size_t i = 0; i < t.size(); ++i)
    if (i != 4) t.blocks[i] = (1.0 / (1.0 + t.blocks[i].frobenius_norm())) * t.blocks[i];
  const auto r = simplicial_decomposition(t, 1.0);
  for (std::size_t i = 0; i < t.size(); ++i) EXPECT_NEAR(r.w[i], i == 4 ? 1.0 : 0.0, 1e-9);
}

TEST(Solver, PostConditions) {
  testsupport::rng(111);
  for (int rep = 0; rep < 5; ++rep) {
    const FimTensor t = random_tensor(6, 8, 4);
    const auto r = simplicial_decomposition(t, 7.0);
    EXPECT_TRUE(r.converged);
    EXPECT_NEAR(sum(r.w), 7.0, 1e-8);
    for (double x : r.w) {
      EXPECT_GE(x, 0.0);
      EXPECT_LE(x, 1.0 + 1e-12);
    }
    EXPECT_LE(r.max_violation(), 1e-3 * r.xi);
    for (std::size_t i = 1; i < r.phi_history.size(); ++i) EXPECT_LE(r.phi_history[i], r.phi_history[i - 1]);
    EXPECT_GE(r.phi_history.front(), r.phi_history.back());
    EXPECT_DOUBLE_EQ(r.phi, a_criterion(r.w, t));
    double s = 0.0;
    for (double l : r.eigenvalues) s += 1.0 / l;
    EXPECT_NEAR(s, r.phi, 1e-8 * r.phi);
    EXPECT_EQ(r.counts.zero + r.counts.fractional + r.counts.one, t.size());

    const auto rounded = round_design(r.w, 7.0);
    EXPECT_GE(a_criterion(rounded, t), r.phi * (1 - 1e-12));
  }
}

TEST(Solver, MirrorSymmetricProblem) {
  testsupport::rng(112);
  // index i ↔ n−1−i maps Υ to QΥQᵀ with Q swapping basis 0 and 1; B commutes with Q
  const std::size_t n = 10, nb = 3;
  DenseMatrix q(nb, nb);
  q(0, 1) = q(1, 0) = q(2, 2) = 1.0;
  FimTensor t;
  t.n_obs = n;
  t.n_time = 1;
  t.n_basis = nb;
  t.blocks.resize(n);
  for (std::size_t i = 0; i < n / 2; ++i) {
    t.blocks[i] = outer(testsupport::random_vector(nb)) + outer(testsupport::random_vector(nb));
    t.blocks[n - 1 - i] = q * t.blocks[i] * q.transposed();
  }
  t.gramian = DenseMatrix::from_rows({{2.0, 0.5, 0.1}, {0.5, 2.0, 0.1}, {0.1, 0.1, 1.0}});
  const auto r = simplicial_decomposition(t, 3.0);
  std::vector<double> mirrored(r.w.rbegin(), r.w.rend());
  EXPECT_NEAR(a_criterion(mirrored, t), r.phi, 1e-10 * r.phi);
  // symmetric average is feasible and (by convexity) at least as good within tolerance
  std::vector<double> avg(n);
  for (std::size_t i = 0; i < n; ++i) avg[i] = 0.5 * (r.w[i] + mirrored[i]);
  EXPECT_LE(r.phi, a_criterion(avg, t) * (1 + 1e-3));
}

TEST(Solver, Errors) {
  FimTensor zero;
  zero.n_obs = 3;
  zero.n_time = 1;
  zero.n_basis = 2;
  zero.blocks.assign(3, DenseMatrix(2, 2));
  zero.gramian = DenseMatrix::identity(2);
  EXPECT_THROW(simplicial_decomposition(zero, 1.0), Infeasible);

  testsupport::rng(113);
  const FimTensor t = random_tensor(6, 8, 4);
  SolverOptions opt;
  opt.max_outer = 0;
  EXPECT_THROW(simplicial_decomposition(t, 7.0, opt), MaxIterations);
  EXPECT_THROW(simplicial_decomposition(t, 7.5), NonIntegerBudget);
}

TEST(Solver, SingularFirstVertexFallsBackToCovering) {
  // the C_w = 1 best index carries rank-one information only
  FimTensor t;
  t.n_obs = 4;
  t.n_time = 1;
  t.n_basis = 2;
  t.blocks = {DenseMatrix::from_rows({{9, 0}, {0, 0}}), DenseMatrix::from_rows({{1, 0}, {0, 1}}),
              DenseMatrix::from_rows({{0.5, 0}, {0, 0.5}}), DenseMatrix::from_rows({{0, 0}, {0, 2}})};
  t.gramian = DenseMatrix::identity(2);
  const auto r = simplicial_decomposition(t, 1.0);
  EXPECT_TRUE(r.converged);
  EXPECT_TRUE(std::isfinite(r.phi));
  EXPECT_NEAR(sum(r.w), 1.0, 1e-12);
}

TEST(Spatial, SingleInstantMatchesSpaceTime) {
  testsupport::rng(114);
  const FimTensor t = random_tensor(8, 1, 4);
  const auto a = solve_spatial(t, 3.0), b = simplicial_decomposition(t, 3.0);
  ASSERT_EQ(a.w.size(), b.w.size());
  for (std::size_t i = 0; i < a.w.size(); ++i) EXPECT_NEAR(a.w[i], b.w[i], 1e-10);
}

TEST(Spatial, BudgetIsActiveAndSpaceTimeIsNoWorse) {
  testsupport::rng(115);
  const FimTensor t = random_tensor(6, 5, 3);
  const auto sp = solve_spatial(t, 5.0);
  EXPECT_EQ(sp.w.size(), 6u);
  EXPECT_NEAR(sum(sp.w), 5.0, 1e-8);
  EXPECT_LE(sp.counts.fractional, 6u);
  const auto st = simplicial_decomposition(t, 25.0);
  EXPECT_LE(st.phi, sp.phi * (1 + 1e-3));
}
