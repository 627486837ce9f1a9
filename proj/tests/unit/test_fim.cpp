#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "shapeoed/fim/cache.hpp"
#include "shapeoed/fim/tensor.hpp"
#include "shapeoed/numerics/eigen.hpp"
#include "support.hpp"

using namespace shapeoed;
using namespace shapeoed::fim;

namespace {

const mesh::Mesh& square() {
  static const mesh::Mesh m = mesh::structured_unit_square(12);
  return m;
}

mesh::Patch box_patch(const mesh::Mesh& m, mesh::Box b) {
  std::vector<std::size_t> el;
  for (std::size_t e = 0; e < m.element_count(); ++e) {
    const auto& t = m.triangles[e];
    const mesh::Point2 g = (1.0 / 3.0) * (m.nodes[t[0]] + m.nodes[t[1]] + m.nodes[t[2]]);
    if (b.contains(g)) el.push_back(e);
  }
  return mesh::make_patch(m, std::move(el));
}

std::vector<SensorModel> two_sensors(NoiseParams noise = {}) {
  std::vector<SensorModel> s;
  s.emplace_back(box_patch(square(), {{0.0, 0.0}, {0.5, 0.5}}), noise);
  s.emplace_back(box_patch(square(), {{0.4, 0.3}, {1.0, 0.9}}), noise);
  return s;
}

std::vector<fem::Trajectory> random_trajectories(std::size_t nb, std::size_t nt) {
  std::vector<fem::Trajectory> out(nb);
  for (auto& t : out)
    for (std::size_t l = 0; l < nt; ++l) {
      t.times.push_back(static_cast<double>(l));
      t.states.push_back(testsupport::random_vector(square().node_count()));
    }
  return out;
}

FimTensor random_tensor(std::size_t nb, std::size_t nt) {
  const auto s = two_sensors();
  const auto traj = random_trajectories(nb, nt);
  return elementary_fims(traj, s, DenseMatrix::identity(nb));
}

double min_eig(const DenseMatrix& a) { return numerics::jacobi_eigensym(a).values.front(); }

std::filesystem::path temp_file(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "shapeoed_test_fim";
  std::filesystem::create_directories(dir);
  return dir / name;
}

} // namespace

TEST(SensorModel, ConstantsAreScaledByAlpha1) {
  const auto s = two_sensors({0.3, 2.0});
  for (const auto& m : s) {
    const Vector c(m.node_count(), 1.7);
    for (double v : apply_Ak(m, c)) EXPECT_NEAR(v, 2.0 * 1.7, 1e-12);
  }
}

TEST(SensorModel, ZeroAlpha0IsPureScaling) {
  testsupport::rng(11);
  const SensorModel m(box_patch(square(), {{0.2, 0.2}, {0.8, 0.8}}), {0.0, 3.0});
  const Vector d = testsupport::random_vector(m.node_count());
  const Vector a = m.apply_A(d);
  for (std::size_t i = 0; i < d.size(); ++i) EXPECT_DOUBLE_EQ(a[i], 3.0 * d[i]);
}

TEST(SensorModel, RayleighQuotientBoundedBelowByAlpha1) {
  testsupport::rng(12);
  const auto s = two_sensors();
  for (int rep = 0; rep < 50; ++rep)
    for (const auto& m : s) {
      const Vector d = testsupport::random_vector(m.node_count());
      EXPECT_GE(m.inner(d, m.apply_A(d)) / m.inner(d, d), m.noise().alpha1 - 1e-10);
    }
}

TEST(SensorModel, LumpedMassSumsToPatchArea) {
  const auto s = two_sensors();
  for (const auto& m : s) {
    double sum = 0.0;
    for (double v : m.lumped_mass()) {
      EXPECT_GT(v, 0.0);
      sum += v;
    }
    EXPECT_NEAR(sum, m.patch().area(), 1e-14);
  }
}

TEST(SensorModel, RejectsBadParameters) {
  EXPECT_THROW(SensorModel(box_patch(square(), {{0, 0}, {1, 1}}), {0.01, 0.0}), DegenerateInput);
  EXPECT_THROW(SensorModel(mesh::make_patch(square(), {}), {}), DegenerateInput);
}

TEST(SensorModel, DefaultMeshHasEightSensors) {
  const mesh::Mesh m = mesh::build_mesh(mesh::default_geometry());
  const auto s = sensor_models(m);
  ASSERT_EQ(s.size(), 8u);
  for (const auto& model : s) EXPECT_NEAR(model.patch().area(), 0.09, 0.01);
}

TEST(ElementaryFims, ZeroSensitivitiesGiveZeroTensor) {
  const auto s = two_sensors();
  std::vector<fem::Trajectory> traj(3);
  for (auto& t : traj) t.states.assign(4, Vector(square().node_count(), 0.0));
  const auto t = elementary_fims(traj, s, DenseMatrix::identity(3));
  EXPECT_EQ(t.size(), 8u);
  for (const auto& b : t.blocks) EXPECT_EQ(b.frobenius_norm(), 0.0);
}

TEST(ElementaryFims, ConstantRestrictionIsAnalytic) {
  const std::vector<SensorModel> s{SensorModel(box_patch(square(), {{0.0, 0.0}, {0.5, 0.5}}), {0.0, 1.5})};
  fem::Trajectory t;
  t.states = {Vector(square().node_count(), 0.8)};
  const std::vector<fem::Trajectory> traj{t};
  const std::vector<std::size_t> inst{0};
  const auto y = elementary_fims(traj, s, inst, DenseMatrix::identity(1));
  EXPECT_NEAR(y.blocks[0](0, 0), 1.5 * 1.5 * 0.8 * 0.8 * s[0].patch().area(), 1e-14);
}

TEST(ElementaryFims, MatchesDenseOperatorForm) {
  testsupport::rng(21);
  const auto s = two_sensors();
  const auto traj = random_trajectories(4, 3);
  const auto t = elementary_fims(traj, s, DenseMatrix::identity(4));
  for (std::size_t k = 0; k < s.size(); ++k) {
    const DenseMatrix kd = s[k].stiffness().to_dense();
    DenseMatrix m(s[k].node_count()), minv(s[k].node_count());
    for (std::size_t i = 0; i < m.rows(); ++i) {
      m(i, i) = s[k].lumped_mass()[i];
      minv(i, i) = 1.0 / m(i, i);
    }
    const DenseMatrix a = s[k].noise().alpha0 * kd + s[k].noise().alpha1 * m;
    const DenseMatrix op = a * minv * a;
    for (std::size_t l = 0; l < 3; ++l)
      for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j) {
          const Vector di = s[k].restrict(traj[i][l]), dj = s[k].restrict(traj[j][l]);
          const double ref = numerics::dot(di, op * dj);
          EXPECT_NEAR(t.block(k, l)(i, j), ref, 1e-12 * std::max(1.0, std::abs(ref)));
        }
  }
}

TEST(ElementaryFims, BlocksAreSymmetricPsdAndRankLimited) {
  testsupport::rng(22);
  const auto t = random_tensor(5, 4);
  for (const auto& b : t.blocks) {
    EXPECT_TRUE(b.is_symmetric(0.0));
    EXPECT_GE(min_eig(b), -1e-10 * b.frobenius_norm());
  }
  // a one-element patch has 3 nodes, so each block has rank ≤ 3
  std::vector<SensorModel> tiny;
  tiny.emplace_back(mesh::make_patch(square(), {0}), NoiseParams{});
  const auto traj = random_trajectories(5, 1);
  const auto y = elementary_fims(traj, tiny, DenseMatrix::identity(5));
  const auto ev = numerics::jacobi_eigensym(y.blocks[0]).values;
  std::size_t rank = 0;
  for (double v : ev)
    if (v > 1e-10 * ev.back()) ++rank;
  EXPECT_LE(rank, 3u);
}

TEST(ElementaryFims, InitialInstantWithZeroSensitivityIsZero) {
  testsupport::rng(23);
  auto traj = random_trajectories(3, 4);
  for (auto& t : traj) t.states[0].assign(square().node_count(), 0.0);
  const auto s = two_sensors();
  const auto t = elementary_fims(traj, s, DenseMatrix::identity(3));
  for (std::size_t k = 0; k < t.n_obs; ++k) EXPECT_EQ(t.block(k, 0).frobenius_norm(), 0.0);
}

TEST(ElementaryFims, Errors) {
  const auto s = two_sensors();
  const auto traj = random_trajectories(2, 3);
  const std::vector<std::size_t> bad{0, 3};
  EXPECT_THROW(elementary_fims(traj, s, bad, DenseMatrix::identity(2)), InstantOutOfRange);
  EXPECT_THROW(elementary_fims(traj, s, DenseMatrix::identity(3)), DimensionMismatch);
}

TEST(Combine, UnitAndZeroWeights) {
  testsupport::rng(31);
  const auto t = random_tensor(3, 4);
  for (std::size_t idx = 0; idx < t.size(); ++idx) {
    std::vector<double> w(t.size(), 0.0);
    w[idx] = 1.0;
    const auto c = combine(w, t);
    for (std::size_t q = 0; q < 9; ++q) EXPECT_EQ(c.matrix.data()[q], t[idx].data()[q]);
    EXPECT_EQ(c.weights, w);
  }
  const std::vector<double> zero(t.size(), 0.0);
  EXPECT_EQ(combined_matrix(zero, t).frobenius_norm(), 0.0);
  const std::vector<double> short_w(3, 1.0);
  EXPECT_THROW(combine(short_w, t), DimensionMismatch);
}

TEST(Combine, LinearAndPsd) {
  testsupport::rng(32);
  const auto t = random_tensor(4, 5);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> a(t.size()), b(t.size()), ab(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) {
      a[i] = testsupport::uniform(0, 1);
      b[i] = testsupport::uniform(0, 1);
      ab[i] = 2.0 * a[i] + 0.5 * b[i];
    }
    const DenseMatrix lhs = combined_matrix(ab, t);
    const DenseMatrix rhs = 2.0 * combined_matrix(a, t) + 0.5 * combined_matrix(b, t);
    EXPECT_LE((lhs - rhs).frobenius_norm(), 1e-12 * lhs.frobenius_norm());
    EXPECT_GE(min_eig(lhs), -1e-9 * lhs.frobenius_norm());
  }
}

TEST(Aggregate, SingleInstantAndZeroTensor) {
  testsupport::rng(41);
  const auto t = random_tensor(3, 1);
  const auto agg = aggregate_spatial(t);
  for (std::size_t k = 0; k < t.n_obs; ++k)
    for (std::size_t q = 0; q < 9; ++q) EXPECT_EQ(agg[k].data()[q], t.block(k, 0).data()[q]);

  FimTensor z = t;
  for (auto& b : z.blocks) b = DenseMatrix(3, 3);
  for (const auto& b : aggregate_spatial(z)) EXPECT_EQ(b.frobenius_norm(), 0.0);
}

TEST(Aggregate, SpatialWeightsMatchSpaceTimeWeights) {
  testsupport::rng(42);
  const auto t = random_tensor(4, 6);
  const auto s = spatial_tensor(t);
  EXPECT_EQ(s.size(), t.n_obs);
  for (int rep = 0; rep < 10; ++rep) {
    std::vector<double> ws(t.n_obs), wst(t.size());
    for (std::size_t k = 0; k < t.n_obs; ++k) {
      ws[k] = testsupport::uniform(0, 1);
      for (std::size_t l = 0; l < t.n_time; ++l) wst[t.index(k, l)] = ws[k];
    }
    const DenseMatrix a = combined_matrix(ws, s), b = combined_matrix(wst, t);
    EXPECT_LE((a - b).frobenius_norm(), 1e-12 * b.frobenius_norm());
  }
}

TEST(Cache, RoundTripIsExact) {
  testsupport::rng(51);
  auto t = random_tensor(3, 4);
  t.gramian = testsupport::random_spd(3);
  const auto path = temp_file("roundtrip.fim");
  save_fim_cache(path, t, "abc123", {0.01, 1.0});
  const auto u = load_fim_cache(path, "abc123");
  EXPECT_EQ(u.n_obs, t.n_obs);
  EXPECT_EQ(u.n_time, t.n_time);
  EXPECT_EQ(u.n_basis, t.n_basis);
  for (std::size_t i = 0; i < t.size(); ++i)
    for (std::size_t q = 0; q < 9; ++q) EXPECT_EQ(u[i].data()[q], t[i].data()[q]);
  for (std::size_t q = 0; q < 9; ++q) EXPECT_EQ(u.gramian.data()[q], t.gramian.data()[q]);

  std::ifstream in(path, std::ios::binary);
  const auto h = read_fim_header(in);
  EXPECT_EQ(h.hash, "abc123");
  EXPECT_EQ(h.alpha0, 0.01);
  EXPECT_EQ(std::filesystem::file_size(path), static_cast<std::uintmax_t>(in.tellg()) + (t.size() + 1) * 9 * sizeof(double));
}

TEST(Cache, HashMismatchAndCorruption) {
  testsupport::rng(52);
  const auto t = random_tensor(2, 2);
  const auto path = temp_file("mismatch.fim");
  save_fim_cache(path, t, "aaaa", {});
  EXPECT_THROW(load_fim_cache(path, "bbbb"), CacheMismatch);

  const auto size = std::filesystem::file_size(path);
  std::filesystem::resize_file(path, size - 8);
  EXPECT_THROW(load_fim_cache(path, "aaaa"), ParseError);

  const auto junk = temp_file("junk.fim");
  std::ofstream(junk) << "not json\n";
  EXPECT_THROW(load_fim_cache(junk, "aaaa"), ParseError);
}
