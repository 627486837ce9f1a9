// Runs the stages by hand on a coarse mesh: mesh, forward solve, bump basis,
// sensitivities, elementary FIMs, A-optimal design.

#include <cstdio>

#include "shapeoed/fem/heat.hpp"
#include "shapeoed/fim/sensor.hpp"
#include "shapeoed/fim/tensor.hpp"
#include "shapeoed/mesh/mesh.hpp"
#include "shapeoed/oed/solver.hpp"
#include "shapeoed/shape/curve.hpp"
#include "shapeoed/shape/extension.hpp"

using namespace shapeoed;

int main() {
  mesh::GeometrySpec geom = mesh::default_geometry();
  geom.h = 0.06;
  const mesh::Mesh m = mesh::build_mesh(geom);
  std::printf("mesh: %zu nodes, %zu triangles\n", m.node_count(), m.element_count());

  fem::HeatPhysics physics;
  physics.beta["bottom_left"] = 10.0;
  const fem::TimeGrid grid{10.0, 10};
  const auto ops = fem::assemble_heat(m, physics);
  const auto u = fem::solve_forward(ops, grid);

  // 4 bumps plus the constant normal field
  const auto curve = shape::interface_from_mesh(m);
  const auto centers = shape::equidistant_centers(curve, 4);
  const auto boundary = shape::gaussian_bump_basis(curve, 5, 100.0, centers);
  const shape::VelocityExtender ext(m, curve, shape::Lame{});
  std::vector<shape::VelocityField> fields;
  for (const auto& f : boundary) fields.push_back(ext.extend(f));

  std::vector<fem::Trajectory> sens;
  for (const auto& v : fields) sens.push_back(fem::solve_sensitivity(ops, u, v.values));

  std::vector<std::size_t> instants(grid.instants());
  for (std::size_t i = 0; i < instants.size(); ++i) instants[i] = i;
  const auto tensor = fim::elementary_fims(sens, fim::sensor_models(m, fim::NoiseParams{}), instants, shape::gramian(m, fields));

  const auto r = oed::simplicial_decomposition(tensor, 5.0);
  std::printf("phi_a: uniform %.6g, optimized %.6g after %zu outer iterations\n", r.initial_phi, r.phi, r.outer_iterations);
  for (std::size_t k = 0; k < r.n_obs; ++k)
    for (std::size_t l = 0; l < r.n_time; ++l)
      if (r.w[k * r.n_time + l] > 1e-6) std::printf("  sensor %zu, instant %zu: w = %.4f\n", k, l, r.w[k * r.n_time + l]);
}
