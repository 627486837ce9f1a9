#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>

#include "shapeoed/fim/cache.hpp"
#include "shapeoed/mesh/io.hpp"
#include "shapeoed/oed/report.hpp"
#include "shapeoed/pipeline/config.hpp"
#include "shapeoed/shape/graph.hpp"

namespace shapeoed::pipeline {

namespace fs = std::filesystem;

struct BasisData {
  shape::InterfaceCurve curve;
  std::vector<double> centers;
  std::vector<shape::BoundaryField> boundary;
  std::vector<shape::VelocityField> fields;
  numerics::DenseMatrix gramian;
};

struct StageTiming {
  std::string stage;
  double seconds = 0.0;
};

struct RunReport {
  std::string label;
  json config;
  std::string config_hash;
  std::string fim_hash;
  bool fim_cache_hit = false;
  std::vector<StageTiming> timings;
  std::optional<oed::OEDResult> result;
  std::vector<std::string> outputs;  // relative to the output directory
};

/// Lazily evaluated stages of one case; each stage runs its prerequisites.
class Pipeline {
public:
  Pipeline(Config cfg, fs::path out_dir, fs::path cache_dir = {}, std::ostream* log = nullptr)
      : cfg_(std::move(cfg)), out_(std::move(out_dir)), cache_(cache_dir.empty() ? out_ / "cache" : std::move(cache_dir)), log_(log) {}

  const Config& config() const { return cfg_; }
  const fs::path& out_dir() const { return out_; }

  const mesh::Mesh& mesh() {
    if (!mesh_) stage("mesh", [&] { mesh_ = std::make_unique<mesh::Mesh>(mesh::build_mesh(cfg_.geometry)); });
    return *mesh_;
  }

  const fem::HeatOperators& operators() {
    if (!ops_) {
      const mesh::Mesh& m = mesh();
      stage("assemble", [&] { ops_ = fem::assemble_heat(m, cfg_.physics); });
    }
    return *ops_;
  }

  const fem::Trajectory& forward() {
    if (!forward_) {
      const auto& ops = operators();
      stage("forward", [&] { forward_ = fem::solve_forward(ops, cfg_.time); });
    }
    return *forward_;
  }

  const BasisData& basis() {
    if (!basis_) {
      const mesh::Mesh& m = mesh();
      stage("basis", [&] {
        BasisData b;
        b.curve = shape::interface_from_mesh(m);
        const std::size_t nc = cfg_.basis.n_basis - 1;
        if (cfg_.basis.centers == CenterMode::Equidistant) {
          b.centers = shape::equidistant_centers(b.curve, nc);
        } else {
          if (cfg_.basis.seed_vertex >= b.curve.size())
            throw ConfigError("config /basis/seed_vertex: interface has only " + std::to_string(b.curve.size()) + " vertices");
          const auto dist = shape::graph_geodesics(b.curve);
          for (std::size_t v : shape::farthest_point_centers(dist, nc, cfg_.basis.seed_vertex)) b.centers.push_back(b.curve.arc[v]);
        }
        b.boundary = shape::gaussian_bump_basis(b.curve, cfg_.basis.n_basis, cfg_.basis.s, b.centers);
        const shape::VelocityExtender ext(m, b.curve, cfg_.basis.lame);
        for (const auto& f : b.boundary) b.fields.push_back(ext.extend(f));
        b.gramian = shape::gramian(m, b.fields);
        basis_ = std::move(b);
      });
    }
    return *basis_;
  }

  const std::vector<fem::Trajectory>& sensitivities() {
    if (!sens_) {
      const auto& ops = operators();
      const auto& u = forward();
      const auto& b = basis();
      stage("sensitivities", [&] {
        std::vector<fem::Trajectory> s;
        for (const auto& v : b.fields) s.push_back(fem::solve_sensitivity(ops, u, v.values));
        sens_ = std::move(s);
      });
    }
    return *sens_;
  }

  fs::path fim_cache_path() const { return cache_ / ("fim-" + fim_hash(cfg_) + ".cache"); }

  /// Elementary FIMs, read from the stage cache when its hash matches.
  const fim::FimTensor& fim() {
    if (fim_) return *fim_;
    const std::string hash = fim_hash(cfg_);
    const fs::path path = fim_cache_path();
    if (fs::exists(path)) {
      try {
        stage("fim-cache", [&] { fim_ = fim::load_fim_cache(path, hash); });
        cache_hit_ = true;
        note("fim: cache hit " + path.string());
        return *fim_;
      } catch (const Error& e) {
        note(std::string("fim: cache unusable, recomputing (") + e.what() + ")");
      }
    }
    const auto& s = sensitivities();
    const auto& b = basis();
    const mesh::Mesh& m = mesh();
    stage("fim", [&] {
      const auto sensors = fim::sensor_models(m, cfg_.noise);
      const auto inst = cfg_.instant_indices();
      fim_ = fim::elementary_fims(s, sensors, inst, b.gramian);
      fim::save_fim_cache(path, *fim_, hash, cfg_.noise);
    });
    note("fim: cache miss, wrote " + path.string());
    return *fim_;
  }

  bool fim_cache_hit() const { return cache_hit_; }

  /// Tensor seen by the optimizer (aggregated in spatial mode).
  const fim::FimTensor& design_tensor() {
    if (cfg_.design.mode == DesignMode::SpaceTime) return fim();
    if (!spatial_) spatial_ = fim::spatial_tensor(fim());
    return *spatial_;
  }

  oed::SolverOptions solver_options() const {
    oed::SolverOptions o;
    o.tol_outer = cfg_.design.tol_outer;
    o.max_outer = cfg_.design.max_outer;
    o.master.tol = cfg_.design.master_tol;
    o.master.max_iter = cfg_.design.master_max_iter;
    return o;
  }

  /// Optimized design, or the uniform design of mass C_w when optimize is off.
  const oed::OEDResult& design() {
    if (!result_) {
      const auto& t = design_tensor();
      stage("optimize", [&] {
        if (cfg_.design.optimize) {
          result_ = oed::simplicial_decomposition(t, cfg_.design.budget, solver_options());
        } else {
          const auto w = oed::uniform_design(t.size(), cfg_.design.budget);
          result_ = oed::evaluate_design(w, t, cfg_.design.budget);
        }
      });
    }
    return *result_;
  }

  // -------------------------------------------------------------------------
  // Outputs

  void write_mesh() {
    const mesh::Mesh& m = mesh();
    mesh::write_msh(m, path("mesh.msh").string());
    std::vector<mesh::VtkField> f;
    mesh::write_vtk(m, f, path("mesh.vtk").string());
    const auto q = mesh::mesh_quality(m);
    const json info = {{"nodes", m.node_count()},
                       {"elements", m.element_count()},
                       {"min_angle_deg", q.min_angle_deg},
                       {"max_edge", q.max_edge},
                       {"min_area", q.min_area},
                       {"problems", mesh::check_mesh(m)}};
    write_file("mesh.json", info.dump(2) + "\n");
  }

  void write_forward() {
    const auto& u = forward();
    const mesh::Mesh& m = mesh();
    std::vector<mesh::VtkField> f;
    for (std::size_t k = 0; k < u.size(); ++k) f.push_back({instant_name("u", k), u[k], 1});
    mesh::write_vtk(m, f, path("forward.vtk").string());
    // patch-mean temperature per sensor and instant
    const auto sensors = fim::sensor_models(m, cfg_.noise);
    std::ostringstream csv;
    csv << "k,sensor_id,l,t,mean_u\n";
    for (std::size_t k = 0; k < sensors.size(); ++k)
      for (std::size_t l = 0; l < u.size(); ++l) {
        const numerics::Vector d = sensors[k].restrict(u[l]);
        const numerics::Vector one(d.size(), 1.0);
        csv << k << ',' << m.sensor_ids[k] << ',' << l << ',' << mesh::format_double(u.times[l]) << ','
            << mesh::format_double(sensors[k].inner(d, one) / sensors[k].inner(one, one)) << '\n';
      }
    write_file("forward_sensors.csv", csv.str());
    add("forward.vtk");
  }

  void write_sensitivities() {
    const auto& s = sensitivities();
    const auto& b = basis();
    const mesh::Mesh& m = mesh();
    std::vector<mesh::VtkField> f;
    for (std::size_t i = 0; i < b.fields.size(); ++i) f.push_back({"V_" + std::to_string(i), flatten(b.fields[i].values), 2});
    for (std::size_t i = 0; i < s.size(); ++i) f.push_back({"du_" + std::to_string(i) + "_T", s[i].states.back(), 1});
    mesh::write_vtk(m, f, path("sensitivities.vtk").string());
    add("sensitivities.vtk");
    std::ostringstream c;
    c << "i,center_arc\n";
    for (std::size_t i = 0; i < b.centers.size(); ++i) c << i << ',' << mesh::format_double(b.centers[i]) << '\n';
    write_file("centers.csv", c.str());
    write_file("gramian.csv", matrix_csv(b.gramian));
  }

  void write_fim() {
    const auto& t = fim();
    std::ostringstream c;
    c << "k,l,trace\n";
    for (std::size_t k = 0; k < t.n_obs; ++k)
      for (std::size_t l = 0; l < t.n_time; ++l) c << k << ',' << l << ',' << mesh::format_double(t.block(k, l).trace()) << '\n';
    write_file("fim_traces.csv", c.str());
    write_file("gramian.csv", matrix_csv(t.gramian));
  }

  void write_design() {
    const auto& r = design();
    const auto& t = design_tensor();
    json j = oed::to_json(r);
    j["label"] = cfg_.label;
    j["mode"] = cfg_.design.mode == DesignMode::Spatial ? "spatial" : "space-time";
    j["optimized"] = cfg_.design.optimize;
    if (std::isfinite(r.phi)) {
      const auto rounded = oed::round_design(r.w, cfg_.design.budget);
      j["rounded_weights"] = rounded;
      j["rounded_phi_a"] = oed::detail::number(oed::a_criterion(rounded, t));
    }
    write_file("result.json", j.dump(2) + "\n");
    std::ostringstream w, h, e, o;
    oed::write_weights_csv(w, r);
    oed::write_history_csv(h, r);
    oed::write_eigenvalues_csv(e, r);
    write_file("weights.csv", w.str());
    write_file("history.csv", h.str());
    write_file("eigenvalues.csv", e.str());
    if (std::isfinite(r.phi)) {
      oed::write_optimality_csv(o, r, oed::gradient(r.w, t));
      write_file("optimality.csv", o.str());
    }
  }

  /// Eigen-analysis of (Υ(w), B) for the given weights: spectrum and the
  /// velocity fields of the generalized eigenvectors.
  void write_analysis(std::span<const double> w) {
    const auto& t = design_tensor();
    const oed::OEDResult r = oed::evaluate_design(w, t, cfg_.design.budget);
    if (!std::isfinite(r.phi)) throw SingularInformation("analyze: information matrix of the given design is singular");
    const auto& b = basis();
    std::vector<mesh::VtkField> f;
    for (std::size_t i = 0; i < r.eigenvalues.size(); ++i) {
      std::vector<mesh::Point2> v(mesh().node_count(), {0, 0});
      for (std::size_t j = 0; j < b.fields.size(); ++j)
        for (std::size_t n = 0; n < v.size(); ++n) v[n] = v[n] + r.eigenvectors(j, i) * b.fields[j].values[n];
      f.push_back({"mode_" + std::to_string(i), flatten(v), 2});
    }
    mesh::write_vtk(mesh(), f, path("modes.vtk").string());
    add("modes.vtk");
    std::ostringstream e;
    oed::write_eigenvalues_csv(e, r);
    write_file("eigenvalues.csv", e.str());
    std::vector<double> inv;
    for (double l : r.eigenvalues) inv.push_back(1.0 / l);
    const double gap = inv.size() >= 2 ? inv[0] / inv[1] : 0.0;
    const json j = {{"label", cfg_.label}, {"phi_a", r.phi}, {"eigenvalues", r.eigenvalues}, {"reciprocal_eigenvalues", inv},
                    {"largest_reciprocal_gap", gap}};
    write_file("analysis.json", j.dump(2) + "\n");
  }

  RunReport report() {
    RunReport rep;
    rep.label = cfg_.label;
    rep.config = to_json(cfg_);
    rep.config_hash = config_hash(cfg_);
    rep.fim_hash = fim_hash(cfg_);
    rep.fim_cache_hit = cache_hit_;
    rep.timings = timings_;
    if (result_) rep.result = *result_;
    rep.outputs = outputs_;
    return rep;
  }

  /// report.json carries only reproducible content; timings and cache
  /// status go to run.log.
  void write_report() {
    const RunReport rep = report();
    std::ostringstream logtext;
    for (const auto& t : timings_) logtext << "stage " << t.stage << " " << t.seconds << " s\n";
    logtext << "fim cache " << (cache_hit_ ? "hit" : "miss") << "\n";
    write_file("run.log", logtext.str());
    json j = {{"label", rep.label}, {"config", rep.config}, {"config_hash", rep.config_hash}, {"fim_hash", rep.fim_hash}};
    if (rep.result) {
      std::vector<double> inv;
      for (double l : rep.result->eigenvalues) inv.push_back(1.0 / l);
      j["summary"] = {{"phi_a", oed::detail::number(rep.result->phi)},
                      {"converged", rep.result->converged},
                      {"xi", rep.result->xi},
                      {"max_violation", rep.result->max_violation()},
                      {"weights_zero", rep.result->counts.zero},
                      {"weights_fractional", rep.result->counts.fractional},
                      {"weights_one", rep.result->counts.one},
                      {"reciprocal_eigenvalues", inv}};
    }
    std::vector<std::string> files = outputs_;
    files.push_back("report.json");
    j["outputs"] = files;
    write_file("report.json", j.dump(2) + "\n");
  }

  /// Every stage and output.
  RunReport run_all() {
    write_mesh();
    write_forward();
    write_sensitivities();
    write_fim();
    write_design();
    if (std::isfinite(design().phi)) write_analysis(design().w);
    write_report();
    return report();
  }

  const std::vector<StageTiming>& timings() const { return timings_; }
  const std::vector<std::string>& outputs() const { return outputs_; }

private:
  template <class F>
  void stage(const std::string& name, F&& f) {
    const auto t0 = std::chrono::steady_clock::now();
    try {
      f();
    } catch (const Error& e) {
      throw_error(e.kind(), "stage " + name + ": " + e.what());
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    timings_.push_back({name, s});
    note("stage " + name + " done in " + std::to_string(s) + " s");
  }

  void note(const std::string& s) const {
    if (log_) *log_ << "[" << cfg_.label << "] " << s << "\n";
  }

  fs::path path(const std::string& name) {
    fs::create_directories(out_);
    add(name);
    return out_ / name;
  }

  void add(const std::string& name) {
    if (std::find(outputs_.begin(), outputs_.end(), name) == outputs_.end()) outputs_.push_back(name);
  }

  void write_file(const std::string& name, const std::string& text) { oed::write_text(path(name), text); }

  static std::string instant_name(const std::string& prefix, std::size_t k) {
    std::string s = std::to_string(k);
    return prefix + "_" + std::string(s.size() < 3 ? 3 - s.size() : 0, '0') + s;
  }

  static std::vector<double> flatten(std::span<const mesh::Point2> v) {
    std::vector<double> f;
    f.reserve(2 * v.size());
    for (const auto& p : v) {
      f.push_back(p.x);
      f.push_back(p.y);
    }
    return f;
  }

  static std::string matrix_csv(const numerics::DenseMatrix& a) {
    std::ostringstream s;
    for (std::size_t i = 0; i < a.rows(); ++i) {
      for (std::size_t j = 0; j < a.cols(); ++j) s << (j ? "," : "") << mesh::format_double(a(i, j));
      s << '\n';
    }
    return s.str();
  }

  Config cfg_;
  fs::path out_, cache_;
  std::ostream* log_;
  std::unique_ptr<mesh::Mesh> mesh_;
  std::optional<fem::HeatOperators> ops_;
  std::optional<fem::Trajectory> forward_;
  std::optional<BasisData> basis_;
  std::optional<std::vector<fem::Trajectory>> sens_;
  std::optional<fim::FimTensor> fim_;
  std::optional<fim::FimTensor> spatial_;
  std::optional<oed::OEDResult> result_;
  bool cache_hit_ = false;
  std::vector<StageTiming> timings_;
  std::vector<std::string> outputs_;
};

// ---------------------------------------------------------------------------
// Case comparison

struct CaseRow {
  std::string label;
  bool optimized = true;
  double phi = oed::kInfinity;
  std::vector<double> reciprocal;  // Λ_i⁻¹ ascending
  oed::WeightCounts counts;
};

/// Runs every case (optimized or uniform per its config) and tabulates Φ_A
/// and the reciprocal spectrum. Outputs of case c go to out/c/.
inline std::vector<CaseRow> compare_cases(std::span<const Config> cases, const fs::path& out, const fs::path& cache = {},
                                          std::ostream* log = nullptr) {
  if (cases.empty()) throw ConfigError("compare: no cases");
  std::set<std::string> labels;
  for (const auto& c : cases) {
    if (c.basis.n_basis != cases[0].basis.n_basis) throw ConfigError("compare: cases differ in basis size (n_basis)");
    if (!labels.insert(c.label).second) throw ConfigError("compare: duplicate case label '" + c.label + "'");
  }
  std::vector<CaseRow> rows;
  for (const auto& c : cases) {
    Pipeline p(c, out / c.label, cache.empty() ? out / "cache" : cache, log);
    p.write_design();
    p.write_report();
    const auto& r = p.design();
    CaseRow row{c.label, c.design.optimize, r.phi, {}, r.counts};
    for (double l : r.eigenvalues) row.reciprocal.push_back(1.0 / l);
    std::sort(row.reciprocal.begin(), row.reciprocal.end());
    rows.push_back(std::move(row));
  }
  return rows;
}

inline std::string comparison_csv(std::span<const CaseRow> rows) {
  std::ostringstream s;
  const std::size_t n = rows.empty() ? 0 : rows[0].reciprocal.size();
  s << "label,design,phi_a";
  for (std::size_t i = 0; i < n; ++i) s << ",inv_lambda_" << i + 1;
  s << '\n';
  for (const auto& r : rows) {
    s << r.label << ',' << (r.optimized ? "optimized" : "uniform") << ',' << mesh::format_double(r.phi);
    for (std::size_t i = 0; i < n; ++i) s << ',' << (i < r.reciprocal.size() ? mesh::format_double(r.reciprocal[i]) : "");
    s << '\n';
  }
  return s.str();
}

} // namespace shapeoed::pipeline
