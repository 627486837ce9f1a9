#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "shapeoed/errors.hpp"
#include "shapeoed/fem/heat.hpp"
#include "shapeoed/fim/sensor.hpp"
#include "shapeoed/hash.hpp"
#include "shapeoed/mesh/mesh.hpp"
#include "shapeoed/shape/extension.hpp"

namespace shapeoed::pipeline {

using nlohmann::json;

enum class CenterMode { Equidistant, FarthestPoint };
enum class DesignMode { SpaceTime, Spatial };

struct BasisConfig {
  std::size_t n_basis = 9;
  double s = 100.0;
  CenterMode centers = CenterMode::Equidistant;
  /// Interface vertex that seeds farthest-point selection.
  std::size_t seed_vertex = 0;
  shape::Lame lame{};
};

struct DesignConfig {
  double budget = 10.0;
  DesignMode mode = DesignMode::SpaceTime;
  bool optimize = true;
  /// Indices into t_0 … t_N; empty means all.
  std::vector<std::size_t> instants;
  double tol_outer = 1e-3;
  std::size_t max_outer = 500;
  double master_tol = 1e-4;
  std::size_t master_max_iter = 200000;
};

struct Config {
  std::string label = "default";
  mesh::GeometrySpec geometry = mesh::default_geometry();
  fem::HeatPhysics physics{};
  fem::TimeGrid time{};
  BasisConfig basis{};
  fim::NoiseParams noise{};
  DesignConfig design{};
  std::string output_dir = "out";
  std::uint64_t seed = 0;

  std::size_t n_time() const { return design.instants.empty() ? time.instants() : design.instants.size(); }
  std::vector<std::size_t> instant_indices() const {
    if (!design.instants.empty()) return design.instants;
    std::vector<std::size_t> all(time.instants());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    return all;
  }
};

namespace detail {

/// JSON object reader that tracks its path and rejects unknown keys.
class Reader {
public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail("expected an object");
  }
  ~Reader() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) throw ConfigError("config " + at(k) + ": unknown key");
  }

  bool has(const std::string& k) {
    seen_.insert(k);
    return j_.contains(k);
  }
  const json& get(const std::string& k) {
    seen_.insert(k);
    return j_.at(k);
  }
  std::string at(const std::string& k) const { return path_ + "/" + k; }
  [[noreturn]] void fail(const std::string& msg) const { throw ConfigError("config " + (path_.empty() ? "/" : path_) + ": " + msg); }
  [[noreturn]] void fail(const std::string& k, const std::string& msg) const { throw ConfigError("config " + at(k) + ": " + msg); }

  double number(const std::string& k, double def, bool positive = false, bool nonneg = false) {
    if (!has(k)) return def;
    const json& v = get(k);
    if (!v.is_number()) fail(k, "expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) fail(k, "expected a finite number");
    if (positive && !(x > 0.0)) fail(k, "must be > 0");
    if (nonneg && !(x >= 0.0)) fail(k, "must be ≥ 0");
    return x;
  }
  std::size_t count(const std::string& k, std::size_t def, std::size_t min = 0) {
    if (!has(k)) return def;
    const json& v = get(k);
    if (!v.is_number_integer() || v.get<long long>() < 0) fail(k, "expected a nonnegative integer");
    const auto x = v.get<std::size_t>();
    if (x < min) fail(k, "must be ≥ " + std::to_string(min));
    return x;
  }
  std::string string(const std::string& k, const std::string& def) {
    if (!has(k)) return def;
    const json& v = get(k);
    if (!v.is_string()) fail(k, "expected a string");
    return v.get<std::string>();
  }
  bool boolean(const std::string& k, bool def) {
    if (!has(k)) return def;
    const json& v = get(k);
    if (!v.is_boolean()) fail(k, "expected true or false");
    return v.get<bool>();
  }

private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

inline mesh::Point2 point(const json& v, const std::string& path) {
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
    throw ConfigError("config " + path + ": expected [x, y]");
  return {v[0].get<double>(), v[1].get<double>()};
}

inline std::vector<mesh::Point2> points(const json& v, const std::string& path) {
  if (!v.is_array()) throw ConfigError("config " + path + ": expected an array of [x, y]");
  std::vector<mesh::Point2> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(point(v[i], path + "/" + std::to_string(i)));
  return out;
}

inline mesh::Box box(const json& v, const std::string& path) {
  Reader r(v, path);
  if (!r.has("lo") || !r.has("hi")) r.fail("box needs lo and hi");
  const mesh::Box b{point(r.get("lo"), r.at("lo")), point(r.get("hi"), r.at("hi"))};
  if (!(b.lo.x < b.hi.x && b.lo.y < b.hi.y)) r.fail("box needs lo < hi componentwise");
  return b;
}

inline mesh::Side side(const json& v, const std::string& path) {
  const std::string s = v.is_string() ? v.get<std::string>() : "";
  for (mesh::Side x : {mesh::Side::Bottom, mesh::Side::Right, mesh::Side::Top, mesh::Side::Left})
    if (s == mesh::side_name(x)) return x;
  throw ConfigError("config " + path + ": expected one of bottom, right, top, left");
}

inline json point_json(mesh::Point2 p) { return json::array({p.x, p.y}); }

inline json points_json(std::span<const mesh::Point2> p) {
  json a = json::array();
  for (const auto& q : p) a.push_back(point_json(q));
  return a;
}

inline json box_json(const mesh::Box& b) { return {{"lo", point_json(b.lo)}, {"hi", point_json(b.hi)}}; }

inline mesh::GeometrySpec parse_geometry(const json& j, const std::string& path) {
  Reader r(j, path);
  mesh::GeometrySpec g = mesh::default_geometry();
  g.h = r.number("h", g.h, true);
  g.min_angle_deg = r.number("min_angle_deg", g.min_angle_deg, true);
  if (g.min_angle_deg > 30.0) r.fail("min_angle_deg", "must be ≤ 30 for the refinement to terminate");
  g.max_nodes = r.count("max_nodes", g.max_nodes, 3);
  if (r.has("holdall")) g.holdall = box(r.get("holdall"), r.at("holdall"));
  if (r.has("inclusion")) {
    Reader inc(r.get("inclusion"), r.at("inclusion"));
    const int kinds = inc.has("bspline") + inc.has("polygon") + inc.has("circle");
    if (kinds != 1) inc.fail("give exactly one of bspline, polygon, circle");
    if (inc.has("bspline")) {
      const auto controls = points(inc.get("bspline"), inc.at("bspline"));
      if (controls.size() < 4) inc.fail("bspline", "need at least 4 control points");
      g.inclusion = mesh::sample_closed_bspline(controls, inc.count("samples", 64, 8));
    } else if (inc.has("polygon")) {
      g.inclusion = points(inc.get("polygon"), inc.at("polygon"));
      if (g.inclusion.size() < 3) inc.fail("polygon", "need at least 3 vertices");
    } else {
      Reader c(inc.get("circle"), inc.at("circle"));
      if (!c.has("center")) c.fail("circle needs a center");
      const mesh::Point2 ctr = point(c.get("center"), c.at("center"));
      g.inclusion = mesh::regular_polygon(ctr, c.number("radius", 0.1, true), c.count("vertices", 64, 3));
    }
  }
  if (r.has("sensors")) {
    const json& s = r.get("sensors");
    if (s.is_string()) {
      if (s.get<std::string>() != "default") r.fail("sensors", "expected \"default\" or an array");
      g.sensors = mesh::default_sensor_layout();
    } else if (s.is_array()) {
      g.sensors.clear();
      std::set<int> ids;
      for (std::size_t i = 0; i < s.size(); ++i) {
        const std::string p = r.at("sensors") + "/" + std::to_string(i);
        Reader sr(s[i], p);
        if (!sr.has("id") || !sr.get("id").is_number_integer()) sr.fail("sensor needs an integer id");
        const int id = sr.get("id").get<int>();
        if (!ids.insert(id).second) sr.fail("id", "duplicate sensor id " + std::to_string(id));
        if (!sr.has("lo") || !sr.has("hi")) sr.fail("sensor needs lo and hi");
        const mesh::Box b{point(sr.get("lo"), sr.at("lo")), point(sr.get("hi"), sr.at("hi"))};
        if (!(b.lo.x < b.hi.x && b.lo.y < b.hi.y)) sr.fail("sensor box needs lo < hi componentwise");
        g.sensors.push_back({id, b});
      }
    } else {
      r.fail("sensors", "expected \"default\" or an array");
    }
  }
  if (r.has("dirichlet")) {
    const json& d = r.get("dirichlet");
    if (!d.is_array() || d.empty()) r.fail("dirichlet", "expected a nonempty array of sides");
    g.dirichlet_sides.clear();
    for (std::size_t i = 0; i < d.size(); ++i) g.dirichlet_sides.push_back(side(d[i], r.at("dirichlet") + "/" + std::to_string(i)));
  }
  if (r.has("robin")) {
    const json& rb = r.get("robin");
    if (!rb.is_array()) r.fail("robin", "expected an array");
    g.robin_pieces.clear();
    std::set<std::string> names{"default"};
    for (std::size_t i = 0; i < rb.size(); ++i) {
      const std::string p = r.at("robin") + "/" + std::to_string(i);
      Reader pr(rb[i], p);
      mesh::RobinPiece piece;
      piece.name = pr.string("name", "");
      if (piece.name.empty()) pr.fail("name", "Robin piece needs a name");
      if (!names.insert(piece.name).second) pr.fail("name", "duplicate or reserved name '" + piece.name + "'");
      if (!pr.has("side")) pr.fail("Robin piece needs a side");
      piece.side = side(pr.get("side"), pr.at("side"));
      piece.from = pr.number("from", 0.0);
      piece.to = pr.number("to", 1.0);
      if (!(0.0 <= piece.from && piece.from < piece.to && piece.to <= 1.0)) pr.fail("need 0 ≤ from < to ≤ 1");
      g.robin_pieces.push_back(piece);
    }
  }
  try {
    g.validate();
  } catch (const Error& e) {
    r.fail(e.what());
  }
  return g;
}

inline json geometry_json(const mesh::GeometrySpec& g) {
  json sensors = json::array();
  for (const auto& s : g.sensors) sensors.push_back({{"id", s.id}, {"lo", point_json(s.box.lo)}, {"hi", point_json(s.box.hi)}});
  json dir = json::array();
  for (auto s : g.dirichlet_sides) dir.push_back(mesh::side_name(s));
  json robin = json::array();
  for (const auto& p : g.robin_pieces) robin.push_back({{"name", p.name}, {"side", mesh::side_name(p.side)}, {"from", p.from}, {"to", p.to}});
  json j = {{"h", g.h},
            {"min_angle_deg", g.min_angle_deg},
            {"max_nodes", g.max_nodes},
            {"holdall", box_json(g.holdall)},
            {"sensors", sensors},
            {"dirichlet", dir},
            {"robin", robin}};
  if (!g.inclusion.empty()) j["inclusion"] = {{"polygon", points_json(g.inclusion)}};
  return j;
}

} // namespace detail

/// Parses one resolved case (no "cases" key).
inline Config parse_config(const json& j) {
  using detail::Reader;
  Config c;
  Reader r(j, "");
  c.label = r.string("label", c.label);
  if (c.label.empty() || c.label.find_first_of("/\\ ") != std::string::npos) r.fail("label", "must be nonempty without spaces or slashes");
  c.output_dir = r.string("output_dir", c.output_dir);
  if (r.has("seed")) {
    const json& s = r.get("seed");
    if (!s.is_number_unsigned()) r.fail("seed", "expected a nonnegative integer");
    c.seed = s.get<std::uint64_t>();
  }
  if (r.has("geometry")) c.geometry = detail::parse_geometry(r.get("geometry"), "/geometry");

  if (r.has("physics")) {
    Reader p(r.get("physics"), "/physics");
    c.physics.kappa_bulk = p.number("kappa_bulk", c.physics.kappa_bulk, true);
    c.physics.kappa_inc = p.number("kappa_inc", c.physics.kappa_inc, true);
    c.physics.u_D = p.number("u_D", c.physics.u_D);
    c.time.T = p.number("T", c.time.T, true);
    c.time.steps = p.count("steps", c.time.steps, 1);
    if (p.has("beta")) {
      const json& b = p.get("beta");
      if (!b.is_object()) p.fail("beta", "expected an object of piece name → coefficient");
      for (const auto& [name, v] : b.items()) {
        const std::string path = p.at("beta") + "/" + name;
        if (!v.is_number() || !(v.get<double>() >= 0.0)) throw ConfigError("config " + path + ": expected a number ≥ 0");
        bool known = name == "default";
        for (const auto& piece : c.geometry.robin_pieces) known = known || piece.name == name;
        if (!known) throw ConfigError("config " + path + ": no Robin piece named '" + name + "'");
        c.physics.beta[name] = v.get<double>();
      }
    }
  }

  if (r.has("basis")) {
    Reader b(r.get("basis"), "/basis");
    c.basis.n_basis = b.count("n_basis", c.basis.n_basis, 1);
    c.basis.s = b.number("s", c.basis.s, true);
    const std::string mode = b.string("centers", "equidistant");
    if (mode == "equidistant") c.basis.centers = CenterMode::Equidistant;
    else if (mode == "farthest-point") c.basis.centers = CenterMode::FarthestPoint;
    else b.fail("centers", "expected \"equidistant\" or \"farthest-point\"");
    c.basis.seed_vertex = b.count("seed_vertex", c.basis.seed_vertex);
    c.basis.lame.lambda = b.number("lambda", c.basis.lame.lambda, false, true);
    c.basis.lame.mu = b.number("mu", c.basis.lame.mu, true);
  }

  if (r.has("noise")) {
    Reader n(r.get("noise"), "/noise");
    c.noise.alpha0 = n.number("alpha0", c.noise.alpha0, false, true);
    c.noise.alpha1 = n.number("alpha1", c.noise.alpha1, true);
  }

  if (r.has("design")) {
    Reader d(r.get("design"), "/design");
    c.design.budget = d.number("budget", c.design.budget, true);
    if (c.design.budget != std::floor(c.design.budget)) throw NonIntegerBudget("config /design/budget: must be an integer");
    const std::string mode = d.string("mode", "space-time");
    if (mode == "space-time") c.design.mode = DesignMode::SpaceTime;
    else if (mode == "spatial") c.design.mode = DesignMode::Spatial;
    else d.fail("mode", "expected \"space-time\" or \"spatial\"");
    c.design.optimize = d.boolean("optimize", c.design.optimize);
    if (d.has("instants")) {
      const json& ins = d.get("instants");
      if (ins.is_string() && ins.get<std::string>() == "all") {
        c.design.instants.clear();
      } else if (ins.is_array() && !ins.empty()) {
        std::set<std::size_t> seen;
        for (std::size_t i = 0; i < ins.size(); ++i) {
          const std::string path = d.at("instants") + "/" + std::to_string(i);
          if (!ins[i].is_number_integer() || ins[i].get<long long>() < 0 ||
              ins[i].get<std::size_t>() > c.time.steps)
            throw ConfigError("config " + path + ": expected an instant index in [0, " + std::to_string(c.time.steps) + "]");
          if (!seen.insert(ins[i].get<std::size_t>()).second) throw ConfigError("config " + path + ": duplicate instant");
          c.design.instants.push_back(ins[i].get<std::size_t>());
        }
      } else {
        d.fail("instants", "expected \"all\" or a nonempty array of indices");
      }
    }
    c.design.tol_outer = d.number("tol_outer", c.design.tol_outer, true);
    c.design.max_outer = d.count("max_outer", c.design.max_outer, 1);
    c.design.master_tol = d.number("master_tol", c.design.master_tol, true);
    c.design.master_max_iter = d.count("master_max_iter", c.design.master_max_iter, 1);
  }

  if (c.basis.n_basis < 2) r.fail("basis", "n_basis must be ≥ 2 (bumps plus the constant field)");
  if (c.geometry.inclusion.empty()) r.fail("geometry", "an inclusion is required");
  if (c.geometry.sensors.empty()) r.fail("geometry", "at least one sensor is required");
  const std::size_t n_weights = c.design.mode == DesignMode::Spatial ? c.geometry.sensors.size() : c.geometry.sensors.size() * c.n_time();
  if (c.design.budget >= static_cast<double>(n_weights))
    throw ConfigError("config /design/budget: must be < the number of weights (" + std::to_string(n_weights) + ")");
  return c;
}

/// Normalized form: every default filled in, geometry resolved to polygons.
inline json to_json(const Config& c) {
  json beta = json::object();
  for (const auto& [k, v] : c.physics.beta) beta[k] = v;
  json inst = c.design.instants.empty() ? json("all") : json(c.design.instants);
  return {{"label", c.label},
          {"output_dir", c.output_dir},
          {"seed", c.seed},
          {"geometry", detail::geometry_json(c.geometry)},
          {"physics",
           {{"kappa_bulk", c.physics.kappa_bulk},
            {"kappa_inc", c.physics.kappa_inc},
            {"u_D", c.physics.u_D},
            {"T", c.time.T},
            {"steps", c.time.steps},
            {"beta", beta}}},
          {"basis",
           {{"n_basis", c.basis.n_basis},
            {"s", c.basis.s},
            {"centers", c.basis.centers == CenterMode::Equidistant ? "equidistant" : "farthest-point"},
            {"seed_vertex", c.basis.seed_vertex},
            {"lambda", c.basis.lame.lambda},
            {"mu", c.basis.lame.mu}}},
          {"noise", {{"alpha0", c.noise.alpha0}, {"alpha1", c.noise.alpha1}}},
          {"design",
           {{"budget", c.design.budget},
            {"mode", c.design.mode == DesignMode::Spatial ? "spatial" : "space-time"},
            {"optimize", c.design.optimize},
            {"instants", inst},
            {"tol_outer", c.design.tol_outer},
            {"max_outer", c.design.max_outer},
            {"master_tol", c.design.master_tol},
            {"master_max_iter", c.design.master_max_iter}}}};
}

/// Hash of everything that determines the FIM tensor.
inline std::string fim_hash(const Config& c) {
  json j = to_json(c);
  json key = {{"geometry", j["geometry"]}, {"physics", j["physics"]}, {"basis", j["basis"]}, {"noise", j["noise"]},
              {"instants", j["design"]["instants"]}};
  return hex64(fnv1a64(key.dump()));
}

/// Hash of the whole normalized config.
inline std::string config_hash(const Config& c) { return hex64(fnv1a64(to_json(c).dump())); }

// ---------------------------------------------------------------------------
// Files and cases

inline json read_json_file(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw ConfigError("config: cannot open " + p.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + p.string() + ": " + e.what());
  }
}

/// Labels of the "cases" array, or the single top-level label.
inline std::vector<std::string> case_labels(const json& raw) {
  if (!raw.is_object()) throw ConfigError("config /: expected an object");
  if (!raw.contains("cases")) return {raw.value("label", std::string("default"))};
  const json& cs = raw.at("cases");
  if (!cs.is_array() || cs.empty()) throw ConfigError("config /cases: expected a nonempty array");
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (std::size_t i = 0; i < cs.size(); ++i) {
    if (!cs[i].is_object() || !cs[i].contains("label") || !cs[i]["label"].is_string())
      throw ConfigError("config /cases/" + std::to_string(i) + ": each case needs a string label");
    const std::string l = cs[i]["label"].get<std::string>();
    if (!seen.insert(l).second) throw ConfigError("config /cases/" + std::to_string(i) + "/label: duplicate label '" + l + "'");
    out.push_back(l);
  }
  return out;
}

/// The base config with the named case merged on top (JSON merge patch).
/// An empty label picks the first case.
inline Config resolve_case(const json& raw, const std::string& label = "") {
  const auto labels = case_labels(raw);
  if (!raw.contains("cases")) {
    if (!label.empty() && label != labels[0]) throw ConfigError("config: no case labelled '" + label + "'");
    return parse_config(raw);
  }
  const std::string want = label.empty() ? labels[0] : label;
  json base = raw;
  base.erase("cases");
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == want) {
      json merged = base;
      merged.merge_patch(raw.at("cases")[i]);
      try {
        return parse_config(merged);
      } catch (const Error& e) {
        throw_error(e.kind(), std::string(e.what()) + " (case '" + want + "')");
      }
    }
  throw ConfigError("config: no case labelled '" + want + "'");
}

inline std::vector<Config> resolve_all_cases(const json& raw) {
  std::vector<Config> out;
  for (const auto& l : case_labels(raw)) out.push_back(resolve_case(raw, l));
  return out;
}

} // namespace shapeoed::pipeline
