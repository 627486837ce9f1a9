#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>

#include <json.hpp>

#include "shapeoed/errors.hpp"
#include "shapeoed/mesh/io.hpp"
#include "shapeoed/oed/solver.hpp"

namespace shapeoed::oed {

namespace detail {

inline nlohmann::json number(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

inline nlohmann::json numbers(std::span<const double> v) {
  nlohmann::json a = nlohmann::json::array();
  for (double x : v) a.push_back(number(x));
  return a;
}

} // namespace detail

inline nlohmann::json to_json(const OEDResult& r) {
  std::vector<double> reciprocal;
  for (double l : r.eigenvalues) reciprocal.push_back(1.0 / l);
  nlohmann::json vectors = nlohmann::json::array();
  for (std::size_t j = 0; j < r.eigenvectors.cols(); ++j) {
    std::vector<double> col(r.eigenvectors.rows());
    for (std::size_t i = 0; i < col.size(); ++i) col[i] = r.eigenvectors(i, j);
    vectors.push_back(detail::numbers(col));
  }
  return {{"n_obs", r.n_obs},
          {"n_time", r.n_time},
          {"budget", r.c_w},
          {"phi_a", detail::number(r.phi)},
          {"initial_phi_a", detail::number(r.initial_phi)},
          {"converged", r.converged},
          {"outer_iterations", r.outer_iterations},
          {"master_iterations", r.master_iterations},
          {"active_vertices", r.active_vertices},
          {"weights", detail::numbers(r.w)},
          {"phi_history", detail::numbers(r.phi_history)},
          {"change_history", detail::numbers(r.change_history)},
          {"xi", detail::number(r.xi)},
          {"max_violation", detail::number(r.max_violation())},
          {"violations", detail::numbers(r.violations)},
          {"eigenvalues", detail::numbers(r.eigenvalues)},
          {"reciprocal_eigenvalues", detail::numbers(reciprocal)},
          {"eigenvectors", vectors},
          {"counts", {{"zero", r.counts.zero}, {"fractional", r.counts.fractional}, {"one", r.counts.one}}}};
}

/// k, ℓ, w in (k, ℓ) row-major order.
inline void write_weights_csv(std::ostream& out, const OEDResult& r) {
  out << "k,l,w\n";
  const std::size_t nt = std::max<std::size_t>(r.n_time, 1);
  for (std::size_t i = 0; i < r.w.size(); ++i) out << i / nt << ',' << i % nt << ',' << mesh::format_double(r.w[i]) << '\n';
}

inline void write_eigenvalues_csv(std::ostream& out, const OEDResult& r) {
  out << "i,lambda,inverse_lambda\n";
  for (std::size_t i = 0; i < r.eigenvalues.size(); ++i)
    out << i << ',' << mesh::format_double(r.eigenvalues[i]) << ',' << mesh::format_double(1.0 / r.eigenvalues[i]) << '\n';
}

inline void write_history_csv(std::ostream& out, const OEDResult& r) {
  out << "iter,phi_a,change_l1\n";
  for (std::size_t i = 0; i < r.phi_history.size(); ++i)
    out << i << ',' << mesh::format_double(r.phi_history[i]) << ',' << mesh::format_double(r.change_history[i]) << '\n';
}

/// i, −g_i, violation_i: the data behind the optimality-condition plot.
inline void write_optimality_csv(std::ostream& out, const OEDResult& r, std::span<const double> gradient) {
  out << "index,w,neg_gradient,violation,xi\n";
  for (std::size_t i = 0; i < r.w.size(); ++i)
    out << i << ',' << mesh::format_double(r.w[i]) << ',' << mesh::format_double(-gradient[i]) << ','
        << mesh::format_double(r.violations.empty() ? 0.0 : r.violations[i]) << ',' << mesh::format_double(r.xi) << '\n';
}

inline void write_text(const std::filesystem::path& p, const std::string& s) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw IoError("cannot write " + p.string());
  out << s;
}

} // namespace shapeoed::oed
