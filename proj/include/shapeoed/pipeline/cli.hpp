#pragma once

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "shapeoed/pipeline/pipeline.hpp"

namespace shapeoed::pipeline {

enum ExitCode : int { kOk = 0, kConfigError = 2, kNumericalError = 3, kInfeasible = 4 };

inline int exit_code_for(const std::string& kind) {
  static const std::set<std::string> config_kinds{"ConfigError",    "UnknownTag",        "MissingTag", "InvalidGeometry",
                                                  "ParseError",     "UnsupportedVersion", "NonIntegerBudget",
                                                  "CentersOutOfRange", "IoError"};
  if (kind == "Infeasible") return kInfeasible;
  if (config_kinds.count(kind)) return kConfigError;
  return kNumericalError;
}

/// Reads a weights CSV (k,l,w) as written by the optimize stage.
inline std::vector<double> read_weights_csv(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw IoError("cannot open weights file " + p.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("k,l,w", 0) != 0) throw ParseError(p.string() + ": expected header k,l,w");
  std::vector<double> w;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto c = line.rfind(',');
    try {
      if (c == std::string::npos) throw std::invalid_argument("no comma");
      w.push_back(std::stod(line.substr(c + 1)));
    } catch (const std::exception&) {
      throw ParseError(p.string() + " line " + std::to_string(lineno) + ": bad weight");
    }
  }
  return w;
}

namespace detail {

struct CommonOptions {
  std::vector<std::string> configs;
  std::string out;
  std::string stage_cache;
  std::string case_label;
  std::string weights;
};

inline void add_common(CLI::App* sub, CommonOptions& o, bool many_configs = false) {
  if (many_configs)
    sub->add_option("--config", o.configs, "JSON config file (repeatable)")->required();
  else
    sub->add_option("--config", o.configs, "JSON config file")->required()->expected(1);
  sub->add_option("--out", o.out, "Output directory (overrides output_dir)");
  sub->add_option("--stage-cache", o.stage_cache, "Directory for cached FIM tensors (default <out>/cache)");
  sub->add_option("--case", o.case_label, "Case label inside the config");
}

inline Pipeline make_pipeline(const CommonOptions& o, std::ostream& err) {
  const json raw = read_json_file(o.configs.at(0));
  Config c = resolve_case(raw, o.case_label);
  const fs::path out = o.out.empty() ? fs::path(c.output_dir) : fs::path(o.out);
  return Pipeline(std::move(c), out, o.stage_cache.empty() ? fs::path() : fs::path(o.stage_cache), &err);
}

} // namespace detail

/// Entry point of the shapeoed command-line tool.
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Optimal sensor placement for shape identification of an inclusion in a heat conduction problem"};
  app.require_subcommand(1);
  detail::CommonOptions o;

  struct Sub {
    std::string name, help;
  };
  const std::vector<Sub> subs{{"generate-mesh", "Build the mesh and write mesh.msh, mesh.vtk, mesh.json"},
                              {"solve-forward", "Solve the heat equation and write forward.vtk, forward_sensors.csv"},
                              {"sensitivities", "Shape basis, velocity extensions and material derivatives"},
                              {"assemble-fim", "Elementary Fisher information matrices (cached)"},
                              {"optimize", "A-optimal design by simplicial decomposition"},
                              {"analyze", "Generalized eigen-analysis of a design"},
                              {"compare", "Tabulate Φ_A and reciprocal eigenvalues over cases"},
                              {"pipeline", "Run every stage and write report.json"}};
  std::map<std::string, CLI::App*> cmd;
  for (const auto& s : subs) {
    cmd[s.name] = app.add_subcommand(s.name, s.help);
    detail::add_common(cmd[s.name], o, s.name == "compare");
  }
  cmd["analyze"]->add_option("--weights", o.weights, "Weights CSV (k,l,w); default <out>/weights.csv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  }

  try {
    if (cmd["compare"]->parsed()) {
      std::vector<Config> cases;
      for (const auto& path : o.configs) {
        const json raw = read_json_file(path);
        if (!o.case_label.empty()) {
          cases.push_back(resolve_case(raw, o.case_label));
        } else {
          for (auto& c : resolve_all_cases(raw)) cases.push_back(std::move(c));
        }
      }
      const fs::path dir = o.out.empty() ? fs::path(cases[0].output_dir) : fs::path(o.out);
      const auto rows = compare_cases(cases, dir, o.stage_cache.empty() ? fs::path() : fs::path(o.stage_cache), &err);
      const std::string csv = comparison_csv(rows);
      oed::write_text(dir / "comparison.csv", csv);
      out << csv;
      return kOk;
    }

    Pipeline p = detail::make_pipeline(o, err);
    if (cmd["generate-mesh"]->parsed()) {
      p.write_mesh();
      out << "mesh: " << p.mesh().node_count() << " nodes, " << p.mesh().element_count() << " triangles\n";
    } else if (cmd["solve-forward"]->parsed()) {
      p.write_forward();
      out << "forward: " << p.forward().size() << " instants\n";
    } else if (cmd["sensitivities"]->parsed()) {
      p.write_sensitivities();
      out << "sensitivities: " << p.sensitivities().size() << " basis fields\n";
    } else if (cmd["assemble-fim"]->parsed()) {
      p.write_fim();
      out << "fim: " << p.fim().n_obs << " sensors × " << p.fim().n_time << " instants, cache "
          << (p.fim_cache_hit() ? "hit" : "miss") << "\n";
    } else if (cmd["optimize"]->parsed()) {
      p.write_design();
      const auto& r = p.design();
      out << "phi_a " << mesh::format_double(r.phi) << "  ones " << r.counts.one << "  fractional " << r.counts.fractional
          << "  zeros " << r.counts.zero << "\n";
    } else if (cmd["analyze"]->parsed()) {
      const fs::path wpath = o.weights.empty() ? p.out_dir() / "weights.csv" : fs::path(o.weights);
      std::vector<double> w;
      if (fs::exists(wpath)) {
        w = read_weights_csv(wpath);
      } else {
        if (!o.weights.empty()) throw IoError("weights file " + wpath.string() + " does not exist");
        w = p.design().w;
      }
      if (w.size() != p.design_tensor().size())
        throw ConfigError("analyze: weights file has " + std::to_string(w.size()) + " entries, design has " +
                          std::to_string(p.design_tensor().size()));
      p.write_analysis(w);
      out << "analysis written to " << (p.out_dir() / "analysis.json").string() << "\n";
    } else if (cmd["pipeline"]->parsed()) {
      const auto rep = p.run_all();
      out << "pipeline " << rep.label << ": phi_a " << mesh::format_double(rep.result->phi) << ", fim cache "
          << (rep.fim_cache_hit ? "hit" : "miss") << "\n";
    }
    return kOk;
  } catch (const Error& e) {
    err << "error [" << e.kind() << "]: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const fs::filesystem_error& e) {
    err << "error [IoError]: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kNumericalError;
  }
}

} // namespace shapeoed::pipeline
