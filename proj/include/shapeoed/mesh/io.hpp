#pragma once

#include <charconv>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "shapeoed/errors.hpp"
#include "shapeoed/mesh/mesh.hpp"

namespace shapeoed::mesh {

/// Shortest round-trip decimal representation.
inline std::string format_double(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

// ---------------------------------------------------------------------------
// Gmsh MSH 2.2 ASCII
//
// Physical groups written by write_msh:
//   triangles  1 bulk, 2 inclusion, 3 holdall/bulk, 4 holdall/inclusion,
//              100+k sensor/<k>
//   lines      11 dirichlet, 12 interface, 13 holdall, 50+r robin/<name>,
//              200+k sensor/<k>
// The reader keys on names when $PhysicalNames is present and falls back
// to these numbers otherwise.

namespace detail {

struct ElementGroup {
  bool triangle = true;
  Region region = Region::Bulk;
  bool holdall = false;
  int sensor = 0;  // 0 = none
  SegmentTag tag;
  std::string robin_name;
};

inline int sensor_number(const std::string& s) { return std::stoi(s.substr(7)); }

inline ElementGroup group_from_name(int dim, const std::string& name) {
  ElementGroup g;
  g.triangle = dim == 2;
  if (dim == 2) {
    if (name == "bulk") return g;
    if (name == "inclusion") { g.region = Region::Inclusion; return g; }
    if (name == "holdall/bulk") { g.holdall = true; return g; }
    if (name == "holdall/inclusion") { g.holdall = true; g.region = Region::Inclusion; return g; }
    if (name.rfind("sensor/", 0) == 0) { g.sensor = sensor_number(name); return g; }
  } else if (dim == 1) {
    if (name == "dirichlet") { g.tag = {SegmentKind::Dirichlet, 0}; return g; }
    if (name == "interface") { g.tag = {SegmentKind::Interface, 0}; return g; }
    if (name == "holdall") { g.tag = {SegmentKind::Holdall, 0}; return g; }
    if (name.rfind("robin/", 0) == 0) { g.tag = {SegmentKind::Robin, 0}; g.robin_name = name.substr(6); return g; }
    if (name.rfind("sensor/", 0) == 0) { g.tag = {SegmentKind::Sensor, sensor_number(name)}; return g; }
  }
  throw UnknownTag("msh: unknown physical group '" + name + "'");
}

inline ElementGroup group_from_number(int dim, int phys) {
  if (dim == 2) {
    if (phys == 1) return group_from_name(2, "bulk");
    if (phys == 2) return group_from_name(2, "inclusion");
    if (phys == 3) return group_from_name(2, "holdall/bulk");
    if (phys == 4) return group_from_name(2, "holdall/inclusion");
    if (phys > 100 && phys < 200) return group_from_name(2, "sensor/" + std::to_string(phys - 100));
  } else {
    if (phys == 11) return group_from_name(1, "dirichlet");
    if (phys == 12) return group_from_name(1, "interface");
    if (phys == 13) return group_from_name(1, "holdall");
    if (phys == 50) return group_from_name(1, "robin/default");
    if (phys > 50 && phys < 100) return group_from_name(1, "robin/piece" + std::to_string(phys - 50));
    if (phys > 200 && phys < 300) return group_from_name(1, "sensor/" + std::to_string(phys - 200));
  }
  throw UnknownTag("msh: physical tag " + std::to_string(phys) + " has no meaning without $PhysicalNames");
}

class LineReader {
public:
  explicit LineReader(std::istream& in) : in_(in) {}

  bool next(std::string& line) {
    while (std::getline(in_, line)) {
      ++number_;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.find_first_not_of(" \t") != std::string::npos) return true;
    }
    return false;
  }
  std::string require(const char* what) {
    std::string line;
    if (!next(line)) fail(std::string("unexpected end of file, expected ") + what);
    return line;
  }
  [[noreturn]] void fail(const std::string& msg) const {
    throw ParseError("msh line " + std::to_string(number_) + ": " + msg);
  }
  std::size_t line_number() const { return number_; }

private:
  std::istream& in_;
  std::size_t number_ = 0;
};

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t");
  const auto b = s.find_last_not_of(" \t");
  return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
}

} // namespace detail

inline void write_msh(const Mesh& m, std::ostream& out) {
  std::map<int, std::pair<int, std::string>> names;  // phys -> (dim, name)
  auto tri_phys = [&](std::size_t e) {
    int phys = (m.regions[e] == Region::Inclusion ? 2 : 1) + (m.in_holdall[e] ? 2 : 0);
    for (std::size_t s = 0; s < m.sensor_elements.size(); ++s)
      if (std::binary_search(m.sensor_elements[s].begin(), m.sensor_elements[s].end(), e)) phys = 100 + m.sensor_ids[s];
    return phys;
  };
  auto tri_name = [&](int phys) -> std::string {
    switch (phys) {
      case 1: return "bulk";
      case 2: return "inclusion";
      case 3: return "holdall/bulk";
      case 4: return "holdall/inclusion";
      default: return "sensor/" + std::to_string(phys - 100);
    }
  };
  auto seg_phys = [&](const SegmentTag& t) {
    switch (t.kind) {
      case SegmentKind::Dirichlet: return 11;
      case SegmentKind::Interface: return 12;
      case SegmentKind::Holdall: return 13;
      case SegmentKind::Robin: return 50 + t.id;
      case SegmentKind::Sensor: return 200 + t.id;
    }
    return 0;
  };
  auto seg_name = [&](const SegmentTag& t) -> std::string {
    switch (t.kind) {
      case SegmentKind::Dirichlet: return "dirichlet";
      case SegmentKind::Interface: return "interface";
      case SegmentKind::Holdall: return "holdall";
      case SegmentKind::Robin: return "robin/" + m.robin_names.at(static_cast<std::size_t>(t.id));
      case SegmentKind::Sensor: return "sensor/" + std::to_string(t.id);
    }
    return {};
  };

  std::vector<int> tphys(m.element_count());
  for (std::size_t e = 0; e < m.element_count(); ++e) {
    tphys[e] = tri_phys(e);
    names[tphys[e]] = {2, tri_name(tphys[e])};
  }
  for (const auto& s : m.segments) names[seg_phys(s.tag)] = {1, seg_name(s.tag)};

  out << "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n";
  out << "$PhysicalNames\n" << names.size() << "\n";
  for (const auto& [phys, dn] : names) out << dn.first << " " << phys << " \"" << dn.second << "\"\n";
  out << "$EndPhysicalNames\n";
  out << "$Nodes\n" << m.node_count() << "\n";
  for (std::size_t i = 0; i < m.node_count(); ++i)
    out << i + 1 << " " << format_double(m.nodes[i].x) << " " << format_double(m.nodes[i].y) << " 0\n";
  out << "$EndNodes\n";
  out << "$Elements\n" << m.segments.size() + m.element_count() << "\n";
  std::size_t id = 1;
  for (const auto& s : m.segments) {
    const int p = seg_phys(s.tag);
    out << id++ << " 1 2 " << p << " " << p << " " << s.nodes[0] + 1 << " " << s.nodes[1] + 1 << "\n";
  }
  for (std::size_t e = 0; e < m.element_count(); ++e) {
    const auto& t = m.triangles[e];
    out << id++ << " 2 2 " << tphys[e] << " " << tphys[e] << " " << t[0] + 1 << " " << t[1] + 1 << " " << t[2] + 1 << "\n";
  }
  out << "$EndElements\n";
}

inline void write_msh(const Mesh& m, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw ParseError("cannot open '" + path + "' for writing");
  write_msh(m, f);
}

inline Mesh load_msh(std::istream& in) {
  detail::LineReader rd(in);
  std::string line;
  std::map<int, std::pair<int, std::string>> names;
  std::map<long, std::size_t> node_index;
  Mesh m;
  m.robin_names.clear();
  std::map<std::string, int> robin_ids;
  std::map<int, std::vector<std::size_t>> sensor_elements;
  bool have_format = false, have_nodes = false;

  auto parse_numbers = [&](const std::string& l) {
    std::istringstream ss(l);
    std::vector<double> v;
    std::string tok;
    while (ss >> tok) {
      double x = 0.0;
      const auto r = std::from_chars(tok.data(), tok.data() + tok.size(), x);
      if (r.ec != std::errc() || r.ptr != tok.data() + tok.size()) rd.fail("malformed number '" + tok + "'");
      v.push_back(x);
    }
    return v;
  };
  auto as_count = [&](const std::string& l) {
    const auto v = parse_numbers(l);
    if (v.size() != 1 || v[0] < 0) rd.fail("expected a count");
    return static_cast<std::size_t>(v[0]);
  };
  auto expect_end = [&](const char* tag) {
    if (detail::trim(rd.require(tag)) != tag) rd.fail(std::string("expected ") + tag);
  };

  struct RawElement {
    int type;
    int phys;
    std::vector<std::size_t> nodes;
  };
  std::vector<RawElement> raw;

  while (rd.next(line)) {
    const std::string sect = detail::trim(line);
    if (sect == "$MeshFormat") {
      const auto v = parse_numbers(rd.require("version line"));
      if (v.size() < 3) rd.fail("malformed $MeshFormat");
      if (v[0] < 2.0 || v[0] >= 3.0) throw UnsupportedVersion("msh: version " + format_double(v[0]) + " is not supported (need 2.x)");
      if (v[1] != 0) throw UnsupportedVersion("msh: binary files are not supported");
      expect_end("$EndMeshFormat");
      have_format = true;
    } else if (sect == "$PhysicalNames") {
      const std::size_t n = as_count(rd.require("count"));
      for (std::size_t i = 0; i < n; ++i) {
        const std::string l = rd.require("physical name");
        std::istringstream ss(l);
        int dim = 0, phys = 0;
        if (!(ss >> dim >> phys)) rd.fail("malformed physical name");
        const auto q1 = l.find('"'), q2 = l.rfind('"');
        if (q1 == std::string::npos || q2 == q1) rd.fail("physical name must be quoted");
        names[phys] = {dim, l.substr(q1 + 1, q2 - q1 - 1)};
      }
      expect_end("$EndPhysicalNames");
    } else if (sect == "$Nodes") {
      if (!have_format) rd.fail("$Nodes before $MeshFormat");
      const std::size_t n = as_count(rd.require("count"));
      for (std::size_t i = 0; i < n; ++i) {
        const auto v = parse_numbers(rd.require("node"));
        if (v.size() != 4) rd.fail("node line needs id x y z");
        if (!node_index.emplace(static_cast<long>(v[0]), m.nodes.size()).second) rd.fail("duplicate node id");
        m.nodes.push_back({v[1], v[2]});
      }
      expect_end("$EndNodes");
      have_nodes = true;
    } else if (sect == "$Elements") {
      if (!have_nodes) rd.fail("$Elements before $Nodes");
      const std::size_t n = as_count(rd.require("count"));
      for (std::size_t i = 0; i < n; ++i) {
        const auto v = parse_numbers(rd.require("element"));
        if (v.size() < 3) rd.fail("element line too short");
        const int type = static_cast<int>(v[1]);
        const auto ntags = static_cast<std::size_t>(v[2]);
        const std::size_t nn = type == 1 ? 2 : type == 2 ? 3 : type == 15 ? 1 : 0;
        if (nn == 0) rd.fail("unsupported element type " + std::to_string(type));
        if (v.size() != 3 + ntags + nn) rd.fail("element node count does not match its type");
        if (type == 15) continue;
        if (ntags < 1) rd.fail("element without physical tag");
        RawElement el{type, static_cast<int>(v[3]), {}};
        for (std::size_t k = 0; k < nn; ++k) {
          const auto it = node_index.find(static_cast<long>(v[3 + ntags + k]));
          if (it == node_index.end()) rd.fail("element references unknown node");
          el.nodes.push_back(it->second);
        }
        raw.push_back(std::move(el));
      }
      expect_end("$EndElements");
    } else if (!sect.empty() && sect[0] == '$') {
      // Skip unknown sections.
      const std::string end = "$End" + sect.substr(1);
      std::string l;
      do {
        if (!rd.next(l)) rd.fail("unterminated section " + sect);
      } while (detail::trim(l) != end);
    } else {
      rd.fail("unexpected content '" + sect + "'");
    }
  }
  if (!have_format) throw ParseError("msh line " + std::to_string(rd.line_number()) + ": missing $MeshFormat");

  for (const auto& el : raw) {
    const int dim = el.type == 2 ? 2 : 1;
    const auto nit = names.find(el.phys);
    const detail::ElementGroup g =
        nit != names.end() ? detail::group_from_name(nit->second.first, nit->second.second) : detail::group_from_number(dim, el.phys);
    if (g.triangle != (dim == 2)) throw ParseError("msh: physical group dimension does not match element type");
    if (dim == 2) {
      std::array<std::size_t, 3> t{el.nodes[0], el.nodes[1], el.nodes[2]};
      if (orient2d(m.nodes[t[0]], m.nodes[t[1]], m.nodes[t[2]]) < 0) std::swap(t[1], t[2]);
      if (g.sensor) sensor_elements[g.sensor].push_back(m.triangles.size());
      m.triangles.push_back(t);
      m.regions.push_back(g.region);
      m.in_holdall.push_back(g.holdall ? 1 : 0);
    } else {
      SegmentTag tag = g.tag;
      if (tag.kind == SegmentKind::Robin) {
        const auto [it, fresh] = robin_ids.emplace(g.robin_name, 0);
        if (fresh) it->second = el.phys;
        tag.id = el.phys;  // remapped below
      }
      m.segments.push_back({{el.nodes[0], el.nodes[1]}, tag});
    }
  }

  // Robin ids: "default" is 0, other pieces follow in physical-number order.
  std::vector<std::pair<int, std::string>> pieces;
  for (const auto& [name, phys] : robin_ids)
    if (name != "default") pieces.emplace_back(phys, name);
  std::sort(pieces.begin(), pieces.end());
  m.robin_names = {"default"};
  std::map<int, int> remap;
  if (robin_ids.count("default")) remap[robin_ids["default"]] = 0;
  for (const auto& [phys, name] : pieces) {
    remap[phys] = static_cast<int>(m.robin_names.size());
    m.robin_names.push_back(name);
  }
  for (auto& s : m.segments)
    if (s.tag.kind == SegmentKind::Robin) s.tag.id = remap.at(s.tag.id);

  for (auto& [id, els] : sensor_elements) {
    m.sensor_ids.push_back(id);
    m.sensor_elements.push_back(std::move(els));
  }
  return m;
}

inline Mesh load_msh(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ParseError("cannot open '" + path + "'");
  return load_msh(f);
}

// ---------------------------------------------------------------------------
// VTK legacy ASCII

/// Nodal data; `components` is 1 (scalar) or 2 (planar vector, written with
/// a zero third component).
struct VtkField {
  std::string name;
  std::vector<double> values;
  int components = 1;
};

inline void write_vtk(const Mesh& m, std::span<const VtkField> fields, std::ostream& out, const std::string& title = "shapeoed") {
  out << "# vtk DataFile Version 3.0\n" << title << "\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  out << "POINTS " << m.node_count() << " double\n";
  for (const auto& p : m.nodes) out << format_double(p.x) << " " << format_double(p.y) << " 0\n";
  out << "CELLS " << m.element_count() << " " << 4 * m.element_count() << "\n";
  for (const auto& t : m.triangles) out << "3 " << t[0] << " " << t[1] << " " << t[2] << "\n";
  out << "CELL_TYPES " << m.element_count() << "\n";
  for (std::size_t e = 0; e < m.element_count(); ++e) out << "5\n";

  out << "CELL_DATA " << m.element_count() << "\nSCALARS region int 1\nLOOKUP_TABLE default\n";
  for (Region r : m.regions) out << static_cast<int>(r) << "\n";

  if (fields.empty()) return;
  out << "POINT_DATA " << m.node_count() << "\n";
  for (const auto& f : fields) {
    if (f.components != 1 && f.components != 2) throw DimensionMismatch("write_vtk: field '" + f.name + "' must have 1 or 2 components");
    if (f.values.size() != m.node_count() * static_cast<std::size_t>(f.components))
      throw DimensionMismatch("write_vtk: field '" + f.name + "' has the wrong length");
    if (f.components == 1) {
      out << "SCALARS " << f.name << " double 1\nLOOKUP_TABLE default\n";
      for (double v : f.values) out << format_double(v) << "\n";
    } else {
      out << "VECTORS " << f.name << " double\n";
      for (std::size_t i = 0; i < m.node_count(); ++i)
        out << format_double(f.values[2 * i]) << " " << format_double(f.values[2 * i + 1]) << " 0\n";
    }
  }
}

inline void write_vtk(const Mesh& m, std::span<const VtkField> fields, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw ParseError("cannot open '" + path + "' for writing");
  write_vtk(m, fields, f);
}

} // namespace shapeoed::mesh
