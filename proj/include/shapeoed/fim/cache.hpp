#pragma once

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "shapeoed/errors.hpp"
#include "shapeoed/fim/tensor.hpp"

namespace shapeoed::fim {

static_assert(std::endian::native == std::endian::little, "FIM cache I/O assumes a little-endian host");

/// Cache layout: one JSON header line, then the Υ_{k,ℓ} blocks in (k, ℓ)
/// order and B, each n_basis² little-endian float64 in row-major order.
struct CacheHeader {
  std::size_t n_obs = 0, n_time = 0, n_basis = 0;
  std::string hash;
  double alpha0 = 0.0, alpha1 = 0.0;
};

inline void save_fim_cache(const std::filesystem::path& path, const FimTensor& t, const std::string& hash,
                           const NoiseParams& noise) {
  t.check();
  const std::size_t nn = t.n_basis * t.n_basis;
  const nlohmann::json header = {{"format", "shapeoed-fim"},
                                 {"version", 1},
                                 {"n_obs", t.n_obs},
                                 {"n_time", t.n_time},
                                 {"n_basis", t.n_basis},
                                 {"hash", hash},
                                 {"alpha0", noise.alpha0},
                                 {"alpha1", noise.alpha1},
                                 {"payload_bytes", (t.size() + 1) * nn * sizeof(double)}};
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("fim cache: cannot write " + path.string());
  out << header.dump() << '\n';
  for (const auto& b : t.blocks) out.write(reinterpret_cast<const char*>(b.data().data()), static_cast<std::streamsize>(nn * sizeof(double)));
  out.write(reinterpret_cast<const char*>(t.gramian.data().data()), static_cast<std::streamsize>(nn * sizeof(double)));
  if (!out) throw IoError("fim cache: write failed for " + path.string());
}

inline CacheHeader read_fim_header(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("fim cache: missing header");
  nlohmann::json h;
  try {
    h = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("fim cache: bad header: ") + e.what());
  }
  if (h.value("format", "") != "shapeoed-fim") throw ParseError("fim cache: not a FIM cache file");
  if (h.value("version", 0) != 1) throw UnsupportedVersion("fim cache: unsupported version");
  CacheHeader c;
  try {
    c.n_obs = h.at("n_obs").get<std::size_t>();
    c.n_time = h.at("n_time").get<std::size_t>();
    c.n_basis = h.at("n_basis").get<std::size_t>();
    c.hash = h.at("hash").get<std::string>();
    c.alpha0 = h.at("alpha0").get<double>();
    c.alpha1 = h.at("alpha1").get<double>();
    const std::size_t expect = (c.n_obs * c.n_time + 1) * c.n_basis * c.n_basis * sizeof(double);
    if (h.at("payload_bytes").get<std::size_t>() != expect) throw ParseError("fim cache: payload size inconsistent with dims");
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("fim cache: ") + e.what());
  }
  return c;
}

/// Loads a cached tensor; CacheMismatch when the stored hash differs.
inline FimTensor load_fim_cache(const std::filesystem::path& path, const std::string& expected_hash) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("fim cache: cannot open " + path.string());
  const CacheHeader h = read_fim_header(in);
  if (h.hash != expected_hash) throw CacheMismatch("fim cache: hash " + h.hash + " does not match " + expected_hash);
  FimTensor t;
  t.n_obs = h.n_obs;
  t.n_time = h.n_time;
  t.n_basis = h.n_basis;
  const std::size_t nn = h.n_basis * h.n_basis;
  auto read_block = [&] {
    DenseMatrix m(h.n_basis, h.n_basis);
    in.read(reinterpret_cast<char*>(m.data().data()), static_cast<std::streamsize>(nn * sizeof(double)));
    if (in.gcount() != static_cast<std::streamsize>(nn * sizeof(double))) throw ParseError("fim cache: truncated payload");
    return m;
  };
  for (std::size_t i = 0; i < t.size(); ++i) t.blocks.push_back(read_block());
  t.gramian = read_block();
  if (in.peek() != std::char_traits<char>::eof()) throw ParseError("fim cache: trailing bytes after payload");
  return t;
}

} // namespace shapeoed::fim
