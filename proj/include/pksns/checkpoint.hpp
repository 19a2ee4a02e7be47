/// Binary checkpoints: exact bitwise persistence of a simulation state.
///
/// Layout (version 1, little-endian):
///   bytes 0..7    magic "PKSNSCKP"
///   u32           format version (= 1)
///   u32 x 3       nx, ny, nz
///   f64 x 11      A, mu, a, eps1, c0, dt_init, dt_min, dt_max, cfl, t_end,
///                 tol_div
///   u8  x 8       clip_negative_n, then the term switches in declaration
///                 order (shear, diffusion, advection, chemotaxis, logistic,
///                 coupling, density_force)
///   f64           t
///   f64           last accepted dt (stepper pacing, 0 if never stepped)
///   f64 x 7*N     the state fields n, c, u1, u2, u3, u10_hat, u10_tilde,
///                 each N = ny*(nx*nz) values in storage order: the
///                 wall-normal index runs fastest inside column m = i*nz + k.
///
/// save -> load -> save is byte-identical; a resumed run reproduces an
/// uninterrupted one bit for bit when the dt sequence matches.
#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "pksns/dynamics.hpp"

namespace pksns {

namespace detail {

inline constexpr char kCheckpointMagic[8] = {'P', 'K', 'S', 'N',
                                             'S', 'C', 'K', 'P'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

inline void require_little_endian() {
  const std::uint32_t probe = 1;
  unsigned char first = 0;
  std::memcpy(&first, &probe, 1);
  if (first != 1)
    throw SolverError("checkpoint: only little-endian hosts are supported");
}

inline void put_u32(std::string& out, std::uint32_t v) {
  char b[4];
  std::memcpy(b, &v, 4);
  out.append(b, 4);
}

inline void put_f64(std::string& out, Real v) {
  char b[8];
  std::memcpy(b, &v, 8);
  out.append(b, 8);
}

struct ByteReader {
  const char* p;
  std::size_t n;
  std::size_t at = 0;
  std::uint32_t u32() {
    std::uint32_t v = 0;
    std::memcpy(&v, p + at, 4);
    at += 4;
    return v;
  }
  Real f64() {
    Real v = 0;
    std::memcpy(&v, p + at, 8);
    at += 8;
    return v;
  }
  std::uint8_t u8() { return static_cast<std::uint8_t>(p[at++]); }
};

}  // namespace detail

inline void save_checkpoint(const std::string& path, const State& s,
                            const Params& p, Real last_dt = 0.0) {
  detail::require_little_endian();
  const Grid& g = s.n.grid();
  std::string buf;
  const std::size_t cells = static_cast<std::size_t>(g.ny()) *
                            static_cast<std::size_t>(g.nx()) *
                            static_cast<std::size_t>(g.nz());
  buf.reserve(64 + 8 * (1 + 7 * cells));
  buf.append(detail::kCheckpointMagic, 8);
  detail::put_u32(buf, detail::kCheckpointVersion);
  detail::put_u32(buf, static_cast<std::uint32_t>(g.nx()));
  detail::put_u32(buf, static_cast<std::uint32_t>(g.ny()));
  detail::put_u32(buf, static_cast<std::uint32_t>(g.nz()));
  for (Real v : {p.A, p.mu, p.a, p.eps1, p.c0, p.dt_init, p.dt_min, p.dt_max,
                 p.cfl, p.t_end, p.tol_div})
    detail::put_f64(buf, v);
  for (bool b : {p.clip_negative_n, p.terms.shear, p.terms.diffusion,
                 p.terms.advection, p.terms.chemotaxis, p.terms.logistic,
                 p.terms.coupling, p.terms.density_force})
    buf.push_back(b ? '\1' : '\0');
  detail::put_f64(buf, s.t);
  detail::put_f64(buf, last_dt);
  for (const PhysicalField* f :
       {&s.n, &s.c, &s.u1, &s.u2, &s.u3, &s.u10_hat, &s.u10_tilde})
    buf.append(reinterpret_cast<const char*>(f->data().data()),
               8 * static_cast<std::size_t>(f->data().size()));

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw SolverError("checkpoint: cannot open " + path + " for writing");
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  out.flush();
  if (!out) throw SolverError("checkpoint: write failed for " + path);
}

struct CheckpointData {
  State state;
  Params params;
  Real last_dt = 0.0;
};

inline CheckpointData load_checkpoint(const std::string& path) {
  detail::require_little_endian();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SolverError("checkpoint: cannot open " + path);
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());
  if (bytes.size() < 24)
    throw SolverError("checkpoint: corrupt length (header truncated)");
  if (std::memcmp(bytes.data(), detail::kCheckpointMagic, 8) != 0)
    throw SolverError("checkpoint: " + path + " is not a checkpoint file");

  detail::ByteReader r{bytes.data() + 8, bytes.size() - 8};
  const std::uint32_t version = r.u32();
  if (version != detail::kCheckpointVersion)
    throw SolverError("checkpoint: unsupported format version " +
                      std::to_string(version));
  const auto nx = static_cast<Index>(r.u32());
  const auto ny = static_cast<Index>(r.u32());
  const auto nz = static_cast<Index>(r.u32());
  const std::size_t cells = static_cast<std::size_t>(nx) *
                            static_cast<std::size_t>(ny) *
                            static_cast<std::size_t>(nz);
  const std::size_t expected = 8 + 4 + 12 + 11 * 8 + 8 + 8 + 8 + 7 * 8 * cells;
  if (bytes.size() != expected)
    throw SolverError("checkpoint: corrupt length (" +
                      std::to_string(bytes.size()) + " bytes, expected " +
                      std::to_string(expected) + ")");

  CheckpointData out;
  Params& p = out.params;
  p.A = r.f64();
  p.mu = r.f64();
  p.a = r.f64();
  p.eps1 = r.f64();
  p.c0 = r.f64();
  p.dt_init = r.f64();
  p.dt_min = r.f64();
  p.dt_max = r.f64();
  p.cfl = r.f64();
  p.t_end = r.f64();
  p.tol_div = r.f64();
  p.clip_negative_n = r.u8() != 0;
  p.terms.shear = r.u8() != 0;
  p.terms.diffusion = r.u8() != 0;
  p.terms.advection = r.u8() != 0;
  p.terms.chemotaxis = r.u8() != 0;
  p.terms.logistic = r.u8() != 0;
  p.terms.coupling = r.u8() != 0;
  p.terms.density_force = r.u8() != 0;
  p.validate();

  const GridPtr grid = make_grid(nx, ny, nz);
  out.state = zero_state(grid);
  out.state.t = r.f64();
  out.last_dt = r.f64();
  for (PhysicalField* f :
       {&out.state.n, &out.state.c, &out.state.u1, &out.state.u2,
        &out.state.u3, &out.state.u10_hat, &out.state.u10_tilde}) {
    std::memcpy(f->data().data(), bytes.data() + 8 + r.at, 8 * cells);
    r.at += 8 * cells;
  }
  if (!state_is_finite(out.state) || !std::isfinite(out.last_dt) ||
      out.last_dt < 0.0)
    throw SolverError("checkpoint: non-finite payload in " + path);
  return out;
}

}  // namespace pksns
