// Shared random-state builders for the dynamics-facing test suites: wall-
// admissible vorticity states and fully consistent solver states (solenoidal
// velocity, nonnegative density, slaved chemoattractant, split u10).
#pragma once

#include <random>

#include "pksns/dynamics.hpp"
#include "oracles.hpp"

namespace fixtures {

using namespace pksns;

// Random vorticity state supported on k1 != 0 modes only, Hermitian in
// (k1,k3), with wall-admissible profiles: u2 ~ (1-y^2)^2 T_m (clamped) and
// omega2 ~ (1-y^2) T_m (vanishing at the walls).  delta_u2 is produced by
// the discrete (D2 - eta^2) so the tau round trip is exact for this data.
// The support stays inside the 2/3-rule band (in particular clear of the
// sign-ambiguous unpaired Nyquist columns on small grids).
inline VorticityState random_vorticity(const GridPtr& grid, unsigned seed) {
  const Grid& g = *grid;
  std::mt19937 rng(seed);
  std::normal_distribution<Real> gauss(0.0, 1.0);
  VorticityState vs{SpectralField(grid), SpectralField(grid)};
  const ArrayR y = g.y().array();
  const ArrayR clamp2 = (1.0 - y.square()).square();
  const ArrayR clamp1 = 1.0 - y.square();
  const Index k1_max = std::min<Index>(4, g.nx() / 3);
  const Index k3_max = std::min<Index>(4, g.nz() / 3);
  for (Index k1 = 1; k1 <= k1_max; ++k1) {
    for (Index k3 = -k3_max; k3 <= k3_max; ++k3) {
      const Index m = g.col(g.index_of_k1(k1), g.index_of_k3(k3));
      const Index mc = g.col(g.index_of_k1(-k1), g.index_of_k3(-k3));
      VectorC u2 = VectorC::Zero(g.ny());
      VectorC w = VectorC::Zero(g.ny());
      for (Index deg = 0; deg <= 4; ++deg) {
        const Real amp = std::exp(-0.7 * (k1 + std::abs(k3) + deg));
        const Complex a(amp * gauss(rng), amp * gauss(rng));
        const Complex b(amp * gauss(rng), amp * gauss(rng));
        const ArrayR cheb = (deg * y.acos()).cos();
        u2 += a * (clamp2 * cheb).matrix();
        w += b * (clamp1 * cheb).matrix();
      }
      const Real eta2 = g.eta2(g.index_of_k1(k1), g.index_of_k3(k3));
      VectorC du2 = g.d2() * u2 - eta2 * u2;
      vs.delta_u2.data().col(m) = du2;
      vs.delta_u2.data().col(mc) = du2.conjugate();
      vs.omega2.data().col(m) = w;
      vs.omega2.data().col(mc) = w.conjugate();
    }
  }
  return vs;
}

/// Fully consistent random State: divergence-free velocity with exact wall
/// conditions (scaled to amp_u), density amp_n * f^2 (nonnegative, wall
/// zero), chemoattractant slaved, u10 split initialised canonically.
inline State random_state(const GridPtr& grid, unsigned seed, Real amp_u,
                          Real amp_n) {
  const Grid& g = *grid;
  ClampedHelmholtz ch(grid);
  State s = zero_state(grid);

  VorticityState vs = random_vorticity(grid, seed);
  ZeroModeVelocity planes{oracle::random_smooth_plane(g, seed + 11, true),
                          oracle::random_smooth_plane(g, seed + 22, true),
                          oracle::random_smooth_plane(g, seed + 33, true)};
  project_plane_divfree(ch, planes.u2, planes.u3);
  Velocity v = from_vorticity(ch, vs, planes);
  const Real vmax =
      std::max({v.u1.max_abs(), v.u2.max_abs(), v.u3.max_abs(), 1e-300});
  v.u1 *= Complex(amp_u / vmax, 0.0);
  v.u2 *= Complex(amp_u / vmax, 0.0);
  v.u3 *= Complex(amp_u / vmax, 0.0);
  s.u1 = backward_transform(v.u1);
  s.u2 = backward_transform(v.u2);
  s.u3 = backward_transform(v.u3);

  PhysicalField f = oracle::random_smooth_field(grid, seed + 44, true);
  s.n.data() = (amp_n / std::max(f.max_abs() * f.max_abs(), 1e-300)) *
               f.data().cwiseProduct(f.data());
  HelmholtzSolver hs(grid);
  refresh_chemoattractant(hs, s);
  initialize_u10_split(s);
  return s;
}

}  // namespace fixtures
