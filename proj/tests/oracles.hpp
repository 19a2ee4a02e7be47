/// Independent reference implementations used only by the test suites.
/// These deliberately avoid the library's transform/quadrature code paths:
/// direct O(N^2)-per-line DFT sums, dense LU elliptic solves and plain loops,
/// so library results are checked against a second derivation.
#pragma once

#include <complex>
#include <random>

#include "pksns/field.hpp"

namespace oracle {

using pksns::Complex;
using pksns::Grid;
using pksns::Index;
using pksns::MatrixC;
using pksns::PhysicalField;
using pksns::Real;
using pksns::SpectralField;

/// Forward Fourier coefficient by direct double summation:
/// c_{k1,k3}(y_j) = (1/(Nx*Nz)) sum_{i,k} f(x_i,y_j,z_k) e^{-i(k1 x_i + k3 z_k)}.
inline Complex dft_coefficient(const PhysicalField& f, Index k1, Index j, Index k3) {
  const Grid& g = f.grid();
  Complex acc(0.0, 0.0);
  for (Index i = 0; i < g.nx(); ++i)
    for (Index k = 0; k < g.nz(); ++k) {
      const Real phase = -(static_cast<Real>(k1) * g.x_node(i) +
                           static_cast<Real>(k3) * g.z_node(k));
      acc += f.data()(j, g.col(i, k)) * std::polar(1.0, phase);
    }
  return acc / static_cast<Real>(g.nx() * g.nz());
}

/// Physical value by direct evaluation of the truncated Fourier sum.
inline Real fourier_sum(const SpectralField& c, Index i, Index j, Index k) {
  const Grid& g = c.grid();
  Complex acc(0.0, 0.0);
  for (Index p = 0; p < g.nx(); ++p)
    for (Index q = 0; q < g.nz(); ++q) {
      const Real phase = static_cast<Real>(g.k1_of(p)) * g.x_node(i) +
                         static_cast<Real>(g.k3_of(q)) * g.z_node(k);
      acc += c.data()(j, g.col(p, q)) * std::polar(1.0, phase);
    }
  return acc.real();
}

/// Smooth random field with exponentially decaying spectrum in all three
/// directions; optionally forced to vanish at the walls by a (1-y^2) factor.
/// Deterministic in the seed.  Shared vocabulary of the property suites.
inline PhysicalField random_smooth_field(const pksns::GridPtr& grid, unsigned seed,
                                         bool wall_zero = false,
                                         Real decay = 0.6) {
  std::mt19937 rng(seed);
  std::normal_distribution<Real> gauss(0.0, 1.0);
  const Grid& g = *grid;
  const Index kx_max = std::min<Index>(g.nx() / 3, 5);
  const Index kz_max = std::min<Index>(g.nz() / 3, 5);
  const int my_max = 6;
  PhysicalField f(grid);
  for (Index k1 = 0; k1 <= kx_max; ++k1)
    for (Index k3 = -kz_max; k3 <= kz_max; ++k3)
      for (int m = 0; m <= my_max; ++m) {
        const Real amp = gauss(rng) *
            std::exp(-decay * (std::abs(static_cast<Real>(k1)) +
                               std::abs(static_cast<Real>(k3)) + m));
        const Real phase = gauss(rng);
        for (Index i = 0; i < g.nx(); ++i)
          for (Index k = 0; k < g.nz(); ++k) {
            const Index col = g.col(i, k);
            const Real arg = static_cast<Real>(k1) * g.x_node(i) +
                             static_cast<Real>(k3) * g.z_node(k) + phase;
            for (Index j = 0; j < g.ny(); ++j) {
              const Real y = g.y()(j);
              // Chebyshev-like smooth y profile
              const Real py = std::cos(m * std::acos(std::clamp(y, -1.0, 1.0)));
              f.data()(j, col) += amp * std::cos(arg) * py;
            }
          }
      }
  if (wall_zero)
    for (Index j = 0; j < g.ny(); ++j) {
      const Real y = g.y()(j);
      f.data().row(j) *= (1.0 - y * y);
    }
  return f;
}

/// Smooth random (y,z) plane, optionally vanishing at the walls.
inline pksns::PlaneR random_smooth_plane(const Grid& g, unsigned seed,
                                         bool wall_zero = false,
                                         Real decay = 0.6) {
  std::mt19937 rng(seed);
  std::normal_distribution<Real> gauss(0.0, 1.0);
  const Index kz_max = std::min<Index>(g.nz() / 3, 5);
  const int my_max = 6;
  pksns::PlaneR p = pksns::PlaneR::Zero(g.ny(), g.nz());
  for (Index k3 = 0; k3 <= kz_max; ++k3)
    for (int m = 0; m <= my_max; ++m) {
      const Real amp = gauss(rng) * std::exp(-decay * (k3 + m));
      const Real phase = gauss(rng);
      for (Index k = 0; k < g.nz(); ++k)
        for (Index j = 0; j < g.ny(); ++j) {
          const Real y = g.y()(j);
          const Real py = std::cos(m * std::acos(std::clamp(y, -1.0, 1.0)));
          p(j, k) += amp * std::cos(k3 * g.z_node(k) + phase) * py;
        }
    }
  if (wall_zero)
    for (Index j = 0; j < g.ny(); ++j) p.row(j) *= (1.0 - g.y()(j) * g.y()(j));
  return p;
}

}  // namespace oracle
