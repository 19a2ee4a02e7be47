/// Channel grid: Fourier nodes in x,z on [0,2pi), Chebyshev-Gauss-Lobatto
/// collocation in y on [-1,1], with spectral differentiation matrices and
/// Clenshaw-Curtis quadrature weights.
#pragma once

#include <cmath>
#include <memory>
#include <sstream>

#include "pksns/types.hpp"

namespace pksns {

namespace detail {

inline bool is_pow2(Index n) { return n > 0 && (n & (n - 1)) == 0; }

/// First-derivative matrix on arbitrary distinct nodes via barycentric
/// weights; diagonal entries by the negative-sum trick for stability.
inline MatrixR barycentric_diff_matrix(const VectorR& x, const VectorR& lam) {
  const Index n = x.size();
  MatrixR d(n, n);
  for (Index i = 0; i < n; ++i) {
    Real rowsum = 0.0;
    for (Index j = 0; j < n; ++j) {
      if (i == j) continue;
      d(i, j) = (lam(j) / lam(i)) / (x(i) - x(j));
      rowsum += d(i, j);
    }
    d(i, i) = -rowsum;
  }
  return d;
}

}  // namespace detail

/// Collocation grid for the periodic channel T x I x T.  y-nodes ascend from
/// -1 to +1 so that row 0 of a field is the lower wall.
class Grid {
 public:
  Grid(Index nx, Index ny, Index nz) : nx_(nx), ny_(ny), nz_(nz) {
    if (!detail::is_pow2(nx) || nx < 8)
      throw SolverError("Grid: Nx must be a power of two >= 8, got " +
                        std::to_string(nx));
    if (!detail::is_pow2(nz) || nz < 8)
      throw SolverError("Grid: Nz must be a power of two >= 8, got " +
                        std::to_string(nz));
    if (ny < 9)
      throw SolverError("Grid: Ny must be >= 9, got " + std::to_string(ny));

    const Index n = ny - 1;
    y_.resize(ny);
    VectorR lam(ny);  // barycentric weights for CGL nodes
    for (Index j = 0; j < ny; ++j) {
      y_(j) = -std::cos(pi * static_cast<Real>(j) / static_cast<Real>(n));
      lam(j) = ((j % 2 == 0) ? 1.0 : -1.0);
      if (j == 0 || j == n) lam(j) *= 0.5;
    }
    y_(0) = -1.0;
    y_(n) = 1.0;
    d1_ = detail::barycentric_diff_matrix(y_, lam);
    d2_ = d1_ * d1_;
    wy_ = clenshaw_curtis_weights();
  }

  Index nx() const { return nx_; }
  Index ny() const { return ny_; }
  Index nz() const { return nz_; }
  Index num_modes() const { return nx_ * nz_; }

  const VectorR& y() const { return y_; }
  const VectorR& wy() const { return wy_; }
  const MatrixR& d1() const { return d1_; }
  const MatrixR& d2() const { return d2_; }

  Real dx() const { return 2.0 * pi / static_cast<Real>(nx_); }
  Real dz() const { return 2.0 * pi / static_cast<Real>(nz_); }
  /// Smallest y spacing (wall-adjacent CGL gap), for advective CFL in y.
  Real min_dy() const { return y_(1) - y_(0); }

  Real x_node(Index i) const { return dx() * static_cast<Real>(i); }
  Real z_node(Index k) const { return dz() * static_cast<Real>(k); }

  /// FFT-ordered wavenumbers: index i carries k1 = i for i < Nx/2, i - Nx
  /// otherwise (so the Nyquist slot holds -Nx/2).
  Index k1_of(Index i) const { return i < nx_ / 2 ? i : i - nx_; }
  Index k3_of(Index k) const { return k < nz_ / 2 ? k : k - nz_; }
  Index index_of_k1(Index k1) const { return k1 >= 0 ? k1 : k1 + nx_; }
  Index index_of_k3(Index k3) const { return k3 >= 0 ? k3 : k3 + nz_; }

  /// Column of mode (i,k) in the Ny x (Nx*Nz) field layout.
  Index col(Index i, Index k) const { return i * nz_ + k; }
  Real eta2(Index i, Index k) const {
    const Real k1 = static_cast<Real>(k1_of(i));
    const Real k3 = static_cast<Real>(k3_of(k));
    return k1 * k1 + k3 * k3;
  }

 private:
  /// Quadrature weights on the CGL nodes by Chebyshev moment matching:
  /// solve V^T w = m with V_jk = T_k(y_j) and m_k = int_{-1}^{1} T_k.
  /// Exact for polynomials of degree <= Ny-1; the system is a scaled DCT,
  /// so the solve is well conditioned.
  VectorR clenshaw_curtis_weights() const {
    const Index n = ny_;
    MatrixR vt(n, n);
    VectorR m(n);
    for (Index k = 0; k < n; ++k) {
      const Real kk = static_cast<Real>(k);
      for (Index j = 0; j < n; ++j)
        vt(k, j) = std::cos(kk * std::acos(std::clamp(y_(j), -1.0, 1.0)));
      m(k) = (k % 2 == 0) ? 2.0 / (1.0 - kk * kk) : 0.0;
    }
    m(0) = 2.0;
    return vt.colPivHouseholderQr().solve(m);
  }

  Index nx_, ny_, nz_;
  VectorR y_, wy_;
  MatrixR d1_, d2_;
};

using GridPtr = std::shared_ptr<const Grid>;

inline GridPtr make_grid(Index nx, Index ny, Index nz) {
  return std::make_shared<const Grid>(nx, ny, nz);
}

}  // namespace pksns
