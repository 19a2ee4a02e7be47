/// Vorticity-velocity change of variables for the nonzero modes.
///
/// The evolved pair is {omega2 = d_z u1 - d_x u3, Delta u2}.  Per mode with
/// eta^2 = k1^2 + k3^2 > 0, incompressibility and the curl give the 2x2 system
///   i k1 u1 + i k3 u3 = -d_y u2,       i k3 u1 - i k1 u3 = omega2,
/// with determinant -eta^2, so u1,u3 follow from u2 and omega2.  u2 itself is
/// recovered from Delta u2 by a tau solve of (d_yy - eta^2) u2 = Delta u2 with
/// all four wall conditions u2 = d_y u2 = 0 clamped via boundary rows (the
/// collocation equations at the first interior node off each wall are
/// sacrificed).  The (0,0) mode carries no information about u1, u3 and must
/// be supplied separately.
#pragma once

#include "pksns/elliptic.hpp"

namespace pksns {

struct VorticityState {
  SpectralField omega2;
  SpectralField delta_u2;
};

struct ZeroModeVelocity {
  PlaneR u1, u2, u3;  ///< x-averaged velocity components on the (y,z) plane
};

/// Solver for (d_yy - eta^2) u = f with u(+-1) = u'(+-1) = 0 clamped by four
/// boundary rows; factorisations cached per eta^2.
class ClampedHelmholtz {
 public:
  explicit ClampedHelmholtz(GridPtr grid) : grid_(std::move(grid)) {}

  VectorC solve(Real eta2, const VectorC& rhs) {
    const Grid& g = *grid_;
    const Index n = g.ny();
    auto it = cache_.find(eta2);
    if (it == cache_.end()) {
      MatrixR m = g.d2();
      m.diagonal().array() -= eta2;
      m.row(0).setZero();
      m(0, 0) = 1.0;
      m.row(1) = g.d1().row(0);
      m.row(n - 2) = g.d1().row(n - 1);
      m.row(n - 1).setZero();
      m(n - 1, n - 1) = 1.0;
      it = cache_.emplace(eta2, Eigen::PartialPivLU<MatrixR>(m)).first;
    }
    VectorC b = rhs;
    b(0) = b(1) = b(n - 2) = b(n - 1) = Complex(0, 0);
    return detail::lu_solve(it->second, b);
  }

  const Grid& grid() const { return *grid_; }

 private:
  GridPtr grid_;
  std::map<Real, Eigen::PartialPivLU<MatrixR>> cache_;
};

inline VorticityState to_vorticity(const SpectralField& u1,
                                   const SpectralField& u2,
                                   const SpectralField& u3) {
  const Grid& g = u1.grid();
  VorticityState vs{derivative(u1, Axis::Z), SpectralField(u2.grid_ptr())};
  vs.omega2 -= derivative(u3, Axis::X);
  vs.delta_u2.data() = g.d2() * u2.data();
  for (Index i = 0; i < g.nx(); ++i)
    for (Index k = 0; k < g.nz(); ++k)
      vs.delta_u2.data().col(g.col(i, k)) -= g.eta2(i, k) * u2.data().col(g.col(i, k));
  return vs;
}

struct Velocity {
  SpectralField u1, u2, u3;
};

namespace detail {

/// Shared mode loop: reconstruct every k1 != 0 mode (and, for the
/// strict variant, the k1 = 0, k3 != 0 modes as well).
inline void recover_modes(ClampedHelmholtz& ch, const VorticityState& vs,
                          Velocity& out, bool include_k1_zero) {
  const Grid& g = ch.grid();
  for (Index i = 0; i < g.nx(); ++i) {
    if (!include_k1_zero && g.k1_of(i) == 0) continue;
    for (Index k = 0; k < g.nz(); ++k) {
      const Real eta2 = g.eta2(i, k);
      if (eta2 == 0.0) continue;  // handled by the caller
      const Index m = g.col(i, k);
      const Complex a(0.0, static_cast<Real>(g.k1_of(i)));
      const Complex b(0.0, static_cast<Real>(g.k3_of(k)));
      const VectorC u2 = ch.solve(eta2, vs.delta_u2.data().col(m));
      const VectorC gdiv = -(g.d1() * u2);
      const VectorC w = vs.omega2.data().col(m);
      out.u1.data().col(m) = -(a * gdiv + b * w) / eta2;
      out.u2.data().col(m) = u2;
      out.u3.data().col(m) = -(b * gdiv - a * w) / eta2;
    }
  }
}

}  // namespace detail

/// Reconstruct the velocity with the zero mode (k1 = 0) passed through
/// unchanged from the separately evolved plane fields.
inline Velocity from_vorticity(ClampedHelmholtz& ch, const VorticityState& vs,
                               const ZeroModeVelocity& zero) {
  const Grid& g = ch.grid();
  const GridPtr grid = vs.omega2.grid_ptr();
  Velocity out{SpectralField(grid), SpectralField(grid), SpectralField(grid)};
  detail::recover_modes(ch, vs, out, /*include_k1_zero=*/false);
  const PlaneC z1 = plane_fft_z(zero.u1), z2 = plane_fft_z(zero.u2),
               z3 = plane_fft_z(zero.u3);
  for (Index k = 0; k < g.nz(); ++k) {
    out.u1.data().col(g.col(0, k)) = z1.col(k);
    out.u2.data().col(g.col(0, k)) = z2.col(k);
    out.u3.data().col(g.col(0, k)) = z3.col(k);
  }
  return out;
}

/// Variant without zero-mode data: recovers every eta^2 > 0 mode and leaves
/// the (0,0) column zero.  A vorticity state carrying (0,0) content is a
/// request to recover that mode, which {omega2, Delta u2} cannot determine
/// (both are structurally zero there for any velocity), so it is refused.
inline Velocity from_vorticity(ClampedHelmholtz& ch, const VorticityState& vs) {
  const Grid& g = ch.grid();
  const Index m00 = g.col(g.index_of_k1(0), g.index_of_k3(0));
  const Real requested = vs.omega2.data().col(m00).cwiseAbs().maxCoeff() +
                         vs.delta_u2.data().col(m00).cwiseAbs().maxCoeff();
  const Real scale =
      std::max({1.0, vs.omega2.max_abs(), vs.delta_u2.max_abs()});
  if (requested > 1e-12 * scale)
    throw SolverError(
        "from_vorticity: the (0,0) velocity mode is underdetermined by "
        "{omega2, delta_u2}; supply the zero-mode velocity planes");
  const GridPtr grid = vs.omega2.grid_ptr();
  Velocity out{SpectralField(grid), SpectralField(grid), SpectralField(grid)};
  detail::recover_modes(ch, vs, out, /*include_k1_zero=*/true);
  return out;
}

/// Exact discrete divergence-free projection of a zero-mode (k1 = 0) velocity
/// section, via the streamfunction of its x-vorticity: per k3 != 0 solve
/// (d_yy - k3^2) psi = -(d_y u3 - i k3 u2) clamped, then u2 = i k3 psi,
/// u3 = -d_y psi.  That pair satisfies d_y u2 + d_z u3 = 0 and all wall
/// conditions identically at the matrix level.  The k3 = 0 column admits no
/// wall-compatible u2, which is therefore zeroed; u3_(0,0) is untouched.
inline void project_plane_divfree(ClampedHelmholtz& ch, PlaneR& u2, PlaneR& u3) {
  const Grid& g = ch.grid();
  PlaneC c2 = plane_fft_z(u2), c3 = plane_fft_z(u3);
  for (Index k = 0; k < g.nz(); ++k) {
    const Index k3 = g.k3_of(k);
    if (k3 == 0) {
      c2.col(k).setZero();
      continue;
    }
    const Complex b(0.0, static_cast<Real>(k3));
    const VectorC chi = g.d1() * c3.col(k) - b * c2.col(k);
    const VectorC psi = ch.solve(static_cast<Real>(k3 * k3), (-chi).eval());
    c2.col(k) = b * psi;
    c3.col(k) = -(g.d1() * psi);
  }
  u2 = plane_ifft_z(c2);
  u3 = plane_ifft_z(c3);
}

/// Max-norm of the discrete divergence, mode by mode (diagnostic).
inline Real divergence_max(const SpectralField& u1, const SpectralField& u2,
                           const SpectralField& u3) {
  SpectralField div = derivative(u1, Axis::X);
  div += derivative(u2, Axis::Y);
  div += derivative(u3, Axis::Z);
  return div.max_abs();
}

/// L2 norm of the discrete divergence from spectral components.
inline Real divergence_l2(const SpectralField& u1, const SpectralField& u2,
                          const SpectralField& u3) {
  SpectralField div = derivative(u1, Axis::X);
  div += derivative(u2, Axis::Y);
  div += derivative(u3, Axis::Z);
  return l2_norm(div);
}

}  // namespace pksns
