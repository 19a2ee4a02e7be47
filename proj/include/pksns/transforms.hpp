/// Fourier transforms in the periodic directions and spectral derivatives.
///
/// Conventions: forward_transform returns the coefficients of
///   f(x,y,z) = sum_{k1,k3} fhat^{k1,k3}(y) e^{i(k1 x + k3 z)},
/// i.e. the unnormalised DFT divided by Nx*Nz.  backward_transform inverts
/// exactly (round trip is identity to machine precision) and insists on
/// Hermitian symmetry before taking the real part.
#pragma once

#include <unsupported/Eigen/FFT>
#include <vector>

#include "pksns/field.hpp"

namespace pksns {

namespace detail {

/// In-place unnormalised DFT (sign -1) or inverse-sum DFT (sign +1) along
/// both axes of an Nx x Nz complex plane.  No normalisation is applied for
/// sign +1 either; callers scale.
inline void dft2_inplace(MatrixC& plane, int sign) {
  Eigen::FFT<Real> fft;
  const Index nx = plane.rows(), nz = plane.cols();
  std::vector<Complex> in, out;
  // rows: transform over z
  in.resize(nz); out.resize(nz);
  for (Index i = 0; i < nx; ++i) {
    for (Index k = 0; k < nz; ++k)
      in[k] = sign < 0 ? plane(i, k) : std::conj(plane(i, k));
    fft.fwd(out, in);
    for (Index k = 0; k < nz; ++k)
      plane(i, k) = sign < 0 ? out[k] : std::conj(out[k]);
  }
  // columns: transform over x
  in.resize(nx); out.resize(nx);
  for (Index k = 0; k < nz; ++k) {
    for (Index i = 0; i < nx; ++i)
      in[i] = sign < 0 ? plane(i, k) : std::conj(plane(i, k));
    fft.fwd(out, in);
    for (Index i = 0; i < nx; ++i)
      plane(i, k) = sign < 0 ? out[i] : std::conj(out[i]);
  }
}

}  // namespace detail

inline SpectralField forward_transform(const PhysicalField& f) {
  const Grid& g = f.grid();
  SpectralField out(f.grid_ptr());
  const Real scale = 1.0 / static_cast<Real>(g.nx() * g.nz());
  MatrixC plane(g.nx(), g.nz());
  for (Index j = 0; j < g.ny(); ++j) {
    for (Index i = 0; i < g.nx(); ++i)
      for (Index k = 0; k < g.nz(); ++k)
        plane(i, k) = Complex(f.data()(j, g.col(i, k)), 0.0);
    detail::dft2_inplace(plane, -1);
    for (Index i = 0; i < g.nx(); ++i)
      for (Index k = 0; k < g.nz(); ++k)
        out.data()(j, g.col(i, k)) = plane(i, k) * scale;
  }
  return out;
}

/// Largest deviation from Hermitian symmetry coeff(-k) = conj(coeff(k)).
inline Real hermitian_defect(const SpectralField& c) {
  const Grid& g = c.grid();
  Real worst = 0.0;
  for (Index i = 0; i < g.nx(); ++i) {
    const Index im = (g.nx() - i) % g.nx();
    for (Index k = 0; k < g.nz(); ++k) {
      const Index km = (g.nz() - k) % g.nz();
      const Index m = g.col(i, k), mm = g.col(im, km);
      for (Index j = 0; j < g.ny(); ++j) {
        const Real d = std::abs(c.data()(j, m) - std::conj(c.data()(j, mm)));
        worst = std::max(worst, d);
      }
    }
  }
  return worst;
}

inline PhysicalField backward_transform(const SpectralField& c,
                                        Real symmetry_tol = 1e-10) {
  const Grid& g = c.grid();
  const Real scale = std::max(1.0, c.max_abs());
  const Real defect = hermitian_defect(c);
  if (defect > symmetry_tol * scale)
    throw SolverError("backward_transform: Hermitian symmetry violated (defect " +
                      std::to_string(defect) + ", field scale " +
                      std::to_string(scale) + ")");
  PhysicalField out(c.grid_ptr());
  MatrixC plane(g.nx(), g.nz());
  for (Index j = 0; j < g.ny(); ++j) {
    for (Index i = 0; i < g.nx(); ++i)
      for (Index k = 0; k < g.nz(); ++k)
        plane(i, k) = c.data()(j, g.col(i, k));
    detail::dft2_inplace(plane, +1);
    for (Index i = 0; i < g.nx(); ++i)
      for (Index k = 0; k < g.nz(); ++k)
        out.data()(j, g.col(i, k)) = plane(i, k).real();
  }
  return out;
}

/// Zero every mode with |k1| > Nx/3 or |k3| > Nz/3 (2/3-rule padding for
/// quadratic products).  Also removes the unpaired Nyquist modes.
inline void dealias(SpectralField& c) {
  const Grid& g = c.grid();
  const Index kx_max = g.nx() / 3, kz_max = g.nz() / 3;
  for (Index i = 0; i < g.nx(); ++i) {
    const bool kill_x = std::abs(g.k1_of(i)) > kx_max;
    for (Index k = 0; k < g.nz(); ++k)
      if (kill_x || std::abs(g.k3_of(k)) > kz_max)
        c.data().col(g.col(i, k)).setZero();
  }
}

/// Value-returning companion of dealias for expression chains.
inline SpectralField dealiased(SpectralField c) {
  dealias(c);
  return c;
}

enum class Axis { X, Y, Z };

/// Spectral derivative: multiplication by (i k)^order in x,z, differentiation
/// matrix GEMM in y.  Odd-order x/z derivatives zero the unpaired Nyquist
/// mode so real fields stay real.
inline SpectralField derivative(const SpectralField& f, Axis axis, int order = 1) {
  if (order < 1) throw SolverError("derivative: order must be >= 1");
  const Grid& g = f.grid();
  SpectralField out = f;
  if (axis == Axis::Y) {
    for (int r = 0; r < order / 2; ++r) out.data() = g.d2() * out.data();
    if (order % 2 == 1) out.data() = g.d1() * out.data();
    return out;
  }
  for (Index i = 0; i < g.nx(); ++i)
    for (Index k = 0; k < g.nz(); ++k) {
      const Index kw = axis == Axis::X ? g.k1_of(i) : g.k3_of(k);
      const bool nyquist = axis == Axis::X ? (i == g.nx() / 2) : (k == g.nz() / 2);
      Complex fac = std::pow(Complex(0.0, static_cast<Real>(kw)), order);
      if (nyquist && order % 2 == 1) fac = Complex(0.0, 0.0);
      out.data().col(g.col(i, k)) *= fac;
    }
  return out;
}

/// Convenience: physical-space derivative via the spectral route.
inline PhysicalField derivative(const PhysicalField& f, Axis axis, int order = 1) {
  if (axis == Axis::Y) {
    PhysicalField out = f;
    const Grid& g = f.grid();
    for (int r = 0; r < order / 2; ++r) out.data() = g.d2() * out.data();
    if (order % 2 == 1) out.data() = g.d1() * out.data();
    return out;
  }
  return backward_transform(derivative(forward_transform(f), axis, order));
}

// ---- (y,z)-plane helpers for x-independent fields ----------------------

/// Per-row FFT over z of an Ny x Nz real plane, normalised like
/// forward_transform (coefficients of e^{i k3 z}).
inline PlaneC plane_fft_z(const PlaneR& p) {
  Eigen::FFT<Real> fft;
  const Index ny = p.rows(), nz = p.cols();
  PlaneC out(ny, nz);
  std::vector<Complex> in(nz), tr(nz);
  for (Index j = 0; j < ny; ++j) {
    for (Index k = 0; k < nz; ++k) in[k] = Complex(p(j, k), 0.0);
    fft.fwd(tr, in);
    for (Index k = 0; k < nz; ++k) out(j, k) = tr[k] / static_cast<Real>(nz);
  }
  return out;
}

inline PlaneR plane_ifft_z(const PlaneC& c) {
  Eigen::FFT<Real> fft;
  const Index ny = c.rows(), nz = c.cols();
  PlaneR out(ny, nz);
  std::vector<Complex> in(nz), tr(nz);
  for (Index j = 0; j < ny; ++j) {
    for (Index k = 0; k < nz; ++k) in[k] = std::conj(c(j, k));
    fft.fwd(tr, in);
    for (Index k = 0; k < nz; ++k) out(j, k) = tr[k].real();
  }
  return out;
}

/// d/dz of a real plane through the z-spectrum (exact for trig polynomials).
inline PlaneR plane_dz(const PlaneR& p) {
  PlaneC c = plane_fft_z(p);
  const Index nz = p.cols();
  for (Index k = 0; k < nz; ++k) {
    const Index k3 = k < nz / 2 ? k : k - nz;
    Complex fac(0.0, static_cast<Real>(k3));
    if (k == nz / 2) fac = Complex(0.0, 0.0);
    c.col(k) *= fac;
  }
  return plane_ifft_z(c);
}

}  // namespace pksns
