/// Quadrature norms and the weighted space-time norm accumulators.
///
/// Space integrals use Clenshaw-Curtis in y and the trapezoid rule (exact for
/// trigonometric polynomials) in x,z.  Per-mode quantities are plain L2(I)
/// norms of the Fourier coefficient profiles; full-field spectral norms carry
/// the (2pi)^2 Parseval factor of the periodic box.
///
/// Time accumulation: every L2-in-time term is a running trapezoid integral,
/// every Linf-in-time term a running supremum, with the exponential weight
/// e^{a A^{-1/3} t} applied inside before accumulating.  Samples must arrive
/// with strictly increasing t.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "pksns/projectors.hpp"

namespace pksns {

// ---- static space norms -------------------------------------------------

inline Real lp_norm(const PhysicalField& f, Real p) {
  const Grid& g = f.grid();
  if (std::isinf(p)) return f.max_abs();
  if (p < 1.0) throw SolverError("lp_norm: p must be >= 1 or inf");
  const Real dxdz = g.dx() * g.dz();
  Real acc = 0.0;
  for (Index j = 0; j < g.ny(); ++j)
    acc += g.wy()(j) *
           f.data().row(j).cwiseAbs().array().pow(p).sum();
  return std::pow(acc * dxdz, 1.0 / p);
}

/// L^p over the section I x T for plane (zero-mode) fields.
inline Real lp_norm(const Grid& g, const PlaneR& f, Real p) {
  if (f.rows() != g.ny() || f.cols() != g.nz())
    throw SolverError("lp_norm: plane shape does not match grid");
  if (std::isinf(p)) return f.size() ? f.cwiseAbs().maxCoeff() : 0.0;
  if (p < 1.0) throw SolverError("lp_norm: p must be >= 1 or inf");
  Real acc = 0.0;
  for (Index j = 0; j < g.ny(); ++j)
    acc += g.wy()(j) * f.row(j).cwiseAbs().array().pow(p).sum();
  return std::pow(acc * g.dz(), 1.0 / p);
}

/// L^p over I for y-profiles.
inline Real lp_norm(const Grid& g, const VectorR& f, Real p) {
  if (std::isinf(p)) return f.size() ? f.cwiseAbs().maxCoeff() : 0.0;
  if (p < 1.0) throw SolverError("lp_norm: p must be >= 1 or inf");
  return std::pow(g.wy().dot(f.cwiseAbs().array().pow(p).matrix()), 1.0 / p);
}

inline Real l2_norm(const PhysicalField& f) { return lp_norm(f, 2.0); }

/// Signed integral of f over the full channel (the mass functional for n).
inline Real integral(const PhysicalField& f) {
  const Grid& g = f.grid();
  Real acc = 0.0;
  for (Index j = 0; j < g.ny(); ++j) acc += g.wy()(j) * f.data().row(j).sum();
  return acc * g.dx() * g.dz();
}

inline Real integral(const Grid& g, const PlaneR& f) {
  Real acc = 0.0;
  for (Index j = 0; j < g.ny(); ++j) acc += g.wy()(j) * f.row(j).sum();
  return acc * g.dz();
}

/// Per-column weighted squared L2(I) norms: q(m) = sum_j wy(j)|M(j,m)|^2.
template <typename Derived>
Eigen::RowVectorXd colwise_sq_l2(const Grid& g,
                                 const Eigen::MatrixBase<Derived>& m) {
  return g.wy().transpose() * m.cwiseAbs2();
}

/// Full-field L2 from spectral coefficients (Parseval).
inline Real l2_norm(const SpectralField& c) {
  const Real s = colwise_sq_l2(c.grid(), c.data()).sum();
  return 2.0 * pi * std::sqrt(std::max(0.0, s));
}

/// L2 of the nonzero modes (k1 != 0) straight from the spectrum.
inline Real l2_norm_nonzero(const SpectralField& c) {
  const Grid& g = c.grid();
  const Eigen::RowVectorXd q = colwise_sq_l2(g, c.data());
  Real s = 0.0;
  for (Index i = 1; i < g.nx(); ++i) s += q.segment(i * g.nz(), g.nz()).sum();
  return 2.0 * pi * std::sqrt(std::max(0.0, s));
}

// ---- plane Sobolev norms -------------------------------------------------

inline Real sq_l2(const Grid& g, const PlaneR& f) {
  Real acc = 0.0;
  for (Index j = 0; j < g.ny(); ++j) acc += g.wy()(j) * f.row(j).squaredNorm();
  return acc * g.dz();
}

struct PlaneGrad {
  PlaneR dy, dz;
};

inline PlaneGrad plane_grad(const Grid& g, const PlaneR& f) {
  return {g.d1() * f, plane_dz(f)};
}

inline Real h1_norm_sq(const Grid& g, const PlaneR& f) {
  const PlaneGrad df = plane_grad(g, f);
  return sq_l2(g, f) + sq_l2(g, df.dy) + sq_l2(g, df.dz);
}

inline Real h2_norm_sq(const Grid& g, const PlaneR& f) {
  const PlaneR fy = g.d1() * f, fz = plane_dz(f);
  return h1_norm_sq(g, f) + sq_l2(g, g.d1() * fy) + sq_l2(g, plane_dz(fy)) +
         sq_l2(g, plane_dz(fz));
}

// ---- running accumulators -----------------------------------------------

/// Trapezoid rule over samples (t, value) with strictly increasing t.
class TrapezoidAccumulator {
 public:
  void add(Real t, Real value) {
    if (has_prev_ && t <= t_prev_)
      throw SolverError("TrapezoidAccumulator: time samples must increase");
    if (has_prev_) integral_ += 0.5 * (t - t_prev_) * (value + v_prev_);
    t_prev_ = t;
    v_prev_ = value;
    has_prev_ = true;
  }
  Real value() const { return integral_; }

 private:
  bool has_prev_ = false;
  Real t_prev_ = 0.0, v_prev_ = 0.0, integral_ = 0.0;
};

class RunningSup {
 public:
  void add(Real value) { sup_ = std::max(sup_, value); }
  Real value() const { return sup_; }

 private:
  Real sup_ = 0.0;
};

namespace detail {
/// 1/A with the unrescaled (A = 0) runs falling back to unit coefficients.
inline Real inv_a(Real A) { return A > 0.0 ? 1.0 / A : 1.0; }
/// Weight rate a A^{-1/3} (zero when A = 0: no enhanced-dissipation weight).
inline Real weight_rate(Real a, Real A) {
  return A > 0.0 ? a * std::pow(A, -1.0 / 3.0) : 0.0;
}
}  // namespace detail

/// Per-mode accumulator state shared by the X_a and Y_a families: three
/// trapezoid integrals plus up to two per-mode supremum arrays, all over the
/// k1 != 0 columns only.
class XaAccumulator {
 public:
  XaAccumulator(GridPtr grid, Real a, Real A)
      : grid_(std::move(grid)), a_(a), A_(A),
        sup4_(ArrayR::Zero(grid_->num_modes())),
        sup5_(ArrayR::Zero(grid_->num_modes())) {
    if (A_ < 0.0) throw SolverError("XaAccumulator: A must be >= 0");
  }

  void add_sample(Real t, const SpectralField& f) {
    const Grid& g = *grid_;
    if (has_prev_ && t <= t_prev_)
      throw SolverError("XaAccumulator: time samples must increase");
    const Real w2 = std::exp(2.0 * detail::weight_rate(a_, A_) * t);
    const MatrixC dyf = g.d1() * f.data();
    MatrixC lap = g.d2() * f.data();
    for (Index m = 0; m < g.num_modes(); ++m)
      lap.col(m) -= g.eta2(m / g.nz(), m % g.nz()) * f.data().col(m);
    const MatrixC dylap = g.d1() * lap;
    const Eigen::RowVectorXd qf = colwise_sq_l2(g, f.data());
    const Eigen::RowVectorXd qdy = colwise_sq_l2(g, dyf);
    const Eigen::RowVectorXd qlap = colwise_sq_l2(g, lap);
    const Eigen::RowVectorXd qdylap = colwise_sq_l2(g, dylap);

    Real f1 = 0.0, f2 = 0.0, f3 = 0.0;
    const Real inv_a = detail::inv_a(A_);
    for (Index i = 1; i < g.nx(); ++i) {  // k1 != 0 only
      const Real absk1 = std::abs(static_cast<Real>(g.k1_of(i)));
      for (Index k = 0; k < g.nz(); ++k) {
        const Index m = g.col(i, k);
        const Real e2 = g.eta2(i, k), eta = std::sqrt(e2);
        const Real grad2 = qdy(m) + e2 * qf(m);  // |(-dy, i eta) f|^2
        f1 += eta * absk1 * grad2 * w2;
        f2 += inv_a * e2 * qlap(m) * w2;
        f3 += std::pow(inv_a, 1.5) * qdylap(m) * w2;
        sup4_(m) = std::max(sup4_(m), e2 * grad2 * w2);
        sup5_(m) = std::max(sup5_(m), std::sqrt(inv_a) * qlap(m) * w2);
      }
    }
    if (has_prev_) {
      const Real h = 0.5 * (t - t_prev_);
      i1_ += h * (f1 + f1_prev_);
      i2_ += h * (f2 + f2_prev_);
      i3_ += h * (f3 + f3_prev_);
    }
    f1_prev_ = f1; f2_prev_ = f2; f3_prev_ = f3;
    t_prev_ = t;
    has_prev_ = true;
  }

  Real value() const {
    return std::sqrt(std::max(0.0, i1_ + i2_ + i3_ + sup4_.sum() + sup5_.sum()));
  }

 private:
  GridPtr grid_;
  Real a_, A_;
  bool has_prev_ = false;
  Real t_prev_ = 0.0;
  Real i1_ = 0.0, i2_ = 0.0, i3_ = 0.0;
  Real f1_prev_ = 0.0, f2_prev_ = 0.0, f3_prev_ = 0.0;
  ArrayR sup4_, sup5_;
};

class YaAccumulator {
 public:
  YaAccumulator(GridPtr grid, Real a, Real A)
      : grid_(std::move(grid)), a_(a), A_(A),
        sup_(ArrayR::Zero(grid_->num_modes())) {
    if (A_ < 0.0) throw SolverError("YaAccumulator: A must be >= 0");
  }

  void add_sample(Real t, const SpectralField& f) {
    const Grid& g = *grid_;
    if (has_prev_ && t <= t_prev_)
      throw SolverError("YaAccumulator: time samples must increase");
    const Real w2 = std::exp(2.0 * detail::weight_rate(a_, A_) * t);
    const Eigen::RowVectorXd qf = colwise_sq_l2(g, f.data());
    const Eigen::RowVectorXd qdy = colwise_sq_l2(g, g.d1() * f.data());
    const Real inv_a = detail::inv_a(A_);
    Real fdy = 0.0, ff = 0.0;
    for (Index i = 1; i < g.nx(); ++i) {
      const Real k1 = static_cast<Real>(g.k1_of(i));
      for (Index k = 0; k < g.nz(); ++k) {
        const Index m = g.col(i, k);
        const Real lam = std::cbrt(inv_a * k1 * k1) + inv_a * g.eta2(i, k);
        fdy += inv_a * qdy(m) * w2;
        ff += lam * qf(m) * w2;
        sup_(m) = std::max(sup_(m), qf(m) * w2);
      }
    }
    if (has_prev_) {
      const Real h = 0.5 * (t - t_prev_);
      idy_ += h * (fdy + fdy_prev_);
      if_ += h * (ff + ff_prev_);
    }
    fdy_prev_ = fdy; ff_prev_ = ff;
    t_prev_ = t;
    has_prev_ = true;
  }

  Real value() const {
    return std::sqrt(std::max(0.0, sup_.sum() + idy_ + if_));
  }

 private:
  GridPtr grid_;
  Real a_, A_;
  bool has_prev_ = false;
  Real t_prev_ = 0.0;
  Real idy_ = 0.0, if_ = 0.0, fdy_prev_ = 0.0, ff_prev_ = 0.0;
  ArrayR sup_;
};

/// Unweighted zero-mode norm: ||f||^2_{LinfL2} + (1/A)||grad f||^2_{L2L2}
/// over plane-valued samples (componentwise for vector arguments).
class Y0Accumulator {
 public:
  Y0Accumulator(GridPtr grid, Real A) : grid_(std::move(grid)), A_(A) {}

  void add_sample(Real t, const std::vector<PlaneR>& comps) {
    const Grid& g = *grid_;
    if (has_prev_ && t <= t_prev_)
      throw SolverError("Y0Accumulator: time samples must increase");
    Real l2 = 0.0, grad2 = 0.0;
    for (const PlaneR& p : comps) {
      l2 += sq_l2(g, p);
      const PlaneGrad d = plane_grad(g, p);
      grad2 += sq_l2(g, d.dy) + sq_l2(g, d.dz);
    }
    sup_ = std::max(sup_, l2);
    const Real f = detail::inv_a(A_) * grad2;
    if (has_prev_) igrad_ += 0.5 * (t - t_prev_) * (f + f_prev_);
    f_prev_ = f;
    t_prev_ = t;
    has_prev_ = true;
  }

  void add_sample(Real t, const PlaneR& p) {
    add_sample(t, std::vector<PlaneR>{p});
  }

  Real value() const { return std::sqrt(std::max(0.0, sup_ + igrad_)); }

 private:
  GridPtr grid_;
  Real A_;
  bool has_prev_ = false;
  Real t_prev_ = 0.0, sup_ = 0.0, igrad_ = 0.0, f_prev_ = 0.0;
};

/// Trapezoid/sup update entry point shared by all three families.
template <typename Accumulator, typename Sample>
void accumulate_norms(Accumulator& acc, Real t, const Sample& sample) {
  acc.add_sample(t, sample);
}

}  // namespace pksns
