/// Variational estimation of the sharp constant C in the Gagliardo-Nirenberg
/// interpolation inequality
///
///     ||f||_{L^3}  <=  C * ||f||_{L^1}^{1/3} * ||grad f||_{L^2}^{2/3}
///
/// on the channel section I x T = [-1,1] x [0,2pi), restricted to the
/// admissible class  f(+-1, .) = 0  and  int_T f(y,.) dz = 0, together with
/// the derived aggregation mass threshold 2*pi / C^3.  Trial functions are
/// spanned by sin(m*pi*(y+1)/2) x {cos(k z), sin(k z)} with m,k >= 1, so both
/// constraints hold exactly by construction.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <future>
#include <random>
#include <thread>
#include <vector>

#include "pksns/field.hpp"
#include "pksns/grid.hpp"
#include "pksns/transforms.hpp"
#include "pksns/types.hpp"

namespace pksns {

// ---------------------------------------------------------------------------
// Trial functions
// ---------------------------------------------------------------------------

/// Member of the admissible class, stored as coefficients over the basis
/// sin(m*pi*(y+1)/2) * cos(k z) and sin(m*pi*(y+1)/2) * sin(k z),
/// m = 1..my_modes, k = 1..kz_modes.  Row (m-1), column (k-1).
class TrialFunction {
 public:
  TrialFunction(Index my_modes, Index kz_modes)
      : cos_(MatrixR::Zero(my_modes, kz_modes)),
        sin_(MatrixR::Zero(my_modes, kz_modes)) {
    if (my_modes < 1 || kz_modes < 1)
      throw SolverError("TrialFunction: need at least one mode per direction");
  }

  /// Random trial with independent N(0,1) amplitudes damped by
  /// exp(-decay*(m+k)), scaled by `scale`.  Deterministic in `seed`.
  static TrialFunction random(Index my_modes, Index kz_modes,
                              std::uint64_t seed, Real decay = 0.4,
                              Real scale = 1.0) {
    TrialFunction f(my_modes, kz_modes);
    std::mt19937_64 rng(seed);
    std::normal_distribution<Real> gauss(0.0, 1.0);
    for (Index m = 0; m < my_modes; ++m) {
      for (Index k = 0; k < kz_modes; ++k) {
        const Real damp =
            std::exp(-decay * static_cast<Real>(m + 1 + k + 1)) * scale;
        f.cos_(m, k) = gauss(rng) * damp;
        f.sin_(m, k) = gauss(rng) * damp;
      }
    }
    return f;
  }

  Index my_modes() const { return cos_.rows(); }
  Index kz_modes() const { return cos_.cols(); }
  MatrixR& cos_coeffs() { return cos_; }
  MatrixR& sin_coeffs() { return sin_; }
  const MatrixR& cos_coeffs() const { return cos_; }
  const MatrixR& sin_coeffs() const { return sin_; }

  /// Pointwise evaluation (intended for tests and reporting, not hot loops).
  Real operator()(Real y, Real z) const {
    Real v = 0.0;
    for (Index m = 0; m < cos_.rows(); ++m) {
      const Real sy =
          std::sin(static_cast<Real>(m + 1) * pi * (y + 1.0) / 2.0);
      for (Index k = 0; k < cos_.cols(); ++k) {
        const Real kz = static_cast<Real>(k + 1) * z;
        v += sy * (cos_(m, k) * std::cos(kz) + sin_(m, k) * std::sin(kz));
      }
    }
    return v;
  }

  /// f |-> s*f in coefficient space.
  TrialFunction scaled(Real s) const {
    TrialFunction g = *this;
    g.cos_ *= s;
    g.sin_ *= s;
    return g;
  }

  /// Exact ||f||_{L^2(I x T)}^2 = pi * sum_(m,k) (C^2 + S^2): the basis is
  /// L^2-orthogonal with int_I sin^2 dy = 1 and int_T cos^2 dz = pi.
  Real sq_l2() const {
    return pi * (cos_.array().square().sum() + sin_.array().square().sum());
  }

  /// Exact ||grad f||_{L^2(I x T)}^2 = pi * sum lambda_(m,k) (C^2 + S^2),
  /// lambda = (m*pi/2)^2 + k^2.
  Real grad_sq_l2() const {
    Real acc = 0.0;
    for (Index m = 0; m < cos_.rows(); ++m) {
      const Real ly = static_cast<Real>(m + 1) * pi / 2.0;
      for (Index k = 0; k < cos_.cols(); ++k) {
        const Real kk = static_cast<Real>(k + 1);
        acc += (ly * ly + kk * kk) *
               (cos_(m, k) * cos_(m, k) + sin_(m, k) * sin_(m, k));
      }
    }
    return pi * acc;
  }

  Real coeff_norm() const { return std::sqrt(cos_.squaredNorm() + sin_.squaredNorm()); }

  /// Per-mode amplitudes sqrt(C^2 + S^2), row-major over (m, k).
  std::vector<Real> spectrum() const {
    std::vector<Real> out;
    out.reserve(static_cast<std::size_t>(cos_.size()));
    for (Index m = 0; m < cos_.rows(); ++m)
      for (Index k = 0; k < cos_.cols(); ++k)
        out.push_back(std::sqrt(cos_(m, k) * cos_(m, k) + sin_(m, k) * sin_(m, k)));
    return out;
  }

 private:
  MatrixR cos_, sin_;
};

/// L^2 projection of an Ny x Nz channel-section sample (rows = wall-normal
/// nodes of `g`, columns = uniform z) onto the trial basis: the z-Fourier
/// transform supplies the cos/sin profiles, the wall-normal quadrature of `g`
/// supplies the sine coefficients.  The result lies in the admissible class
/// exactly, whatever the input was.
inline TrialFunction project_to_trial(const Grid& g, const PlaneR& plane,
                                      Index my_modes, Index kz_modes) {
  if (plane.rows() != g.ny() || plane.cols() != g.nz())
    throw SolverError("project_to_trial: plane does not match the grid section");
  if (my_modes < 1 || my_modes > g.ny())
    throw SolverError("project_to_trial: wall-normal mode count out of range");
  if (kz_modes < 1 || kz_modes > g.nz() / 2 - 1)
    throw SolverError("project_to_trial: spanwise mode count out of range");

  const PlaneC ph = plane_fft_z(plane);
  TrialFunction f(my_modes, kz_modes);
  for (Index m = 0; m < my_modes; ++m) {
    VectorR sy(g.ny());
    for (Index j = 0; j < g.ny(); ++j)
      sy(j) = std::sin(static_cast<Real>(m + 1) * pi * (g.y()(j) + 1.0) / 2.0);
    for (Index k = 0; k < kz_modes; ++k) {
      // plane(y,z) = sum_k ph(y,k) e^{ikz}: real form has cos amplitude
      // 2*Re(ph) and sin amplitude -2*Im(ph) at each k >= 1.
      Real c = 0.0, s = 0.0;
      for (Index j = 0; j < g.ny(); ++j) {
        const Real w = g.wy()(j) * sy(j);
        c += w * 2.0 * ph(j, k + 1).real();
        s += w * -2.0 * ph(j, k + 1).imag();
      }
      f.cos_coeffs()(m, k) = c;
      f.sin_coeffs()(m, k) = s;
    }
  }
  return f;
}

// ---------------------------------------------------------------------------
// The ratio
// ---------------------------------------------------------------------------

namespace detail {

/// Composite-Simpson nodes/weights on [-1,1] with `panels` (even) panels.
inline void simpson_rule(Index panels, VectorR& y, VectorR& w) {
  const Index n = panels + 1;
  const Real h = 2.0 / static_cast<Real>(panels);
  y.resize(n);
  w.resize(n);
  for (Index j = 0; j < n; ++j) {
    y(j) = -1.0 + h * static_cast<Real>(j);
    w(j) = (j == 0 || j == n - 1) ? 1.0 : (j % 2 == 1 ? 4.0 : 2.0);
  }
  y(n - 1) = 1.0;
  w *= h / 3.0;
}

/// Wall-normal sine basis sampled at `y`: column m-1 holds sin(m*pi*(y+1)/2).
inline MatrixR sine_basis(const VectorR& y, Index my_modes) {
  MatrixR sy(y.size(), my_modes);
  for (Index m = 0; m < my_modes; ++m)
    sy.col(m) =
        (static_cast<Real>(m + 1) * pi / 2.0 * (y.array() + 1.0)).sin().matrix();
  return sy;
}

/// Accumulates int |f|^3 and int |f| over I x T by streaming z-blocks:
/// Simpson in y (weights `wy` at nodes `y`), uniform trapezoid over `mz`
/// z-points.  The integrands are |.|-kinked, so both directions are heavily
/// oversampled by the caller rather than relying on smoothness.
inline void abs_integrals(const TrialFunction& f, const VectorR& y,
                          const VectorR& wy, Index mz, Real& int_abs3,
                          Real& int_abs1) {
  const Index my = f.my_modes(), kz = f.kz_modes();
  const MatrixR sy = sine_basis(y, my);
  const Real wz = 2.0 * pi / static_cast<Real>(mz);
  const Index block = 512;
  int_abs3 = 0.0;
  int_abs1 = 0.0;
  MatrixR cz(kz, block), sz(kz, block);
  for (Index start = 0; start < mz; start += block) {
    const Index b = std::min(block, mz - start);
    for (Index k = 0; k < kz; ++k) {
      for (Index l = 0; l < b; ++l) {
        const Real z = 2.0 * pi * static_cast<Real>(start + l) /
                       static_cast<Real>(mz) * static_cast<Real>(k + 1);
        cz(k, l) = std::cos(z);
        sz(k, l) = std::sin(z);
      }
    }
    const MatrixR prof = f.cos_coeffs() * cz.leftCols(b) +
                         f.sin_coeffs() * sz.leftCols(b);  // my x b
    const MatrixR field = sy * prof;                       // ny x b
    const MatrixR a = field.cwiseAbs();
    int_abs3 += (a.array().cube().matrix().transpose() * wy).sum() * wz;
    int_abs1 += (a.transpose() * wy).sum() * wz;
  }
}

}  // namespace detail

/// ||f||_{L^3} / (||f||_{L^1}^{1/3} ||grad f||_{L^2}^{2/3}) by 2D quadrature.
///
/// `quad_ny` x `quad_nz` names the base quadrature resolution; internally the
/// rule oversamples it 64x in y (composite Simpson) and 512x in z (periodic
/// trapezoid) because the |f| integrands have gradient kinks along the zero
/// set, and evaluates the gradient norm exactly from the coefficients.  Any
/// two reasonable resolutions therefore agree to quadrature noise (~1e-8).
///
/// Throws on a vanishing denominator (in particular for f identically zero).
inline Real gn_ratio(const TrialFunction& f, Index quad_ny = 17,
                     Index quad_nz = 16) {
  if (quad_ny < 2 || quad_nz < 1)
    throw SolverError("gn_ratio: quadrature resolution too small");
  VectorR y, wy;
  detail::simpson_rule(64 * (quad_ny - 1), y, wy);
  Real a3 = 0.0, a1 = 0.0;
  detail::abs_integrals(f, y, wy, 512 * quad_nz, a3, a1);
  const Real grad2 = f.grad_sq_l2();
  if (!(a1 > 0.0) || !(grad2 > 0.0) || !std::isfinite(a1) ||
      !std::isfinite(a3) || !std::isfinite(grad2))
    throw SolverError("gn_ratio: zero denominator (trial function vanishes)");
  return std::cbrt(a3 / (a1 * grad2));
}

// ---------------------------------------------------------------------------
// Constant estimation
// ---------------------------------------------------------------------------

/// Mass threshold 2*pi / estimate^3 induced by the interpolation constant.
inline Real critical_mass(Real c_star_estimate) {
  if (!(c_star_estimate > 0.0))
    throw SolverError("critical_mass: estimate must be positive");
  return 2.0 * pi / (c_star_estimate * c_star_estimate * c_star_estimate);
}

struct CStarOptions {
  Index my_modes = 12;   ///< trial-space modes in y
  Index kz_modes = 10;   ///< trial-space modes in z
  std::uint64_t seed = 2026;
  int max_iters = 400;   ///< ascent iterations per restart
  Real delta = 1e-8;     ///< |.| smoothing inside the ascent only
  Index quad_ny = 17;    ///< reporting quadrature (see gn_ratio)
  Index quad_nz = 16;
  Real init_scale = 1.0; ///< amplitude of the random starts
  int threads = 0;       ///< 0 = hardware concurrency
};

struct CStarResult {
  Real estimate = 0.0;        ///< max ratio found (certified lower bound)
  Real estimate_cubed = 0.0;
  Real critical_mass = 0.0;   ///< 2*pi / estimate^3
  int restarts = 0;
  int degenerate_restarts = 0;
  TrialFunction best_trial{1, 1};
};

namespace detail {

/// Shared read-only ascent workspace: a coarse quadrature is plenty to guide
/// the ascent; the reported ratios are re-evaluated on the robust rule.
struct AscentSpace {
  MatrixR sy;           // ny x my
  MatrixR cz, sz;       // kz x nz
  MatrixR w;            // ny x nz quadrature weights
  MatrixR lam;          // my x kz gradient eigenvalues
  explicit AscentSpace(const CStarOptions& opt) {
    VectorR y, wy;
    simpson_rule(400, y, wy);
    sy = sine_basis(y, opt.my_modes);
    const Index nz = 512;
    cz.resize(opt.kz_modes, nz);
    sz.resize(opt.kz_modes, nz);
    for (Index k = 0; k < opt.kz_modes; ++k) {
      for (Index l = 0; l < nz; ++l) {
        const Real z = 2.0 * pi * static_cast<Real>(l) /
                       static_cast<Real>(nz) * static_cast<Real>(k + 1);
        cz(k, l) = std::cos(z);
        sz(k, l) = std::sin(z);
      }
    }
    w = wy * VectorR::Constant(nz, 2.0 * pi / static_cast<Real>(nz)).transpose();
    lam.resize(opt.my_modes, opt.kz_modes);
    for (Index m = 0; m < opt.my_modes; ++m)
      for (Index k = 0; k < opt.kz_modes; ++k)
        lam(m, k) = std::pow(static_cast<Real>(m + 1) * pi / 2.0, 2) +
                    std::pow(static_cast<Real>(k + 1), 2);
  }
};

/// log of the smoothed ratio^3 and (optionally) its coefficient gradient.
/// Returns false when any norm degenerates.
inline bool ascent_objective(const AscentSpace& ws, const MatrixR& cc,
                             const MatrixR& sc, Real delta, Real& value,
                             MatrixR* grad_c, MatrixR* grad_s) {
  const MatrixR field = ws.sy * (cc * ws.cz + sc * ws.sz);
  const MatrixR smooth =
      (field.array().square() + delta * delta).sqrt().matrix();
  const Real a3 = (ws.w.array() * smooth.array().cube()).sum();
  const Real a1 = (ws.w.array() * smooth.array()).sum();
  const Real grad2 =
      pi * (ws.lam.array() * (cc.array().square() + sc.array().square())).sum();
  if (!(a3 > 0.0) || !(a1 > 0.0) || !(grad2 > 0.0) || !std::isfinite(a3) ||
      !std::isfinite(a1) || !std::isfinite(grad2))
    return false;
  value = std::log(a3) - std::log(a1) - std::log(grad2);
  if (grad_c != nullptr) {
    // d(a3)/dF = 3*F*smooth*w, d(a1)/dF = (F/smooth)*w.
    const MatrixR dfield =
        (ws.w.array() *
         (3.0 / a3 * field.array() * smooth.array() -
          1.0 / a1 * field.array() / smooth.array()))
            .matrix();
    const MatrixR m = ws.sy.transpose() * dfield;  // my x nz
    *grad_c = m * ws.cz.transpose() -
              (2.0 * pi / grad2) * ws.lam.cwiseProduct(cc);
    *grad_s = m * ws.sz.transpose() -
              (2.0 * pi / grad2) * ws.lam.cwiseProduct(sc);
  }
  return true;
}

struct RestartOutcome {
  bool degenerate = true;
  Real ratio = 0.0;
  TrialFunction trial{1, 1};
};

/// One seeded restart: normalized gradient ascent with backtracking on the
/// smoothed log-ratio, then an unsmoothed robust-quadrature evaluation.
inline RestartOutcome run_restart(const CStarOptions& opt,
                                  const AscentSpace& ws, int index) {
  RestartOutcome out;
  const std::uint64_t seed =
      opt.seed + 0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(index + 1);
  TrialFunction trial = TrialFunction::random(opt.my_modes, opt.kz_modes, seed,
                                              0.4, opt.init_scale);
  const Real nrm = trial.coeff_norm();
  if (!(nrm > 0.0)) return out;
  MatrixR cc = trial.cos_coeffs() / nrm;
  MatrixR sc = trial.sin_coeffs() / nrm;

  Real value = 0.0;
  MatrixR gc, gs;
  if (!ascent_objective(ws, cc, sc, opt.delta, value, &gc, &gs)) return out;
  Real step = 0.25;
  for (int it = 0; it < opt.max_iters; ++it) {
    const Real gnorm2 = gc.squaredNorm() + gs.squaredNorm();
    if (gnorm2 < 1e-20 * (1.0 + value * value)) break;
    bool moved = false;
    for (int bt = 0; bt < 40; ++bt) {
      MatrixR cc_try = cc + step * gc;
      MatrixR sc_try = sc + step * gs;
      const Real n2 = std::sqrt(cc_try.squaredNorm() + sc_try.squaredNorm());
      if (n2 > 0.0) {
        cc_try /= n2;
        sc_try /= n2;
        Real v_try = 0.0;
        if (ascent_objective(ws, cc_try, sc_try, opt.delta, v_try, nullptr,
                             nullptr) &&
            v_try >= value + 0.2 * step * gnorm2) {
          cc.swap(cc_try);
          sc.swap(sc_try);
          value = v_try;
          moved = true;
          break;
        }
      }
      step *= 0.5;
    }
    if (!moved || step < 1e-14) break;
    step = std::min(step * 1.5, 1.0);
    if (!ascent_objective(ws, cc, sc, opt.delta, value, &gc, &gs)) return out;
  }

  trial.cos_coeffs() = cc;
  trial.sin_coeffs() = sc;
  try {
    out.ratio = gn_ratio(trial, opt.quad_ny, opt.quad_nz);
  } catch (const SolverError&) {
    return out;
  }
  out.trial = trial;
  out.degenerate = false;
  return out;
}

}  // namespace detail

/// Maximizes gn_ratio over the trial space from `search_budget` independent
/// random starts (run in parallel) and returns the best trial found.  The
/// estimate is a certified lower bound on the sharp constant; determinism
/// holds for a fixed seed regardless of thread count, and the estimate is
/// nondecreasing in the budget because restart i depends only on (seed, i).
///
/// Throws when every restart degenerates.
inline CStarResult estimate_C_star(int search_budget,
                                   const CStarOptions& opt = {}) {
  if (search_budget < 1)
    throw SolverError("estimate_C_star: search budget must be at least 1");
  if (opt.my_modes < 1 || opt.kz_modes < 1)
    throw SolverError("estimate_C_star: need at least one mode per direction");
  if (opt.max_iters < 1)
    throw SolverError("estimate_C_star: max_iters must be at least 1");

  const detail::AscentSpace ws(opt);
  std::vector<detail::RestartOutcome> outcomes(
      static_cast<std::size_t>(search_budget));
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const int wave =
      opt.threads > 0 ? opt.threads : static_cast<int>(std::min(hw, 8u));
  for (int base = 0; base < search_budget; base += wave) {
    const int end = std::min(base + wave, search_budget);
    std::vector<std::future<detail::RestartOutcome>> futs;
    futs.reserve(static_cast<std::size_t>(end - base));
    for (int i = base; i < end; ++i)
      futs.push_back(std::async(std::launch::async, detail::run_restart,
                                std::cref(opt), std::cref(ws), i));
    for (int i = base; i < end; ++i)
      outcomes[static_cast<std::size_t>(i)] = futs[static_cast<std::size_t>(
                                                       i - base)]
                                                  .get();
  }

  CStarResult result;
  result.restarts = search_budget;
  int best = -1;
  for (int i = 0; i < search_budget; ++i) {
    const auto& o = outcomes[static_cast<std::size_t>(i)];
    if (o.degenerate) {
      ++result.degenerate_restarts;
      continue;
    }
    if (best < 0 || o.ratio > result.estimate) {
      best = i;
      result.estimate = o.ratio;
    }
  }
  if (best < 0)
    throw SolverError("estimate_C_star: all restarts degenerate");
  result.estimate_cubed = std::pow(result.estimate, 3);
  result.critical_mass = critical_mass(result.estimate);
  result.best_trial = outcomes[static_cast<std::size_t>(best)].trial;
  return result;
}

}  // namespace pksns
