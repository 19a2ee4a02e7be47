/// Time integration of the rescaled chemotaxis-shear system.
///
/// Unknowns: cell density n (with chemoattractant c slaved through
/// (Laplacian - 1) c = -n), the nonzero-mode velocity in {omega2, Delta u2}
/// variables, and the x-averaged velocity planes {u10_hat, u10_tilde, u20,
/// u30}, where u10_hat + u10_tilde is the zero mode of u1 split into the
/// shear-fed part (hat, starts at zero) and the freely decaying part (tilde).
///
/// One step is Strang-split: exact shear phase rotation for half a step,
/// a Crank-Nicolson / Heun IMEX middle step (diffusion implicit per mode,
/// everything else explicit, predictor-corrector), then the second half
/// rotation.  Delta u2 is advanced through the fourth-order clamped tau
/// solve so that all four wall conditions on u2 hold at the matrix level.
///
/// With A = 0 the solver integrates the unrescaled chemotaxis system (unit
/// coefficients, no shear) and the velocity is frozen.
#pragma once

#include <functional>

#include "pksns/decomposition.hpp"

namespace pksns {

/// Switches for individual right-hand-side terms; defaults reproduce the
/// full system.  Tests use them to isolate exactly solvable sub-dynamics.
struct TermFlags {
  bool shear = true;          ///< y d_x transport (exact phase rotation)
  bool diffusion = true;      ///< implicit (1/A) Laplacian
  bool advection = true;      ///< u . grad n and all u . grad u quadratics
  bool chemotaxis = true;     ///< div(n grad c) flux
  bool logistic = true;       ///< mu n^2 absorption
  bool coupling = true;       ///< d_z u2 in the omega2 equation, u20 lift-up
  bool density_force = true;  ///< n sources in the velocity system
};

struct Params {
  Real A = 1024.0;    ///< shear amplitude; 0 selects the unrescaled system
  Real mu = 0.0;      ///< logistic coefficient
  Real a = 0.1;       ///< decay-weight rate in the time-weighted norms
  Real eps1 = 0.75;   ///< initial-velocity smallness exponent
  Real c0 = 1.0;      ///< smallness constant: ||u_in||_{H^2} <= c0 A^{-eps1}
  Real dt_init = 1e-2;
  Real dt_min = 1e-8;
  Real dt_max = 0.5;
  Real cfl = 0.4;
  Real t_end = 1.0;
  Real tol_div = 1e-8;  ///< relative divergence tolerance after a step
  bool clip_negative_n = false;
  TermFlags terms{};

  /// Derived exponent: eps1 itself on (2/3, 4/5], else the cap 4/5.
  Real eps() const {
    return (eps1 > 2.0 / 3.0 && eps1 <= 0.8) ? eps1 : 0.8;
  }

  void validate() const {
    if (!(A >= 0.0)) throw SolverError("Params: A must be >= 0");
    if (!(mu >= 0.0)) throw SolverError("Params: mu must be >= 0");
    if (!(a >= 0.0)) throw SolverError("Params: a must be >= 0");
    if (A > 0.0 && !(eps1 > 2.0 / 3.0))
      throw SolverError("Params: eps1 must exceed 2/3 when A > 0");
    if (!(dt_min <= dt_init && dt_init <= dt_max))
      throw SolverError("Params: need dt_min <= dt_init <= dt_max");
    if (!(dt_min > 0.0)) throw SolverError("Params: dt_min must be positive");
    if (!(cfl > 0.0 && cfl <= 1.0))
      throw SolverError("Params: cfl must lie in (0, 1]");
    if (!(t_end >= 0.0)) throw SolverError("Params: t_end must be >= 0");
    if (!(tol_div > 0.0)) throw SolverError("Params: tol_div must be positive");
  }
};

struct State {
  Real t = 0.0;
  PhysicalField n, c, u1, u2, u3;
  PhysicalField u10_hat, u10_tilde;  ///< x-independent split of (u1)_0
};

inline State zero_state(const GridPtr& grid) {
  State s;
  s.n = PhysicalField(grid);
  s.c = PhysicalField(grid);
  s.u1 = PhysicalField(grid);
  s.u2 = PhysicalField(grid);
  s.u3 = PhysicalField(grid);
  s.u10_hat = PhysicalField(grid);
  s.u10_tilde = PhysicalField(grid);
  return s;
}

inline bool state_is_finite(const State& s) {
  return std::isfinite(s.t) && s.n.is_finite() && s.c.is_finite() &&
         s.u1.is_finite() && s.u2.is_finite() && s.u3.is_finite() &&
         s.u10_hat.is_finite() && s.u10_tilde.is_finite();
}

/// Slave the chemoattractant to the current density.
inline void refresh_chemoattractant(HelmholtzSolver& hs, State& s) {
  s.c = backward_transform(solve_chemoattractant(hs, forward_transform(s.n)));
}

/// Initial split of the zero mode of u1: hat part starts at zero, tilde part
/// carries the whole initial zero mode.
inline void initialize_u10_split(State& s) {
  const GridPtr grid = s.u1.grid_ptr();
  s.u10_hat = PhysicalField(grid);
  s.u10_tilde = broadcast_plane(grid, zero_mode_plane(s.u1));
}

namespace detail {

inline Real inv_shear(const Params& p) { return p.A > 0.0 ? 1.0 / p.A : 1.0; }

inline PhysicalField pmul(const PhysicalField& a, const PhysicalField& b) {
  PhysicalField r(a.grid_ptr());
  r.data() = a.data().cwiseProduct(b.data());
  return r;
}

/// 2/3-rule mask in z for plane-valued products.
inline PlaneR dealias_plane(const Grid& g, const PlaneR& p) {
  PlaneC c = plane_fft_z(p);
  for (Index k = 0; k < g.nz(); ++k)
    if (std::abs(g.k3_of(k)) > g.nz() / 3) c.col(k).setZero();
  return plane_ifft_z(c);
}

/// Zero-mode advection (u20 d_y + u30 d_z) f, dealiased in z.
inline PlaneR plane_adv0(const Grid& g, const PlaneR& u20, const PlaneR& u30,
                         const PlaneR& f) {
  PlaneR r = u20.cwiseProduct(g.d1() * f) + u30.cwiseProduct(plane_dz(f));
  return dealias_plane(g, r);
}

/// The three transport products u . grad u_j, pointwise in physical space.
struct MomentumProducts {
  PhysicalField n1, n2, n3;
};

inline MomentumProducts momentum_products(const State& s) {
  const GridPtr grid = s.u1.grid_ptr();
  MomentumProducts mp{PhysicalField(grid), PhysicalField(grid),
                      PhysicalField(grid)};
  for (auto [target, out] :
       {std::pair<const PhysicalField*, PhysicalField*>{&s.u1, &mp.n1},
        std::pair<const PhysicalField*, PhysicalField*>{&s.u2, &mp.n2},
        std::pair<const PhysicalField*, PhysicalField*>{&s.u3, &mp.n3}}) {
    *out = pmul(s.u1, derivative(*target, Axis::X));
    *out += pmul(s.u2, derivative(*target, Axis::Y));
    *out += pmul(s.u3, derivative(*target, Axis::Z));
  }
  return mp;
}

/// Explicit density terms; the shear term is optional because the stepper
/// integrates it exactly by phase rotation instead.
inline PhysicalField density_rhs(const State& s, const Params& p,
                                 bool include_shear) {
  const GridPtr grid = s.n.grid_ptr();
  const Grid& g = *grid;
  const Real inv = inv_shear(p);
  PhysicalField out(grid);
  if (include_shear && p.terms.shear && p.A > 0.0)
    out.data() -= g.y().asDiagonal() * derivative(s.n, Axis::X).data();
  if (p.terms.advection) {
    PhysicalField adv = pmul(s.u1, derivative(s.n, Axis::X));
    adv += pmul(s.u2, derivative(s.n, Axis::Y));
    adv += pmul(s.u3, derivative(s.n, Axis::Z));
    out -= inv * backward_transform(dealiased(forward_transform(adv)));
  }
  if (p.terms.chemotaxis) {
    SpectralField f1 = dealiased(forward_transform(pmul(s.n, derivative(s.c, Axis::X))));
    SpectralField f2 = dealiased(forward_transform(pmul(s.n, derivative(s.c, Axis::Y))));
    SpectralField f3 = dealiased(forward_transform(pmul(s.n, derivative(s.c, Axis::Z))));
    SpectralField div = derivative(f1, Axis::X);
    div += derivative(f2, Axis::Y);
    div += derivative(f3, Axis::Z);
    out -= inv * backward_transform(div);
  }
  if (p.terms.logistic && p.mu > 0.0)
    out.data() -= (p.mu * inv) * s.n.data().cwiseProduct(s.n.data());
  return out;
}

/// Conjugate-pair averaging: restores exact Hermitian symmetry after
/// accumulated roundoff.
inline void hermitian_symmetrize(SpectralField& f) {
  const Grid& g = f.grid();
  for (Index i = 0; i < g.nx(); ++i) {
    const Index ic = (g.nx() - i) % g.nx();
    for (Index k = 0; k < g.nz(); ++k) {
      const Index kc = (g.nz() - k) % g.nz();
      const Index m = g.col(i, k), mc = g.col(ic, kc);
      if (m > mc) continue;
      VectorC avg =
          0.5 * (f.data().col(m) + f.data().col(mc).conjugate());
      f.data().col(m) = avg;
      f.data().col(mc) = avg.conjugate();
    }
  }
}

/// Per-mode Laplacian D2 - eta^2 applied columnwise.
inline SpectralField mode_laplacian(const SpectralField& f) {
  const Grid& g = f.grid();
  SpectralField r(f.grid_ptr());
  r.data() = g.d2() * f.data();
  for (Index i = 0; i < g.nx(); ++i)
    for (Index k = 0; k < g.nz(); ++k)
      r.data().col(g.col(i, k)) -= g.eta2(i, k) * f.data().col(g.col(i, k));
  return r;
}

}  // namespace detail

/// Explicit density right-hand side of the rescaled equation:
///   -y d_x n - (1/A) u . grad n - (1/A) div(n grad c) - (mu/A) n^2,
/// diffusion excluded (it is integrated implicitly).  Precondition: s.c is a
/// fresh elliptic solve for s.n.
inline PhysicalField rhs_density(const State& s, const Params& p) {
  if (p.A == 0.0)
    throw SolverError(
        "rhs_density: A = 0 selects the unrescaled formulation; use the "
        "stepper's A = 0 mode");
  return detail::density_rhs(s, p, /*include_shear=*/true);
}

/// Explicit parts of the {omega2, Delta u2} system (shear and diffusion
/// excluded): the d_z u2 coupling, the density sources (1/A) d_z n and
/// -(1/A) d_x d_y n, and the quadratic transport groups as printed.
inline std::pair<SpectralField, SpectralField> rhs_vorticity_system(
    const State& s, const Params& p) {
  const GridPtr grid = s.n.grid_ptr();
  const Real inv = detail::inv_shear(p);
  SpectralField rw(grid), rd(grid);
  const Complex ci(inv, 0.0);
  if (p.terms.coupling) rw -= derivative(forward_transform(s.u2), Axis::Z);
  if (p.terms.density_force) {
    SpectralField nh = forward_transform(s.n);
    rw += ci * derivative(nh, Axis::Z);
    rd -= ci * derivative(derivative(nh, Axis::X), Axis::Y);
  }
  if (p.terms.advection) {
    detail::MomentumProducts mp = detail::momentum_products(s);
    SpectralField n1 = dealiased(forward_transform(mp.n1));
    SpectralField n2 = dealiased(forward_transform(mp.n2));
    SpectralField n3 = dealiased(forward_transform(mp.n3));
    rw -= ci * derivative(n1, Axis::Z);
    rw += ci * derivative(n3, Axis::X);
    rd -= ci * (derivative(n2, Axis::X, 2) + derivative(n2, Axis::Z, 2));
    rd += ci * derivative(derivative(n1, Axis::X) + derivative(n3, Axis::Z),
                          Axis::Y);
  }
  return {std::move(rw), std::move(rd)};
}

struct ZeroModeRhs {
  PlaneR u10_hat, u10_tilde, u20, u30;
};

namespace detail {

/// Zero-mode assembly against a caller-provided solver (the stepper reuses
/// its factorisation cache across stages).
inline ZeroModeRhs zero_mode_rhs(const State& s, const Params& p,
                                 HelmholtzSolver& hs) {
  const GridPtr grid = s.n.grid_ptr();
  const Grid& g = *grid;
  const Real inv = detail::inv_shear(p);
  const PlaneR u20 = zero_mode_plane(s.u2);
  const PlaneR u30 = zero_mode_plane(s.u3);
  const PlaneR u10h = zero_mode_plane(s.u10_hat);
  const PlaneR u10t = zero_mode_plane(s.u10_tilde);
  ZeroModeRhs r{PlaneR::Zero(g.ny(), g.nz()), PlaneR::Zero(g.ny(), g.nz()),
                PlaneR::Zero(g.ny(), g.nz()), PlaneR::Zero(g.ny(), g.nz())};

  if (p.terms.advection) {
    r.u10_hat -= inv * detail::plane_adv0(g, u20, u30, u10h);
    r.u10_tilde -= inv * detail::plane_adv0(g, u20, u30, u10t);
    r.u20 -= inv * detail::plane_adv0(g, u20, u30, u20);
    r.u30 -= inv * detail::plane_adv0(g, u20, u30, u30);

    // Nonzero-mode feedback (u_neq . grad u_{j,neq})_0 = P0(u . grad u_j)
    // minus the zero-mode self-advection, and the zero-mode pressure from
    // Delta_0 P0 = -(d_y N2 + d_z N3)_0.
    detail::MomentumProducts mp = detail::momentum_products(s);
    const PlaneR n10 = detail::dealias_plane(g, zero_mode_plane(mp.n1));
    const PlaneR n20 = detail::dealias_plane(g, zero_mode_plane(mp.n2));
    const PlaneR n30 = detail::dealias_plane(g, zero_mode_plane(mp.n3));
    r.u10_tilde -=
        inv * (n10 - detail::plane_adv0(g, u20, u30, u10h + u10t));
    r.u20 -= inv * (n20 - detail::plane_adv0(g, u20, u30, u20));
    r.u30 -= inv * (n30 - detail::plane_adv0(g, u20, u30, u30));

    PlaneR rhs_p = -(g.d1() * n20 + plane_dz(n30));
    PlaneC rc = plane_fft_z(rhs_p);
    PlaneC pc(g.ny(), g.nz());
    for (Index k = 0; k < g.nz(); ++k) {
      const Real k3 = static_cast<Real>(g.k3_of(k));
      pc.col(k) = hs.solve_mode(k3 * k3, 0.0, Bc::Neumann, rc.col(k));
    }
    const PlaneR p0 = plane_ifft_z(pc);
    r.u20 -= inv * (g.d1() * p0);
    r.u30 -= inv * plane_dz(p0);
  }
  if (p.terms.coupling) r.u10_hat -= u20;
  if (p.terms.density_force) r.u10_tilde += inv * zero_mode_plane(s.n);
  return r;
}

}  // namespace detail

/// Explicit parts of the x-averaged velocity system (diffusion excluded):
/// hat equation carries the lift-up forcing -u20, tilde the nonzero-mode
/// feedback and the density source, u20/u30 their zero-mode pressure
/// gradients and nonlinear fluxes.
inline ZeroModeRhs rhs_zero_mode_velocity(const State& s, const Params& p) {
  HelmholtzSolver hs(s.n.grid_ptr());
  return detail::zero_mode_rhs(s, p, hs);
}

/// CFL step proposal: shear advects at |y| <= 1 in x (rescaled units), the
/// perturbation velocity and the chemotactic drift grad c act through their
/// 1/A-scaled transport.  Clamped to dt_max; growth limited to 2x prev_dt;
/// a proposal below dt_min throws (stiffness/blow-up signal).
inline Real adapt_dt(const State& s, const Params& p, Real prev_dt = 0.0) {
  const Grid& g = s.n.grid();
  const Real aeff = p.A > 0.0 ? p.A : 1.0;
  Real sx = (p.terms.shear && p.A > 0.0) ? 1.0 : 0.0;
  sx += (s.u1.max_abs() + derivative(s.c, Axis::X).max_abs()) / aeff;
  const Real sy =
      (s.u2.max_abs() + derivative(s.c, Axis::Y).max_abs()) / aeff;
  const Real sz =
      (s.u3.max_abs() + derivative(s.c, Axis::Z).max_abs()) / aeff;
  Real dt = p.dt_max;
  if (sx > 0.0) dt = std::min(dt, p.cfl * g.dx() / sx);
  if (sy > 0.0) dt = std::min(dt, p.cfl * g.min_dy() / sy);
  if (sz > 0.0) dt = std::min(dt, p.cfl * g.dz() / sz);
  if (prev_dt > 0.0) dt = std::min(dt, 2.0 * prev_dt);
  if (dt < p.dt_min)
    throw SolverError("adapt_dt: CFL proposal " + std::to_string(dt) +
                      " fell below dt_min (likely blow-up or stiffness)");
  return dt;
}

/// Optional hooks for manufactured-solution runs: extra density forcing
/// evaluated at the stage times.
struct StepHooks {
  std::function<PhysicalField(Real)> force_n;
};

class Stepper {
 public:
  Stepper(GridPtr grid, Params params, StepHooks hooks = {})
      : grid_(std::move(grid)),
        p_(params),
        hooks_(std::move(hooks)),
        hs_(grid_),
        ch_(grid_) {
    p_.validate();
    const Grid& g = *grid_;
    for (Index i = 0; i < g.nx(); ++i)
      for (Index k = 0; k < g.nz(); ++k)
        groups_[g.eta2(i, k)].push_back(g.col(i, k));
  }

  const Params& params() const { return p_; }
  const GridPtr& grid() const { return grid_; }
  Real last_dt() const { return last_dt_; }
  Real clipped_mass() const { return clipped_mass_; }

  /// Seed the adaptive pacing (the 2x growth cap base): used to start a run
  /// at the configured initial dt and to resume a run at its checkpointed dt.
  void seed_last_dt(Real dt) {
    if (!(dt >= 0.0) || !std::isfinite(dt))
      throw SolverError("seed_last_dt: dt must be finite and >= 0");
    last_dt_ = dt;
  }

  /// One adaptive step (dt from the CFL proposal).
  State step(const State& s) { return advance(s, adapt_dt(s, p_, last_dt_)); }

  /// One step with a caller-chosen dt (convergence studies, manufactured
  /// solutions).
  State step_fixed(const State& s, Real dt) { return advance(s, dt); }

 private:
  struct Spectra {
    SpectralField n, w, d;  ///< density, omega2, Delta u2
    PlaneR u10h, u10t, u20, u30;
  };
  struct Eval {
    SpectralField n, w, d;
    ZeroModeRhs z;
  };

  State advance(const State& s, Real dt) {
    const bool frozen_u = p_.A == 0.0;
    const bool shear = p_.terms.shear && !frozen_u;
    const Real gamma =
        p_.terms.diffusion ? 0.5 * dt * detail::inv_shear(p_) : 0.0;
    set_gamma(gamma);

    Spectra q = lift(s);
    if (shear) rotate(q, 0.5 * dt);

    State s0 = lower(q, s.t, frozen_u ? &s : nullptr);
    Eval e0 = eval_rhs(s0);
    Spectra qp = implicit_advance(q, e0, gamma, dt, frozen_u);
    State s1 = lower(qp, s.t + dt, frozen_u ? &s : nullptr);
    Eval e1 = eval_rhs(s1);
    average_into(e0, e1);
    Spectra qc = implicit_advance(q, e0, gamma, dt, frozen_u);

    if (shear) rotate(qc, 0.5 * dt);
    dealias(qc.n);
    detail::hermitian_symmetrize(qc.n);
    if (!frozen_u) {
      dealias(qc.w);
      dealias(qc.d);
      detail::hermitian_symmetrize(qc.w);
      detail::hermitian_symmetrize(qc.d);
      project_plane_divfree(ch_, qc.u20, qc.u30);
    }

    State out = lower(qc, s.t + dt, frozen_u ? &s : nullptr);
    if (!state_is_finite(out))
      throw SolverError("step: non-finite state at t = " +
                        std::to_string(out.t));
    if (p_.clip_negative_n && out.n.data().minCoeff() < 0.0) {
      PhysicalField deficit(grid_);
      deficit.data() = (-out.n.data()).cwiseMax(0.0);
      clipped_mass_ += integral(deficit);
      out.n.data() = out.n.data().cwiseMax(0.0);
      refresh_chemoattractant(hs_, out);
    }
    if (!frozen_u) check_divergence(out);
    last_dt_ = dt;
    return out;
  }

  Spectra lift(const State& s) {
    Spectra q{forward_transform(s.n),
              SpectralField(grid_),
              SpectralField(grid_),
              zero_mode_plane(s.u10_hat),
              zero_mode_plane(s.u10_tilde),
              zero_mode_plane(s.u2),
              zero_mode_plane(s.u3)};
    VorticityState vs = to_vorticity(forward_transform(s.u1),
                                     forward_transform(s.u2),
                                     forward_transform(s.u3));
    // The k1 = 0 section lives in the planes; keep the spectra clean.
    q.w = project_nonzero_mode(vs.omega2);
    q.d = project_nonzero_mode(vs.delta_u2);
    // The evolved representation lives in the 2/3-rule band: masking here
    // keeps every later operation (notably the shear phase rotation, which
    // has no real counterpart on the unpaired Nyquist columns) symmetric.
    dealias(q.n);
    dealias(q.w);
    dealias(q.d);
    const Grid& g = *grid_;
    q.u10h = detail::dealias_plane(g, q.u10h);
    q.u10t = detail::dealias_plane(g, q.u10t);
    q.u20 = detail::dealias_plane(g, q.u20);
    q.u30 = detail::dealias_plane(g, q.u30);
    return q;
  }

  /// Reconstruct a full State; with frozen velocity (A = 0) the velocity
  /// fields are copied from the reference state instead of re-derived.
  State lower(const Spectra& q, Real t, const State* frozen) {
    State out;
    out.t = t;
    out.n = backward_transform(q.n);
    out.c = backward_transform(solve_chemoattractant(hs_, q.n));
    if (frozen != nullptr) {
      out.u1 = frozen->u1;
      out.u2 = frozen->u2;
      out.u3 = frozen->u3;
      out.u10_hat = frozen->u10_hat;
      out.u10_tilde = frozen->u10_tilde;
      return out;
    }
    Velocity v = from_vorticity(
        ch_, VorticityState{q.w, q.d},
        ZeroModeVelocity{q.u10h + q.u10t, q.u20, q.u30});
    out.u1 = backward_transform(v.u1);
    out.u2 = backward_transform(v.u2);
    out.u3 = backward_transform(v.u3);
    out.u10_hat = broadcast_plane(grid_, q.u10h);
    out.u10_tilde = broadcast_plane(grid_, q.u10t);
    return out;
  }

  Eval eval_rhs(const State& s) {
    PhysicalField fn = detail::density_rhs(s, p_, /*include_shear=*/false);
    if (hooks_.force_n) fn += hooks_.force_n(s.t);
    Eval e{dealiased(forward_transform(fn)), SpectralField(grid_),
           SpectralField(grid_),
           ZeroModeRhs{PlaneR::Zero(grid_->ny(), grid_->nz()),
                       PlaneR::Zero(grid_->ny(), grid_->nz()),
                       PlaneR::Zero(grid_->ny(), grid_->nz()),
                       PlaneR::Zero(grid_->ny(), grid_->nz())}};
    if (p_.A > 0.0) {
      auto [rw, rd] = rhs_vorticity_system(s, p_);
      e.w = std::move(rw);
      e.d = std::move(rd);
      e.z = detail::zero_mode_rhs(s, p_, hs_);
    }
    return e;
  }

  static void average_into(Eval& a, const Eval& b) {
    a.n.data() = 0.5 * (a.n.data() + b.n.data());
    a.w.data() = 0.5 * (a.w.data() + b.w.data());
    a.d.data() = 0.5 * (a.d.data() + b.d.data());
    a.z.u10_hat = 0.5 * (a.z.u10_hat + b.z.u10_hat);
    a.z.u10_tilde = 0.5 * (a.z.u10_tilde + b.z.u10_tilde);
    a.z.u20 = 0.5 * (a.z.u20 + b.z.u20);
    a.z.u30 = 0.5 * (a.z.u30 + b.z.u30);
  }

  /// Exact shear sub-flow: multiply mode (k1, k3) at node y by
  /// exp(-i k1 y h).
  void rotate(Spectra& q, Real h) {
    const Grid& g = *grid_;
    for (Index i = 0; i < g.nx(); ++i) {
      const Index k1 = g.k1_of(i);
      if (k1 == 0) continue;
      VectorC ph(g.ny());
      for (Index j = 0; j < g.ny(); ++j)
        ph(j) = std::exp(Complex(0.0, -static_cast<Real>(k1) * g.y()(j) * h));
      for (Index k = 0; k < g.nz(); ++k) {
        const Index m = g.col(i, k);
        q.n.data().col(m).array() *= ph.array();
        q.w.data().col(m).array() *= ph.array();
        q.d.data().col(m).array() *= ph.array();
      }
    }
  }

  /// Crank-Nicolson diffusion with explicit increment dt * e:
  ///   (I - gamma Lap) q_new = (I + gamma Lap) q_old + dt * e.
  Spectra implicit_advance(const Spectra& q, const Eval& e, Real gamma,
                           Real dt, bool frozen_u) {
    Spectra r = q;
    r.n = advance_dirichlet(q.n, e.n, gamma, dt);
    if (!frozen_u) {
      r.w = advance_dirichlet(q.w, e.w, gamma, dt);
      r.d = advance_fourth_order(q.d, e.d, gamma, dt);
      r.u10h = advance_plane(q.u10h, e.z.u10_hat, gamma, dt);
      r.u10t = advance_plane(q.u10t, e.z.u10_tilde, gamma, dt);
      r.u20 = advance_plane(q.u20, e.z.u20, gamma, dt);
      r.u30 = advance_plane(q.u30, e.z.u30, gamma, dt);
    }
    return r;
  }

  SpectralField advance_dirichlet(const SpectralField& f,
                                  const SpectralField& e, Real gamma,
                                  Real dt) {
    if (gamma == 0.0) {
      SpectralField r = f;
      r.data() += dt * e.data();
      return r;
    }
    SpectralField rhs = detail::mode_laplacian(f);
    rhs.data() = f.data() + gamma * rhs.data() + dt * e.data();
    rhs.data() *= -1.0 / gamma;
    return ihs_->solve(1.0 / gamma, Bc::Dirichlet, rhs);
  }

  /// Advance Delta u2 through the clamped fourth-order form: solve
  ///   (I - gamma LapHat) LapHat u2_new = rhs   with u2 = d_y u2 = 0 rows,
  /// then store LapHat u2_new.
  SpectralField advance_fourth_order(const SpectralField& f,
                                     const SpectralField& e, Real gamma,
                                     Real dt) {
    if (gamma == 0.0) {
      SpectralField r = f;
      r.data() += dt * e.data();
      return r;
    }
    const Grid& g = *grid_;
    const Index n = g.ny();
    SpectralField rhs = detail::mode_laplacian(f);
    rhs.data() = f.data() + gamma * rhs.data() + dt * e.data();
    SpectralField out(grid_);
    for (const auto& [eta2, cols] : groups_) {
      const auto& lu = lu4(eta2);
      MatrixC b(n, static_cast<Index>(cols.size()));
      for (std::size_t c = 0; c < cols.size(); ++c)
        b.col(static_cast<Index>(c)) = rhs.data().col(cols[c]);
      b.row(0).setZero();
      b.row(1).setZero();
      b.row(n - 2).setZero();
      b.row(n - 1).setZero();
      MatrixC u2 = detail::lu_solve(lu, b);
      MatrixC lap = g.d2() * u2 - eta2 * u2;
      for (std::size_t c = 0; c < cols.size(); ++c)
        out.data().col(cols[c]) = lap.col(static_cast<Index>(c));
    }
    return out;
  }

  PlaneR advance_plane(const PlaneR& f, const PlaneR& e, Real gamma, Real dt) {
    if (gamma == 0.0) return f + dt * e;
    const Grid& g = *grid_;
    PlaneC cf = plane_fft_z(f), ce = plane_fft_z(e);
    PlaneC out(g.ny(), g.nz());
    for (Index k = 0; k < g.nz(); ++k) {
      const Real k3sq = static_cast<Real>(g.k3_of(k) * g.k3_of(k));
      VectorC lap = g.d2() * cf.col(k) - k3sq * cf.col(k);
      VectorC rhs = cf.col(k) + gamma * lap + dt * ce.col(k);
      rhs *= -1.0 / gamma;
      out.col(k) = ihs_->solve_mode(k3sq, 1.0 / gamma, Bc::Dirichlet, rhs);
    }
    return plane_ifft_z(out);
  }

  void set_gamma(Real gamma) {
    if (gamma == cached_gamma_) return;
    cached_gamma_ = gamma;
    ihs_.emplace(grid_);
    lu4_.clear();
  }

  const Eigen::PartialPivLU<MatrixR>& lu4(Real eta2) {
    auto it = lu4_.find(eta2);
    if (it != lu4_.end()) return it->second;
    const Grid& g = *grid_;
    const Index n = g.ny();
    MatrixR lap = g.d2();
    lap.diagonal().array() -= eta2;
    MatrixR m = lap - cached_gamma_ * (lap * lap).eval();
    m.row(0).setZero();
    m(0, 0) = 1.0;
    m.row(1) = g.d1().row(0);
    m.row(n - 2) = g.d1().row(n - 1);
    m.row(n - 1).setZero();
    m(n - 1, n - 1) = 1.0;
    return lu4_.emplace(eta2, Eigen::PartialPivLU<MatrixR>(m)).first->second;
  }

  void check_divergence(const State& s) {
    SpectralField u1 = forward_transform(s.u1);
    SpectralField u2 = forward_transform(s.u2);
    SpectralField u3 = forward_transform(s.u3);
    const Real dl = divergence_l2(u1, u2, u3);
    Real gl_sq = 0.0;
    for (const SpectralField* f : {&u1, &u2, &u3})
      for (Axis ax : {Axis::X, Axis::Y, Axis::Z})
        gl_sq += std::pow(l2_norm(derivative(*f, ax)), 2);
    const Real gl = std::sqrt(gl_sq);
    if (dl > p_.tol_div * std::max(gl, 1e-12))
      throw SolverError("step: divergence residual " + std::to_string(dl) +
                        " exceeds tolerance against gradient norm " +
                        std::to_string(gl));
  }

  GridPtr grid_;
  Params p_;
  StepHooks hooks_;
  HelmholtzSolver hs_;                 ///< chemoattractant + pressure solves
  ClampedHelmholtz ch_;
  std::optional<HelmholtzSolver> ihs_; ///< implicit solves for current gamma
  std::map<Real, std::vector<Index>> groups_;
  std::map<Real, Eigen::PartialPivLU<MatrixR>> lu4_;
  Real cached_gamma_ = -1.0;
  Real last_dt_ = 0.0;
  Real clipped_mass_ = 0.0;
};

/// Convenience one-shot step; prefer a persistent Stepper for whole runs
/// (it caches factorisations across steps).
inline State step(const State& s, const Params& p) {
  Stepper st(s.n.grid_ptr(), p);
  return st.step(s);
}

}  // namespace pksns
