/// Per-mode elliptic solves in y.
///
/// Every periodic mode (k1,k3) reduces to a 1D boundary-value problem for the
/// operator  d_yy - eta^2 - sigma  on [-1,1].  Boundary conditions are imposed
/// by row replacement (first/last row of the collocation matrix), and LU
/// factorisations are cached keyed by (eta^2, sigma, bc).  Modes sharing eta^2
/// are solved together as a multi-column RHS.
///
/// The (0,0) Neumann problem (mean pressure mode) is singular up to constants;
/// it is solved in bordered form with a Clenshaw-Curtis zero-mean gauge row
/// after an explicit compatibility check on the data.
#pragma once

#include <map>
#include <optional>
#include <tuple>

#include "pksns/norms.hpp"

namespace pksns {

enum class Bc { Dirichlet, Neumann };

namespace detail {
/// Complex solve against a real factorisation: real and imaginary parts
/// are independent real systems.
inline MatrixC lu_solve(const Eigen::PartialPivLU<MatrixR>& lu, const MatrixC& b) {
  const MatrixR re = lu.solve(MatrixR(b.real()));
  const MatrixR im = lu.solve(MatrixR(b.imag()));
  return re.cast<Complex>() + Complex(0.0, 1.0) * im.cast<Complex>();
}
}  // namespace detail

class HelmholtzSolver {
 public:
  explicit HelmholtzSolver(GridPtr grid) : grid_(std::move(grid)) {
    // group spectral columns by eta^2 so each factorisation solves a block
    const Grid& g = *grid_;
    for (Index i = 0; i < g.nx(); ++i)
      for (Index k = 0; k < g.nz(); ++k)
        groups_[g.eta2(i, k)].push_back(g.col(i, k));
  }

  const Grid& grid() const { return *grid_; }

  /// Solve (d_yy - eta2 - sigma) u = rhs for one mode profile.
  VectorC solve_mode(Real eta2, Real sigma, Bc bc, const VectorC& rhs,
                     Complex lo = Complex(0, 0), Complex hi = Complex(0, 0)) {
    if (bc == Bc::Neumann && eta2 + sigma == 0.0)
      return solve_neumann_mean_mode(rhs);
    const auto& lu = factor(eta2, sigma, bc);
    VectorC b = rhs;
    b(0) = lo;
    b(grid_->ny() - 1) = hi;
    return detail::lu_solve(lu, b);
  }

  /// Solve per mode across a whole spectral field with homogeneous data.
  SpectralField solve(Real sigma, Bc bc, const SpectralField& rhs) {
    const Grid& g = *grid_;
    SpectralField out(rhs.grid_ptr());
    for (const auto& [eta2, cols] : groups_) {
      if (bc == Bc::Neumann && eta2 + sigma == 0.0) {
        for (Index m : cols)
          out.data().col(m) = solve_neumann_mean_mode(rhs.data().col(m));
        continue;
      }
      const auto& lu = factor(eta2, sigma, bc);
      MatrixC b(g.ny(), static_cast<Index>(cols.size()));
      for (size_t c = 0; c < cols.size(); ++c) b.col(c) = rhs.data().col(cols[c]);
      b.row(0).setZero();
      b.row(g.ny() - 1).setZero();
      MatrixC x = detail::lu_solve(lu, b);
      for (size_t c = 0; c < cols.size(); ++c) out.data().col(cols[c]) = x.col(c);
    }
    return out;
  }

  /// Compatibility measure for Neumann data on the mean mode: int_I rhs dy
  /// must vanish for  d_yy p = rhs, p'(+-1) = 0  to be solvable.
  Real neumann_compatibility(const VectorC& rhs) const {
    Complex acc(0, 0);
    for (Index j = 0; j < grid_->ny(); ++j) acc += grid_->wy()(j) * rhs(j);
    return std::abs(acc);
  }

 private:
  using Key = std::tuple<Real, Real, int>;

  const Eigen::PartialPivLU<MatrixR>& factor(Real eta2, Real sigma, Bc bc) {
    const Key key{eta2, sigma, static_cast<int>(bc)};
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    const Grid& g = *grid_;
    MatrixR m = g.d2();
    m.diagonal().array() -= (eta2 + sigma);
    if (bc == Bc::Dirichlet) {
      m.row(0).setZero();
      m(0, 0) = 1.0;
      m.row(g.ny() - 1).setZero();
      m(g.ny() - 1, g.ny() - 1) = 1.0;
    } else {
      m.row(0) = g.d1().row(0);
      m.row(g.ny() - 1) = g.d1().row(g.ny() - 1);
    }
    return cache_.emplace(key, Eigen::PartialPivLU<MatrixR>(m)).first->second;
  }

  /// Bordered solve of the gauged mean-mode Neumann problem:
  ///   [ M  e ] [p     ]   [rhs]         gauge: integral of p = 0,
  ///   [ w' 0 ] [lambda] = [0  ]         e = interior-row indicator.
  VectorC solve_neumann_mean_mode(const VectorC& rhs) {
    const Grid& g = *grid_;
    const Index n = g.ny();
    const Real compat = neumann_compatibility(rhs);
    const Real scale = std::max(1.0, rhs.cwiseAbs().maxCoeff());
    if (compat > 1e-8 * scale)
      throw SolverError(
          "pressure (0,0) mode: incompatible Neumann data, compatibility "
          "integral " + std::to_string(compat));
    if (!mean_lu_) {
      MatrixR m = MatrixR::Zero(n + 1, n + 1);
      m.topLeftCorner(n, n) = g.d2();
      m.row(0).head(n) = g.d1().row(0);
      m.row(n - 1).head(n) = g.d1().row(n - 1);
      for (Index j = 1; j < n - 1; ++j) m(j, n) = 1.0;
      m.row(n).head(n) = g.wy().transpose();
      mean_lu_.emplace(m);
    }
    VectorC b = VectorC::Zero(n + 1);
    b.segment(1, n - 2) = rhs.segment(1, n - 2);
    const VectorC x = detail::lu_solve(*mean_lu_, b);
    return x.head(n);
  }

  GridPtr grid_;
  std::map<Real, std::vector<Index>> groups_;
  std::map<Key, Eigen::PartialPivLU<MatrixR>> cache_;
  std::optional<Eigen::PartialPivLU<MatrixR>> mean_lu_;
};

// ---- chemoattractant ------------------------------------------------------

/// Solve (Delta - 1) c = -n per mode with c(+-1) = 0.
inline SpectralField solve_chemoattractant(HelmholtzSolver& hs,
                                           const SpectralField& n_hat) {
  SpectralField rhs = n_hat;
  rhs.data() *= Complex(-1.0, 0.0);
  return hs.solve(/*sigma=*/1.0, Bc::Dirichlet, rhs);
}

inline PhysicalField solve_chemoattractant(HelmholtzSolver& hs,
                                           const PhysicalField& n) {
  return backward_transform(solve_chemoattractant(hs, forward_transform(n)));
}

/// Zero-mode variant on a (y,z) plane: per-k3 solves of
/// (d_yy - k3^2 - 1) c = -n with c(+-1) = 0.
inline PlaneR solve_chemoattractant_plane(HelmholtzSolver& hs, const PlaneR& n0) {
  const Grid& g = hs.grid();
  PlaneC nh = plane_fft_z(n0);
  PlaneC ch(g.ny(), g.nz());
  for (Index k = 0; k < g.nz(); ++k) {
    const Real k3 = static_cast<Real>(g.k3_of(k));
    ch.col(k) = hs.solve_mode(k3 * k3, 1.0, Bc::Dirichlet, (-nh.col(k)).eval());
  }
  return plane_ifft_z(ch);
}

// ---- pressure -------------------------------------------------------------

struct PressureSplit {
  SpectralField p1;  ///< from the lift-up source      Delta P = -2A d_x u2
  SpectralField p2;  ///< from the buoyant density     Delta P = d_x n
  SpectralField p3;  ///< from the quadratic transport Delta P = -div(u.grad u)
};

/// Assemble and solve the three Poisson problems of the pressure splitting.
/// All use homogeneous Neumann wall data (the P3 wall datum is the wall value
/// of the normal nonlinear flux, which vanishes under no-slip).
inline PressureSplit solve_pressure(HelmholtzSolver& hs, const SpectralField& u1,
                                    const SpectralField& u2,
                                    const SpectralField& u3,
                                    const SpectralField& n_hat, Real A) {
  const GridPtr grid = u2.grid_ptr();

  SpectralField rhs1 = derivative(u2, Axis::X);
  rhs1.data() *= Complex(-2.0 * A, 0.0);
  SpectralField rhs2 = derivative(n_hat, Axis::X);

  // -div(u . grad u): assemble the advective fluxes pseudo-spectrally
  PhysicalField pu1 = backward_transform(u1), pu2 = backward_transform(u2),
                pu3 = backward_transform(u3);
  auto advect = [&](const SpectralField& c) {
    PhysicalField gx = backward_transform(derivative(c, Axis::X));
    PhysicalField gy = backward_transform(derivative(c, Axis::Y));
    PhysicalField gz = backward_transform(derivative(c, Axis::Z));
    PhysicalField out(grid);
    out.data() = pu1.data().cwiseProduct(gx.data()) +
                 pu2.data().cwiseProduct(gy.data()) +
                 pu3.data().cwiseProduct(gz.data());
    SpectralField s = forward_transform(out);
    dealias(s);
    return s;
  };
  SpectralField a1 = advect(u1), a2 = advect(u2), a3 = advect(u3);
  SpectralField rhs3 = derivative(a1, Axis::X);
  rhs3 += derivative(a2, Axis::Y);
  rhs3 += derivative(a3, Axis::Z);
  rhs3.data() *= Complex(-1.0, 0.0);

  PressureSplit out{SpectralField(grid), SpectralField(grid), SpectralField(grid)};
  // name each piece in compatibility failures
  auto solve_named = [&](SpectralField& dst, const SpectralField& rhs,
                         const char* name) {
    try {
      dst = hs.solve(/*sigma=*/0.0, Bc::Neumann, rhs);
    } catch (const SolverError& e) {
      throw SolverError(std::string(name) + ": " + e.what());
    }
  };
  solve_named(out.p1, rhs1, "pressure P1 (lift-up)");
  solve_named(out.p2, rhs2, "pressure P2 (density)");
  solve_named(out.p3, rhs3, "pressure P3 (transport)");
  return out;
}

// ---- energy identity ------------------------------------------------------

struct EnergyIdentityResidual {
  Real full;     ///< ||Delta c0||^2 + 2||grad c0||^2 + ||c0||^2 vs ||n0||^2
  Real mean;     ///< same identity for the (0,0) pair
  Real varying;  ///< same identity for the (0,neq) pair
  Real max() const { return std::max({full, mean, varying}); }
};

/// Relative residuals of the exact elliptic energy identities linking the
/// zero-mode density and chemoattractant.
inline EnergyIdentityResidual energy_identity_residual(HelmholtzSolver& hs,
                                                       const PlaneR& n0) {
  const Grid& g = hs.grid();
  auto identity = [&](const PlaneR& np) {
    const PlaneR cp = solve_chemoattractant_plane(hs, np);
    const PlaneR lap = g.d2() * cp + plane_dz(plane_dz(cp));
    const PlaneGrad grad = plane_grad(g, cp);
    const Real lhs = sq_l2(g, lap) + 2.0 * (sq_l2(g, grad.dy) + sq_l2(g, grad.dz)) +
                     sq_l2(g, cp);
    const Real rhs = sq_l2(g, np);
    return std::abs(lhs - rhs) / std::max(rhs, 1e-300);
  };
  const ZModeSplit split = project_z_modes(n0);
  const PlaneR mean_plane = split.mean.replicate(1, g.nz());
  return {identity(n0), identity(mean_plane), identity(split.varying)};
}

}  // namespace pksns
