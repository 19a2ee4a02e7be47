// Tests for the {omega2, Delta u2} <-> velocity change of variables:
// closed-form single-mode algebra, round trips on random solenoidal fields,
// the underdetermined (0,0) mode, the zero-mode streamfunction projection,
// and the five recovery inequalities with fitted constants.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "pksns/decomposition.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace pksns;
using fixtures::random_vorticity;

namespace {

ZeroModeVelocity zero_planes(const Grid& g) {
  return {PlaneR::Zero(g.ny(), g.nz()), PlaneR::Zero(g.ny(), g.nz()),
          PlaneR::Zero(g.ny(), g.nz())};
}

ZeroModeVelocity extract_zero_planes(const Velocity& u) {
  const Grid& g = u.u1.grid();
  PlaneC c1(g.ny(), g.nz()), c2(g.ny(), g.nz()), c3(g.ny(), g.nz());
  for (Index k = 0; k < g.nz(); ++k) {
    c1.col(k) = u.u1.data().col(g.col(0, k));
    c2.col(k) = u.u2.data().col(g.col(0, k));
    c3.col(k) = u.u3.data().col(g.col(0, k));
  }
  return {plane_ifft_z(c1), plane_ifft_z(c2), plane_ifft_z(c3)};
}

Real max_diff(const SpectralField& a, const SpectralField& b) {
  return (a.data() - b.data()).cwiseAbs().maxCoeff();
}

}  // namespace

TEST_CASE("to_vorticity: closed forms") {
  auto grid = make_grid(16, 33, 16);
  ClampedHelmholtz ch(grid);

  SUBCASE("zero velocity maps to zero") {
    SpectralField z(grid);
    VorticityState vs = to_vorticity(z, z, z);
    CHECK(vs.omega2.max_abs() == 0.0);
    CHECK(vs.delta_u2.max_abs() == 0.0);
  }

  SUBCASE("u1 = sin(z) f(y), u3 = 0 gives omega2 = cos(z) f(y)") {
    PhysicalField u1 = sample_field(
        grid, [](Real, Real y, Real z) { return std::sin(z) * (1.0 - y * y); });
    SpectralField z(grid);
    VorticityState vs = to_vorticity(forward_transform(u1), z, z);
    PhysicalField w = backward_transform(vs.omega2);
    PhysicalField expected = sample_field(
        grid, [](Real, Real y, Real z) { return std::cos(z) * (1.0 - y * y); });
    CHECK((w.data() - expected.data()).cwiseAbs().maxCoeff() < 1e-12);
  }

  SUBCASE("delta_u2 applies the mode Laplacian") {
    // u2 = (1-y^2)^2 cos(x): Delta u2 = (d_yy - 1) u2 exactly (polynomial y).
    PhysicalField u2 = sample_field(grid, [](Real x, Real y, Real) {
      Real q = 1.0 - y * y;
      return q * q * std::cos(x);
    });
    SpectralField z(grid);
    VorticityState vs = to_vorticity(z, forward_transform(u2), z);
    PhysicalField got = backward_transform(vs.delta_u2);
    PhysicalField expected = sample_field(grid, [](Real x, Real y, Real) {
      Real q = 1.0 - y * y;
      return (-4.0 + 12.0 * y * y - q * q) * std::cos(x);
    });
    CHECK((got.data() - expected.data()).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("from_vorticity: single-mode closed forms") {
  auto grid = make_grid(16, 33, 16);
  const Grid& g = *grid;
  ClampedHelmholtz ch(grid);

  SUBCASE("k1=1, k3=0: u3 = -omega2 / (i k1)") {
    VorticityState vs{SpectralField(grid), SpectralField(grid)};
    const Index m = g.col(g.index_of_k1(1), g.index_of_k3(0));
    const ArrayR y = g.y().array();
    VectorC w = ((1.0 - y.square()) * (0.5 + y)).matrix().cast<Complex>();
    vs.omega2.data().col(m) = w;
    Velocity u = from_vorticity(ch, vs);
    VectorC expected = -w / Complex(0.0, 1.0);
    CHECK((u.u3.data().col(m) - expected).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(u.u1.data().col(m).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(u.u2.data().col(m).cwiseAbs().maxCoeff() < 1e-12);
  }

  SUBCASE("k1=1, k3=1: shear-perturbation mode with clamped u2") {
    // u2 = (1-y^2)^2, omega2 = sin(pi y); with g = -d_y u2 = 4y(1-y^2) the
    // 2x2 inversion gives u1 = -i(g + w)/2, u3 = -i(g - w)/2.
    VorticityState vs{SpectralField(grid), SpectralField(grid)};
    const Index m = g.col(g.index_of_k1(1), g.index_of_k3(1));
    const ArrayR y = g.y().array();
    VectorR u2 = (1.0 - y.square()).square().matrix();
    vs.delta_u2.data().col(m) = (g.d2() * u2 - 2.0 * u2).cast<Complex>();
    vs.omega2.data().col(m) = (pi * y).sin().matrix().cast<Complex>();
    Velocity u = from_vorticity(ch, vs);
    const ArrayR gd = 4.0 * y * (1.0 - y.square());
    const ArrayR w = (pi * y).sin();
    VectorC e1 = (Complex(0, -0.5) * (gd + w)).matrix();
    VectorC e3 = (Complex(0, -0.5) * (gd - w)).matrix();
    CHECK((u.u2.data().col(m) - u2.cast<Complex>()).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((u.u1.data().col(m) - e1).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((u.u3.data().col(m) - e3).cwiseAbs().maxCoeff() < 1e-9);
  }

  SUBCASE("zero vorticity state gives zero velocity") {
    VorticityState vs{SpectralField(grid), SpectralField(grid)};
    Velocity u = from_vorticity(ch, vs);
    CHECK(u.u1.max_abs() == 0.0);
    CHECK(u.u2.max_abs() == 0.0);
    CHECK(u.u3.max_abs() == 0.0);
  }
}

TEST_CASE("from_vorticity: (0,0) mode is refused") {
  auto grid = make_grid(16, 33, 16);
  const Grid& g = *grid;
  ClampedHelmholtz ch(grid);
  VorticityState vs{SpectralField(grid), SpectralField(grid)};
  vs.delta_u2.data()(3, g.col(0, 0)) = Complex(0.5, 0.0);
  CHECK_THROWS_WITH_AS(from_vorticity(ch, vs),
                       doctest::Contains("underdetermined"), SolverError);
  // With zero-mode planes supplied the same state is fine: the planes are
  // authoritative for the whole k1 = 0 section.
  Velocity u = from_vorticity(ch, vs, zero_planes(g));
  CHECK(u.u2.max_abs() == 0.0);
}

TEST_CASE("round trips on random solenoidal fields") {
  for (auto [nx, ny, nz] : {std::tuple<Index, Index, Index>{16, 33, 16},
                            std::tuple<Index, Index, Index>{32, 65, 32}}) {
    auto grid = make_grid(nx, ny, nz);
    const Grid& g = *grid;
    ClampedHelmholtz ch(grid);
    for (unsigned seed : {11u, 12u, 13u}) {
      VorticityState vs = random_vorticity(grid, seed);

      // Nontrivial zero mode: u1 plane free (wall-zero), (u2,u3) planes made
      // exactly divergence-free by the streamfunction projection.
      ZeroModeVelocity planes{oracle::random_smooth_plane(g, seed + 100, true),
                              oracle::random_smooth_plane(g, seed + 200, true),
                              oracle::random_smooth_plane(g, seed + 300, true)};
      project_plane_divfree(ch, planes.u2, planes.u3);

      Velocity u = from_vorticity(ch, vs, planes);
      const Real scale = std::max({u.u1.max_abs(), u.u2.max_abs(), u.u3.max_abs()});

      // Reconstructed fields are real (Hermitian spectra) and divergence-free.
      CHECK(hermitian_defect(u.u1) < 1e-11 * scale);
      CHECK(hermitian_defect(u.u2) < 1e-11 * scale);
      CHECK(hermitian_defect(u.u3) < 1e-11 * scale);
      CHECK(divergence_max(u.u1, u.u2, u.u3) < 1e-10 * scale);

      // Wall rows vanish for every component.
      for (const SpectralField* f : {&u.u1, &u.u2, &u.u3}) {
        CHECK(f->data().row(0).cwiseAbs().maxCoeff() < 1e-10 * scale);
        CHECK(f->data().row(g.ny() - 1).cwiseAbs().maxCoeff() < 1e-10 * scale);
      }

      // velocity -> vorticity reproduces the state on its support, and the
      // full round trip with re-extracted zero planes reproduces the velocity.
      VorticityState vs2 = to_vorticity(u.u1, u.u2, u.u3);
      for (Index i = 0; i < g.nx(); ++i) {
        if (g.k1_of(i) == 0) continue;
        for (Index k = 0; k < g.nz(); ++k) {
          const Index m = g.col(i, k);
          CHECK((vs2.omega2.data().col(m) - vs.omega2.data().col(m))
                    .cwiseAbs()
                    .maxCoeff() < 1e-9);
          // Delta u2 agrees away from the four sacrificed tau rows; on them
          // the input was arbitrary and the clamped solve replaced it.
          const Index rows = g.ny() - 4;
          CHECK((vs2.delta_u2.data().col(m) - vs.delta_u2.data().col(m))
                    .segment(2, rows)
                    .cwiseAbs()
                    .maxCoeff() < 1e-7);
        }
      }
      Velocity u2 = from_vorticity(ch, vs2, extract_zero_planes(u));
      CHECK(max_diff(u.u1, u2.u1) < 1e-9 * std::max(1.0, scale));
      CHECK(max_diff(u.u2, u2.u2) < 1e-9 * std::max(1.0, scale));
      CHECK(max_diff(u.u3, u2.u3) < 1e-9 * std::max(1.0, scale));

      // to_vorticity o from_vorticity o to_vorticity = to_vorticity.
      VorticityState vs3 = to_vorticity(u2.u1, u2.u2, u2.u3);
      CHECK(max_diff(vs3.omega2, vs2.omega2) < 1e-9 * std::max(1.0, scale));
      CHECK(max_diff(vs3.delta_u2, vs2.delta_u2) <
            1e-7 * std::max(1.0, scale));
    }
  }
}

TEST_CASE("zero-mode streamfunction projection") {
  auto grid = make_grid(16, 33, 16);
  const Grid& g = *grid;
  ClampedHelmholtz ch(grid);
  // Wall-zero inputs, as the dynamics supplies: the z-mean column of u3 is
  // preserved untouched (trivially divergence-free), so its wall values are
  // the input's own.
  PlaneR u2 = oracle::random_smooth_plane(g, 21, false);
  PlaneR u3 = oracle::random_smooth_plane(g, 22, true);
  project_plane_divfree(ch, u2, u3);
  const Real scale = std::max(u2.cwiseAbs().maxCoeff(), u3.cwiseAbs().maxCoeff());

  SUBCASE("discrete divergence and wall values vanish") {
    PlaneC c2 = plane_fft_z(u2), c3 = plane_fft_z(u3);
    Real div = 0.0;
    for (Index k = 0; k < g.nz(); ++k) {
      const Complex b(0.0, static_cast<Real>(g.k3_of(k)));
      div = std::max(div,
                     (g.d1() * c2.col(k) + b * c3.col(k)).cwiseAbs().maxCoeff());
    }
    CHECK(div < 1e-11 * scale);
    CHECK(u2.row(0).cwiseAbs().maxCoeff() < 1e-11 * scale);
    CHECK(u2.row(g.ny() - 1).cwiseAbs().maxCoeff() < 1e-11 * scale);
    CHECK(u3.row(0).cwiseAbs().maxCoeff() < 1e-11 * scale);
    CHECK(u3.row(g.ny() - 1).cwiseAbs().maxCoeff() < 1e-11 * scale);
    // d_y u2 also vanishes at the walls (tau rows of the psi solve).
    PlaneR dyu2 = g.d1() * u2;
    CHECK(dyu2.row(0).cwiseAbs().maxCoeff() < 1e-10 * scale);
    CHECK(dyu2.row(g.ny() - 1).cwiseAbs().maxCoeff() < 1e-10 * scale);
  }

  SUBCASE("projection is idempotent") {
    PlaneR v2 = u2, v3 = u3;
    project_plane_divfree(ch, v2, v3);
    CHECK((v2 - u2).cwiseAbs().maxCoeff() < 1e-10 * scale);
    CHECK((v3 - u3).cwiseAbs().maxCoeff() < 1e-10 * scale);
  }

  SUBCASE("k3 = 0 column: u2 mean is removed, u3 mean kept") {
    PlaneR keep = oracle::random_smooth_plane(g, 23, true);
    // u3's z-mean column survives untouched; u2's is zeroed.
    PlaneR v2 = PlaneR::Constant(g.ny(), g.nz(), 0.7), v3 = keep;
    project_plane_divfree(ch, v2, v3);
    PlaneC c3k = plane_fft_z(keep), c3v = plane_fft_z(v3);
    CHECK((c3v.col(0) - c3k.col(0)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(plane_fft_z(v2).col(0).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("recovery inequalities: fitted constants stable under refinement") {
  // The five velocity-transform bounds, written as LHS <= C (||a|| + ||b||).
  // The first two are discrete identities in squared form:
  //   ||(dx,dz) u||^2 = ||omega2||^2 + ||grad u2||^2, and the same weighted
  // by k1^2; the rest hold with C = 1 up to quadrature.  Fitted constants
  // are frozen per grid and compared across a refinement.
  auto lhs_pair_sq = [](const SpectralField& f) {
    return std::pow(l2_norm(derivative(f, Axis::X)), 2) +
           std::pow(l2_norm(derivative(f, Axis::Z)), 2);
  };
  auto grad_sq = [](const SpectralField& f) {
    return std::pow(l2_norm(derivative(f, Axis::X)), 2) +
           std::pow(l2_norm(derivative(f, Axis::Y)), 2) +
           std::pow(l2_norm(derivative(f, Axis::Z)), 2);
  };
  auto laplacian = [](const SpectralField& f) {
    SpectralField lap = derivative(f, Axis::X, 2);
    lap += derivative(f, Axis::Y, 2);
    lap += derivative(f, Axis::Z, 2);
    return lap;
  };

  std::array<Real, 5> fitted_lo{}, fitted_hi{};
  for (auto [nx, ny, nz, out] :
       {std::tuple<Index, Index, Index, std::array<Real, 5>*>{16, 33, 16,
                                                              &fitted_lo},
        std::tuple<Index, Index, Index, std::array<Real, 5>*>{32, 65, 32,
                                                              &fitted_hi}}) {
    auto grid = make_grid(nx, ny, nz);
    ClampedHelmholtz ch(grid);
    std::array<Real, 5>& fit = *out;
    fit.fill(0.0);
    for (unsigned seed : {31u, 32u, 33u, 34u}) {
      VorticityState vs = random_vorticity(grid, seed);
      Velocity u = from_vorticity(ch, vs);
      const SpectralField& w = vs.omega2;
      SpectralField dxw = derivative(w, Axis::X);
      SpectralField dzu2 = derivative(u.u2, Axis::Z);

      // (1) ||(dx,dz) u|| <= C (||omega2|| + ||grad u2||), an identity in
      // squared form.
      const Real lhs1_sq =
          lhs_pair_sq(u.u1) + lhs_pair_sq(u.u2) + lhs_pair_sq(u.u3);
      const Real rhs1_sq = std::pow(l2_norm(w), 2) + grad_sq(u.u2);
      CHECK(lhs1_sq == doctest::Approx(rhs1_sq).epsilon(1e-9));
      fit[0] = std::max(fit[0], std::sqrt(lhs1_sq) /
                                    (l2_norm(w) + std::sqrt(grad_sq(u.u2))));

      // (2) same bound for the streamwise derivative; also an identity.
      SpectralField dxu1 = derivative(u.u1, Axis::X);
      SpectralField dxu2 = derivative(u.u2, Axis::X);
      SpectralField dxu3 = derivative(u.u3, Axis::X);
      const Real lhs2_sq =
          lhs_pair_sq(dxu1) + lhs_pair_sq(dxu2) + lhs_pair_sq(dxu3);
      const Real rhs2_sq = std::pow(l2_norm(dxw), 2) + grad_sq(dxu2);
      CHECK(lhs2_sq == doctest::Approx(rhs2_sq).epsilon(1e-9));
      fit[1] = std::max(fit[1], std::sqrt(lhs2_sq) /
                                    (l2_norm(dxw) + std::sqrt(grad_sq(dxu2))));

      // (3) wall-normal derivative against ||d_y omega2|| + ||Delta u2||.
      SpectralField dyu1 = derivative(u.u1, Axis::Y);
      SpectralField dyu2 = derivative(u.u2, Axis::Y);
      SpectralField dyu3 = derivative(u.u3, Axis::Y);
      const Real lhs3 = std::sqrt(lhs_pair_sq(dyu1) + lhs_pair_sq(dyu2) +
                                  lhs_pair_sq(dyu3));
      const Real rhs3 =
          l2_norm(derivative(w, Axis::Y)) + l2_norm(laplacian(u.u2));
      fit[2] = std::max(fit[2], lhs3 / rhs3);

      // (4) for j in {x, z}: ||(dx,dz) d_j grad u|| against
      // ||d_j grad omega2|| + ||d_j Delta u2||.
      for (Axis j : {Axis::X, Axis::Z}) {
        Real lhs4_sq = 0.0;
        for (const SpectralField* comp : {&u.u1, &u.u2, &u.u3}) {
          SpectralField dj = derivative(*comp, j);
          for (Axis l : {Axis::X, Axis::Y, Axis::Z})
            lhs4_sq += lhs_pair_sq(derivative(dj, l));
        }
        SpectralField djw = derivative(w, j);
        const Real rhs4 = std::sqrt(grad_sq(djw)) +
                          l2_norm(derivative(laplacian(u.u2), j));
        fit[3] = std::max(fit[3], std::sqrt(lhs4_sq) / rhs4);
      }

      // (5) ||(dx^2, dz^2) u3|| against ||dx omega2|| + ||dz grad u2||.
      const Real lhs5 =
          std::sqrt(std::pow(l2_norm(derivative(u.u3, Axis::X, 2)), 2) +
                    std::pow(l2_norm(derivative(u.u3, Axis::Z, 2)), 2));
      const Real rhs5 = l2_norm(dxw) + std::sqrt(grad_sq(dzu2));
      fit[4] = std::max(fit[4], lhs5 / rhs5);
    }
    for (Real c : fit) {
      CHECK(c > 0.15);   // the bound is actually exercised
      CHECK(c < 1.05);   // and holds with the analytic constant
    }
  }
  for (std::size_t i = 0; i < 5; ++i) {
    CAPTURE(i);
    CHECK(std::abs(fitted_hi[i] - fitted_lo[i]) <=
          0.2 * std::max(fitted_hi[i], fitted_lo[i]));
  }
}
