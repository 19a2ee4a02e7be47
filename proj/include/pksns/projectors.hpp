/// Mode projectors: x-average (zero mode), its complement, and the split of
/// an x-independent field into its (y)-only mean and z-varying remainder.
/// All are plain arithmetic means, so the projector algebra (idempotency,
/// complementarity, commutation with derivatives) holds to roundoff.
#pragma once

#include "pksns/field.hpp"
#include "pksns/transforms.hpp"

namespace pksns {

/// x-average of f as a (y,z) plane: f0(y,z) = (1/|T|) int f dx.
inline PlaneR zero_mode_plane(const PhysicalField& f) {
  const Grid& g = f.grid();
  PlaneR p = PlaneR::Zero(g.ny(), g.nz());
  for (Index i = 0; i < g.nx(); ++i)
    p += f.data().middleCols(i * g.nz(), g.nz());
  return p / static_cast<Real>(g.nx());
}

/// P0 f: the x-average broadcast back onto the 3D grid.
inline PhysicalField project_zero_mode(const PhysicalField& f) {
  return broadcast_plane(f.grid_ptr(), zero_mode_plane(f));
}

/// P_neq f = f - P0 f.
inline PhysicalField project_nonzero_mode(const PhysicalField& f) {
  return f - project_zero_mode(f);
}

/// Spectral counterparts: keep (or drop) the k1 = 0 columns.
inline SpectralField project_zero_mode(const SpectralField& f) {
  SpectralField out = f;
  const Grid& g = f.grid();
  for (Index i = 1; i < g.nx(); ++i)
    out.data().middleCols(i * g.nz(), g.nz()).setZero();
  return out;
}

inline SpectralField project_nonzero_mode(const SpectralField& f) {
  SpectralField out = f;
  out.data().middleCols(0, f.grid().nz()).setZero();
  return out;
}

struct ZModeSplit {
  VectorR mean;   ///< f_{(0,0)}(y): x- and z-average
  PlaneR varying; ///< f_{(0,neq)}(y,z) = f0 - f_{(0,0)}
};

/// Split an x-independent field into its z-mean and z-varying parts.
inline ZModeSplit project_z_modes(const PlaneR& f0) {
  ZModeSplit s;
  s.mean = f0.rowwise().mean();
  s.varying = f0.colwise() - s.mean;
  return s;
}

/// 3D overload; errors if the input actually depends on x.
inline ZModeSplit project_z_modes(const PhysicalField& f, Real tol = 1e-10) {
  const Grid& g = f.grid();
  const PlaneR p0 = zero_mode_plane(f);
  Real defect = 0.0;
  for (Index i = 0; i < g.nx(); ++i)
    defect = std::max(defect,
        (f.data().middleCols(i * g.nz(), g.nz()) - p0).cwiseAbs().maxCoeff());
  if (defect > tol * std::max(1.0, f.max_abs()))
    throw SolverError("project_z_modes: field depends on x (defect " +
                      std::to_string(defect) + ")");
  return project_z_modes(p0);
}

}  // namespace pksns
