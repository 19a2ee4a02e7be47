/// Dense channel fields.  A Field3 stores one scalar unknown on the full grid
/// as an Ny x (Nx*Nz) Eigen matrix: row j is the y-node, column i*Nz + k is
/// either the collocation pencil (x_i, z_k) (physical) or the Fourier mode
/// (k1(i), k3(k)) (spectral).  Columns are contiguous, so per-mode y-operators
/// are single GEMMs against the grid's differentiation matrices.
#pragma once

#include <utility>

#include "pksns/grid.hpp"
#include "pksns/types.hpp"

namespace pksns {

template <typename Scalar>
class Field3 {
 public:
  Field3() = default;
  explicit Field3(GridPtr grid)
      : grid_(std::move(grid)),
        data_(Matrix<Scalar>::Zero(grid_->ny(), grid_->num_modes())) {}
  Field3(GridPtr grid, Matrix<Scalar> data)
      : grid_(std::move(grid)), data_(std::move(data)) {
    if (data_.rows() != grid_->ny() || data_.cols() != grid_->num_modes())
      throw SolverError("Field3: data shape does not match grid");
  }

  const Grid& grid() const { return *grid_; }
  const GridPtr& grid_ptr() const { return grid_; }
  const Matrix<Scalar>& data() const { return data_; }
  Matrix<Scalar>& data() { return data_; }

  Scalar& operator()(Index i, Index j, Index k) {
    return data_(j, grid_->col(i, k));
  }
  Scalar operator()(Index i, Index j, Index k) const {
    return data_(j, grid_->col(i, k));
  }

  void set_zero() { data_.setZero(); }
  Real max_abs() const {
    return data_.size() == 0 ? 0.0 : data_.cwiseAbs().maxCoeff();
  }
  bool is_finite() const { return data_.allFinite(); }

  Field3& operator+=(const Field3& o) { data_ += o.data_; return *this; }
  Field3& operator-=(const Field3& o) { data_ -= o.data_; return *this; }
  Field3& operator*=(Scalar s) { data_ *= s; return *this; }

  friend Field3 operator+(Field3 a, const Field3& b) { return a += b; }
  friend Field3 operator-(Field3 a, const Field3& b) { return a -= b; }
  friend Field3 operator*(Scalar s, Field3 a) { return a *= s; }

 private:
  GridPtr grid_;
  Matrix<Scalar> data_;
};

using PhysicalField = Field3<Real>;
using SpectralField = Field3<Complex>;

/// x-independent fields (zero mode, chemoattractant sections, ...) live on
/// the (y,z) plane as plain Ny x Nz Eigen matrices.
using PlaneR = MatrixR;
using PlaneC = MatrixC;

/// Sample an analytic function f(x,y,z) on the grid.
template <typename F>
PhysicalField sample_field(const GridPtr& grid, F&& f) {
  PhysicalField out(grid);
  for (Index i = 0; i < grid->nx(); ++i)
    for (Index k = 0; k < grid->nz(); ++k) {
      const Index m = grid->col(i, k);
      for (Index j = 0; j < grid->ny(); ++j)
        out.data()(j, m) = f(grid->x_node(i), grid->y()(j), grid->z_node(k));
    }
  return out;
}

/// Sample an analytic function g(y,z) on the (y,z) plane.
template <typename F>
PlaneR sample_plane(const Grid& grid, F&& f) {
  PlaneR out(grid.ny(), grid.nz());
  for (Index j = 0; j < grid.ny(); ++j)
    for (Index k = 0; k < grid.nz(); ++k)
      out(j, k) = f(grid.y()(j), grid.z_node(k));
  return out;
}

/// Broadcast a plane to a (x-independent) 3D field.
inline PhysicalField broadcast_plane(const GridPtr& grid, const PlaneR& p) {
  if (p.rows() != grid->ny() || p.cols() != grid->nz())
    throw SolverError("broadcast_plane: plane shape does not match grid");
  PhysicalField out(grid);
  for (Index i = 0; i < grid->nx(); ++i)
    out.data().middleCols(i * grid->nz(), grid->nz()) = p;
  return out;
}

}  // namespace pksns
