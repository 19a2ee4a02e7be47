/// Shared scalar and linear-algebra aliases for the channel solver.
#pragma once

#include <Eigen/Dense>
#include <complex>
#include <stdexcept>
#include <string>

namespace pksns {

using Real = double;
using Complex = std::complex<Real>;
using Index = Eigen::Index;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using MatrixR = Matrix<Real>;
using MatrixC = Matrix<Complex>;
using VectorR = Vector<Real>;
using VectorC = Vector<Complex>;
using ArrayR = Eigen::ArrayXd;

inline constexpr Real pi = 3.14159265358979323846264338327950288;

/// Uniform error type for precondition violations and solver failures.
struct SolverError : std::runtime_error {
  explicit SolverError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace pksns
