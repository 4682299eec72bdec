#ifndef JKOLAB_TYPES_HPP
#define JKOLAB_TYPES_HPP

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace jkolab {

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using VectorXd = Vec<double>;
using MatrixXd = Mat<double>;

/// Violated input contract (bad dimension, non-SPD matrix, M too small, ...).
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An iterative solver or line search could not reach its tolerance.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Perturbation amplitude search could not reach the requested residual.
class CalibrationError : public SolverError {
 public:
  using SolverError::SolverError;
};

inline void require(bool cond, const std::string& what) {
  if (!cond) throw PreconditionError(what);
}

}  // namespace jkolab

#endif  // JKOLAB_TYPES_HPP
