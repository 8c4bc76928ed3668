#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace nemon {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Operand shapes disagree with each other or with a NormSpec.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An argument lies outside the domain where the operation is defined
/// (step size out of range, one-sided Lipschitz constant >= 1, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// An iterative solve did not reach its tolerance. Carries the last residual.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double last_residual, int iterations)
      : std::runtime_error(what), last_residual_(last_residual), iterations_(iterations) {}

  double last_residual() const { return last_residual_; }
  int iterations() const { return iterations_; }

 private:
  double last_residual_;
  int iterations_;
};

inline double positive_part(double z) { return z > 0.0 ? z : 0.0; }
inline double negative_part(double z) { return z < 0.0 ? z : 0.0; }

/// sign with sign(0) = 0.
inline double sign0(double z) { return z > 0.0 ? 1.0 : (z < 0.0 ? -1.0 : 0.0); }

}  // namespace nemon
