#pragma once

// Averaged (Krasnosel'skii-Mann) fixed-point iteration
//   x_{k+1} = (1 - alpha) x_k + alpha F(x_k)
// and the step-size / contraction-factor formulas that go with it.

#include "nemon/measures.hpp"
#include "nemon/types.hpp"

#include <functional>
#include <vector>

namespace nemon {

struct IterationConfig {
  double alpha = 1.0;
  double tol = 1e-6;
  int max_iter = 500;

  /// Throws DomainError unless 0 < alpha <= 1, tol > 0, max_iter >= 1.
  void validate() const;
};

/// Residuals above this are treated as divergence.
inline constexpr double kDivergenceThreshold = 1e12;

struct IterationTrace {
  Vector iterate;
  std::vector<double> residuals;  // ||x_{k+1} - x_k|| per step
  bool converged = false;
  bool diverged = false;  // non-finite value or residual > kDivergenceThreshold
  int iterations = 0;
};

using MapOracle = std::function<Vector(const Vector&)>;

/// Runs the averaged iteration from x0 until the step residual measured in
/// `ns` drops to cfg.tol or cfg.max_iter steps elapse. Divergence ends the
/// run with converged = false; it never throws for it.
IterationTrace average_iteration(const MapOracle& f, const Vector& x0, const IterationConfig& cfg,
                                 const NormSpec& ns);

/// Batch trace: one residual per step, the largest column residual.
struct BatchIterationTrace {
  Matrix iterate;
  std::vector<double> residuals;
  bool converged = false;
  bool diverged = false;
  int iterations = 0;
};

using BatchMapOracle = std::function<Matrix(const Matrix&)>;

/// Column-wise averaged iteration on a batch of independent states. Each
/// column follows exactly the single-vector recursion; the stopping test is
/// on the worst column.
BatchIterationTrace average_iteration_batch(const BatchMapOracle& f, const Matrix& x0,
                                            const IterationConfig& cfg, const NormSpec& ns);

struct ContractionConstants {
  double osl = 0.0;        // one-sided Lipschitz constant
  double lip = 0.0;        // Lipschitz constant
  double diagl = 0.0;      // lower bound on the Jacobian diagonal
  double kappa = 0.0;      // (1 + lip) / (1 - osl); +inf when osl >= 1
  double kappa_inf = 0.0;  // (1 - diagl) / (1 - osl); +inf when osl >= 1
};

/// Fills in kappa / kappa_inf and checks diagl <= osl <= lip.
ContractionConstants make_contraction_constants(double osl, double lip, double diagl);

/// Contraction factor of F_alpha for an l-Lipschitz F with osL(F) < 1 - c:
///   (1 + alpha c - alpha^2 (l+1)^2 / (1 - alpha (l+1)))^{-1}
/// on 0 < alpha < c / ((c + l + 1)(l + 1)).
double gamma_contraction_factor(double alpha, double lip, double c);

struct StepChoice {
  double alpha = 0.0;
  double factor = 0.0;
};

/// Step size minimising gamma_contraction_factor for c = 1 - osl, s = lip + 1:
///   alpha* = (1/s)(1 - sqrt(s / (c + s))),
/// the root of d/dalpha [c + s - s/(1 - alpha s)^2]. Throws DomainError for osl >= 1.
StepChoice optimal_alpha_general(double lip, double osl);

/// Step size for weighted l-infinity norms: alpha* = 1/(1 - diagl) (at most 1),
/// factor = 1 - alpha*(1 - osl).
StepChoice optimal_alpha_linf(double osl, double diagl);

/// ||x*_u - x*_v|| <= lip_u / (1 - osl_x) * ||u - v||.
double perturbed_fixed_point_bound(double lip_u, double osl_x, double input_distance);

}  // namespace nemon
