#pragma once

// Weighted l1 / l-infinity / l2 norms on R^n, their induced matrix norms and
// matrix measures (logarithmic norms), weak pairings, and the helpers for
// the measure-bounded weight parametrization used in training.
//
// Conventions for a positive weight vector eta:
//   l1     ||x||   = sum_i eta_i |x_i|
//   linf   ||x||   = max_i |x_i| / eta_i
//   l2     ||x||   = sqrt(x^T P x),  P symmetric positive definite

#include "nemon/types.hpp"

#include <vector>

namespace nemon {

enum class NormKind { L1Weighted, LinfWeighted, L2Weighted };

class NormSpec {
 public:
  static NormSpec l1(Vector eta);
  static NormSpec linf(Vector eta);
  static NormSpec l2(Matrix p_matrix);

  static NormSpec l1(Index n) { return l1(Vector::Ones(n)); }
  static NormSpec linf(Index n) { return linf(Vector::Ones(n)); }
  static NormSpec l2(Index n) { return l2(Matrix::Identity(n, n)); }

  NormKind kind() const { return kind_; }
  Index dim() const;

  /// Weights for L1Weighted / LinfWeighted. Empty for L2Weighted.
  const Vector& eta() const { return eta_; }
  /// Weight matrix for L2Weighted. Empty otherwise.
  const Matrix& p_matrix() const { return p_; }

 private:
  NormSpec(NormKind kind, Vector eta, Matrix p);

  NormKind kind_;
  Vector eta_;
  Matrix p_;
  // P^{1/2} and P^{-1/2}, cached for the l2 case.
  Matrix p_sqrt_;
  Matrix p_inv_sqrt_;

  friend double matrix_norm(const Matrix&, const NormSpec&);
  friend double matrix_measure(const Matrix&, const NormSpec&);
};

double vector_norm(const Vector& x, const NormSpec& ns);
double matrix_norm(const Matrix& a, const NormSpec& ns);
double matrix_measure(const Matrix& a, const NormSpec& ns);

/// One-sided difference quotient (||I + hA|| - 1) / h. Converges to the
/// matrix measure as h -> 0+; used to cross-check the closed forms.
double measure_limit_oracle(const Matrix& a, const NormSpec& ns, double h = 1e-8);

/// Induced norm of a possibly rectangular M from (R^cols, ||.||_{inf,[in_eta]^-1})
/// to (R^rows, ||.||_{inf,[out_eta]^-1}):
///   max_i (1/out_eta_i) sum_j |m_ij| in_eta_j.
double induced_linf_norm(const Matrix& m, const Vector& in_eta, const Vector& out_eta);

/// Weak pairing compatible with ||.||_{inf,[eta]^-1}:
///   max over i in I_inf([eta]^-1 y) of y_i x_i / eta_i^2.
/// Ties in the argmax set are all included. Returns 0 for y = 0.
double weak_pairing_inf(const Vector& x, const Vector& y, const Vector& eta);

/// Exhaustive Lumer maximisation over sign patterns x_j = +-eta_j and row
/// indices. Exponential in n; meant for n <= 10.
double lumer_bruteforce_inf(const Matrix& a, const Vector& eta);

/// ||I + alpha A||_{inf,[eta]^-1}, checked against 1 + alpha mu(A).
/// Requires 0 <= alpha <= 1 / max_i |a_ii| (any alpha >= 0 when the
/// diagonal is zero). Throws DomainError otherwise.
double norm_of_average_identity(const Matrix& a, const Vector& eta, double alpha);

struct NormMinimizer {
  double alpha = 0.0;
  double value = 0.0;
};

/// Exact minimiser of alpha -> ||I + alpha A||_{inf,[eta]^-1} over alpha >= 0.
/// The objective is the upper envelope of 2n lines in alpha, so the optimum
/// sits at alpha = 0 or at a pairwise intersection; all are enumerated.
NormMinimizer optimal_alpha_norm_min(const Matrix& a, const Vector& eta);

/// A = T - diag(|T| 1) + gamma I. Always mu_inf(A) <= gamma.
Matrix parametrize_bounded_measure(const Matrix& t, double gamma);

/// Inverse of parametrize_bounded_measure on {A : mu_inf(A) <= gamma}.
/// Throws DomainError when mu_inf(A) > gamma.
Matrix recover_parametrization(const Matrix& a, double gamma);

struct SymmetricEigen {
  Vector values;   // ascending
  Matrix vectors;  // columns
  int sweeps = 0;
};

/// Cyclic Jacobi eigensolver for a symmetric matrix. Stops when the
/// off-diagonal Frobenius norm drops below tol * max(1, ||S||_F).
SymmetricEigen jacobi_eigen(const Matrix& s, double tol = 1e-12, int max_sweeps = 100);

/// Largest singular value, from the Jacobi spectrum of A^T A.
double spectral_norm(const Matrix& a);

struct PowerIterationResult {
  double eigenvalue = 0.0;
  Vector eigenvector;
  int iterations = 0;
  bool converged = false;
};

/// Perron-Frobenius eigenvalue of an entrywise nonnegative matrix. Runs the
/// power method on M + I (same eigenvector, shifted spectrum) so periodic
/// irreducible matrices still converge; the shift is removed at the end.
PowerIterationResult perron_frobenius(const Matrix& nonneg, double tol = 1e-10,
                                      int max_iter = 100000);

}  // namespace nemon
