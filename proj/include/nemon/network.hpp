#pragma once

// The implicit network
//   x = Phi(A x + B u),   y = C x + D u   (or y = C x + b)
// with weakly increasing, non-expansive scalar activations, analysed in the
// weighted norm ||x||_{inf,[eta]^-1} = max_i |x_i| / eta_i.

#include "nemon/fixedpoint.hpp"
#include "nemon/measures.hpp"
#include "nemon/types.hpp"

#include <cstdint>
#include <optional>

namespace nemon {

enum class ActivationKind : std::uint8_t { ReLU = 0, LeakyReLU = 1, Tanh = 2, SmoothReLU = 3 };

/// Scalar activation with slope in [0, 1] everywhere.
class Activation {
 public:
  static Activation relu() { return Activation(ActivationKind::ReLU, 0.0); }
  static Activation leaky_relu(double slope);
  static Activation tanh() { return Activation(ActivationKind::Tanh, 0.0); }
  /// phi(x) = (x + sqrt(x^2 + delta^2)) / 2.
  static Activation smooth_relu(double delta);
  /// Rebuilds an activation from its tag and parameter; validates both.
  static Activation from_tag(std::uint8_t tag, double parameter);

  ActivationKind kind() const { return kind_; }
  /// LeakyReLU slope or SmoothReLU delta; 0 otherwise.
  double parameter() const { return parameter_; }

  double value(double z) const;
  /// Derivative; at the ReLU kink this is 0, for LeakyReLU it is the slope.
  double derivative(double z) const;

  Matrix apply(const Matrix& z) const;
  Matrix derivative(const Matrix& z) const;

  bool operator==(const Activation&) const = default;

 private:
  Activation(ActivationKind kind, double parameter) : kind_(kind), parameter_(parameter) {}

  ActivationKind kind_;
  double parameter_;
};

enum class OutputMode : std::uint8_t { AffineDU = 0, BiasOnly = 1 };

class ImplicitNetwork {
 public:
  /// y = C x + D u.
  ImplicitNetwork(Matrix a, Matrix b, Matrix c, Matrix d, Vector eta, Activation activation);
  /// y = C x + bias.
  static ImplicitNetwork with_bias(Matrix a, Matrix b, Matrix c, Vector bias, Vector eta,
                                   Activation activation);

  const Matrix& A() const { return a_; }
  const Matrix& B() const { return b_; }
  const Matrix& C() const { return c_; }
  /// Zero in BiasOnly mode.
  const Matrix& D() const { return d_; }
  /// Zero in AffineDU mode.
  const Vector& bias() const { return bias_; }
  const Vector& eta() const { return eta_; }
  const Activation& activation() const { return activation_; }
  OutputMode output_mode() const { return mode_; }

  Index state_dim() const { return a_.rows(); }
  Index input_dim() const { return b_.cols(); }
  Index output_dim() const { return c_.rows(); }

  NormSpec state_norm() const { return NormSpec::linf(eta_); }

  /// N(x, u) = Phi(A x + B u), column-wise for batches.
  Matrix map(const Matrix& x, const Matrix& u) const;
  Matrix output(const Matrix& x, const Matrix& u) const;

 private:
  ImplicitNetwork(Matrix a, Matrix b, Matrix c, Matrix d, Vector bias, Vector eta,
                  Activation activation, OutputMode mode);

  Matrix a_;
  Matrix b_;
  Matrix c_;
  Matrix d_;
  Vector bias_;
  Vector eta_;
  Activation activation_;
  OutputMode mode_;
};

/// Contraction constants of N in the state norm plus the input Lipschitz constant.
struct NetworkConstants : ContractionConstants {
  double lip_u = 0.0;  // ||B|| from (R^r, l-inf) to (R^n, inf,[eta]^-1)
};

/// osl = mu(A)_+, lip = ||A||, lip_u = ||B||, diagl = min_i (a_ii)_-.
NetworkConstants network_constants(const ImplicitNetwork& net);

struct WellPosednessReport {
  double mu_inf = 0.0;    // mu_{inf,[eta]^-1}(A)
  double inf_norm = 0.0;  // ||A||_{inf,[eta]^-1}
  double pf_eig = 0.0;    // Perron-Frobenius eigenvalue of |A|
  bool ok = false;        // mu_inf <= gamma + 1e-12 (rounding in the parametrization) and < 1
};

WellPosednessReport wellposedness(const ImplicitNetwork& net, double gamma);

/// Default solver settings for a network: alpha = 1/(1 - min_i (a_ii)_-),
/// tol = 1e-6, max_iter = 500.
IterationConfig default_forward_config(const ImplicitNetwork& net);

struct ForwardResult {
  Vector state;
  Vector output;
  IterationTrace trace;
};

struct BatchForwardResult {
  Matrix states;
  Matrix outputs;
  BatchIterationTrace trace;
};

/// Solves x = Phi(A x + B u) from x0 = 0 by the averaged iteration.
///
/// `cfg.tol` bounds the fixed-point residual ||x - Phi(Ax + Bu)|| of the
/// returned state; the solver stops once the step ||x_{k+1} - x_k|| falls
/// to alpha * tol, which for a contracting N_alpha implies it. Throws
/// DomainError when mu(A) >= 1 and ConvergenceError when the budget runs out
/// or the iteration blows up.
ForwardResult forward(const ImplicitNetwork& net, const Vector& u,
                      const std::optional<IterationConfig>& cfg = std::nullopt);

/// Column-wise forward solve for an r x m input batch.
BatchForwardResult forward_batch(const ImplicitNetwork& net, const Matrix& u,
                                 const std::optional<IterationConfig>& cfg = std::nullopt);

/// ||x - Phi(A x + B u)||_{inf,[eta]^-1}.
double fixed_point_residual(const ImplicitNetwork& net, const Vector& x, const Vector& u);

struct LipschitzBounds {
  double lip_u_to_x = 0.0;
  double lip_u_to_y = 0.0;
  /// (||B||^2 + ||C||^2) / (2 (1 - mu_+)) (+ ||D||), an upper bound on lip_u_to_y.
  double convex_upper = 0.0;
};

/// Input and output norms are plain l-infinity.
LipschitzBounds lipschitz_bounds(const ImplicitNetwork& net);

struct CertifiedRadius {
  double radius = 0.0;
  double margin = 0.0;
  /// Positive margin and zero Lipschitz bound: every perturbation is safe.
  bool unbounded = false;
};

/// margin(u) / (2 lip_u_to_y) when the clean prediction is correct, else 0.
CertifiedRadius certified_radius(const ImplicitNetwork& net, const Vector& u, Index true_label);

/// Same, reusing an already computed output and Lipschitz bound.
CertifiedRadius certified_radius_from_output(const Vector& logits, Index true_label,
                                             double lip_u_to_y);

/// (y)_label - max_{j != label} y_j.
double classification_margin(const Vector& logits, Index label);

Index argmax(const Vector& v);

}  // namespace nemon
