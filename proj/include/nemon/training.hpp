#pragma once

// Training of measure-constrained implicit networks: the weight matrix is
// A = T - diag(|T| 1) + gamma I with T free, so mu_inf(A) <= gamma holds at
// every step. Gradients come from the implicit-function adjoint solved by
// the same averaged iteration as the forward pass.

#include "nemon/dataset.hpp"
#include "nemon/network.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace nemon {

struct TrainableParams {
  Matrix T;
  Matrix B;
  Matrix C;
  Matrix D;     // q x r, used in AffineDU mode
  Vector bias;  // q, used in BiasOnly mode
  double gamma = 0.95;
  Activation activation = Activation::relu();
  OutputMode mode = OutputMode::AffineDU;

  /// Network with A = parametrize_bounded_measure(T, gamma) and eta = 1.
  ImplicitNetwork realize() const;

  Index state_dim() const { return T.rows(); }
  Index input_dim() const { return B.cols(); }
  Index output_dim() const { return C.rows(); }

  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) entries from a seeded generator.
  static TrainableParams init(Index n, Index r, Index q, double gamma, Activation activation,
                              OutputMode mode, std::uint64_t seed);
};

struct GradientSet {
  Matrix A;  // dL/dA; always filled by the backward pass
  Matrix T;  // dL/dT; filled once chained through the parametrization
  Matrix B;
  Matrix C;
  Matrix D;
  Vector bias;

  static GradientSet zeros_like(const TrainableParams& p);
  GradientSet& operator+=(const GradientSet& other);
  bool all_finite() const;
};

struct LossAndGrad {
  double loss = 0.0;
  Vector grad;  // d loss / d logits = softmax(logits) - onehot(label)
};

LossAndGrad softmax_crossentropy(const Vector& logits, Index label);

struct BackwardResult {
  GradientSet grads;   // A, B, C, D / bias blocks; T left empty
  Matrix grad_inputs;  // dL/du per column: B^T v + D^T grad_y
  BatchIterationTrace adjoint_trace;
};

/// Implicit backward pass for a batch. `grad_y` is q x m (one column per
/// sample); parameter gradients are summed over the batch.
///
/// With J = diag(phi'(A x* + B u)) (0 at ReLU kinks) the state adjoint
/// v = J (A^T v + C^T grad_y) is obtained as v = J w from the transposed
/// fixed point w = A^T J w + C^T grad_y, iterated at the forward step size
/// and measured in ||.||_{1,[eta]}, where it contracts at rate
/// 1 - alpha (1 - mu(A)_+). cfg.tol bounds the fixed-point residual of w.
/// Throws ConvergenceError if the adjoint solve does not converge.
BackwardResult implicit_backward_batch(const ImplicitNetwork& net, const Matrix& u,
                                       const Matrix& states, const Matrix& grad_y,
                                       const std::optional<IterationConfig>& cfg = std::nullopt);

/// Single-sample form.
BackwardResult implicit_backward(const ImplicitNetwork& net, const Vector& u,
                                 const ForwardResult& fwd, const Vector& grad_y,
                                 const std::optional<IterationConfig>& cfg = std::nullopt);

/// Chain rule through A = T - diag(|T| 1) + gamma I (sign(0) = 0):
///   dT_ij = dA_ij - sign(t_ij) dA_ii  (j != i),   dT_ii = dA_ii (1 - sign(t_ii)).
Matrix chain_to_T(const Matrix& grad_a, const Matrix& t);

struct RegularizerValue {
  double value = 0.0;
  GradientSet grads;  // T (and A), B, C, D blocks
};

/// lambda * ((||B||^2 + ||C||^2) / (2 (1 - mu_inf(A)_+)) + ||D||), all
/// max-row-sum norms (eta = 1); ||D|| is dropped in bias mode.
/// Subgradients use the first maximising row.
RegularizerValue regularizer(const TrainableParams& params, double lambda);

enum class OptimizerKind { SGD, Adam };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::Adam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct TrainConfig {
  double learning_rate = 1e-3;
  int batch_size = 32;
  int epochs = 5;
  double lambda = 0.0;
  std::uint64_t seed = 0;
  OptimizerConfig optimizer;
  double solver_tol = 1e-6;
  int solver_max_iter = 500;

  void validate() const;
};

struct EpochMetrics {
  int epoch = 0;
  double train_loss = 0.0;  // mean cross-entropy over the epoch's samples
  double val_accuracy = 0.0;
  double lip_u_to_y = 0.0;
  double convex_upper = 0.0;
  double mu_inf = 0.0;
  double forward_iters_mean = 0.0;
  double backward_iters_mean = 0.0;
};

/// Raised when a forward or adjoint solve fails mid-run.
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainResult {
  TrainableParams params;
  std::vector<EpochMetrics> epochs;
};

/// Called after every optimizer step with the updated parameters.
using StepObserver = std::function<void(const TrainableParams&)>;

TrainResult train(TrainableParams params, const Dataset& train_set, const Dataset& val_set,
                  const TrainConfig& cfg, const StepObserver& observer = {});

/// Fraction of columns whose argmax logit equals the label.
double accuracy(const ImplicitNetwork& net, const Dataset& data,
                const std::optional<IterationConfig>& cfg = std::nullopt);

/// Central differences over every entry of T, B, C and D (or bias).
GradientSet finite_difference_oracle(const std::function<double(const TrainableParams&)>& loss,
                                     const TrainableParams& params, double delta);

/// Central differences of a scalar function of a vector.
Vector finite_difference_gradient(const std::function<double(const Vector&)>& f, const Vector& x,
                                  double delta);

}  // namespace nemon
