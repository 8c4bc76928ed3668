#include "nemon/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

namespace nemon {

ImplicitNetwork TrainableParams::realize() const {
  Matrix a = parametrize_bounded_measure(T, gamma);
  const Vector eta = Vector::Ones(T.rows());
  if (mode == OutputMode::BiasOnly) return ImplicitNetwork::with_bias(a, B, C, bias, eta, activation);
  return ImplicitNetwork(a, B, C, D, eta, activation);
}

TrainableParams TrainableParams::init(Index n, Index r, Index q, double gamma,
                                      Activation activation, OutputMode mode, std::uint64_t seed) {
  if (n < 1 || r < 1 || q < 1) throw DimensionError("TrainableParams::init: empty dimension");
  if (!(gamma < 1.0)) throw DomainError("TrainableParams::init: gamma must be < 1");
  std::mt19937_64 rng(seed);
  auto fill = [&](Index rows, Index cols, Index fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i)
      for (Index j = 0; j < cols; ++j) m(i, j) = bound * (2.0 * uniform01(rng()) - 1.0);
    return m;
  };
  TrainableParams p;
  p.T = fill(n, n, n);
  p.B = fill(n, r, r);
  p.C = fill(q, n, n);
  p.gamma = gamma;
  p.activation = activation;
  p.mode = mode;
  if (mode == OutputMode::AffineDU) {
    p.D = fill(q, r, r);
    p.bias = Vector::Zero(q);
  } else {
    p.D = Matrix::Zero(q, r);
    p.bias = fill(q, 1, n);
  }
  return p;
}

GradientSet GradientSet::zeros_like(const TrainableParams& p) {
  GradientSet g;
  g.A = Matrix::Zero(p.T.rows(), p.T.cols());
  g.T = Matrix::Zero(p.T.rows(), p.T.cols());
  g.B = Matrix::Zero(p.B.rows(), p.B.cols());
  g.C = Matrix::Zero(p.C.rows(), p.C.cols());
  g.D = Matrix::Zero(p.D.rows(), p.D.cols());
  g.bias = Vector::Zero(p.bias.size());
  return g;
}

GradientSet& GradientSet::operator+=(const GradientSet& other) {
  auto add = [](auto& lhs, const auto& rhs) {
    if (rhs.size() == 0) return;
    if (lhs.size() == 0) {
      lhs = rhs;
      return;
    }
    if (lhs.rows() != rhs.rows() || lhs.cols() != rhs.cols()) {
      throw DimensionError("GradientSet: block shapes differ");
    }
    lhs += rhs;
  };
  add(A, other.A);
  add(T, other.T);
  add(B, other.B);
  add(C, other.C);
  add(D, other.D);
  add(bias, other.bias);
  return *this;
}

bool GradientSet::all_finite() const {
  return A.allFinite() && T.allFinite() && B.allFinite() && C.allFinite() && D.allFinite() &&
         bias.allFinite();
}

LossAndGrad softmax_crossentropy(const Vector& logits, Index label) {
  if (label < 0 || label >= logits.size()) throw DomainError("softmax_crossentropy: label out of range");
  if (!logits.allFinite()) throw DomainError("softmax_crossentropy: non-finite logits");
  const double top = logits.maxCoeff();
  const Vector shifted = logits.array() - top;
  const Vector e = shifted.array().exp();
  const double z = e.sum();
  LossAndGrad out;
  out.loss = std::log(z) - shifted(label);
  out.grad = e / z;
  out.grad(label) -= 1.0;
  return out;
}

BackwardResult implicit_backward_batch(const ImplicitNetwork& net, const Matrix& u,
                                       const Matrix& states, const Matrix& grad_y,
                                       const std::optional<IterationConfig>& cfg) {
  const Index m = u.cols();
  if (u.rows() != net.input_dim() || states.rows() != net.state_dim() || states.cols() != m ||
      grad_y.rows() != net.output_dim() || grad_y.cols() != m) {
    throw DimensionError("implicit_backward: shapes of u, states and grad_y disagree");
  }
  IterationConfig solver = cfg.value_or(default_forward_config(net));
  solver.validate();
  solver.tol *= solver.alpha;

  const Matrix slopes = net.activation().derivative(net.A() * states + net.B() * u);
  const Matrix injected = net.C().transpose() * grad_y;
  const Matrix a_t = net.A().transpose();
  const BatchMapOracle adjoint = [&](const Matrix& w) -> Matrix {
    return a_t * slopes.cwiseProduct(w) + injected;
  };

  BackwardResult out;
  out.adjoint_trace =
      average_iteration_batch(adjoint, Matrix::Zero(net.state_dim(), m), solver, NormSpec::l1(net.eta()));
  if (!out.adjoint_trace.converged) {
    std::ostringstream os;
    os << "implicit_backward: adjoint solve "
       << (out.adjoint_trace.diverged ? "diverged" : "did not converge") << " in "
       << out.adjoint_trace.iterations << " steps";
    const double last = out.adjoint_trace.residuals.empty() ? 0.0 : out.adjoint_trace.residuals.back();
    throw ConvergenceError(os.str(), last, out.adjoint_trace.iterations);
  }
  const Matrix v = slopes.cwiseProduct(out.adjoint_trace.iterate);

  out.grads.A = v * states.transpose();
  out.grads.B = v * u.transpose();
  out.grads.C = grad_y * states.transpose();
  if (net.output_mode() == OutputMode::AffineDU) {
    out.grads.D = grad_y * u.transpose();
    out.grads.bias = Vector::Zero(net.output_dim());
    out.grad_inputs = net.B().transpose() * v + net.D().transpose() * grad_y;
  } else {
    out.grads.D = Matrix::Zero(net.output_dim(), net.input_dim());
    out.grads.bias = grad_y.rowwise().sum();
    out.grad_inputs = net.B().transpose() * v;
  }
  return out;
}

BackwardResult implicit_backward(const ImplicitNetwork& net, const Vector& u,
                                 const ForwardResult& fwd, const Vector& grad_y,
                                 const std::optional<IterationConfig>& cfg) {
  return implicit_backward_batch(net, u, fwd.state, grad_y, cfg);
}

Matrix chain_to_T(const Matrix& grad_a, const Matrix& t) {
  if (grad_a.rows() != t.rows() || grad_a.cols() != t.cols() || t.rows() != t.cols()) {
    throw DimensionError("chain_to_T: shapes differ");
  }
  Matrix g = grad_a;
  for (Index i = 0; i < t.rows(); ++i) {
    const double gii = grad_a(i, i);
    for (Index j = 0; j < t.cols(); ++j) {
      if (j == i) {
        g(i, i) = gii * (1.0 - sign0(t(i, i)));
      } else {
        g(i, j) -= sign0(t(i, j)) * gii;
      }
    }
  }
  return g;
}

namespace {

// First row attaining the maximum absolute row sum, and the sum.
std::pair<Index, double> max_row_sum(const Matrix& m) {
  Index best = 0;
  double value = -1.0;
  for (Index i = 0; i < m.rows(); ++i) {
    const double s = m.row(i).cwiseAbs().sum();
    if (s > value) {
      value = s;
      best = i;
    }
  }
  return {best, std::max(value, 0.0)};
}

Matrix row_sum_subgradient(const Matrix& m, Index row) {
  Matrix g = Matrix::Zero(m.rows(), m.cols());
  for (Index j = 0; j < m.cols(); ++j) g(row, j) = sign0(m(row, j));
  return g;
}

}  // namespace

RegularizerValue regularizer(const TrainableParams& params, double lambda) {
  if (lambda < 0.0) throw DomainError("regularizer: lambda must be nonnegative");
  RegularizerValue out;
  out.grads = GradientSet::zeros_like(params);
  if (lambda == 0.0) return out;

  const Matrix a = parametrize_bounded_measure(params.T, params.gamma);
  const Index n = a.rows();
  Index mu_row = 0;
  double mu = -std::numeric_limits<double>::infinity();
  for (Index i = 0; i < n; ++i) {
    const double row = a(i, i) + a.row(i).cwiseAbs().sum() - std::abs(a(i, i));
    if (row > mu) {
      mu = row;
      mu_row = i;
    }
  }
  const double mu_plus = positive_part(mu);
  if (!(mu_plus < 1.0)) throw DomainError("regularizer: mu_inf(A) must be < 1");
  const double denom = 1.0 - mu_plus;

  const auto [b_row, b] = max_row_sum(params.B);
  const auto [c_row, c] = max_row_sum(params.C);
  const bool affine = params.mode == OutputMode::AffineDU;
  double d = 0.0;
  Index d_row = 0;
  if (affine) std::tie(d_row, d) = max_row_sum(params.D);

  const double quad = 0.5 * (b * b + c * c);
  out.value = lambda * (quad / denom + d);

  out.grads.B = lambda * b / denom * row_sum_subgradient(params.B, b_row);
  out.grads.C = lambda * c / denom * row_sum_subgradient(params.C, c_row);
  if (affine) out.grads.D = lambda * row_sum_subgradient(params.D, d_row);
  if (mu > 0.0) {
    Matrix dmu = Matrix::Zero(n, n);
    for (Index j = 0; j < n; ++j) dmu(mu_row, j) = j == mu_row ? 1.0 : sign0(a(mu_row, j));
    out.grads.A = lambda * quad / (denom * denom) * dmu;
    out.grads.T = chain_to_T(out.grads.A, params.T);
  }
  return out;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw DomainError("TrainConfig: learning_rate must be positive");
  if (batch_size < 1) throw DomainError("TrainConfig: batch_size must be >= 1");
  if (epochs < 1) throw DomainError("TrainConfig: epochs must be >= 1");
  if (!(lambda >= 0.0)) throw DomainError("TrainConfig: lambda must be nonnegative");
  if (!(solver_tol > 0.0) || solver_max_iter < 1) throw DomainError("TrainConfig: bad solver settings");
}

namespace {

class Optimizer {
 public:
  Optimizer(const OptimizerConfig& cfg, double lr, const TrainableParams& p)
      : cfg_(cfg), lr_(lr), m_(GradientSet::zeros_like(p)), v_(GradientSet::zeros_like(p)) {}

  void step(TrainableParams& p, const GradientSet& g) {
    ++t_;
    update(p.T, g.T, m_.T, v_.T);
    update(p.B, g.B, m_.B, v_.B);
    update(p.C, g.C, m_.C, v_.C);
    if (p.mode == OutputMode::AffineDU) {
      update(p.D, g.D, m_.D, v_.D);
    } else {
      update(p.bias, g.bias, m_.bias, v_.bias);
    }
  }

 private:
  template <typename Block>
  void update(Block& param, const Block& grad, Block& m, Block& v) {
    if (cfg_.kind == OptimizerKind::SGD) {
      param -= lr_ * grad;
      return;
    }
    m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * grad;
    v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * grad.cwiseProduct(grad);
    const double c1 = 1.0 - std::pow(cfg_.beta1, t_);
    const double c2 = 1.0 - std::pow(cfg_.beta2, t_);
    param.array() -= lr_ * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg_.epsilon);
  }

  OptimizerConfig cfg_;
  double lr_;
  GradientSet m_;
  GradientSet v_;
  int t_ = 0;
};

// Fisher-Yates driven by raw mt19937_64 draws so the order is the same on
// every standard library.
std::vector<Index> shuffled(Index m, std::mt19937_64& rng) {
  std::vector<Index> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), Index{0});
  for (Index i = m - 1; i > 0; --i) {
    const auto j = static_cast<Index>(rng() % static_cast<std::uint64_t>(i + 1));
    std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
  }
  return order;
}

IterationConfig solver_settings(const ImplicitNetwork& net, const TrainConfig& cfg) {
  IterationConfig it = default_forward_config(net);
  it.tol = cfg.solver_tol;
  it.max_iter = cfg.solver_max_iter;
  return it;
}

}  // namespace

double accuracy(const ImplicitNetwork& net, const Dataset& data,
                const std::optional<IterationConfig>& cfg) {
  data.validate();
  constexpr Index chunk = 1000;
  Index correct = 0;
  for (Index begin = 0; begin < data.size(); begin += chunk) {
    const Index count = std::min(chunk, data.size() - begin);
    const BatchForwardResult fwd = forward_batch(net, data.inputs.middleCols(begin, count), cfg);
    for (Index j = 0; j < count; ++j) {
      if (argmax(fwd.outputs.col(j)) == data.labels[static_cast<std::size_t>(begin + j)]) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

TrainResult train(TrainableParams params, const Dataset& train_set, const Dataset& val_set,
                  const TrainConfig& cfg, const StepObserver& observer) {
  cfg.validate();
  train_set.validate();
  val_set.validate();
  if (train_set.input_dim() != params.input_dim() || val_set.input_dim() != params.input_dim()) {
    throw DimensionError("train: dataset input dimension does not match the model");
  }
  if (train_set.num_classes > params.output_dim() || val_set.num_classes > params.output_dim()) {
    throw DimensionError("train: more classes than model outputs");
  }

  std::mt19937_64 rng(cfg.seed);
  Optimizer opt(cfg.optimizer, cfg.learning_rate, params);
  TrainResult result;
  const Index m = train_set.size();
  const Index q = params.output_dim();

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const std::vector<Index> order = shuffled(m, rng);
    double loss_sum = 0.0;
    double fwd_iters = 0.0;
    double bwd_iters = 0.0;
    int batches = 0;
    for (Index begin = 0; begin < m; begin += cfg.batch_size) {
      const Index count = std::min<Index>(cfg.batch_size, m - begin);
      Matrix u(train_set.input_dim(), count);
      std::vector<int> labels(static_cast<std::size_t>(count));
      for (Index j = 0; j < count; ++j) {
        const Index src = order[static_cast<std::size_t>(begin + j)];
        u.col(j) = train_set.inputs.col(src);
        labels[static_cast<std::size_t>(j)] = train_set.labels[static_cast<std::size_t>(src)];
      }

      const ImplicitNetwork net = params.realize();
      const IterationConfig it = solver_settings(net, cfg);
      BatchForwardResult fwd;
      BackwardResult back;
      Matrix grad_y(q, count);
      try {
        fwd = forward_batch(net, u, it);
        for (Index j = 0; j < count; ++j) {
          const LossAndGrad lg = softmax_crossentropy(fwd.outputs.col(j), labels[static_cast<std::size_t>(j)]);
          loss_sum += lg.loss;
          grad_y.col(j) = lg.grad / static_cast<double>(count);
        }
        back = implicit_backward_batch(net, u, fwd.states, grad_y, it);
      } catch (const ConvergenceError& e) {
        std::ostringstream os;
        os << "train: epoch " << epoch << ", batch " << batches << ": " << e.what()
           << " (mu_inf(A) = " << matrix_measure(net.A(), net.state_norm()) << ")";
        throw TrainingError(os.str());
      }

      GradientSet g = back.grads;
      g.T = chain_to_T(g.A, params.T);
      if (cfg.lambda > 0.0) g += regularizer(params, cfg.lambda).grads;
      if (!g.all_finite()) {
        std::ostringstream os;
        os << "train: non-finite gradient at epoch " << epoch << ", batch " << batches;
        throw TrainingError(os.str());
      }
      opt.step(params, g);
      if (observer) observer(params);

      fwd_iters += fwd.trace.iterations;
      bwd_iters += back.adjoint_trace.iterations;
      ++batches;
    }

    const ImplicitNetwork net = params.realize();
    const LipschitzBounds lb = lipschitz_bounds(net);
    EpochMetrics em;
    em.epoch = epoch;
    em.train_loss = loss_sum / static_cast<double>(m);
    try {
      em.val_accuracy = accuracy(net, val_set, solver_settings(net, cfg));
    } catch (const ConvergenceError& e) {
      throw TrainingError(std::string("train: validation forward failed: ") + e.what());
    }
    em.lip_u_to_y = lb.lip_u_to_y;
    em.convex_upper = lb.convex_upper;
    em.mu_inf = matrix_measure(net.A(), net.state_norm());
    em.forward_iters_mean = fwd_iters / batches;
    em.backward_iters_mean = bwd_iters / batches;
    result.epochs.push_back(em);
  }
  result.params = std::move(params);
  return result;
}

GradientSet finite_difference_oracle(const std::function<double(const TrainableParams&)>& loss,
                                     const TrainableParams& params, double delta) {
  if (!(delta > 0.0)) throw DomainError("finite_difference_oracle: delta must be positive");
  GradientSet g = GradientSet::zeros_like(params);
  TrainableParams probe = params;
  auto sweep = [&](auto member, auto& out) {
    auto& block = probe.*member;
    for (Index i = 0; i < block.rows(); ++i) {
      for (Index j = 0; j < block.cols(); ++j) {
        const double saved = block(i, j);
        block(i, j) = saved + delta;
        const double up = loss(probe);
        block(i, j) = saved - delta;
        const double down = loss(probe);
        block(i, j) = saved;
        out(i, j) = (up - down) / (2.0 * delta);
      }
    }
  };
  sweep(&TrainableParams::T, g.T);
  sweep(&TrainableParams::B, g.B);
  sweep(&TrainableParams::C, g.C);
  if (params.mode == OutputMode::AffineDU) {
    sweep(&TrainableParams::D, g.D);
  } else {
    sweep(&TrainableParams::bias, g.bias);
  }
  return g;
}

Vector finite_difference_gradient(const std::function<double(const Vector&)>& f, const Vector& x,
                                  double delta) {
  if (!(delta > 0.0)) throw DomainError("finite_difference_gradient: delta must be positive");
  Vector g(x.size());
  Vector probe = x;
  for (Index i = 0; i < x.size(); ++i) {
    probe(i) = x(i) + delta;
    const double up = f(probe);
    probe(i) = x(i) - delta;
    const double down = f(probe);
    probe(i) = x(i);
    g(i) = (up - down) / (2.0 * delta);
  }
  return g;
}

}  // namespace nemon
