#include "nemon/network.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace nemon {

Activation Activation::leaky_relu(double slope) {
  if (!(slope >= 0.0 && slope <= 1.0)) throw DomainError("leaky_relu: slope must lie in [0, 1]");
  return Activation(ActivationKind::LeakyReLU, slope);
}

Activation Activation::smooth_relu(double delta) {
  if (!(delta > 0.0) || !std::isfinite(delta)) {
    throw DomainError("smooth_relu: delta must be positive");
  }
  return Activation(ActivationKind::SmoothReLU, delta);
}

Activation Activation::from_tag(std::uint8_t tag, double parameter) {
  switch (tag) {
    case static_cast<std::uint8_t>(ActivationKind::ReLU):
      return relu();
    case static_cast<std::uint8_t>(ActivationKind::LeakyReLU):
      return leaky_relu(parameter);
    case static_cast<std::uint8_t>(ActivationKind::Tanh):
      return tanh();
    case static_cast<std::uint8_t>(ActivationKind::SmoothReLU):
      return smooth_relu(parameter);
    default:
      throw DomainError("unknown activation tag " + std::to_string(tag));
  }
}

double Activation::value(double z) const {
  switch (kind_) {
    case ActivationKind::ReLU:
      return z > 0.0 ? z : 0.0;
    case ActivationKind::LeakyReLU:
      return z > 0.0 ? z : parameter_ * z;
    case ActivationKind::Tanh:
      return std::tanh(z);
    case ActivationKind::SmoothReLU:
      return 0.5 * (z + std::hypot(z, parameter_));
  }
  return z;
}

double Activation::derivative(double z) const {
  switch (kind_) {
    case ActivationKind::ReLU:
      return z > 0.0 ? 1.0 : 0.0;
    case ActivationKind::LeakyReLU:
      return z > 0.0 ? 1.0 : parameter_;
    case ActivationKind::Tanh: {
      const double t = std::tanh(z);
      return 1.0 - t * t;
    }
    case ActivationKind::SmoothReLU:
      return 0.5 * (1.0 + z / std::hypot(z, parameter_));
  }
  return 1.0;
}

Matrix Activation::apply(const Matrix& z) const {
  return z.unaryExpr([this](double v) { return value(v); });
}

Matrix Activation::derivative(const Matrix& z) const {
  return z.unaryExpr([this](double v) { return derivative(v); });
}

ImplicitNetwork::ImplicitNetwork(Matrix a, Matrix b, Matrix c, Matrix d, Vector bias, Vector eta,
                                 Activation activation, OutputMode mode)
    : a_(std::move(a)),
      b_(std::move(b)),
      c_(std::move(c)),
      d_(std::move(d)),
      bias_(std::move(bias)),
      eta_(std::move(eta)),
      activation_(activation),
      mode_(mode) {
  const Index n = a_.rows();
  if (mode_ == OutputMode::AffineDU && bias_.size() == 0) bias_ = Vector::Zero(c_.rows());
  std::ostringstream os;
  if (a_.cols() != n) os << "A must be square; ";
  if (b_.rows() != n) os << "B must have n rows; ";
  if (c_.cols() != n) os << "C must have n columns; ";
  if (d_.rows() != c_.rows() || d_.cols() != b_.cols()) os << "D must be q x r; ";
  if (bias_.size() != c_.rows()) os << "bias must have q entries; ";
  if (eta_.size() != n) os << "eta must have n entries; ";
  if (!os.str().empty()) throw DimensionError("ImplicitNetwork: " + os.str());
  if (!(eta_.array() > 0.0).all()) throw DomainError("ImplicitNetwork: eta must be positive");
  if (!a_.allFinite() || !b_.allFinite() || !c_.allFinite() || !d_.allFinite() ||
      !bias_.allFinite() || !eta_.allFinite()) {
    throw DomainError("ImplicitNetwork: non-finite weight");
  }
}

ImplicitNetwork::ImplicitNetwork(Matrix a, Matrix b, Matrix c, Matrix d, Vector eta,
                                 Activation activation)
    : ImplicitNetwork(std::move(a), std::move(b), std::move(c), std::move(d), Vector(),
                      std::move(eta), activation, OutputMode::AffineDU) {}

ImplicitNetwork ImplicitNetwork::with_bias(Matrix a, Matrix b, Matrix c, Vector bias, Vector eta,
                                           Activation activation) {
  Matrix d = Matrix::Zero(c.rows(), b.cols());
  return ImplicitNetwork(std::move(a), std::move(b), std::move(c), std::move(d), std::move(bias),
                         std::move(eta), activation, OutputMode::BiasOnly);
}

Matrix ImplicitNetwork::map(const Matrix& x, const Matrix& u) const {
  return activation_.apply(a_ * x + b_ * u);
}

Matrix ImplicitNetwork::output(const Matrix& x, const Matrix& u) const {
  if (mode_ == OutputMode::BiasOnly) return (c_ * x).colwise() + bias_;
  return c_ * x + d_ * u;
}

NetworkConstants network_constants(const ImplicitNetwork& net) {
  const NormSpec ns = net.state_norm();
  const double mu = matrix_measure(net.A(), ns);
  const double diagl = net.state_dim() > 0 ? negative_part(net.A().diagonal().minCoeff()) : 0.0;
  NetworkConstants k;
  static_cast<ContractionConstants&>(k) =
      make_contraction_constants(positive_part(mu), matrix_norm(net.A(), ns), diagl);
  k.lip_u = induced_linf_norm(net.B(), Vector::Ones(net.input_dim()), net.eta());
  return k;
}

WellPosednessReport wellposedness(const ImplicitNetwork& net, double gamma) {
  const NormSpec ns = net.state_norm();
  WellPosednessReport report;
  report.mu_inf = matrix_measure(net.A(), ns);
  report.inf_norm = matrix_norm(net.A(), ns);
  report.pf_eig = perron_frobenius(net.A().cwiseAbs(), 1e-10).eigenvalue;
  report.ok = report.mu_inf <= gamma + 1e-12 && report.mu_inf < 1.0;
  return report;
}

IterationConfig default_forward_config(const ImplicitNetwork& net) {
  IterationConfig cfg;
  const double diagl = net.state_dim() > 0 ? negative_part(net.A().diagonal().minCoeff()) : 0.0;
  cfg.alpha = 1.0 / (1.0 - diagl);
  cfg.tol = 1e-6;
  cfg.max_iter = 500;
  return cfg;
}

namespace {

IterationConfig solver_config(const ImplicitNetwork& net, const std::optional<IterationConfig>& cfg) {
  const double mu = matrix_measure(net.A(), net.state_norm());
  if (!(mu < 1.0)) {
    std::ostringstream os;
    os << "forward: network is not certified well posed (mu = " << mu << " >= 1)";
    throw DomainError(os.str());
  }
  IterationConfig out = cfg.value_or(default_forward_config(net));
  out.validate();
  // Step residual alpha * ||x - N(x)||; stop on the fixed-point residual.
  out.tol *= out.alpha;
  return out;
}

[[noreturn]] void throw_nonconvergence(const char* where, double last, int iters, bool diverged) {
  std::ostringstream os;
  os << where << ": " << (diverged ? "iteration diverged" : "iteration budget exhausted")
     << " after " << iters << " steps (last step residual " << last << ")";
  throw ConvergenceError(os.str(), last, iters);
}

}  // namespace

ForwardResult forward(const ImplicitNetwork& net, const Vector& u,
                      const std::optional<IterationConfig>& cfg) {
  if (u.size() != net.input_dim()) throw DimensionError("forward: input has wrong dimension");
  const IterationConfig solver = solver_config(net, cfg);
  const Vector injected = net.B() * u;
  const Activation& phi = net.activation();
  const MapOracle f = [&](const Vector& x) -> Vector {
    return phi.apply(net.A() * x + injected);
  };

  ForwardResult result;
  result.trace = average_iteration(f, Vector::Zero(net.state_dim()), solver, net.state_norm());
  if (!result.trace.converged) {
    const double last = result.trace.residuals.empty() ? 0.0 : result.trace.residuals.back();
    throw_nonconvergence("forward", last, result.trace.iterations, result.trace.diverged);
  }
  result.state = result.trace.iterate;
  result.output = net.output(result.state, u);
  return result;
}

BatchForwardResult forward_batch(const ImplicitNetwork& net, const Matrix& u,
                                 const std::optional<IterationConfig>& cfg) {
  if (u.rows() != net.input_dim()) throw DimensionError("forward_batch: input has wrong dimension");
  const IterationConfig solver = solver_config(net, cfg);
  const Matrix injected = net.B() * u;
  const Activation& phi = net.activation();
  const BatchMapOracle f = [&](const Matrix& x) -> Matrix {
    return phi.apply(net.A() * x + injected);
  };

  BatchForwardResult result;
  result.trace = average_iteration_batch(f, Matrix::Zero(net.state_dim(), u.cols()), solver,
                                         net.state_norm());
  if (!result.trace.converged) {
    const double last = result.trace.residuals.empty() ? 0.0 : result.trace.residuals.back();
    throw_nonconvergence("forward_batch", last, result.trace.iterations, result.trace.diverged);
  }
  result.states = result.trace.iterate;
  result.outputs = net.output(result.states, u);
  return result;
}

double fixed_point_residual(const ImplicitNetwork& net, const Vector& x, const Vector& u) {
  const Vector gap = x - net.map(x, u);
  return vector_norm(gap, net.state_norm());
}

LipschitzBounds lipschitz_bounds(const ImplicitNetwork& net) {
  const NetworkConstants k = network_constants(net);
  if (!(k.osl < 1.0)) throw DomainError("lipschitz_bounds: mu(A) must be < 1");
  const double b = k.lip_u;
  const double c = induced_linf_norm(net.C(), net.eta(), Vector::Ones(net.output_dim()));
  const double d = net.output_mode() == OutputMode::AffineDU
                       ? induced_linf_norm(net.D(), Vector::Ones(net.input_dim()),
                                           Vector::Ones(net.output_dim()))
                       : 0.0;
  const double denom = 1.0 - k.osl;
  LipschitzBounds out;
  out.lip_u_to_x = b / denom;
  out.lip_u_to_y = b * c / denom + d;
  out.convex_upper = 0.5 * (b * b + c * c) / denom + d;
  return out;
}

Index argmax(const Vector& v) {
  Index best = 0;
  for (Index i = 1; i < v.size(); ++i) {
    if (v(i) > v(best)) best = i;
  }
  return best;
}

double classification_margin(const Vector& logits, Index label) {
  if (label < 0 || label >= logits.size()) throw DomainError("classification_margin: bad label");
  double other = -std::numeric_limits<double>::infinity();
  for (Index j = 0; j < logits.size(); ++j) {
    if (j != label) other = std::max(other, logits(j));
  }
  return logits(label) - other;
}

CertifiedRadius certified_radius_from_output(const Vector& logits, Index true_label,
                                             double lip_u_to_y) {
  CertifiedRadius out;
  out.margin = classification_margin(logits, true_label);
  if (!(out.margin > 0.0)) return out;
  if (lip_u_to_y == 0.0) {
    out.unbounded = true;
    out.radius = std::numeric_limits<double>::infinity();
    return out;
  }
  out.radius = out.margin / (2.0 * lip_u_to_y);
  return out;
}

CertifiedRadius certified_radius(const ImplicitNetwork& net, const Vector& u, Index true_label) {
  const ForwardResult fwd = forward(net, u);
  return certified_radius_from_output(fwd.output, true_label, lipschitz_bounds(net).lip_u_to_y);
}

}  // namespace nemon
