#include "nemon/fixedpoint.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace nemon {

void IterationConfig::validate() const {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw DomainError("IterationConfig: alpha must be in (0, 1]");
  if (!(tol > 0.0)) throw DomainError("IterationConfig: tol must be positive");
  if (max_iter < 1) throw DomainError("IterationConfig: max_iter must be >= 1");
}

IterationTrace average_iteration(const MapOracle& f, const Vector& x0, const IterationConfig& cfg,
                                 const NormSpec& ns) {
  cfg.validate();
  if (x0.size() != ns.dim()) throw DimensionError("average_iteration: x0 does not match norm");

  IterationTrace trace;
  trace.iterate = x0;
  trace.residuals.reserve(static_cast<std::size_t>(cfg.max_iter));
  for (int k = 1; k <= cfg.max_iter; ++k) {
    const Vector fx = f(trace.iterate);
    if (fx.size() != x0.size()) throw DimensionError("average_iteration: F changed dimension");
    Vector next = (1.0 - cfg.alpha) * trace.iterate + cfg.alpha * fx;
    double residual = std::numeric_limits<double>::infinity();
    if (next.allFinite()) residual = vector_norm(next - trace.iterate, ns);
    trace.residuals.push_back(residual);
    trace.iterations = k;
    if (!std::isfinite(residual) || residual > kDivergenceThreshold) {
      trace.diverged = true;
      break;
    }
    trace.iterate = std::move(next);
    if (residual <= cfg.tol) {
      trace.converged = true;
      break;
    }
  }
  return trace;
}

BatchIterationTrace average_iteration_batch(const BatchMapOracle& f, const Matrix& x0,
                                            const IterationConfig& cfg, const NormSpec& ns) {
  cfg.validate();
  if (x0.rows() != ns.dim()) throw DimensionError("average_iteration_batch: x0 does not match norm");

  BatchIterationTrace trace;
  trace.iterate = x0;
  for (int k = 1; k <= cfg.max_iter; ++k) {
    const Matrix fx = f(trace.iterate);
    if (fx.rows() != x0.rows() || fx.cols() != x0.cols()) {
      throw DimensionError("average_iteration_batch: F changed shape");
    }
    Matrix next = (1.0 - cfg.alpha) * trace.iterate + cfg.alpha * fx;
    double residual = std::numeric_limits<double>::infinity();
    if (next.allFinite()) {
      residual = 0.0;
      const Matrix step = next - trace.iterate;
      for (Index j = 0; j < step.cols(); ++j) {
        residual = std::max(residual, vector_norm(step.col(j), ns));
      }
    }
    trace.residuals.push_back(residual);
    trace.iterations = k;
    if (!std::isfinite(residual) || residual > kDivergenceThreshold) {
      trace.diverged = true;
      break;
    }
    trace.iterate = std::move(next);
    if (residual <= cfg.tol) {
      trace.converged = true;
      break;
    }
  }
  return trace;
}

ContractionConstants make_contraction_constants(double osl, double lip, double diagl) {
  constexpr double slack = 1e-12;
  if (diagl > osl + slack || osl > lip + slack) {
    std::ostringstream os;
    os << "make_contraction_constants: need diagl <= osl <= lip, got " << diagl << ", " << osl
       << ", " << lip;
    throw DomainError(os.str());
  }
  ContractionConstants k{osl, lip, diagl, 0.0, 0.0};
  const double inf = std::numeric_limits<double>::infinity();
  k.kappa = osl < 1.0 ? (1.0 + lip) / (1.0 - osl) : inf;
  k.kappa_inf = osl < 1.0 ? (1.0 - diagl) / (1.0 - osl) : inf;
  return k;
}

double gamma_contraction_factor(double alpha, double lip, double c) {
  if (!(c > 0.0)) throw DomainError("gamma_contraction_factor: c must be positive");
  if (lip < 0.0) throw DomainError("gamma_contraction_factor: lip must be nonnegative");
  const double s = lip + 1.0;
  const double upper = c / ((c + s) * s);
  if (!(alpha > 0.0 && alpha < upper)) {
    throw DomainError("gamma_contraction_factor: alpha outside (0, c/((c+l+1)(l+1)))");
  }
  return 1.0 / (1.0 + alpha * c - alpha * alpha * s * s / (1.0 - alpha * s));
}

StepChoice optimal_alpha_general(double lip, double osl) {
  if (!(osl < 1.0)) throw DomainError("optimal_alpha_general: osl must be < 1");
  if (lip < 0.0) throw DomainError("optimal_alpha_general: lip must be nonnegative");
  const double c = 1.0 - osl;
  const double s = lip + 1.0;
  StepChoice out;
  out.alpha = (1.0 - std::sqrt(s / (c + s))) / s;
  out.factor = gamma_contraction_factor(out.alpha, lip, c);

  // The optimum depends on kappa alone and tracks 1 - 1/(4k^2) + 1/(8k^3)
  // with a remainder below 0.0215/k^4 for every k >= 1.
  const double kappa = s / c;
  const double series = 1.0 - 1.0 / (4.0 * kappa * kappa) + 1.0 / (8.0 * kappa * kappa * kappa);
  if (kappa >= 1.0 &&
      std::abs(out.factor - series) > 0.025 / std::pow(kappa, 4) + 1e-12) {
    throw std::logic_error("optimal_alpha_general: factor inconsistent with its kappa series");
  }
  return out;
}

StepChoice optimal_alpha_linf(double osl, double diagl) {
  if (!(osl < 1.0)) throw DomainError("optimal_alpha_linf: osl must be < 1");
  if (diagl > osl) throw DomainError("optimal_alpha_linf: diagl must not exceed osl");
  StepChoice out;
  out.alpha = std::min(1.0, 1.0 / (1.0 - diagl));
  out.factor = 1.0 - out.alpha * (1.0 - osl);
  return out;
}

double perturbed_fixed_point_bound(double lip_u, double osl_x, double input_distance) {
  if (!(osl_x < 1.0)) throw DomainError("perturbed_fixed_point_bound: osl_x must be < 1");
  if (lip_u < 0.0 || input_distance < 0.0) {
    throw DomainError("perturbed_fixed_point_bound: negative constant or distance");
  }
  return lip_u / (1.0 - osl_x) * input_distance;
}

}  // namespace nemon
