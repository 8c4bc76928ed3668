#include "nemon/robustness.hpp"

#include "nemon/training.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace nemon {

void AttackSpec::validate() const {
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) throw DomainError("AttackSpec: epsilon must be >= 0");
  if (kind == AttackKind::PGDM) {
    if (step < 0.0 || !std::isfinite(step)) throw DomainError("AttackSpec: PGDM step must be > 0");
    if (max_steps < 1) throw DomainError("AttackSpec: PGDM max_steps must be >= 1");
  }
}

std::string attack_name(AttackKind kind) {
  switch (kind) {
    case AttackKind::Inversion:
      return "inversion";
    case AttackKind::UniformNoise:
      return "uniform_noise";
    case AttackKind::FGSM:
      return "fgsm";
    case AttackKind::PGDM:
      return "pgdm";
  }
  return "?";
}

AttackKind attack_from_name(const std::string& name) {
  for (AttackKind k : {AttackKind::Inversion, AttackKind::UniformNoise, AttackKind::FGSM, AttackKind::PGDM}) {
    if (attack_name(k) == name) return k;
  }
  throw DomainError("unknown attack kind '" + name + "'");
}

namespace {

void check_epsilon(double epsilon) {
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) throw DomainError("attack: epsilon must be >= 0");
}

void check_labels(const ImplicitNetwork& net, const Matrix& u, const std::vector<int>& labels) {
  if (u.rows() != net.input_dim()) throw DimensionError("attack: input has wrong dimension");
  if (static_cast<Index>(labels.size()) != u.cols()) throw DimensionError("attack: one label per column");
}

Matrix sign_of(const Matrix& m) {
  return m.unaryExpr([](double v) { return sign0(v); });
}

}  // namespace

Matrix attack_inversion(const Matrix& u, double epsilon) {
  check_epsilon(epsilon);
  return u + epsilon * sign_of((0.5 - u.array()).matrix());
}

Matrix attack_uniform_noise(const Matrix& u, double epsilon, std::uint64_t seed) {
  check_epsilon(epsilon);
  Matrix out = u;
  for (Index j = 0; j < u.cols(); ++j) {
    std::mt19937_64 rng(seed ^ static_cast<std::uint64_t>(j));
    for (Index i = 0; i < u.rows(); ++i) out(i, j) += epsilon * (2.0 * uniform01(rng()) - 1.0);
  }
  return out;
}

Matrix loss_input_gradient(const ImplicitNetwork& net, const Matrix& u, const std::vector<int>& labels,
                           const std::optional<IterationConfig>& cfg) {
  check_labels(net, u, labels);
  const BatchForwardResult fwd = forward_batch(net, u, cfg);
  Matrix grad_y(net.output_dim(), u.cols());
  for (Index j = 0; j < u.cols(); ++j) {
    grad_y.col(j) = softmax_crossentropy(fwd.outputs.col(j), labels[static_cast<std::size_t>(j)]).grad;
  }
  return implicit_backward_batch(net, u, fwd.states, grad_y, cfg).grad_inputs;
}

Matrix attack_fgsm(const ImplicitNetwork& net, const Matrix& u, const std::vector<int>& labels,
                   double epsilon, const std::optional<IterationConfig>& cfg) {
  check_epsilon(epsilon);
  if (epsilon == 0.0) return u;
  return u + epsilon * sign_of(loss_input_gradient(net, u, labels, cfg));
}

Matrix attack_pgdm(const ImplicitNetwork& net, const Matrix& u, const std::vector<int>& labels,
                   double epsilon, double step, int max_steps, const std::optional<IterationConfig>& cfg) {
  check_epsilon(epsilon);
  if (!(step > 0.0)) throw DomainError("attack_pgdm: step must be > 0");
  if (max_steps < 1) throw DomainError("attack_pgdm: max_steps must be >= 1");
  if (epsilon == 0.0) return u;
  Matrix delta = Matrix::Zero(u.rows(), u.cols());
  for (int k = 0; k < max_steps; ++k) {
    delta += step * sign_of(loss_input_gradient(net, u + delta, labels, cfg));
    delta = delta.cwiseMax(-epsilon).cwiseMin(epsilon);
  }
  return u + delta;
}

Matrix apply_attack(const ImplicitNetwork& net, const Matrix& u, const std::vector<int>& labels,
                    const AttackSpec& spec, const std::optional<IterationConfig>& cfg) {
  spec.validate();
  switch (spec.kind) {
    case AttackKind::Inversion:
      return attack_inversion(u, spec.epsilon);
    case AttackKind::UniformNoise:
      return attack_uniform_noise(u, spec.epsilon, spec.seed);
    case AttackKind::FGSM:
      return attack_fgsm(net, u, labels, spec.epsilon, cfg);
    case AttackKind::PGDM: {
      const double step = spec.step > 0.0 ? spec.step : spec.epsilon / 4.0;
      if (spec.epsilon == 0.0) return u;
      return attack_pgdm(net, u, labels, spec.epsilon, step, spec.max_steps, cfg);
    }
  }
  return u;
}

std::vector<double> certified_radii(const ImplicitNetwork& net, const Dataset& data,
                                    const std::optional<IterationConfig>& cfg) {
  data.validate();
  const double lip = lipschitz_bounds(net).lip_u_to_y;
  const BatchForwardResult fwd = forward_batch(net, data.inputs, cfg);
  std::vector<double> radii(static_cast<std::size_t>(data.size()));
  for (Index j = 0; j < data.size(); ++j) {
    const Index label = data.labels[static_cast<std::size_t>(j)];
    const Vector logits = fwd.outputs.col(j);
    radii[static_cast<std::size_t>(j)] =
        argmax(logits) == label ? certified_radius_from_output(logits, label, lip).radius : 0.0;
  }
  return radii;
}

RobustnessCurve robustness_curve(const ImplicitNetwork& net, const Dataset& data, const AttackSpec& base,
                                 const std::vector<double>& epsilon_grid,
                                 const std::optional<IterationConfig>& cfg) {
  data.validate();
  base.validate();
  for (std::size_t k = 0; k < epsilon_grid.size(); ++k) {
    check_epsilon(epsilon_grid[k]);
    if (k > 0 && epsilon_grid[k] < epsilon_grid[k - 1]) {
      throw DomainError("robustness_curve: epsilon grid must be ascending");
    }
  }
  const std::vector<double> radii = certified_radii(net, data, cfg);
  const double m = static_cast<double>(data.size());

  RobustnessCurve curve;
  curve.kind = base.kind;
  for (double eps : epsilon_grid) {
    AttackSpec spec = base;
    spec.epsilon = eps;
    const Matrix attacked = apply_attack(net, data.inputs, data.labels, spec, cfg);
    const BatchForwardResult fwd = forward_batch(net, attacked, cfg);
    Index correct = 0;
    Index certified = 0;
    for (Index j = 0; j < data.size(); ++j) {
      if (argmax(fwd.outputs.col(j)) == data.labels[static_cast<std::size_t>(j)]) ++correct;
      const double r = radii[static_cast<std::size_t>(j)];
      if (r > 0.0 && r >= eps) ++certified;
    }
    curve.epsilons.push_back(eps);
    curve.empirical_accuracy.push_back(static_cast<double>(correct) / m);
    curve.certified_accuracy.push_back(static_cast<double>(certified) / m);
  }
  return curve;
}

}  // namespace nemon
