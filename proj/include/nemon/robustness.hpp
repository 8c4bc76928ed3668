#pragma once

// l-infinity attacks on implicit networks and certified-vs-empirical
// accuracy curves. Attacked inputs are not clipped back to [0, 1].

#include "nemon/dataset.hpp"
#include "nemon/network.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace nemon {

enum class AttackKind { Inversion, UniformNoise, FGSM, PGDM };

struct AttackSpec {
  AttackKind kind = AttackKind::FGSM;
  double epsilon = 0.0;
  std::uint64_t seed = 0;  // UniformNoise
  double step = 0.0;       // PGDM; 0 selects epsilon / 4
  int max_steps = 20;      // PGDM

  void validate() const;
};

std::string attack_name(AttackKind kind);
AttackKind attack_from_name(const std::string& name);

/// U + eps * sign(1/2 - U), entrywise.
Matrix attack_inversion(const Matrix& u, double epsilon);

/// Adds Uniform[-eps, eps] noise. Column j draws from a generator seeded with
/// seed ^ j, so the result does not depend on batch partitioning order.
Matrix attack_uniform_noise(const Matrix& u, double epsilon, std::uint64_t seed);

/// Cross-entropy input gradient through the fixed point, one column per sample.
Matrix loss_input_gradient(const ImplicitNetwork& net, const Matrix& u, const std::vector<int>& labels,
                           const std::optional<IterationConfig>& cfg = std::nullopt);

/// U + eps * sign(dL/dU) with sign(0) = 0.
Matrix attack_fgsm(const ImplicitNetwork& net, const Matrix& u, const std::vector<int>& labels,
                   double epsilon, const std::optional<IterationConfig>& cfg = std::nullopt);

/// delta <- clip(delta + step * sign(dL/dU at U + delta), -eps, eps), from
/// delta = 0, for max_steps steps.
Matrix attack_pgdm(const ImplicitNetwork& net, const Matrix& u, const std::vector<int>& labels,
                   double epsilon, double step, int max_steps,
                   const std::optional<IterationConfig>& cfg = std::nullopt);

/// Dispatch on spec.kind.
Matrix apply_attack(const ImplicitNetwork& net, const Matrix& u, const std::vector<int>& labels,
                    const AttackSpec& spec, const std::optional<IterationConfig>& cfg = std::nullopt);

struct RobustnessCurve {
  AttackKind kind = AttackKind::FGSM;
  std::vector<double> epsilons;
  std::vector<double> empirical_accuracy;
  std::vector<double> certified_accuracy;
};

/// `base` supplies the attack kind, noise seed and PGDM settings; its
/// epsilon is replaced by each grid value. The grid must be ascending and
/// nonnegative.
RobustnessCurve robustness_curve(const ImplicitNetwork& net, const Dataset& data, const AttackSpec& base,
                                 const std::vector<double>& epsilon_grid,
                                 const std::optional<IterationConfig>& cfg = std::nullopt);

/// Per-sample certified radii (0 for misclassified samples; +inf when the
/// Lipschitz bound is zero and the margin positive).
std::vector<double> certified_radii(const ImplicitNetwork& net, const Dataset& data,
                                    const std::optional<IterationConfig>& cfg = std::nullopt);

}  // namespace nemon
