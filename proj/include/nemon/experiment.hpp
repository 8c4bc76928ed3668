#pragma once

// Experiment runner behind the command-line tool. Every command writes into
// <out>/<config hash>/ so different configurations never share a directory.

#include "nemon/config.hpp"
#include "nemon/csv.hpp"
#include "nemon/data.hpp"
#include "nemon/robustness.hpp"
#include "nemon/training.hpp"

#include <string>
#include <vector>

namespace nemon {

struct CompareSolversConfig {
  Index n = 50;
  int nets = 5;
  double gamma = 0.9;
  double scale = 1.0;  // T entries are Uniform(-scale, scale)
  double tol = 1e-6;
  int max_iter = 2000;
};

struct ExperimentConfig {
  std::string source = "synthetic";  // "synthetic" or "idx"
  std::string train_images;
  std::string train_labels;
  std::string test_images;
  std::string test_labels;
  Index train_count = 500;  // idx: 0 keeps the whole file
  Index test_count = 200;
  int num_classes = 10;     // idx only
  SynthSpec synth;

  Index n = 20;
  double gamma = 0.95;
  Activation activation = Activation::relu();
  OutputMode mode = OutputMode::AffineDU;
  TrainConfig train;

  std::vector<AttackKind> attacks{AttackKind::Inversion, AttackKind::UniformNoise, AttackKind::FGSM,
                                  AttackKind::PGDM};
  std::vector<double> epsilons{0.0, 0.01, 0.02, 0.05, 0.1};
  double pgdm_step = 0.0;
  int pgdm_steps = 20;
  std::uint64_t noise_seed = 0;
  Index attack_samples = 0;  // 0 uses the whole test split

  CompareSolversConfig compare;

  std::uint64_t seed = 0;
  std::string out = "runs";

  /// Canonical key=value text (seed included, output base excluded).
  std::string canonical;
  std::string hash;

  /// Rejects unknown keys and invalid values. Relative data paths resolve
  /// against `base_dir` when it is non-empty.
  static ExperimentConfig from_config(const Config& cfg, const std::string& base_dir = "");

  std::string output_dir() const;
};

struct Splits {
  Dataset train;
  Dataset test;
};

Splits load_splits(const ExperimentConfig& cfg);

IterationConfig eval_solver(const ImplicitNetwork& net, const ExperimentConfig& cfg);

/// Each command returns the directory it wrote to.
std::string run_train(const ExperimentConfig& cfg);
std::string run_certify(const ExperimentConfig& cfg);
std::string run_attack(const ExperimentConfig& cfg);
std::string run_all(const ExperimentConfig& cfg);
std::string run_compare_solvers(const ExperimentConfig& cfg);

/// Whitespace-separated rows, '#' comments.
Matrix read_matrix_text(const std::string& text);

/// JSON report of norm, measure and limit oracle for one matrix. `norm` is
/// "linf", "l1" or "l2"; `weights` is eta (l1/linf) or the diagonal of P (l2),
/// empty for unit weights.
std::string measure_report(const Matrix& a, const std::string& norm, const std::vector<double>& weights);

CsvTable metrics_table(const std::vector<EpochMetrics>& epochs);
CsvTable robustness_table(const RobustnessCurve& curve);

}  // namespace nemon
