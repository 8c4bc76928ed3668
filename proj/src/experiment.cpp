#include "nemon/experiment.hpp"

#include "nemon/model_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <random>
#include <set>
#include <sstream>

namespace nemon {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "seed",           "out",
      "data.source",    "data.train_images",
      "data.train_labels", "data.test_images",
      "data.test_labels", "data.train_count",
      "data.test_count", "data.num_classes",
      "data.synth.classes", "data.synth.dim",
      "data.synth.margin", "data.synth.sigma",
      "model.n",        "model.gamma",
      "model.activation", "model.activation_param",
      "model.output",   "train.lr",
      "train.batch_size", "train.epochs",
      "train.lambda",   "train.optimizer",
      "train.solver_tol", "train.solver_max_iter",
      "attack.kinds",   "attack.epsilons",
      "attack.pgdm_step", "attack.pgdm_steps",
      "attack.noise_seed", "attack.samples",
      "compare.n",      "compare.nets",
      "compare.gamma",  "compare.scale",
      "compare.tol",    "compare.max_iter",
      "measure.matrix", "measure.norm",
      "measure.weights",
  };
  return keys;
}

// splitmix64 finaliser, used to derive independent stream seeds from the
// global seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

Activation parse_activation(const std::string& name, double param) {
  if (name == "relu") return Activation::relu();
  if (name == "leaky_relu") return Activation::leaky_relu(param);
  if (name == "tanh") return Activation::tanh();
  if (name == "smooth_relu") return Activation::smooth_relu(param);
  throw ConfigError("config: unknown model.activation '" + name + "'");
}

std::string resolve(const std::string& path, const std::string& base_dir) {
  if (path.empty() || base_dir.empty() || fs::path(path).is_absolute()) return path;
  return (fs::path(base_dir) / path).lexically_normal().string();
}

Index checked_count(long long v, const char* key) {
  if (v < 0) throw ConfigError(std::string("config: ") + key + " must be >= 0");
  return static_cast<Index>(v);
}

std::string model_path(const std::string& dir) { return (fs::path(dir) / "model.nemon").string(); }

std::string prepare_dir(const ExperimentConfig& cfg) {
  const std::string dir = cfg.output_dir();
  fs::create_directories(dir);
  write_text_file((fs::path(dir) / "config.txt").string(), cfg.canonical);
  return dir;
}

ImplicitNetwork load_trained(const std::string& dir) {
  const std::string path = model_path(dir);
  if (!fs::exists(path)) {
    throw std::runtime_error("no trained model at " + path + "; run `train` with the same config first");
  }
  return load_model(path);
}

void write_json(const std::string& dir, const std::string& name, const json& j) {
  write_text_file((fs::path(dir) / name).string(), j.dump(2) + "\n");
}

Dataset attack_subset(const ExperimentConfig& cfg, const Dataset& test) {
  if (cfg.attack_samples > 0 && cfg.attack_samples < test.size()) return test.slice(0, cfg.attack_samples);
  return test;
}

json train_summary(const ExperimentConfig& cfg, const TrainResult& result, const ImplicitNetwork& net,
                   const Splits& splits) {
  const LipschitzBounds lb = lipschitz_bounds(net);
  const WellPosednessReport wp = wellposedness(net, cfg.gamma);
  double fwd = 0.0;
  double bwd = 0.0;
  double best = 0.0;
  for (const EpochMetrics& e : result.epochs) {
    fwd += e.forward_iters_mean;
    bwd += e.backward_iters_mean;
    best = std::max(best, e.val_accuracy);
  }
  const double epochs = static_cast<double>(result.epochs.size());
  const BatchForwardResult eval = forward_batch(net, splits.test.inputs, eval_solver(net, cfg));
  Index correct = 0;
  for (Index j = 0; j < splits.test.size(); ++j) {
    if (argmax(eval.outputs.col(j)) == splits.test.labels[static_cast<std::size_t>(j)]) ++correct;
  }
  json j;
  j["config_hash"] = cfg.hash;
  j["seed"] = cfg.seed;
  j["train_size"] = splits.train.size();
  j["test_size"] = splits.test.size();
  j["test_accuracy"] = static_cast<double>(correct) / static_cast<double>(splits.test.size());
  j["best_test_accuracy"] = best;
  j["final_train_loss"] = result.epochs.back().train_loss;
  j["lipschitz"] = {{"u_to_x", lb.lip_u_to_x}, {"u_to_y", lb.lip_u_to_y}, {"convex_upper", lb.convex_upper}};
  j["wellposedness"] = {{"gamma", cfg.gamma},
                        {"mu_inf", wp.mu_inf},
                        {"inf_norm", wp.inf_norm},
                        {"pf_eig", wp.pf_eig},
                        {"ok", wp.ok}};
  j["forward_iters_mean"] = fwd / epochs;
  j["backward_iters_mean"] = bwd / epochs;
  j["eval_forward_iters"] = eval.trace.iterations;
  return j;
}

json certify_summary(const ExperimentConfig& cfg, const ImplicitNetwork& net, const Dataset& data,
                     const std::vector<double>& radii) {
  const LipschitzBounds lb = lipschitz_bounds(net);
  json curve = json::array();
  for (double eps : cfg.epsilons) {
    Index certified = 0;
    for (double r : radii) certified += (r > 0.0 && r >= eps) ? 1 : 0;
    curve.push_back({{"epsilon", eps},
                     {"certified_accuracy", static_cast<double>(certified) / static_cast<double>(data.size())}});
  }
  std::vector<double> positive;
  for (double r : radii) {
    if (r > 0.0) positive.push_back(r);
  }
  std::sort(positive.begin(), positive.end());
  json j;
  j["config_hash"] = cfg.hash;
  j["samples"] = data.size();
  j["lip_u_to_y"] = lb.lip_u_to_y;
  j["certified_curve"] = curve;
  j["median_radius_correct"] = positive.empty() ? 0.0 : positive[positive.size() / 2];
  return j;
}

CsvTable certify_table(const ImplicitNetwork& net, const Dataset& data, const IterationConfig& solver) {
  const double lip = lipschitz_bounds(net).lip_u_to_y;
  const BatchForwardResult fwd = forward_batch(net, data.inputs, solver);
  CsvTable t;
  t.header = {"sample", "label", "predicted", "margin", "radius"};
  for (Index j = 0; j < data.size(); ++j) {
    const Index label = data.labels[static_cast<std::size_t>(j)];
    const Vector logits = fwd.outputs.col(j);
    const Index pred = argmax(logits);
    const CertifiedRadius cr = certified_radius_from_output(logits, label, lip);
    t.add_row({format_number(static_cast<long long>(j)), format_number(static_cast<long long>(label)),
               format_number(static_cast<long long>(pred)), format_number(cr.margin),
               format_number(pred == label ? cr.radius : 0.0)});
  }
  return t;
}

std::vector<double> parse_weights(const std::vector<double>& weights, Index n, const char* what) {
  if (!weights.empty() && static_cast<Index>(weights.size()) != n) {
    throw DimensionError(std::string("measure: ") + what + " length does not match the matrix");
  }
  return weights;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_config(const Config& cfg, const std::string& base_dir) {
  for (const auto& [key, value] : cfg.values()) {
    if (!known_keys().count(key)) throw ConfigError("config: unknown key '" + key + "'");
  }
  ExperimentConfig e;
  e.seed = cfg.get_u64("seed", 0);
  e.out = cfg.get_string("out", "runs");

  e.source = cfg.get_string("data.source", "synthetic");
  if (e.source != "synthetic" && e.source != "idx") throw ConfigError("config: data.source must be synthetic or idx");
  e.train_count = checked_count(cfg.get_int("data.train_count", e.source == "idx" ? 0 : 500), "data.train_count");
  e.test_count = checked_count(cfg.get_int("data.test_count", e.source == "idx" ? 0 : 200), "data.test_count");
  if (e.source == "idx") {
    e.train_images = resolve(cfg.require_string("data.train_images"), base_dir);
    e.train_labels = resolve(cfg.require_string("data.train_labels"), base_dir);
    e.test_images = resolve(cfg.require_string("data.test_images"), base_dir);
    e.test_labels = resolve(cfg.require_string("data.test_labels"), base_dir);
    e.num_classes = static_cast<int>(cfg.get_int("data.num_classes", 10));
  } else {
    e.synth.classes = static_cast<int>(cfg.get_int("data.synth.classes", 2));
    e.synth.dim = static_cast<Index>(cfg.get_int("data.synth.dim", 10));
    e.synth.margin = cfg.get_double("data.synth.margin", 3.0);
    e.synth.sigma = cfg.get_double("data.synth.sigma", 1.0);
    e.num_classes = e.synth.classes;
    if (e.train_count < 1 || e.test_count < 1) throw ConfigError("config: synthetic counts must be >= 1");
    e.synth.count = e.train_count;
    e.synth.validate();
  }
  if (e.num_classes < 2) throw ConfigError("config: need at least 2 classes");

  e.n = static_cast<Index>(cfg.get_int("model.n", 20));
  if (e.n < 1) throw ConfigError("config: model.n must be >= 1");
  e.gamma = cfg.get_double("model.gamma", 0.95);
  if (!(e.gamma < 1.0)) throw ConfigError("config: model.gamma must be < 1");
  e.activation = parse_activation(cfg.get_string("model.activation", "relu"),
                                  cfg.get_double("model.activation_param", 0.0));
  const std::string mode = cfg.get_string("model.output", "affine");
  if (mode == "affine") {
    e.mode = OutputMode::AffineDU;
  } else if (mode == "bias") {
    e.mode = OutputMode::BiasOnly;
  } else {
    throw ConfigError("config: model.output must be affine or bias");
  }

  e.train.learning_rate = cfg.get_double("train.lr", 1e-3);
  e.train.batch_size = static_cast<int>(cfg.get_int("train.batch_size", 32));
  e.train.epochs = static_cast<int>(cfg.get_int("train.epochs", 5));
  e.train.lambda = cfg.get_double("train.lambda", 0.0);
  const std::string opt = cfg.get_string("train.optimizer", "adam");
  if (opt == "adam") {
    e.train.optimizer.kind = OptimizerKind::Adam;
  } else if (opt == "sgd") {
    e.train.optimizer.kind = OptimizerKind::SGD;
  } else {
    throw ConfigError("config: train.optimizer must be adam or sgd");
  }
  e.train.solver_tol = cfg.get_double("train.solver_tol", 1e-6);
  e.train.solver_max_iter = static_cast<int>(cfg.get_int("train.solver_max_iter", 500));
  e.train.seed = derive_seed(e.seed, 4);
  try {
    e.train.validate();
  } catch (const DomainError& err) {
    throw ConfigError(std::string("config: ") + err.what());
  }

  if (cfg.has("attack.kinds")) {
    e.attacks.clear();
    for (const std::string& name : cfg.get_strings("attack.kinds", {})) {
      try {
        e.attacks.push_back(attack_from_name(name));
      } catch (const DomainError& err) {
        throw ConfigError(std::string("config: ") + err.what());
      }
    }
  }
  e.epsilons = cfg.get_doubles("attack.epsilons", e.epsilons);
  for (std::size_t k = 0; k < e.epsilons.size(); ++k) {
    if (!(e.epsilons[k] >= 0.0) || (k > 0 && e.epsilons[k] < e.epsilons[k - 1])) {
      throw ConfigError("config: attack.epsilons must be ascending and nonnegative");
    }
  }
  e.pgdm_step = cfg.get_double("attack.pgdm_step", 0.0);
  e.pgdm_steps = static_cast<int>(cfg.get_int("attack.pgdm_steps", 20));
  if (e.pgdm_step < 0.0 || e.pgdm_steps < 1) throw ConfigError("config: bad PGDM settings");
  e.noise_seed = cfg.get_u64("attack.noise_seed", derive_seed(e.seed, 5));
  e.attack_samples = checked_count(cfg.get_int("attack.samples", 0), "attack.samples");

  e.compare.n = static_cast<Index>(cfg.get_int("compare.n", 50));
  e.compare.nets = static_cast<int>(cfg.get_int("compare.nets", 5));
  e.compare.gamma = cfg.get_double("compare.gamma", 0.9);
  e.compare.scale = cfg.get_double("compare.scale", 1.0);
  e.compare.tol = cfg.get_double("compare.tol", 1e-6);
  e.compare.max_iter = static_cast<int>(cfg.get_int("compare.max_iter", 2000));
  if (e.compare.n < 1 || e.compare.nets < 1 || !(e.compare.gamma < 1.0) || !(e.compare.tol > 0.0) ||
      e.compare.max_iter < 1 || !(e.compare.scale > 0.0)) {
    throw ConfigError("config: bad compare.* settings");
  }

  e.canonical = cfg.canonical({"out"});
  e.hash = hex64(fnv1a64(e.canonical));
  return e;
}

std::string ExperimentConfig::output_dir() const { return (fs::path(out) / hash).string(); }

Splits load_splits(const ExperimentConfig& cfg) {
  Splits s;
  if (cfg.source == "idx") {
    s.train = load_idx_dataset(cfg.train_images, cfg.train_labels, cfg.train_count, cfg.num_classes, "train");
    s.test = load_idx_dataset(cfg.test_images, cfg.test_labels, cfg.test_count, cfg.num_classes, "test");
    return s;
  }
  SynthSpec spec = cfg.synth;
  spec.count = cfg.train_count;
  s.train = synth_dataset(spec, derive_seed(cfg.seed, 1), "train");
  spec.count = cfg.test_count;
  s.test = synth_dataset(spec, derive_seed(cfg.seed, 2), "test");
  return s;
}

IterationConfig eval_solver(const ImplicitNetwork& net, const ExperimentConfig& cfg) {
  IterationConfig it = default_forward_config(net);
  it.tol = cfg.train.solver_tol;
  it.max_iter = cfg.train.solver_max_iter;
  return it;
}

CsvTable metrics_table(const std::vector<EpochMetrics>& epochs) {
  CsvTable t;
  t.header = {"epoch", "train_loss", "val_accuracy", "lip_u_to_y_upper", "forward_iters_mean",
              "backward_iters_mean"};
  for (const EpochMetrics& e : epochs) {
    t.add_row({format_number(static_cast<long long>(e.epoch)), format_number(e.train_loss),
               format_number(e.val_accuracy), format_number(e.lip_u_to_y), format_number(e.forward_iters_mean),
               format_number(e.backward_iters_mean)});
  }
  return t;
}

CsvTable robustness_table(const RobustnessCurve& curve) {
  CsvTable t;
  t.header = {"epsilon", "empirical_accuracy", "certified_accuracy", "attack_kind"};
  for (std::size_t k = 0; k < curve.epsilons.size(); ++k) {
    t.add_row({format_number(curve.epsilons[k]), format_number(curve.empirical_accuracy[k]),
               format_number(curve.certified_accuracy[k]), attack_name(curve.kind)});
  }
  return t;
}

namespace {

struct TrainOutcome {
  std::string dir;
  json summary;
};

TrainOutcome train_and_save(const ExperimentConfig& cfg) {
  const std::string dir = prepare_dir(cfg);
  const Splits splits = load_splits(cfg);
  const TrainableParams init = TrainableParams::init(cfg.n, splits.train.input_dim(), cfg.num_classes, cfg.gamma,
                                                     cfg.activation, cfg.mode, derive_seed(cfg.seed, 3));
  const TrainResult result = train(init, splits.train, splits.test, cfg.train);
  const ImplicitNetwork net = result.params.realize();

  write_text_file((fs::path(dir) / "metrics.csv").string(), emit_csv(metrics_table(result.epochs)));
  save_model(model_path(dir), net);
  write_text_file((fs::path(dir) / "model.json").string(), model_to_json(net) + "\n");
  save_raw_matrix((fs::path(dir) / "model_T.bin").string(), result.params.T, result.params.gamma);
  TrainOutcome out{dir, train_summary(cfg, result, net, splits)};
  write_json(dir, "summary.json", out.summary);
  return out;
}

json certify_into(const ExperimentConfig& cfg, const std::string& dir) {
  const ImplicitNetwork net = load_trained(dir);
  const Dataset data = attack_subset(cfg, load_splits(cfg).test);
  const IterationConfig solver = eval_solver(net, cfg);
  write_text_file((fs::path(dir) / "certify.csv").string(), emit_csv(certify_table(net, data, solver)));
  const json j = certify_summary(cfg, net, data, certified_radii(net, data, solver));
  write_json(dir, "certify.json", j);
  return j;
}

json attack_into(const ExperimentConfig& cfg, const std::string& dir) {
  const ImplicitNetwork net = load_trained(dir);
  const Dataset data = attack_subset(cfg, load_splits(cfg).test);
  const IterationConfig solver = eval_solver(net, cfg);
  json files = json::array();
  for (AttackKind kind : cfg.attacks) {
    AttackSpec spec;
    spec.kind = kind;
    spec.seed = cfg.noise_seed;
    spec.step = cfg.pgdm_step;
    spec.max_steps = cfg.pgdm_steps;
    const RobustnessCurve curve = robustness_curve(net, data, spec, cfg.epsilons, solver);
    const std::string name = "robustness_" + attack_name(kind) + ".csv";
    write_text_file((fs::path(dir) / name).string(), emit_csv(robustness_table(curve)));
    files.push_back(name);
  }
  return files;
}

}  // namespace

std::string run_train(const ExperimentConfig& cfg) { return train_and_save(cfg).dir; }

std::string run_certify(const ExperimentConfig& cfg) {
  const std::string dir = prepare_dir(cfg);
  certify_into(cfg, dir);
  return dir;
}

std::string run_attack(const ExperimentConfig& cfg) {
  const std::string dir = prepare_dir(cfg);
  attack_into(cfg, dir);
  return dir;
}

std::string run_all(const ExperimentConfig& cfg) {
  TrainOutcome t = train_and_save(cfg);
  t.summary["certification"] = certify_into(cfg, t.dir);
  t.summary["robustness_files"] = attack_into(cfg, t.dir);
  write_json(t.dir, "summary.json", t.summary);
  return t.dir;
}

std::string run_compare_solvers(const ExperimentConfig& cfg) {
  const std::string dir = prepare_dir(cfg);
  const CompareSolversConfig& c = cfg.compare;
  CsvTable t;
  t.header = {"net", "n", "mu_inf", "inf_norm", "pf_eig", "picard_iters", "picard_status",
              "averaged_alpha", "averaged_factor", "averaged_iters", "averaged_status"};
  const Activation relu = Activation::relu();
  auto status = [](const IterationTrace& tr) {
    return std::string(tr.converged ? "converged" : (tr.diverged ? "diverged" : "max_iter"));
  };
  for (int k = 0; k < c.nets; ++k) {
    std::mt19937_64 rng(derive_seed(cfg.seed, 100 + static_cast<std::uint64_t>(k)));
    Matrix tm(c.n, c.n);
    for (Index i = 0; i < c.n; ++i)
      for (Index j = 0; j < c.n; ++j) tm(i, j) = c.scale * (2.0 * uniform01(rng()) - 1.0);
    Vector bias(c.n);
    for (Index i = 0; i < c.n; ++i) bias(i) = 2.0 * uniform01(rng()) - 1.0;
    const Matrix a = parametrize_bounded_measure(tm, c.gamma);
    const NormSpec ns = NormSpec::linf(c.n);
    const double mu = matrix_measure(a, ns);
    const double diagl = negative_part(a.diagonal().minCoeff());
    const MapOracle f = [&](const Vector& x) -> Vector { return relu.apply(a * x + bias); };

    IterationConfig picard;
    picard.alpha = 1.0;
    picard.tol = c.tol;
    picard.max_iter = c.max_iter;
    const IterationTrace p = average_iteration(f, Vector::Zero(c.n), picard, ns);

    const StepChoice step = optimal_alpha_linf(positive_part(mu), diagl);
    IterationConfig averaged;
    averaged.alpha = step.alpha;
    averaged.tol = c.tol * step.alpha;
    averaged.max_iter = c.max_iter;
    const IterationTrace q = average_iteration(f, Vector::Zero(c.n), averaged, ns);

    t.add_row({format_number(static_cast<long long>(k)), format_number(static_cast<long long>(c.n)),
               format_number(mu), format_number(matrix_norm(a, ns)),
               format_number(perron_frobenius(a.cwiseAbs()).eigenvalue),
               format_number(static_cast<long long>(p.iterations)), status(p), format_number(step.alpha),
               format_number(step.factor), format_number(static_cast<long long>(q.iterations)), status(q)});
  }
  write_text_file((fs::path(dir) / "compare_solvers.csv").string(), emit_csv(t));
  return dir;
}

Matrix read_matrix_text(const std::string& text) {
  std::vector<std::vector<double>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::istringstream ls(line);
    std::vector<double> row;
    std::string tok;
    while (ls >> tok) row.push_back(parse_number(tok));
    if (!row.empty()) rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DimensionError("matrix file: no rows");
  Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows[0].size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows[0].size()) throw DimensionError("matrix file: ragged rows");
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
  }
  return m;
}

std::string measure_report(const Matrix& a, const std::string& norm, const std::vector<double>& weights) {
  if (a.rows() != a.cols()) throw DimensionError("measure: matrix must be square");
  const Index n = a.rows();
  const std::vector<double> w = parse_weights(weights, n, "weights");
  Vector wv = Vector::Ones(n);
  for (Index i = 0; i < static_cast<Index>(w.size()); ++i) wv(i) = w[static_cast<std::size_t>(i)];
  NormSpec ns = NormSpec::linf(wv);
  if (norm == "l1") {
    ns = NormSpec::l1(wv);
  } else if (norm == "l2") {
    ns = NormSpec::l2(Matrix(wv.asDiagonal()));
  } else if (norm != "linf") {
    throw DomainError("measure: norm must be linf, l1 or l2");
  }
  json j;
  j["norm"] = norm;
  j["n"] = n;
  j["weights"] = w;
  j["matrix_measure"] = matrix_measure(a, ns);
  j["matrix_norm"] = matrix_norm(a, ns);
  j["limit_oracle"] = measure_limit_oracle(a, ns);
  j["pf_eig_abs"] = perron_frobenius(a.cwiseAbs()).eigenvalue;
  if (norm == "linf" && n <= 12) j["lumer_bruteforce"] = lumer_bruteforce_inf(a, wv);
  return j.dump(2) + "\n";
}

}  // namespace nemon
