#include "nemon/experiment.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

namespace {

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void add_common(CLI::App* cmd, CommonFlags& flags, bool config_required) {
  auto* opt = cmd->add_option("--config", flags.config, "key=value experiment config");
  if (config_required) opt->required();
  cmd->add_option("--seed", flags.seed, "global seed (overrides the config's seed)");
  cmd->add_option("--out", flags.out, "output base directory (overrides the config's out)");
}

nemon::Config load_config(const CommonFlags& flags) {
  nemon::Config cfg = flags.config.empty() ? nemon::Config() : nemon::Config::load(flags.config);
  if (flags.seed) cfg.set("seed", std::to_string(*flags.seed));
  if (!flags.out.empty()) cfg.set("out", flags.out);
  return cfg;
}

nemon::ExperimentConfig experiment(const CommonFlags& flags) {
  const std::string base =
      flags.config.empty() ? "" : std::filesystem::path(flags.config).parent_path().string();
  return nemon::ExperimentConfig::from_config(load_config(flags), base);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Implicit networks with non-Euclidean contraction guarantees"};
  app.require_subcommand(1);

  CommonFlags flags;
  auto* train = app.add_subcommand("train", "train a model; writes metrics.csv, checkpoints, summary.json");
  add_common(train, flags, true);
  auto* certify = app.add_subcommand("certify", "certified radii of the trained model on the test split");
  add_common(certify, flags, true);
  auto* attack = app.add_subcommand("attack", "robustness curves of the trained model under each attack");
  add_common(attack, flags, true);
  auto* run = app.add_subcommand("run", "train, certify and attack in one go");
  add_common(run, flags, true);
  auto* compare = app.add_subcommand("compare-solvers", "Picard vs averaged iteration on seeded networks");
  add_common(compare, flags, false);

  auto* measure = app.add_subcommand("measure", "norm and matrix measure of a matrix file");
  add_common(measure, flags, false);
  std::string matrix_file;
  std::string norm;
  std::vector<double> weights;
  measure->add_option("--matrix", matrix_file, "whitespace-separated matrix file");
  measure->add_option("--norm", norm, "linf, l1 or l2")->check(CLI::IsMember({"linf", "l1", "l2"}));
  measure->add_option("--eta", weights, "weights (eta, or diag of P for l2)")->delimiter(',');

  CLI11_PARSE(app, argc, argv);

  try {
    if (measure->parsed()) {
      const nemon::Config cfg = load_config(flags);
      for (const auto& [key, value] : cfg.values()) {
        if (key.rfind("measure.", 0) != 0 && key != "seed" && key != "out") {
          throw nemon::ConfigError("measure: unexpected config key '" + key + "'");
        }
      }
      if (matrix_file.empty()) matrix_file = cfg.get_string("measure.matrix", "");
      if (matrix_file.empty()) throw nemon::ConfigError("measure: --matrix (or measure.matrix) is required");
      if (norm.empty()) norm = cfg.get_string("measure.norm", "linf");
      if (weights.empty()) weights = cfg.get_doubles("measure.weights", {});
      const nemon::Matrix a = nemon::read_matrix_text(nemon::read_text_file(matrix_file));
      const std::string report = nemon::measure_report(a, norm, weights);
      if (flags.out.empty() && !cfg.has("out")) {
        std::cout << report;
      } else {
        std::string eta;
        for (double w : weights) eta += nemon::format_number(w) + ",";
        const std::string key = nemon::hex64(nemon::fnv1a64(cfg.canonical({"out"}) + "norm=" + norm + "\neta=" +
                                                            eta + "\n" + nemon::read_text_file(matrix_file)));
        const std::filesystem::path dir = std::filesystem::path(cfg.get_string("out", "runs")) / key;
        std::filesystem::create_directories(dir);
        nemon::write_text_file((dir / "measure.json").string(), report);
        std::cout << (dir / "measure.json").string() << "\n";
      }
      return 0;
    }

    const nemon::ExperimentConfig cfg = experiment(flags);
    std::string dir;
    if (train->parsed()) dir = nemon::run_train(cfg);
    if (certify->parsed()) dir = nemon::run_certify(cfg);
    if (attack->parsed()) dir = nemon::run_attack(cfg);
    if (run->parsed()) dir = nemon::run_all(cfg);
    if (compare->parsed()) dir = nemon::run_compare_solvers(cfg);
    std::cout << dir << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
