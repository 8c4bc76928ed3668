#include "nemon/experiment.hpp"
#include "nemon/model_io.hpp"

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <map>

namespace py = pybind11;
using namespace nemon;

namespace {

NormSpec make_norm(const std::string& kind, Index n, const std::optional<Vector>& weights) {
  if (kind == "linf") return weights ? NormSpec::linf(*weights) : NormSpec::linf(n);
  if (kind == "l1") return weights ? NormSpec::l1(*weights) : NormSpec::l1(n);
  if (kind == "l2") return weights ? NormSpec::l2(Matrix(weights->asDiagonal())) : NormSpec::l2(n);
  throw DomainError("norm must be linf, l1 or l2");
}

Activation make_activation(const std::string& name, double param) {
  if (name == "relu") return Activation::relu();
  if (name == "leaky_relu") return Activation::leaky_relu(param);
  if (name == "tanh") return Activation::tanh();
  if (name == "smooth_relu") return Activation::smooth_relu(param);
  throw DomainError("unknown activation '" + name + "'");
}

IterationConfig solver(const ImplicitNetwork& net, double tol, int max_iter) {
  IterationConfig cfg = default_forward_config(net);
  cfg.tol = tol;
  cfg.max_iter = max_iter;
  return cfg;
}

std::vector<int> to_labels(const std::vector<long long>& labels) {
  return std::vector<int>(labels.begin(), labels.end());
}

}  // namespace

PYBIND11_MODULE(nemon, m) {
  m.doc() = "Implicit networks with non-Euclidean contraction guarantees";

  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
  py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
  py::register_exception<ConvergenceError>(m, "ConvergenceError", PyExc_RuntimeError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_IOError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

  m.def(
      "matrix_norm",
      [](const Matrix& a, const std::string& norm, const std::optional<Vector>& weights) {
        return matrix_norm(a, make_norm(norm, a.rows(), weights));
      },
      py::arg("a"), py::arg("norm") = "linf", py::arg("weights") = std::nullopt);
  m.def(
      "matrix_measure",
      [](const Matrix& a, const std::string& norm, const std::optional<Vector>& weights) {
        return matrix_measure(a, make_norm(norm, a.rows(), weights));
      },
      py::arg("a"), py::arg("norm") = "linf", py::arg("weights") = std::nullopt);
  m.def(
      "measure_limit_oracle",
      [](const Matrix& a, const std::string& norm, const std::optional<Vector>& weights, double h) {
        return measure_limit_oracle(a, make_norm(norm, a.rows(), weights), h);
      },
      py::arg("a"), py::arg("norm") = "linf", py::arg("weights") = std::nullopt, py::arg("h") = 1e-8);
  m.def("parametrize_bounded_measure", &parametrize_bounded_measure, py::arg("t"), py::arg("gamma"));
  m.def("recover_parametrization", &recover_parametrization, py::arg("a"), py::arg("gamma"));
  m.def(
      "optimal_alpha_linf",
      [](double osl, double diagl) {
        const StepChoice s = optimal_alpha_linf(osl, diagl);
        return py::make_tuple(s.alpha, s.factor);
      },
      py::arg("osl"), py::arg("diagl"));
  m.def(
      "optimal_alpha_general",
      [](double lip, double osl) {
        const StepChoice s = optimal_alpha_general(lip, osl);
        return py::make_tuple(s.alpha, s.factor);
      },
      py::arg("lip"), py::arg("osl"));

  py::class_<ImplicitNetwork>(m, "ImplicitNetwork")
      .def(py::init([](const Matrix& a, const Matrix& b, const Matrix& c, const std::optional<Matrix>& d,
                       const std::optional<Vector>& bias, const std::optional<Vector>& eta,
                       const std::string& activation, double param) {
             const Vector e = eta ? *eta : Vector::Ones(a.rows());
             const Activation act = make_activation(activation, param);
             if (bias) {
               if (d) throw DomainError("pass either d or bias, not both");
               return ImplicitNetwork::with_bias(a, b, c, *bias, e, act);
             }
             return ImplicitNetwork(a, b, c, d ? *d : Matrix::Zero(c.rows(), b.cols()), e, act);
           }),
           py::arg("a"), py::arg("b"), py::arg("c"), py::arg("d") = std::nullopt, py::arg("bias") = std::nullopt,
           py::arg("eta") = std::nullopt, py::arg("activation") = "relu", py::arg("activation_param") = 0.0)
      .def_property_readonly("A", &ImplicitNetwork::A)
      .def_property_readonly("B", &ImplicitNetwork::B)
      .def_property_readonly("C", &ImplicitNetwork::C)
      .def_property_readonly("D", &ImplicitNetwork::D)
      .def_property_readonly("bias", &ImplicitNetwork::bias)
      .def_property_readonly("eta", &ImplicitNetwork::eta)
      .def(
          "forward",
          [](const ImplicitNetwork& net, const Vector& u, double tol, int max_iter) {
            const ForwardResult r = forward(net, u, solver(net, tol, max_iter));
            return py::make_tuple(r.state, r.output, r.trace.iterations);
          },
          py::arg("u"), py::arg("tol") = 1e-6, py::arg("max_iter") = 500)
      .def(
          "forward_batch",
          [](const ImplicitNetwork& net, const Matrix& u, double tol, int max_iter) {
            const BatchForwardResult r = forward_batch(net, u, solver(net, tol, max_iter));
            return py::make_tuple(r.states, r.outputs, r.trace.iterations);
          },
          py::arg("u"), py::arg("tol") = 1e-6, py::arg("max_iter") = 500)
      .def("to_json", [](const ImplicitNetwork& net) { return model_to_json(net); })
      .def("save", [](const ImplicitNetwork& net, const std::string& path) { save_model(path, net); });

  m.def("load_model", &load_model, py::arg("path"));
  m.def("model_from_json", &model_from_json, py::arg("text"));

  m.def(
      "wellposedness",
      [](const ImplicitNetwork& net, double gamma) {
        const WellPosednessReport r = wellposedness(net, gamma);
        return py::dict(py::arg("mu_inf") = r.mu_inf, py::arg("inf_norm") = r.inf_norm,
                        py::arg("pf_eig") = r.pf_eig, py::arg("ok") = r.ok);
      },
      py::arg("net"), py::arg("gamma"));
  m.def(
      "lipschitz_bounds",
      [](const ImplicitNetwork& net) {
        const LipschitzBounds lb = lipschitz_bounds(net);
        return py::dict(py::arg("u_to_x") = lb.lip_u_to_x, py::arg("u_to_y") = lb.lip_u_to_y,
                        py::arg("convex_upper") = lb.convex_upper);
      },
      py::arg("net"));
  m.def(
      "certified_radius",
      [](const ImplicitNetwork& net, const Vector& u, Index label) {
        const CertifiedRadius r = certified_radius(net, u, label);
        return py::dict(py::arg("radius") = r.radius, py::arg("margin") = r.margin,
                        py::arg("unbounded") = r.unbounded);
      },
      py::arg("net"), py::arg("u"), py::arg("label"));
  m.def(
      "attack",
      [](const ImplicitNetwork& net, const Matrix& u, const std::vector<long long>& labels, const std::string& kind,
         double epsilon, std::uint64_t seed, double step, int max_steps) {
        AttackSpec spec;
        spec.kind = attack_from_name(kind);
        spec.epsilon = epsilon;
        spec.seed = seed;
        spec.step = step;
        spec.max_steps = max_steps;
        return apply_attack(net, u, to_labels(labels), spec);
      },
      py::arg("net"), py::arg("u"), py::arg("labels"), py::arg("kind"), py::arg("epsilon"), py::arg("seed") = 0,
      py::arg("step") = 0.0, py::arg("max_steps") = 20);

  m.def(
      "train",
      [](const Matrix& u, const std::vector<long long>& labels, int num_classes, Index n, double gamma,
         const std::string& activation, double lr, int batch_size, int epochs, double lambda, std::uint64_t seed,
         const std::string& optimizer) {
        Dataset data;
        data.inputs = u;
        data.labels = to_labels(labels);
        data.num_classes = num_classes;
        data.split = "train";
        TrainConfig cfg;
        cfg.learning_rate = lr;
        cfg.batch_size = batch_size;
        cfg.epochs = epochs;
        cfg.lambda = lambda;
        cfg.seed = seed;
        if (optimizer == "sgd") {
          cfg.optimizer.kind = OptimizerKind::SGD;
        } else if (optimizer != "adam") {
          throw DomainError("optimizer must be adam or sgd");
        }
        const TrainableParams init = TrainableParams::init(n, u.rows(), num_classes, gamma,
                                                           make_activation(activation, 0.5),
                                                           OutputMode::AffineDU, seed);
        const TrainResult result = train(init, data, data, cfg);
        py::list epochs_out;
        for (const EpochMetrics& e : result.epochs) {
          epochs_out.append(py::dict(py::arg("epoch") = e.epoch, py::arg("train_loss") = e.train_loss,
                                     py::arg("val_accuracy") = e.val_accuracy,
                                     py::arg("lip_u_to_y") = e.lip_u_to_y));
        }
        return py::make_tuple(result.params.realize(), epochs_out);
      },
      py::arg("u"), py::arg("labels"), py::arg("num_classes"), py::arg("n") = 20, py::arg("gamma") = 0.95,
      py::arg("activation") = "relu", py::arg("lr") = 1e-3, py::arg("batch_size") = 32, py::arg("epochs") = 5,
      py::arg("lambda_") = 0.0, py::arg("seed") = 0, py::arg("optimizer") = "adam");

  m.def(
      "run",
      [](const std::string& command, const std::map<std::string, std::string>& settings) {
        Config cfg;
        for (const auto& [k, v] : settings) cfg.set(k, v);
        const ExperimentConfig e = ExperimentConfig::from_config(cfg);
        if (command == "train") return run_train(e);
        if (command == "certify") return run_certify(e);
        if (command == "attack") return run_attack(e);
        if (command == "run") return run_all(e);
        if (command == "compare-solvers") return run_compare_solvers(e);
        throw DomainError("unknown command '" + command + "'");
      },
      py::arg("command"), py::arg("config"));
}
