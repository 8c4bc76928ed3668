#include "nemon/training.hpp"

#include "nemon/data.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace nemon {
namespace {

using testing::Rng;

IterationConfig tight(const ImplicitNetwork& net) {
  IterationConfig cfg = default_forward_config(net);
  cfg.tol = 1e-14;
  cfg.max_iter = 100000;
  return cfg;
}

double max_rel_err(const Matrix& g, const Matrix& fd) {
  double worst = 0.0;
  for (Index i = 0; i < g.rows(); ++i)
    for (Index j = 0; j < g.cols(); ++j) {
      const double denom = std::max({std::abs(g(i, j)), std::abs(fd(i, j)), 1e-6});
      worst = std::max(worst, std::abs(g(i, j) - fd(i, j)) / denom);
    }
  return worst;
}

struct Batch {
  Matrix u;
  std::vector<int> labels;
};

Batch random_batch(Rng& rng, Index r, Index m, int classes) {
  Batch b{rng.matrix(r, m), {}};
  for (Index j = 0; j < m; ++j) b.labels.push_back(static_cast<int>(rng.index(classes)));
  return b;
}

double batch_loss(const TrainableParams& p, const Batch& b) {
  const ImplicitNetwork net = p.realize();
  const BatchForwardResult fwd = forward_batch(net, b.u, tight(net));
  double loss = 0.0;
  for (Index j = 0; j < b.u.cols(); ++j) {
    loss += softmax_crossentropy(fwd.outputs.col(j), b.labels[static_cast<std::size_t>(j)]).loss;
  }
  return loss / static_cast<double>(b.u.cols());
}

GradientSet batch_grad(const TrainableParams& p, const Batch& b) {
  const ImplicitNetwork net = p.realize();
  const BatchForwardResult fwd = forward_batch(net, b.u, tight(net));
  Matrix gy(net.output_dim(), b.u.cols());
  for (Index j = 0; j < b.u.cols(); ++j) {
    gy.col(j) = softmax_crossentropy(fwd.outputs.col(j), b.labels[static_cast<std::size_t>(j)]).grad /
                static_cast<double>(b.u.cols());
  }
  GradientSet g = implicit_backward_batch(net, b.u, fwd.states, gy, tight(net)).grads;
  g.T = chain_to_T(g.A, p.T);
  return g;
}

TEST(SoftmaxCrossEntropy, Examples) {
  EXPECT_NEAR(softmax_crossentropy(Vector::Zero(10), 3).loss, std::log(10.0), 1e-15);
  Vector l(2);
  l << 2, 0;
  EXPECT_NEAR(softmax_crossentropy(l, 0).loss, std::log1p(std::exp(-2.0)), 1e-15);
  Rng rng(1);
  for (int k = 0; k < 20; ++k) {
    const Vector logits = rng.vector(7, -30, 30);
    const LossAndGrad lg = softmax_crossentropy(logits, k % 7);
    EXPECT_NEAR(lg.grad.sum(), 0.0, 1e-12);
    EXPECT_GE(lg.loss, 0.0);
  }
  Vector huge(2);
  huge << 1000, -1000;
  EXPECT_TRUE(std::isfinite(softmax_crossentropy(huge, 1).loss));
  EXPECT_THROW(softmax_crossentropy(l, 2), DomainError);
}

TEST(FiniteDifference, OracleExamples) {
  TrainableParams p = TrainableParams::init(3, 2, 2, 0.9, Activation::relu(), OutputMode::AffineDU, 4);
  auto sq = [](const TrainableParams& q) {
    return 0.5 * (q.T.squaredNorm() + q.B.squaredNorm() + q.C.squaredNorm() + q.D.squaredNorm());
  };
  GradientSet g = finite_difference_oracle(sq, p, 1e-5);
  EXPECT_LE((g.T - p.T).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_LE((g.D - p.D).cwiseAbs().maxCoeff(), 1e-8);
  auto lin = [](const TrainableParams& q) { return 3.0 * q.B.sum() - q.C(0, 0); };
  g = finite_difference_oracle(lin, p, 1e-3);
  EXPECT_LE((g.B.array() - 3.0).abs().maxCoeff(), 1e-10);
  EXPECT_NEAR(g.C(0, 0), -1.0, 1e-10);
  const Vector x = Vector::LinSpaced(4, -1, 2);
  const Vector gx = finite_difference_gradient([](const Vector& v) { return 0.5 * v.squaredNorm(); }, x, 1e-5);
  EXPECT_LE((gx - x).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(ImplicitBackward, MatchesFiniteDifferencesOnSmoothNets) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const TrainableParams p =
        TrainableParams::init(8, 4, 3, 0.9, Activation::smooth_relu(0.5), OutputMode::AffineDU, seed);
    Rng rng(100 + seed);
    const Batch b = random_batch(rng, 4, 3, 3);
    const GradientSet g = batch_grad(p, b);
    const GradientSet fd = finite_difference_oracle([&](const TrainableParams& q) { return batch_loss(q, b); }, p,
                                                    1e-5);
    EXPECT_LE(max_rel_err(g.T, fd.T), 1e-5) << "seed " << seed;
    EXPECT_LE(max_rel_err(g.B, fd.B), 1e-5) << "seed " << seed;
    EXPECT_LE(max_rel_err(g.C, fd.C), 1e-5) << "seed " << seed;
    EXPECT_LE(max_rel_err(g.D, fd.D), 1e-5) << "seed " << seed;
  }
}

TEST(ImplicitBackward, BiasModeMatchesFiniteDifferences) {
  const TrainableParams p = TrainableParams::init(6, 3, 3, 0.8, Activation::tanh(), OutputMode::BiasOnly, 9);
  Rng rng(9);
  const Batch b = random_batch(rng, 3, 4, 3);
  const GradientSet g = batch_grad(p, b);
  const GradientSet fd = finite_difference_oracle([&](const TrainableParams& q) { return batch_loss(q, b); }, p,
                                                  1e-5);
  EXPECT_LE(max_rel_err(g.bias, fd.bias), 1e-5);
  EXPECT_LE(max_rel_err(g.T, fd.T), 1e-5);
  EXPECT_TRUE(g.D.isZero(0.0));
}

TEST(ImplicitBackward, InputGradientMatchesFiniteDifferences) {
  const TrainableParams p =
      TrainableParams::init(8, 4, 3, 0.9, Activation::smooth_relu(0.5), OutputMode::AffineDU, 21);
  const ImplicitNetwork net = p.realize();
  Rng rng(21);
  const Vector u = rng.vector(4);
  const ForwardResult fwd = forward(net, u, tight(net));
  const LossAndGrad lg = softmax_crossentropy(fwd.output, 2);
  const BackwardResult back = implicit_backward(net, u, fwd, lg.grad, tight(net));
  const Vector fd = finite_difference_gradient(
      [&](const Vector& v) { return softmax_crossentropy(forward(net, v, tight(net)).output, 2).loss; }, u, 1e-5);
  EXPECT_LE(max_rel_err(back.grad_inputs, fd), 1e-5);
}

TEST(ImplicitBackward, ExplicitLayerReduction) {
  // A = 0: y = C relu(B u) + D u, so dL/dB = diag(relu') C^T g u^T.
  Rng rng(2);
  const Matrix b = rng.matrix(5, 3);
  const Matrix c = rng.matrix(2, 5);
  const ImplicitNetwork net(Matrix::Zero(5, 5), b, c, rng.matrix(2, 3), Vector::Ones(5), Activation::relu());
  const Vector u = rng.vector(3);
  const Vector g = rng.vector(2);
  const ForwardResult fwd = forward(net, u);
  const BackwardResult back = implicit_backward(net, u, fwd, g);
  const Vector slope = (b * u).unaryExpr([](double z) { return z > 0 ? 1.0 : 0.0; });
  const Matrix expected = slope.cwiseProduct(c.transpose() * g) * u.transpose();
  EXPECT_LE((back.grads.B - expected).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(ImplicitBackward, ZeroUpstreamGivesZeroGradients) {
  const TrainableParams p = TrainableParams::init(5, 3, 2, 0.9, Activation::relu(), OutputMode::AffineDU, 3);
  const ImplicitNetwork net = p.realize();
  const Vector u = Vector::Ones(3);
  const ForwardResult fwd = forward(net, u);
  const BackwardResult back = implicit_backward(net, u, fwd, Vector::Zero(2));
  EXPECT_TRUE(back.grads.A.isZero(0.0));
  EXPECT_TRUE(back.grads.B.isZero(0.0));
  EXPECT_TRUE(back.grads.C.isZero(0.0));
  EXPECT_TRUE(back.grads.D.isZero(0.0));
  EXPECT_TRUE(back.grad_inputs.isZero(0.0));
}

TEST(ImplicitBackward, AgreesWithDenseGMatrix) {
  // G = ((I - J A)^{-1} J)^T solves the matrix form of the adjoint fixed
  // point; the per-sample adjoint must equal G C^T g.
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const TrainableParams p = TrainableParams::init(10, 4, 3, 0.9, Activation::relu(), OutputMode::AffineDU, seed);
    const ImplicitNetwork net = p.realize();
    Rng rng(seed + 50);
    const Vector u = rng.vector(4, -2, 2);
    const Vector g = rng.vector(3);
    const ForwardResult fwd = forward(net, u, tight(net));
    const BackwardResult back = implicit_backward(net, u, fwd, g, tight(net));
    const Vector jdiag = net.activation().derivative(net.A() * fwd.state + net.B() * u);
    const Matrix j = jdiag.asDiagonal();
    const Matrix gm = (Matrix::Identity(10, 10) - j * net.A()).partialPivLu().solve(j).transpose();
    const Vector v = gm * net.C().transpose() * g;
    const Matrix expected = v * fwd.state.transpose();
    EXPECT_LE((back.grads.A - expected).cwiseAbs().maxCoeff(), 1e-11);
    EXPECT_LE((back.grads.B - v * u.transpose()).cwiseAbs().maxCoeff(), 1e-11);
  }
}

TEST(ImplicitBackward, AdjointContractionRate) {
  Rng rng(4);
  for (int k = 0; k < 10; ++k) {
    const ImplicitNetwork net = testing::random_net(rng, 10, 3, 3, rng.uniform(0.0, 0.95), Activation::relu(), 2.0);
    const Vector u = rng.vector(3);
    const ForwardResult fwd = forward(net, u);
    const BackwardResult back = implicit_backward(net, u, fwd, rng.vector(3));
    const NetworkConstants c = network_constants(net);
    const double factor = optimal_alpha_linf(c.osl, c.diagl).factor;
    const auto& r = back.adjoint_trace.residuals;
    for (std::size_t i = 1; i < r.size(); ++i) EXPECT_LE(r[i], (factor + 1e-6) * r[i - 1] + 1e-15);
  }
}

TEST(ChainToT, MatchesFiniteDifferencesOfParametrization) {
  Rng rng(5);
  const Matrix t = rng.matrix(4, 4);
  const Matrix w = rng.matrix(4, 4);
  auto f = [&](const Matrix& tt) { return (w.array() * parametrize_bounded_measure(tt, 0.9).array()).sum(); };
  const Matrix g = chain_to_T(w, t);
  for (Index i = 0; i < 4; ++i)
    for (Index j = 0; j < 4; ++j) {
      Matrix up = t;
      Matrix down = t;
      up(i, j) += 1e-6;
      down(i, j) -= 1e-6;
      EXPECT_NEAR(g(i, j), (f(up) - f(down)) / 2e-6, 1e-8);
    }
  Matrix zero_diag = Matrix::Zero(2, 2);
  Matrix ga(2, 2);
  ga << 1, 2, 3, 4;
  const Matrix gz = chain_to_T(ga, zero_diag);
  EXPECT_EQ(gz(0, 0), 1.0);
  EXPECT_EQ(gz(0, 1), 2.0);
}

TEST(Regularizer, Examples) {
  TrainableParams p;
  p.T = Matrix::Zero(2, 2);
  p.gamma = 0.5;
  p.B = Matrix(2, 2);
  p.B << 1, 1, 0, -2;
  p.C = Matrix(1, 2);
  p.C << 1, -2;
  p.D = Matrix(1, 2);
  p.D << 0.5, -0.5;
  p.bias = Vector::Zero(1);
  const RegularizerValue r = regularizer(p, 1.0);
  EXPECT_DOUBLE_EQ(r.value, 14.0);
  const RegularizerValue zero = regularizer(p, 0.0);
  EXPECT_EQ(zero.value, 0.0);
  EXPECT_TRUE(zero.grads.B.isZero(0.0));
  EXPECT_TRUE(zero.grads.T.isZero(0.0));
}

TEST(Regularizer, MatchesFiniteDifferences) {
  TrainableParams p = TrainableParams::init(5, 4, 3, 0.6, Activation::relu(), OutputMode::AffineDU, 8);
  // Negative diagonal in T makes mu_inf(A) vary with T, and distinct row
  // sums keep every argmax unique.
  for (Index i = 0; i < 5; ++i) p.T(i, i) = -0.1 - 0.02 * static_cast<double>(i);
  for (Index i = 0; i < 4; ++i) p.B(0, i) += 0.3;
  const RegularizerValue r = regularizer(p, 0.7);
  const double mu = matrix_measure(p.realize().A(), NormSpec::linf(5));
  ASSERT_GT(mu, 0.0);
  const GradientSet fd =
      finite_difference_oracle([](const TrainableParams& q) { return regularizer(q, 0.7).value; }, p, 1e-7);
  EXPECT_LE(max_rel_err(r.grads.T, fd.T), 1e-4);
  EXPECT_LE(max_rel_err(r.grads.B, fd.B), 1e-4);
  EXPECT_LE(max_rel_err(r.grads.C, fd.C), 1e-4);
  EXPECT_LE(max_rel_err(r.grads.D, fd.D), 1e-4);
}

TEST(TrainConfig, Validation) {
  TrainConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.learning_rate = 0.0;
  EXPECT_THROW(cfg.validate(), DomainError);
  cfg = TrainConfig{};
  cfg.lambda = -1.0;
  EXPECT_THROW(cfg.validate(), DomainError);
}

class SyntheticTraining : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    SynthSpec spec;
    spec.classes = 2;
    spec.dim = 10;
    spec.count = 500;
    train_ = new Dataset(synth_dataset(spec, 1, "train"));
    spec.count = 200;
    val_ = new Dataset(synth_dataset(spec, 2, "val"));
  }
  static void TearDownTestSuite() {
    delete train_;
    delete val_;
  }
  static TrainResult run(std::uint64_t seed, const StepObserver& observer = {}) {
    TrainConfig cfg;
    cfg.seed = seed;
    const TrainableParams init =
        TrainableParams::init(20, 10, 2, 0.95, Activation::relu(), OutputMode::AffineDU, seed);
    return train(init, *train_, *val_, cfg, observer);
  }
  static Dataset* train_;
  static Dataset* val_;
};

Dataset* SyntheticTraining::train_ = nullptr;
Dataset* SyntheticTraining::val_ = nullptr;

TEST_F(SyntheticTraining, ReachesHighAccuracyWithMonotoneLoss) {
  int steps = 0;
  const TrainResult r = run(3, [&](const TrainableParams& p) {
    ++steps;
    EXPECT_LE(matrix_measure(p.realize().A(), NormSpec::linf(p.state_dim())), p.gamma + 1e-12);
    EXPECT_TRUE(wellposedness(p.realize(), p.gamma).ok);
  });
  ASSERT_EQ(r.epochs.size(), 5u);
  EXPECT_EQ(steps, 5 * 16);
  EXPECT_GE(r.epochs.back().val_accuracy, 0.95);
  EXPECT_LE(r.epochs[1].train_loss, r.epochs[0].train_loss);
  EXPECT_LE(r.epochs[2].train_loss, r.epochs[1].train_loss);
}

TEST_F(SyntheticTraining, Deterministic) {
  const TrainResult a = run(11);
  const TrainResult b = run(11);
  ASSERT_EQ(a.epochs.size(), b.epochs.size());
  for (std::size_t k = 0; k < a.epochs.size(); ++k) {
    EXPECT_EQ(a.epochs[k].train_loss, b.epochs[k].train_loss);
    EXPECT_EQ(a.epochs[k].val_accuracy, b.epochs[k].val_accuracy);
    EXPECT_EQ(a.epochs[k].lip_u_to_y, b.epochs[k].lip_u_to_y);
  }
  EXPECT_EQ(a.params.T, b.params.T);
}

TEST_F(SyntheticTraining, RejectsMismatchedData) {
  const TrainableParams init = TrainableParams::init(5, 7, 2, 0.9, Activation::relu(), OutputMode::AffineDU, 0);
  EXPECT_THROW(train(init, *train_, *val_, TrainConfig{}), DimensionError);
}

TEST(Training, NonConvergenceAbortsWithDiagnostics) {
  SynthSpec spec;
  spec.count = 20;
  const Dataset d = synth_dataset(spec, 0);
  TrainConfig cfg;
  cfg.solver_max_iter = 1;
  cfg.solver_tol = 1e-15;
  const TrainableParams init = TrainableParams::init(5, 10, 2, 0.9, Activation::relu(), OutputMode::AffineDU, 0);
  try {
    train(init, d, d, cfg);
    FAIL() << "expected TrainingError";
  } catch (const TrainingError& e) {
    EXPECT_NE(std::string(e.what()).find("epoch 1"), std::string::npos);
  }
}

}  // namespace
}  // namespace nemon
