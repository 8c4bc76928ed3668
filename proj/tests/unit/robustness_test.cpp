#include "nemon/robustness.hpp"

#include "nemon/data.hpp"
#include "nemon/training.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

namespace nemon {
namespace {

using testing::Rng;

ImplicitNetwork smooth_net(std::uint64_t seed) {
  return TrainableParams::init(8, 4, 3, 0.9, Activation::smooth_relu(0.5), OutputMode::AffineDU, seed).realize();
}

std::vector<int> labels_for(Index m, int classes) {
  std::vector<int> l;
  for (Index j = 0; j < m; ++j) l.push_back(static_cast<int>(j % classes));
  return l;
}

TEST(Inversion, Examples) {
  Matrix u(2, 1);
  u << 0.2, 0.8;
  const Matrix out = attack_inversion(u, 0.1);
  EXPECT_DOUBLE_EQ(out(0, 0), 0.3);
  EXPECT_DOUBLE_EQ(out(1, 0), 0.7);
  EXPECT_EQ(attack_inversion(u, 0.0), u);
  Matrix half(1, 1);
  half << 0.5;
  EXPECT_EQ(attack_inversion(half, 0.3)(0, 0), 0.5);
  EXPECT_THROW(attack_inversion(u, -0.1), DomainError);
}

TEST(UniformNoise, RangeAndDeterminism) {
  Rng rng(1);
  const Matrix u = rng.matrix(20, 7, 0, 1);
  EXPECT_EQ(attack_uniform_noise(u, 0.0, 5), u);
  const Matrix a = attack_uniform_noise(u, 0.1, 5);
  EXPECT_LE((a - u).cwiseAbs().maxCoeff(), 0.1);
  EXPECT_EQ(a, attack_uniform_noise(u, 0.1, 5));
  EXPECT_NE(a, attack_uniform_noise(u, 0.1, 6));
  // Per-column seeds: a column's noise does not depend on its batch.
  const Matrix tail = attack_uniform_noise(u.rightCols(3), 0.1, 5);
  EXPECT_NE(tail, a.rightCols(3));
  EXPECT_EQ(attack_uniform_noise(u.leftCols(3), 0.1, 5), a.leftCols(3));
}

TEST(ModelIndependentAttacks, SameAcrossNetworks) {
  Rng rng(2);
  const Matrix u = rng.matrix(4, 5, 0, 1);
  const auto labels = labels_for(5, 3);
  for (AttackKind kind : {AttackKind::Inversion, AttackKind::UniformNoise}) {
    AttackSpec spec;
    spec.kind = kind;
    spec.epsilon = 0.2;
    spec.seed = 9;
    EXPECT_EQ(apply_attack(smooth_net(1), u, labels, spec), apply_attack(smooth_net(2), u, labels, spec));
  }
}

TEST(Fgsm, PerturbationIsSignPattern) {
  const ImplicitNetwork net = smooth_net(3);
  Rng rng(3);
  const Matrix u = rng.matrix(4, 6, 0, 1);
  const auto labels = labels_for(6, 3);
  EXPECT_EQ(attack_fgsm(net, u, labels, 0.0), u);
  const Matrix d = attack_fgsm(net, u, labels, 0.05) - u;
  for (Index i = 0; i < d.rows(); ++i)
    for (Index j = 0; j < d.cols(); ++j) {
      const double v = std::abs(d(i, j));
      EXPECT_TRUE(std::abs(v - 0.05) < 1e-15 || v == 0.0);
    }
}

TEST(Fgsm, InputGradientMatchesFiniteDifferences) {
  const ImplicitNetwork net = smooth_net(4);
  IterationConfig cfg = default_forward_config(net);
  cfg.tol = 1e-14;
  cfg.max_iter = 100000;
  Rng rng(4);
  const Matrix u = rng.matrix(4, 2, 0, 1);
  const auto labels = labels_for(2, 3);
  const Matrix g = loss_input_gradient(net, u, labels, cfg);
  for (Index j = 0; j < 2; ++j) {
    const Vector fd = finite_difference_gradient(
        [&](const Vector& v) {
          return softmax_crossentropy(forward(net, v, cfg).output, labels[static_cast<std::size_t>(j)]).loss;
        },
        u.col(j), 1e-5);
    for (Index i = 0; i < 4; ++i) {
      const double denom = std::max({std::abs(g(i, j)), std::abs(fd(i)), 1e-6});
      EXPECT_LE(std::abs(g(i, j) - fd(i)) / denom, 1e-5);
    }
  }
}

TEST(Pgdm, OneLargeStepEqualsFgsm) {
  const ImplicitNetwork net = smooth_net(5);
  Rng rng(5);
  const Matrix u = rng.matrix(4, 6, 0, 1);
  const auto labels = labels_for(6, 3);
  EXPECT_EQ(attack_pgdm(net, u, labels, 0.05, 0.05, 1), attack_fgsm(net, u, labels, 0.05));
  EXPECT_EQ(attack_pgdm(net, u, labels, 0.05, 0.3, 1), attack_fgsm(net, u, labels, 0.05));
  EXPECT_EQ(attack_pgdm(net, u, labels, 0.0, 0.1, 5), u);
  EXPECT_THROW(attack_pgdm(net, u, labels, 0.1, 0.0, 5), DomainError);
  EXPECT_THROW(attack_pgdm(net, u, labels, 0.1, 0.1, 0), DomainError);
}

TEST(Pgdm, StaysInBallAndIncreasesLoss) {
  const ImplicitNetwork net = smooth_net(6);
  Rng rng(6);
  const Matrix u = rng.matrix(4, 10, 0, 1);
  const auto labels = labels_for(10, 3);
  for (int steps : {1, 3, 10}) {
    const Matrix adv = attack_pgdm(net, u, labels, 0.1, 0.025, steps);
    EXPECT_LE((adv - u).cwiseAbs().maxCoeff(), 0.1 + 1e-15);
  }
  auto loss = [&](const Matrix& x) {
    const BatchForwardResult f = forward_batch(net, x);
    double s = 0.0;
    for (Index j = 0; j < x.cols(); ++j) s += softmax_crossentropy(f.outputs.col(j), labels[j]).loss;
    return s;
  };
  EXPECT_GT(loss(attack_pgdm(net, u, labels, 0.1, 0.025, 20)), loss(u));
}

TEST(AttackSpec, DefaultsAndValidation) {
  AttackSpec spec;
  spec.kind = AttackKind::PGDM;
  spec.epsilon = 0.1;
  EXPECT_NO_THROW(spec.validate());
  EXPECT_EQ(spec.max_steps, 20);
  spec.max_steps = 0;
  EXPECT_THROW(spec.validate(), DomainError);
  spec = AttackSpec{};
  spec.epsilon = -1.0;
  EXPECT_THROW(spec.validate(), DomainError);
  EXPECT_EQ(attack_from_name("uniform_noise"), AttackKind::UniformNoise);
  EXPECT_THROW(attack_from_name("carlini"), DomainError);
}

class CurveTest : public ::testing::Test {
 protected:
  void SetUp() override {
    SynthSpec spec;
    spec.classes = 3;
    spec.dim = 4;
    spec.count = 300;
    spec.margin = 2.5;
    const Dataset train_set = synth_dataset(spec, 1);
    spec.count = 60;
    data_ = synth_dataset(spec, 2);
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.lambda = 1e-2;
    net_ = train(TrainableParams::init(12, 4, 3, 0.9, Activation::relu(), OutputMode::AffineDU, 3), train_set,
                 data_, cfg)
               .params.realize();
    solver_ = default_forward_config(*net_);
    solver_.tol = 1e-12;
    solver_.max_iter = 100000;
  }
  Dataset data_;
  std::optional<ImplicitNetwork> net_;
  IterationConfig solver_;
};

TEST_F(CurveTest, InvariantsHold) {
  const std::vector<double> grid{0.0, 0.01, 0.05, 0.1, 0.3};
  const double clean = accuracy(*net_, data_, solver_);
  for (AttackKind kind : {AttackKind::Inversion, AttackKind::UniformNoise, AttackKind::FGSM, AttackKind::PGDM}) {
    AttackSpec spec;
    spec.kind = kind;
    spec.seed = 4;
    const RobustnessCurve c = robustness_curve(*net_, data_, spec, grid, solver_);
    ASSERT_EQ(c.epsilons.size(), grid.size());
    EXPECT_DOUBLE_EQ(c.empirical_accuracy[0], clean);
    for (std::size_t k = 0; k < grid.size(); ++k) {
      EXPECT_LE(c.certified_accuracy[k], c.empirical_accuracy[k]);
      if (k > 0) {
        EXPECT_LE(c.certified_accuracy[k], c.certified_accuracy[k - 1]);
      }
    }
  }
  AttackSpec spec;
  EXPECT_THROW(robustness_curve(*net_, data_, spec, {0.1, 0.05}, solver_), DomainError);
}

TEST_F(CurveTest, CertifiedRadiusIsSound) {
  const std::vector<double> radii = certified_radii(*net_, data_, solver_);
  const BatchForwardResult clean = forward_batch(*net_, data_.inputs, solver_);
  int certified = 0;
  for (Index j = 0; j < data_.size(); ++j) {
    const double r = radii[static_cast<std::size_t>(j)];
    if (!(r > 1e-9)) continue;
    ++certified;
    const Matrix u = data_.inputs.col(j);
    const std::vector<int> label{data_.labels[static_cast<std::size_t>(j)]};
    for (AttackKind kind : {AttackKind::Inversion, AttackKind::UniformNoise, AttackKind::FGSM, AttackKind::PGDM}) {
      AttackSpec spec;
      spec.kind = kind;
      spec.epsilon = r - 1e-9;
      spec.seed = static_cast<std::uint64_t>(j);
      const Matrix adv = apply_attack(*net_, u, label, spec, solver_);
      EXPECT_LE((adv - u).cwiseAbs().maxCoeff(), spec.epsilon + 1e-15);
      const Vector y = forward(*net_, adv.col(0), solver_).output;
      EXPECT_EQ(argmax(y), label[0]) << "sample " << j << " attack " << attack_name(kind);
    }
  }
  EXPECT_GT(certified, 0);
}

}  // namespace
}  // namespace nemon
