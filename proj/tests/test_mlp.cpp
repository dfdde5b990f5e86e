#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "mtensor/adam.hpp"
#include "mtensor/mlp.hpp"
#include "mtensor/model_io.hpp"
#include "support/oracles.hpp"

using namespace mtensor;

TEST(Mlp, InitializationScaleAndShapes) {
  std::mt19937_64 rng(1);
  const Mlp net({4, 16, 5, 5.0}, rng);
  ASSERT_EQ(net.depth(), 4u);
  EXPECT_EQ(net.out_dim(), 5u);
  EXPECT_EQ(net.hidden(), 16u);
  EXPECT_EQ(net.weights()[0].cols(), 1);
  EXPECT_EQ(net.weights()[3].rows(), 5);
  EXPECT_EQ(net.parameter_count(), 16u + 16 * 16 * 2 + 16 * 5);
  EXPECT_LE(net.weights()[0].cwiseAbs().maxCoeff(), std::sqrt(6.0) / 5.0);
  EXPECT_LE(net.weights()[2].cwiseAbs().maxCoeff(), std::sqrt(6.0 / 16.0) / 5.0);
}

TEST(Mlp, ForwardExamples) {
  const Mlp zero = Mlp::zeros({3, 8, 4, 5.0});
  EXPECT_EQ(zero.forward(0.7).cwiseAbs().maxCoeff(), 0.0);

  Matrix h(3, 1);
  h << 1, -2, 0.5;
  const Mlp linear({h}, 5.0);
  EXPECT_EQ(linear.forward(2.0), Vector(2.0 * h.col(0)));

  const Mlp two({Matrix::Constant(1, 1, 1.0), Matrix::Constant(1, 1, 2.0)}, 1.0);
  EXPECT_NEAR(two.forward(std::numbers::pi / 2)(0), 2.0, 1e-15);
  EXPECT_EQ(two.forward(0.0)(0), 0.0);
}

TEST(Mlp, BatchMatchesSingle) {
  std::mt19937_64 rng(2);
  const Mlp net({3, 8, 3, 5.0}, rng);
  const std::vector<double> xs{0.1, -0.4, 1.7};
  const Matrix y = net.forward_batch(xs);
  for (Index b = 0; b < xs.size(); ++b) EXPECT_LE((y.col(static_cast<Eigen::Index>(b)) - net.forward(xs[b])).norm(), 1e-15);
}

TEST(Mlp, RejectsNonFiniteAndBadShapes) {
  std::mt19937_64 rng(3);
  const Mlp net({2, 4, 2, 5.0}, rng);
  EXPECT_THROW(net.forward(std::nan("")), std::invalid_argument);
  EXPECT_THROW(Mlp({Matrix::Zero(3, 1), Matrix::Zero(2, 4)}, 5.0), std::invalid_argument);
  EXPECT_THROW(Mlp({Matrix::Zero(3, 2)}, 5.0), std::invalid_argument);
  Mlp huge({Matrix::Constant(1, 1, 1e308), Matrix::Constant(1, 1, 1e308)}, 1.0);
  EXPECT_THROW(huge.forward(10.0), std::runtime_error);
  MlpCache cache;
  net.forward(0.3, &cache);
  EXPECT_THROW(net.backward(cache, Vector(Vector::Zero(3))), std::invalid_argument);
  MlpCache empty;
  EXPECT_THROW(net.backward(empty, Vector(Vector::Zero(2))), std::invalid_argument);
}

TEST(Mlp, BackwardExamples) {
  std::mt19937_64 rng(4);
  const Mlp net({3, 6, 2, 5.0}, rng);
  MlpCache cache;
  net.forward(0.4, &cache);
  for (const Matrix& g : net.backward(cache, Vector(Vector::Zero(2)))) EXPECT_EQ(g.cwiseAbs().maxCoeff(), 0.0);

  Matrix h(2, 1);
  h << 0.3, -1.1;
  const Mlp linear({h}, 5.0);
  linear.forward(1.5, &cache);
  Vector c(2);
  c << 2.0, -3.0;
  const MlpGradients g = linear.backward(cache, c);
  EXPECT_LE((g[0] - c * 1.5).norm(), 1e-15);
}

TEST(Mlp, BackwardMatchesCentralDifferences) {
  std::mt19937_64 rng(5);
  Mlp net({3, 7, 4, 5.0}, rng);
  const std::vector<double> xs{0.2, -0.6, 0.9};
  const Matrix cot = oracle::random_matrix(4, 3, rng);
  MlpCache cache;
  net.forward_batch(xs, &cache);
  const MlpGradients g = net.backward(cache, cot);
  auto loss = [&] { return (net.forward_batch(xs).array() * cot.array()).sum(); };
  for (Index i = 0; i < net.depth(); ++i) {
    Matrix& w = net.weights()[i];
    for (Eigen::Index k = 0; k < w.size(); ++k) {
      const double fd = oracle::central_difference(loss, w.data()[k], 1e-5);
      const double an = g[i].data()[k];
      if (std::max(std::abs(fd), std::abs(an)) > 1e-8) EXPECT_LE(oracle::rel_err(an, fd), 1e-5) << "layer " << i;
    }
  }
}

TEST(Mlp, SineIsOmegaLipschitz) {
  const double w0 = 5.0;
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(-3, 3);
  for (int rep = 0; rep < 1000; ++rep) {
    const double x = u(rng), y = u(rng);
    EXPECT_LE(std::abs(std::sin(w0 * x)), w0 * std::abs(x) + 1e-15);
    EXPECT_LE(std::abs(std::sin(w0 * x) - std::sin(w0 * y)), w0 * std::abs(x - y) + 1e-15);
  }
}

TEST(WeightL1Max, Examples) {
  Matrix m(2, 2);
  m << 1, -1, 2, 0;
  const std::vector<Mlp> one{Mlp({Matrix::Constant(2, 1, 0.5), m}, 1.0)};
  EXPECT_EQ(weight_l1_max(one), 4.0);
  const std::vector<Mlp> zeros{Mlp::zeros({2, 3, 2, 5.0})};
  EXPECT_EQ(weight_l1_max(zeros), 0.0);
  const std::vector<Mlp> two{one[0], Mlp({Matrix::Constant(3, 1, 3.0)}, 1.0)};
  EXPECT_EQ(weight_l1_max(two), 9.0);
  EXPECT_THROW(weight_l1_max(std::vector<Mlp>{}), std::invalid_argument);
}

TEST(LipschitzBound, Examples) {
  EXPECT_NEAR(lipschitz_bound(1, 1, 1, 3, 2).delta, std::sqrt(2.0), 1e-15);
  const double base = lipschitz_bound(1.3, 5, 1, 3, 2).delta;
  EXPECT_NEAR(lipschitz_bound(1.3, 5, 2, 3, 2).delta / base, 4.0, 1e-12);
  const LipschitzCert c = lipschitz_bound(2.0, 3.0, 1.5, 3, 2);
  EXPECT_NEAR(c.delta, std::sqrt(2.0) * std::pow(2.0, 6) * std::pow(3.0, 3) * std::pow(1.5, 2), 1e-9);
  EXPECT_THROW(lipschitz_bound(0.0, 1, 1, 3, 2), std::invalid_argument);
  EXPECT_THROW(lipschitz_bound(1.0, -1, 1, 3, 2), std::invalid_argument);
  EXPECT_THROW(lipschitz_bound(1.0, 1, 1, 0, 2), std::invalid_argument);
}

TEST(Adam, ZeroGradientLeavesParameters) {
  Matrix p = Matrix::Constant(2, 2, 0.5);
  const Matrix before = p;
  Adam adam;
  std::vector<Matrix*> params{&p};
  const std::vector<Matrix> grads{Matrix::Zero(2, 2)};
  for (int i = 0; i < 5; ++i) adam.step(params, grads);
  EXPECT_EQ(p, before);
  EXPECT_EQ(adam.steps(), 5u);
}

TEST(Adam, FirstStepIsSignStep) {
  Matrix p = Matrix::Zero(1, 3);
  AdamConfig cfg;
  cfg.lr = 0.01;
  Adam adam(cfg);
  std::vector<Matrix*> params{&p};
  Matrix g(1, 3);
  g << 4.0, -0.25, 1e-3;
  adam.step(params, std::vector<Matrix>{g});
  // m_hat = g, v_hat = g^2, so the update is lr * g / (|g| + eps)
  for (Eigen::Index k = 0; k < 3; ++k) EXPECT_NEAR(p(0, k), -0.01 * g(0, k) / (std::abs(g(0, k)) + 1e-8), 1e-15);
}

TEST(Adam, ConstantGradientDriftsMonotonically) {
  Matrix p = Matrix::Zero(1, 1);
  Adam adam;
  std::vector<Matrix*> params{&p};
  const std::vector<Matrix> grads{Matrix::Constant(1, 1, 2.0)};
  double prev = 0.0;
  for (int i = 0; i < 20; ++i) {
    adam.step(params, grads);
    EXPECT_LT(p(0, 0), prev);
    prev = p(0, 0);
  }
}

TEST(Adam, RejectsNonFiniteAndMismatchedGradients) {
  Matrix p = Matrix::Zero(2, 1);
  Adam adam;
  std::vector<Matrix*> params{&p};
  EXPECT_THROW(adam.step(params, std::vector<Matrix>{Matrix::Constant(2, 1, std::nan(""))}), std::runtime_error);
  EXPECT_THROW(adam.step(params, std::vector<Matrix>{Matrix::Zero(3, 1)}), std::invalid_argument);
}

TEST(ModelIo, MlpRoundTrip) {
  std::mt19937_64 rng(7);
  const Mlp net({3, 5, 4, 7.0}, rng);
  const auto dir = std::filesystem::temp_directory_path() / "mtensor_mlp_rt";
  std::filesystem::remove_all(dir);
  save_mlp(dir, net);
  const Mlp back = load_mlp(dir);
  EXPECT_EQ(back.omega0(), 7.0);
  ASSERT_EQ(back.depth(), 3u);
  for (Index i = 0; i < 3; ++i) EXPECT_EQ(back.weights()[i], net.weights()[i]);
  std::filesystem::remove_all(dir);
}
