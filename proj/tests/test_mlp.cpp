#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "gradient_oracle.hpp"
#include "uavland/mlp.hpp"

using namespace uavland;
using nn::Head;
using nn::Matrix;
using nn::Mlp;

namespace {

Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Matrix m(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = n(rng);
  return m;
}

}  // namespace

TEST(Forward, ZeroNetGivesZero) {
  Mlp net({6, 8, 3}, Head::Linear);
  Rng rng(1);
  EXPECT_TRUE(net.forward(random_matrix(6, 5, rng)).isZero(0.0));
}

TEST(Forward, IdentityReluLayer) {
  // Single ReLU layer: a hidden identity layer followed by an identity linear head.
  Mlp net({3, 3, 3}, Head::Linear);
  net.layers()[0].weight = Matrix::Identity(3, 3);
  net.layers()[1].weight = Matrix::Identity(3, 3);
  nn::Vector in(3);
  in << -1.5, 0.0, 2.5;
  const nn::Vector out = net.forward(in);
  EXPECT_EQ(out(0), 0.0);
  EXPECT_EQ(out(1), 0.0);
  EXPECT_EQ(out(2), 2.5);
}

TEST(Forward, PureAndShapeChecked) {
  Rng rng(2);
  const Mlp net = Mlp::random({6, 16, 16, 2}, Head::Tanh, rng);
  const Matrix x = random_matrix(6, 4, rng);
  EXPECT_EQ(net.forward(x), net.forward(x));
  EXPECT_TRUE((net.forward(x).array().abs() <= 1.0).all());
  EXPECT_THROW(net.forward(random_matrix(5, 4, rng)), std::invalid_argument);
}

TEST(Backward, ScalarChainRule) {
  // y = w x with x = 2, w = 3; L = y^2 -> dL/dw = 2 y x = 24
  Mlp net({1, 1}, Head::Linear);
  net.layers()[0].weight(0, 0) = 3.0;
  const Matrix x = Matrix::Constant(1, 1, 2.0);
  const nn::Tape tape = net.record(x);
  const double y = tape.output()(0, 0);
  net.backward(tape, Matrix::Constant(1, 1, 2.0 * y));
  EXPECT_DOUBLE_EQ(net.layers()[0].grad_weight(0, 0), 24.0);
  EXPECT_DOUBLE_EQ(net.layers()[0].grad_bias(0), 12.0);
}

TEST(Backward, ZeroUpstreamZeroGradient) {
  Rng rng(3);
  Mlp net = Mlp::random({4, 8, 2}, Head::Tanh, rng);
  const nn::Tape tape = net.record(random_matrix(4, 3, rng));
  const Matrix dx = net.backward(tape, Matrix::Zero(2, 3));
  EXPECT_TRUE(dx.isZero(0.0));
  for (double g : net.gradients()) EXPECT_EQ(g, 0.0);
}

TEST(Backward, RequiresRecordedForward) {
  Rng rng(4);
  Mlp net = Mlp::random({4, 8, 2}, Head::Linear, rng);
  EXPECT_THROW(net.backward(nn::Tape{}, Matrix::Zero(2, 1)), std::logic_error);
  Mlp other = Mlp::random({4, 8, 8, 2}, Head::Linear, rng);
  const nn::Tape foreign = other.record(random_matrix(4, 1, rng));
  EXPECT_THROW(net.backward(foreign, Matrix::Zero(2, 1)), std::invalid_argument);
}

struct GradCase {
  std::vector<std::size_t> sizes;
  Head head;
};

class GradientCheck : public ::testing::TestWithParam<GradCase> {};

TEST_P(GradientCheck, MatchesCentralDifferences) {
  const auto& p = GetParam();
  Rng rng(17 + p.sizes.size() * 3 + (p.head == Head::Tanh));
  Mlp net = Mlp::random(p.sizes, p.head, rng);
  const Matrix x = random_matrix(static_cast<Eigen::Index>(p.sizes.front()), 3, rng);
  const Matrix up = random_matrix(static_cast<Eigen::Index>(p.sizes.back()), 3, rng);

  const nn::Tape tape = net.record(x);
  const Matrix dx = net.backward(tape, up);
  const std::vector<double> analytic = net.gradients();
  const std::vector<double> numeric = oracle::finite_difference_gradient(net, x, up);
  ASSERT_EQ(analytic.size(), numeric.size());
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    EXPECT_LT(oracle::relative_error(analytic[i], numeric[i]), 1e-4) << "parameter " << i;
  }
  const Matrix dx_num = oracle::finite_difference_input_gradient(net, x, up);
  for (Eigen::Index i = 0; i < dx.size(); ++i) {
    EXPECT_LT(oracle::relative_error(dx.data()[i], dx_num.data()[i]), 1e-4);
  }
  // input_gradient agrees with backward and does not touch parameter grads
  Mlp fresh = net;
  fresh.zero_grad();
  EXPECT_EQ(fresh.input_gradient(tape, up), dx);
  for (double g : fresh.gradients()) EXPECT_EQ(g, 0.0);
}

INSTANTIATE_TEST_SUITE_P(
    Topologies, GradientCheck,
    ::testing::Values(GradCase{{5, 3}, Head::Linear}, GradCase{{5, 3}, Head::Tanh},
                      GradCase{{6, 12, 2}, Head::Linear}, GradCase{{6, 12, 2}, Head::Tanh},
                      GradCase{{8, 10, 9, 1}, Head::Linear}, GradCase{{8, 10, 9, 4}, Head::Tanh},
                      GradCase{{6, 7, 8, 9, 2}, Head::Linear}, GradCase{{6, 7, 8, 9, 2}, Head::Tanh}));

TEST(Adam, ScalarFirstStep) {
  // Fresh moments: m_hat = g, v_hat = g^2, step = lr * g / (|g| + eps).
  for (double g : {0.37, -2.5, 1e-3}) {
    Mlp net({1, 1}, Head::Linear);
    net.layers()[0].weight(0, 0) = 0.75;
    net.layers()[0].grad_weight(0, 0) = g;
    const nn::AdamConfig cfg{.lr = 0.01};
    net.adam_step(cfg);
    EXPECT_NEAR(net.layers()[0].weight(0, 0), 0.75 - 0.01 * g / (std::abs(g) + 1e-8), 1e-15);
    EXPECT_EQ(net.layers()[0].grad_weight(0, 0), 0.0);  // cleared
    EXPECT_EQ(net.layers()[0].bias(0), 0.0);              // zero grad: unchanged
  }
}

TEST(Adam, ScalarTwoStepsOracle) {
  const double lr = 0.05, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  const double g1 = 0.5, g2 = -0.2;
  double m = (1 - b1) * g1, v = (1 - b2) * g1 * g1;
  double w = 1.0 - lr * (m / (1 - b1)) / (std::sqrt(v / (1 - b2)) + eps);
  m = b1 * m + (1 - b1) * g2;
  v = b2 * v + (1 - b2) * g2 * g2;
  w -= lr * (m / (1 - b1 * b1)) / (std::sqrt(v / (1 - b2 * b2)) + eps);

  Mlp net({1, 1}, Head::Linear);
  net.layers()[0].weight(0, 0) = 1.0;
  net.layers()[0].grad_weight(0, 0) = g1;
  net.adam_step({lr, b1, b2, eps});
  net.layers()[0].grad_weight(0, 0) = g2;
  net.adam_step({lr, b1, b2, eps});
  EXPECT_NEAR(net.layers()[0].weight(0, 0), w, 1e-14);
}

TEST(Adam, ZeroGradientLeavesParameters) {
  Rng rng(5);
  Mlp net = Mlp::random({4, 6, 2}, Head::Linear, rng);
  const auto before = net.parameters();
  net.adam_step({});
  EXPECT_EQ(net.parameters(), before);
}

TEST(Adam, Deterministic) {
  Rng r1(6), r2(6);
  Mlp a = Mlp::random({4, 6, 2}, Head::Tanh, r1);
  Mlp b = Mlp::random({4, 6, 2}, Head::Tanh, r2);
  Rng data(7);
  const Matrix x = random_matrix(4, 5, data), up = random_matrix(2, 5, data);
  for (int i = 0; i < 3; ++i) {
    a.backward(a.record(x), up);
    b.backward(b.record(x), up);
    a.adam_step({});
    b.adam_step({});
  }
  EXPECT_EQ(a.parameters(), b.parameters());
}

TEST(SoftUpdate, Law) {
  Rng rng(8);
  Mlp src = Mlp::random({3, 5, 2}, Head::Linear, rng);
  const Mlp tgt0 = Mlp::random({3, 5, 2}, Head::Linear, rng);
  for (double tau : {0.0, 0.005, 0.5, 1.0}) {
    Mlp tgt = tgt0;
    nn::soft_update(tgt, src, tau);
    const auto s = src.parameters(), t0 = tgt0.parameters(), t = tgt.parameters();
    for (std::size_t i = 0; i < s.size(); ++i) EXPECT_EQ(t[i], tau * s[i] + (1.0 - tau) * t0[i]);
  }
  Mlp tgt = tgt0;
  nn::soft_update(tgt, src, 1.0);
  EXPECT_EQ(tgt.parameters(), src.parameters());
  tgt = tgt0;
  nn::soft_update(tgt, src, 0.0);
  EXPECT_EQ(tgt.parameters(), tgt0.parameters());

  Mlp one({1, 1}, Head::Linear), zero({1, 1}, Head::Linear);
  one.layers()[0].weight(0, 0) = 1.0;
  nn::soft_update(zero, one, 0.005);
  EXPECT_EQ(zero.layers()[0].weight(0, 0), 0.005);
}

TEST(SoftUpdate, GeometricContraction) {
  Rng rng(9);
  const Mlp src = Mlp::random({3, 4, 1}, Head::Linear, rng);
  Mlp tgt = Mlp::random({3, 4, 1}, Head::Linear, rng);
  const double tau = 0.1;
  auto gap = [&] {
    double g = 0.0;
    const auto s = src.parameters(), t = tgt.parameters();
    for (std::size_t i = 0; i < s.size(); ++i) g = std::max(g, std::abs(s[i] - t[i]));
    return g;
  };
  const double g0 = gap();
  for (int n = 1; n <= 30; ++n) {
    nn::soft_update(tgt, src, tau);
    EXPECT_NEAR(gap(), g0 * std::pow(1.0 - tau, n), 1e-12);
  }
}

TEST(SoftUpdate, TopologyMismatch) {
  Mlp a({3, 4, 1}, Head::Linear), b({3, 5, 1}, Head::Linear), c({3, 4, 1}, Head::Tanh);
  EXPECT_THROW(nn::soft_update(a, b, 0.5), std::invalid_argument);
  EXPECT_THROW(nn::soft_update(a, c, 0.5), std::invalid_argument);
}

TEST(Serialization, LosslessRoundTrip) {
  Rng rng(10);
  const Mlp net = Mlp::random({6, 64, 64, 2}, Head::Tanh, rng, 0.1);
  const Mlp back = nn::from_text(nn::to_text(net));
  EXPECT_TRUE(back.same_topology(net));
  EXPECT_EQ(back.parameters(), net.parameters());
  EXPECT_EQ(nn::to_text(back), nn::to_text(net));
}

TEST(Serialization, RejectsCorruptInput) {
  EXPECT_THROW(nn::from_text("not-a-net 1\n"), std::runtime_error);
  EXPECT_THROW(nn::from_text("uavland-mlp 1\nhead linear\nlayers 2 2 1\n0.5 0.25\n"), std::runtime_error);
  EXPECT_THROW(nn::from_text("uavland-mlp 1\nhead linear\nlayers 2 1 1\nabc\n0\n"), std::runtime_error);
}

TEST(Initialization, FanInBoundsAndFinalScale) {
  Rng rng(11);
  const Mlp net = Mlp::random({16, 64, 2}, Head::Tanh, rng, 0.1);
  EXPECT_LE(net.layers()[0].weight.cwiseAbs().maxCoeff(), 1.0 / 4.0);
  EXPECT_LE(net.layers()[1].weight.cwiseAbs().maxCoeff(), 0.1 / 8.0);
}
