#include <gtest/gtest.h>

#include <cmath>

#include "test_util.hpp"
#include "tpa/objective.hpp"
#include "tpa/oracle.hpp"

using namespace tpa;
using namespace tpa::testutil;

namespace {

Model single_linear(std::vector<double> w, std::vector<double> b) {
  const std::size_t out = b.size(), in = w.size() / out;
  std::vector<double> p = w;
  p.insert(p.end(), b.begin(), b.end());
  return Model({Layer{LayerSpec::linear(in, out), p}});
}

// Straight-line reference for linear -> relu -> linear, written without the
// library's layer loop.
std::vector<double> hand_forward(const Model& m, const std::vector<double>& x) {
  const auto& l1 = m.layers()[0].params;
  const auto& l2 = m.layers()[2].params;
  const std::size_t d = m.layers()[0].spec.in_dim, h = m.layers()[0].spec.out_dim, c = m.layers()[2].spec.out_dim;
  std::vector<double> hidden(h);
  for (std::size_t r = 0; r < h; ++r) {
    double s = l1[h * d + r];
    for (std::size_t k = 0; k < d; ++k) s += l1[r * d + k] * x[k];
    hidden[r] = s > 0 ? s : 0;
  }
  std::vector<double> out(c);
  for (std::size_t r = 0; r < c; ++r) {
    double s = l2[c * h + r];
    for (std::size_t k = 0; k < h; ++k) s += l2[r * h + k] * hidden[k];
    out[r] = s;
  }
  return out;
}

}  // namespace

TEST(Forward, IdentityLayer) {
  const Model m = single_linear({1, 0, 0, 1}, {0, 0});
  const std::vector<double> x{0.3, -0.2};
  EXPECT_EQ(forward(m, x).values(), x);
}

TEST(Forward, ZeroWeightsGiveBias) {
  Model m = Model::initialize(mlp_spec(3, 4, 2, 2, 1), 5);
  auto& layers = m.mutable_layers();
  for (auto& l : layers) std::fill(l.params.begin(), l.params.end(), 0.0);
  auto& last = layers.back().params;
  last[last.size() - 2] = 0.7;
  last[last.size() - 1] = -1.5;
  EXPECT_EQ(forward(m, std::vector<double>{0, 0, 0}).values(), (std::vector<double>{0.7, -1.5}));
}

TEST(Forward, MatchesHandRolledTwoLayerNet) {
  const Model m = Model::initialize(mlp_spec(5, 7, 3), 11);
  Rng rng(2);
  for (int t = 0; t < 20; ++t) {
    const auto x = random_vector(rng, 5);
    const auto got = forward(m, x).values();
    const auto want = hand_forward(m, x);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(got[i], want[i], 1e-14);
  }
}

TEST(Forward, WrongInputSizeThrows) {
  const Model m = Model::initialize(mlp_spec(5, 7, 3), 11);
  EXPECT_THROW(forward(m, std::vector<double>(4)), DimensionError);
}

TEST(Forward, LinearStackIsHomogeneousWithoutBias) {
  Model m = Model::initialize({LayerSpec::linear(4, 6), LayerSpec::linear(6, 3)}, 3);
  for (auto& l : m.mutable_layers()) std::fill(l.params.end() - static_cast<std::ptrdiff_t>(l.spec.out_dim), l.params.end(), 0.0);
  Rng rng(4);
  for (int t = 0; t < 20; ++t) {
    const auto x = random_vector(rng, 4, -1, 1);
    const double a = rng.uniform(-3, 3);
    const auto fx = forward(m, x).values();
    const auto fax = forward(m, scaled(x, a)).values();
    for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(fax[i], a * fx[i], 1e-13);
  }
}

TEST(LossCe, UniformLogits) {
  EXPECT_NEAR(loss_ce(std::vector<double>{0.3, 0.3, 0.3, 0.3}, 2), std::log(4.0), 1e-15);
}

TEST(LossCe, SaturatedLogitsStayFinite) {
  const double l = loss_ce(std::vector<double>{1000.0, 0.0}, 0);
  EXPECT_TRUE(std::isfinite(l));
  EXPECT_NEAR(l, 0.0, 1e-300);
  EXPECT_NEAR(loss_ce(std::vector<double>{1000.0, 0.0}, 1), 1000.0, 1e-9);
}

TEST(LossCe, MatchesHighPrecisionValue) {
  // 50-digit decimal evaluation of log(e + e^2 + e^0.5) - 2
  EXPECT_NEAR(loss_ce(std::vector<double>{1.0, 2.0, 0.5}, 1), 0.46436878410794484162, 1e-15);
}

TEST(LossCe, ClassOutOfRange) {
  EXPECT_THROW(loss_ce(std::vector<double>{1.0, 2.0}, 2), IndexError);
}

TEST(LossGrad, AffineClosedForm) {
  const std::vector<double> w{0.5, -1.0, 2.0, 0.25, 0.0, 1.5}, b{0.1, -0.3};
  const Model m = single_linear(w, b);
  const std::vector<double> x{0.2, 0.7, 0.4};
  const std::size_t y = 1;
  const auto z = forward(m, x).values();
  const double mx = std::max(z[0], z[1]);
  const double e0 = std::exp(z[0] - mx), e1 = std::exp(z[1] - mx);
  const double r0 = e0 / (e0 + e1), r1 = e1 / (e0 + e1) - 1.0;
  const auto g = loss_and_grad(m, x, y).grad_input.values();
  for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(g[k], w[k] * r0 + w[3 + k] * r1, 1e-15);
}

TEST(LossGrad, DeadReluLayerGivesZeroInputGradient) {
  Model m = Model::initialize(mlp_spec(3, 4, 2), 8);
  auto& p = m.mutable_layers()[0].params;
  for (std::size_t i = 0; i < 12; ++i) p[i] = std::abs(p[i]);
  for (std::size_t i = 12; i < 16; ++i) p[i] = -10.0;  // every unit dead on [0,1]^3
  const auto g = loss_and_grad(m, std::vector<double>{0.2, 0.5, 0.9}, 0).grad_input.values();
  for (double v : g) EXPECT_EQ(v, 0.0);
}

TEST(LossGrad, MatchesCentralDifferencesOnSoftplusNets) {
  Rng rng(17);
  for (std::uint64_t s = 0; s < 100; ++s) {
    const Model m = random_softplus_model(1000 + s);
    const auto x = random_vector(rng, m.input_dim());
    const std::size_t y = rng.below(m.n_classes());
    const Tensor fd = fd_gradient(ModelLoss(m, y), x, 1e-5);
    EXPECT_LT(rel_err(loss_and_input_grad(m, x, y).grad_input, fd), 1e-6) << "model " << s;
  }
}

TEST(LossGrad, ParameterGradientsMatchFiniteDifferences) {
  Model m = random_softplus_model(77);
  Rng rng(3);
  const auto x = random_vector(rng, m.input_dim());
  const LossGrad lg = loss_and_grad(m, x, 1);
  for (std::size_t li = 0; li < m.layers().size(); ++li) {
    for (std::size_t pi = 0; pi < m.layers()[li].params.size(); ++pi) {
      const double orig = m.layers()[li].params[pi];
      m.mutable_layers()[li].params[pi] = orig + 1e-5;
      const double up = loss_ce(forward(m, x), 1);
      m.mutable_layers()[li].params[pi] = orig - 1e-5;
      const double down = loss_ce(forward(m, x), 1);
      m.mutable_layers()[li].params[pi] = orig;
      EXPECT_NEAR(lg.grad_params[li][pi], (up - down) / 2e-5, 1e-7);
    }
  }
}

TEST(LogProb, IsNegatedLoss) {
  Rng rng(5);
  for (std::uint64_t s = 0; s < 30; ++s) {
    const Model m = random_softplus_model(s);
    const auto x = random_vector(rng, m.input_dim());
    for (std::size_t y = 0; y < m.n_classes(); ++y)
      EXPECT_EQ(log_prob_of_class(m, x, y) + loss_ce(forward(m, x), y), 0.0);
  }
}

TEST(LogProb, UniformFourClass) {
  const Model m = single_linear(std::vector<double>(8, 0.0), {0.2, 0.2, 0.2, 0.2});
  EXPECT_NEAR(log_prob_of_class(m, std::vector<double>{0.5, 0.5}, 3), -std::log(4.0), 1e-15);
}

TEST(Model, SeedDeterminism) {
  const auto spec = mlp_spec(6, 5, 3, 1, 1);
  const Model a = Model::initialize(spec, 9), b = Model::initialize(spec, 9), c = Model::initialize(spec, 10);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
  const std::vector<double> x{0.1, 0.2, 0.3, 0.4, 0.5, 0.6};
  EXPECT_EQ(loss_and_grad(a, x, 2).grad_input, loss_and_grad(b, x, 2).grad_input);
}

TEST(Model, InitWithinFanInBound) {
  const Model m = Model::initialize(mlp_spec(16, 9, 3), 1);
  for (const auto& l : m.layers()) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(l.spec.in_dim));
    for (double p : l.params) EXPECT_LE(std::abs(p), bound);
  }
}

TEST(Model, RejectsMismatchedLayers) {
  EXPECT_THROW(Model::initialize({LayerSpec::linear(3, 4), LayerSpec::linear(5, 2)}, 0), DimensionError);
}

TEST(Model, ResidualBlockFormula) {
  // x + relu(W2 relu(W1 x + b1) + b2), 1-D
  const Model m({Layer{LayerSpec::residual(1), {2.0, -0.5, -3.0, 1.0}}, Layer{LayerSpec::linear(1, 1), {1.0, 0.0}}});
  const double x = 0.4;
  const double inner = std::max(0.0, 2.0 * x - 0.5);
  EXPECT_DOUBLE_EQ(forward(m, std::vector<double>{x})[0], x + std::max(0.0, -3.0 * inner + 1.0));
}

TEST(Model, PiecewiseLinearFlag) {
  EXPECT_TRUE(Model::initialize(mlp_spec(3, 4, 2, 1, 1, Activation::relu), 0).is_piecewise_linear());
  EXPECT_FALSE(Model::initialize(mlp_spec(3, 4, 2, 1, 1, Activation::softplus), 0).is_piecewise_linear());
}
