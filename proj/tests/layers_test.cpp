#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "gabornet/layers.hpp"
#include "oracles.hpp"

using namespace gabornet;
using gabornet::testing::max_fd_error;
using gabornet::testing::random_tensor;
using gabornet::testing::weighted_sum;

namespace {

GaborParamSet random_params(int c_out, int c_in, int k, std::uint64_t seed) {
  Rng rng(seed);
  GaborParamSet set(c_out, c_in, k);
  for (GaborParams& p : set.entries()) {
    p = {rng.uniform(0.3, 1.5), rng.uniform(0, std::numbers::pi), rng.uniform(0, std::numbers::pi),
         rng.uniform(1.0, 4.0)};
  }
  return set;
}

double max_abs_diff(const Tensor4& a, const Tensor4& b) {
  EXPECT_EQ(a.shape(), b.shape());
  double d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

}  // namespace

TEST(GaborConvLayer, PointKernelsSumChannels) {
  GaborParamSet set(2, 3, 1);
  for (GaborParams& p : set.entries()) p = {0.8, 0.3, 0.0, 1.7};
  GaborConvLayer layer(set, {1, 1, 0});
  layer.bias()[0] = 0.5;
  layer.bias()[1] = -1.0;
  const Tensor4 x = random_tensor({2, 3, 4, 4}, 1);
  const Tensor4 y = layer.forward(x, Mode::kTrain);
  ASSERT_EQ(y.shape(), (Shape4{2, 2, 4, 4}));
  for (int n = 0; n < 2; ++n)
    for (int o = 0; o < 2; ++o)
      for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) {
          const double expected =
              x.at(n, 0, r, c) + x.at(n, 1, r, c) + x.at(n, 2, r, c) + layer.bias()[o];
          EXPECT_NEAR(y.at(n, o, r, c), expected, 1e-14);
        }
}

TEST(GaborConvLayer, ForwardIsPure) {
  GaborConvLayer layer(random_params(3, 1, 5, 2), {5, 1, 2});
  const Tensor4 x = random_tensor({1, 1, 8, 8}, 3);
  EXPECT_EQ(layer.forward(x, Mode::kTrain), layer.forward(x, Mode::kTrain));
}

TEST(GaborConvLayer, ForwardMatchesComposedOracles) {
  const GaborParamSet set = random_params(3, 1, 5, 4);
  GaborConvLayer layer(set, {5, 1, 2});
  const Tensor4 x = random_tensor({1, 1, 8, 8}, 5);
  Tensor4 kernels({3, 1, 5, 5});
  for (int o = 0; o < 3; ++o) {
    const KernelMatrix m = make_kernel(set.at(o, 0), 5);
    for (int r = 0; r < 5; ++r)
      for (int c = 0; c < 5; ++c) kernels.at(o, 0, r, c) = m(r, c);
  }
  const std::vector<double> zero(3, 0.0);
  EXPECT_LE(max_abs_diff(layer.forward(x, Mode::kTrain), conv2d_naive(x, kernels, zero, {5, 1, 2})),
            1e-10);
}

TEST(GaborConvLayer, KernelsTrackParameterChanges) {
  GaborConvLayer layer(random_params(1, 1, 3, 6), {3, 1, 1});
  const Tensor4 x = random_tensor({1, 1, 5, 5}, 7);
  const Tensor4 before = layer.forward(x, Mode::kTrain);
  layer.parameters()[0].value->values()[0] += 0.3;
  EXPECT_NE(layer.forward(x, Mode::kTrain), before);
}

TEST(GaborConvLayer, FrozenEquivalenceWithConv) {
  const GaborParamSet set = random_params(4, 2, 5, 8);
  GaborConvLayer gabor(set, {5, 1, 2});
  gabor.bias()[1] = 0.25;
  ConvLayer conv(gabor.materialize_kernels(), gabor.bias().values(), {5, 1, 2});
  const Tensor4 x = random_tensor({2, 2, 9, 9}, 9);
  const Tensor4 yg = gabor.forward(x, Mode::kTrain);
  const Tensor4 yc = conv.forward(x, Mode::kTrain);
  EXPECT_LE(max_abs_diff(yg, yc), 1e-12);
  const Tensor4 cot = random_tensor(yg.shape(), 10);
  EXPECT_LE(max_abs_diff(gabor.backward(cot), conv.backward(cot)), 1e-12);
}

TEST(GaborConvLayer, ZeroCotangent) {
  GaborConvLayer layer(random_params(2, 2, 3, 11), {3, 1, 1});
  const Tensor4 x = random_tensor({1, 2, 6, 6}, 12);
  const Tensor4 y = layer.forward(x, Mode::kTrain);
  const Tensor4 gi = layer.backward(Tensor4(y.shape()));
  for (double v : gi.values()) EXPECT_EQ(v, 0.0);
  for (const Parameter& p : layer.parameters())
    for (double v : p.grad->values()) EXPECT_EQ(v, 0.0) << p.name;
}

TEST(GaborConvLayer, PhaseGradientScalarChainRule) {
  // k=1: K = cos(psi), so dL/dpsi = -sin(psi) * dL/dK with dL/dK = x * g for a 1x1 image
  GaborParamSet set(1, 1, 1);
  set.at(0, 0) = {0.9, 0.4, 0.7, 1.3};
  GaborConvLayer layer(set, {1, 1, 0});
  const Tensor4 x({1, 1, 1, 1}, 1.8);
  layer.forward(x, Mode::kTrain);
  const double g = -0.6;
  layer.backward(Tensor4({1, 1, 1, 1}, g));
  const double dl_dk = 1.8 * g;
  for (const Parameter& p : layer.parameters()) {
    if (p.name == "psi") EXPECT_NEAR((*p.grad)[0], -std::sin(0.7) * dl_dk, 1e-15);
    if (p.name == "omega" || p.name == "theta" || p.name == "sigma") EXPECT_EQ((*p.grad)[0], 0.0);
  }
}

TEST(GaborConvLayer, ParameterGradientsMatchFiniteDifferences) {
  Rng pick(13);
  const int sizes[] = {3, 5, 11};
  for (int cfg = 0; cfg < 20; ++cfg) {
    const int k = sizes[cfg % 3];
    const int c_out = 1 + static_cast<int>(pick.below(4));
    const int c_in = 1 + static_cast<int>(pick.below(2));
    GaborConvLayer layer(random_params(c_out, c_in, k, 100 + cfg), {k, 1, k / 2});
    Tensor4 x = random_tensor({1, c_in, 7, 7}, 200 + cfg);
    const Tensor4 cot = random_tensor({1, c_out, 7, 7}, 300 + cfg);
    layer.forward(x, Mode::kTrain);
    const Tensor4 gi = layer.backward(cot);
    auto loss = [&] { return weighted_sum(cot, layer.forward(x, Mode::kTrain)); };
    for (const Parameter& p : layer.parameters()) {
      const Tensor4 analytic = *p.grad;
      EXPECT_LE(max_fd_error(*p.value, analytic, loss), 1e-4) << p.name << " cfg " << cfg;
    }
    EXPECT_LE(max_fd_error(x, gi, loss), 1e-4) << "input cfg " << cfg;
  }
}

TEST(GaborConvLayer, BackwardBeforeForwardRejected) {
  GaborConvLayer layer(random_params(1, 1, 3, 14), {3, 1, 1});
  EXPECT_THROW(layer.backward(Tensor4({1, 1, 4, 4})), std::logic_error);
}

TEST(GaborConvLayer, ChannelMismatchRejected) {
  GaborConvLayer layer(random_params(1, 2, 3, 15), {3, 1, 1});
  EXPECT_THROW(layer.forward(Tensor4({1, 3, 4, 4}), Mode::kTrain), std::invalid_argument);
}

TEST(ParameterCounts, MatchFormulas) {
  for (int k : {3, 5, 9, 11}) {
    for (int c_in : {1, 3}) {
      for (int c_out : {1, 8, 40}) {
        GaborConvLayer g(c_in, c_out, {k, 1, k / 2}, 1);
        ConvLayer c(c_in, c_out, {k, 1, k / 2}, 1);
        EXPECT_EQ(g.parameter_count(), static_cast<std::size_t>(4 * c_out * c_in + c_out));
        EXPECT_EQ(c.parameter_count(), static_cast<std::size_t>(k * k * c_out * c_in + c_out));
      }
    }
  }
  GaborConvLayer g(1, 1, {9, 1, 4}, 1);
  ConvLayer c(1, 1, {9, 1, 4}, 1);
  EXPECT_DOUBLE_EQ((c.parameter_count() - 1) / static_cast<double>(g.parameter_count() - 1), 20.25);
}

TEST(Layer, ParametersAreStableReferences) {
  GaborConvLayer g(1, 2, {3, 1, 1}, 1);
  DenseLayer d(4, 2, 1);
  for (Layer* layer : std::initializer_list<Layer*>{&g, &d}) {
    const auto a = layer->parameters();
    const auto b = layer->parameters();
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      EXPECT_EQ(a[i].value, b[i].value);
      EXPECT_EQ(a[i].grad, b[i].grad);
    }
  }
}

TEST(ConvLayer, HeInitialisationScale) {
  ConvLayer conv(4, 64, {5, 1, 2}, 3);
  double sum = 0, sq = 0;
  const auto& w = conv.kernels().values();
  for (double v : w) {
    sum += v;
    sq += v * v;
  }
  const double n = static_cast<double>(w.size());
  const double var = sq / n - (sum / n) * (sum / n);
  EXPECT_NEAR(var, 2.0 / (4 * 25), 0.1 * 2.0 / (4 * 25));
}

TEST(ConvLayer, GradientsMatchFiniteDifferences) {
  ConvLayer conv(2, 3, {3, 2, 1}, 4);
  Tensor4 x = random_tensor({2, 2, 7, 7}, 16);
  const Tensor4 y = conv.forward(x, Mode::kTrain);
  const Tensor4 cot = random_tensor(y.shape(), 17);
  const Tensor4 gi = conv.backward(cot);
  auto loss = [&] { return weighted_sum(cot, conv.forward(x, Mode::kTrain)); };
  for (const Parameter& p : conv.parameters()) {
    const Tensor4 analytic = *p.grad;
    EXPECT_LE(max_fd_error(*p.value, analytic, loss), 1e-6) << p.name;
  }
  EXPECT_LE(max_fd_error(x, gi, loss), 1e-6);
}

TEST(DenseLayer, GradientsMatchFiniteDifferences) {
  DenseLayer dense(8, 4, 5);
  Tensor4 x = random_tensor({3, 8, 1, 1}, 18);
  const Tensor4 y = dense.forward(x, Mode::kTrain);
  ASSERT_EQ(y.shape(), (Shape4{3, 4, 1, 1}));
  const Tensor4 cot = random_tensor(y.shape(), 19);
  const Tensor4 gi = dense.backward(cot);
  auto loss = [&] { return weighted_sum(cot, dense.forward(x, Mode::kTrain)); };
  for (const Parameter& p : dense.parameters()) {
    const Tensor4 analytic = *p.grad;
    EXPECT_LE(max_fd_error(*p.value, analytic, loss), 1e-6) << p.name;
  }
  EXPECT_LE(max_fd_error(x, gi, loss), 1e-6);
}

TEST(DenseLayer, AffineMap) {
  DenseLayer dense(2, 1, 0);
  dense.weight().values() = {2.0, -3.0};
  dense.bias()[0] = 0.5;
  const Tensor4 y = dense.forward(Tensor4({1, 2, 1, 1}, {1.0, 4.0}), Mode::kInference);
  EXPECT_DOUBLE_EQ(y[0], 2.0 - 12.0 + 0.5);
}

TEST(DenseLayer, GradientsAccumulateUntilZeroed) {
  DenseLayer dense(3, 2, 6);
  const Tensor4 x = random_tensor({1, 3, 1, 1}, 20);
  const Tensor4 cot = random_tensor({1, 2, 1, 1}, 21);
  dense.forward(x, Mode::kTrain);
  dense.backward(cot);
  const Tensor4 once = *dense.parameters()[0].grad;
  dense.forward(x, Mode::kTrain);
  dense.backward(cot);
  EXPECT_LE(max_abs_diff(*dense.parameters()[0].grad, scale(once, 2.0)), 1e-15);
  dense.zero_grad();
  for (double v : dense.parameters()[0].grad->values()) EXPECT_EQ(v, 0.0);
}

TEST(DropoutLayer, ZeroRateIsIdentity) {
  DropoutLayer drop(0.0, 1);
  const Tensor4 x = random_tensor({2, 3, 4, 4}, 22);
  EXPECT_EQ(drop.forward(x, Mode::kTrain), x);
  EXPECT_EQ(drop.forward(x, Mode::kInference), x);
}

TEST(DropoutLayer, InferenceIsIdentity) {
  DropoutLayer drop(0.5, 1);
  const Tensor4 x = random_tensor({2, 3, 4, 4}, 23);
  EXPECT_EQ(drop.forward(x, Mode::kInference), x);
  EXPECT_EQ(drop.backward(x), x);
}

TEST(DropoutLayer, RejectsInvalidRate) {
  EXPECT_THROW(DropoutLayer(1.0, 1), std::invalid_argument);
  EXPECT_THROW(DropoutLayer(-0.1, 1), std::invalid_argument);
}

TEST(DropoutLayer, MaskValuesAndBackward) {
  DropoutLayer drop(0.25, 9);
  const Tensor4 x({1, 200, 1, 1}, 1.0);
  const Tensor4 y = drop.forward(x, Mode::kTrain);
  const Tensor4 g = drop.backward(Tensor4(x.shape(), 3.0));
  for (std::size_t i = 0; i < y.size(); ++i) {
    EXPECT_TRUE(y[i] == 0.0 || std::abs(y[i] - 1.0 / 0.75) < 1e-15);
    EXPECT_DOUBLE_EQ(g[i], 3.0 * y[i]);
  }
}

TEST(DropoutLayer, ExpectationMatchesInference) {
  const double p = 0.3;
  DropoutLayer drop(p, 24);
  const Tensor4 x = random_tensor({1, 6, 1, 1}, 25, 0.5, 2.0);
  const int draws = 10000;
  std::vector<double> sum(x.size(), 0.0);
  for (int d = 0; d < draws; ++d) {
    const Tensor4 y = drop.forward(x, Mode::kTrain);
    for (std::size_t i = 0; i < x.size(); ++i) sum[i] += y[i];
  }
  for (std::size_t i = 0; i < x.size(); ++i) {
    // per-draw std of x * Bernoulli(1-p) / (1-p) is |x| sqrt(p / (1-p))
    const double se = std::abs(x[i]) * std::sqrt(p / (1 - p)) / std::sqrt(draws);
    EXPECT_NEAR(sum[i] / draws, x[i], 3 * se);
  }
}

TEST(DropoutLayer, ReseedReproducesMask) {
  DropoutLayer a(0.5, 1), b(0.5, 2);
  const Tensor4 x = random_tensor({1, 50, 1, 1}, 26);
  a.reseed(77);
  b.reseed(77);
  EXPECT_EQ(a.forward(x, Mode::kTrain), b.forward(x, Mode::kTrain));
}

TEST(ReluLayer, BackwardUsesCachedInput) {
  ReluLayer relu;
  const Tensor4 x({1, 3, 1, 1}, {-1, 0, 2});
  EXPECT_EQ(relu.forward(x, Mode::kTrain).values(), (std::vector<double>{0, 0, 2}));
  EXPECT_EQ(relu.backward(Tensor4({1, 3, 1, 1}, 5.0)).values(), (std::vector<double>{0, 0, 5}));
}

TEST(MaxPoolLayer, RoutesGradientToWinner) {
  MaxPoolLayer pool(2, 2);
  const Tensor4 x({1, 1, 2, 2}, {1, 2, 3, 4});
  EXPECT_EQ(pool.forward(x, Mode::kTrain)[0], 4.0);
  EXPECT_EQ(pool.backward(Tensor4({1, 1, 1, 1}, 2.0)).values(), (std::vector<double>{0, 0, 0, 2}));
  MaxPoolLayer fresh(2, 2);
  EXPECT_THROW(fresh.backward(Tensor4({1, 1, 1, 1})), std::logic_error);
}

TEST(SoftmaxCrossEntropy, UniformLogitsGiveLogK) {
  for (int k : {2, 4, 10}) {
    SoftmaxCrossEntropy ce;
    const Tensor4 logits({3, k, 1, 1}, 0.7);
    const std::vector<int> labels{0, 1, k - 1};
    EXPECT_NEAR(ce.forward(logits, labels), std::log(static_cast<double>(k)), 1e-14);
  }
}

TEST(SoftmaxCrossEntropy, ProbabilitiesSumToOne) {
  SoftmaxCrossEntropy ce;
  const Tensor4 logits = random_tensor({5, 7, 1, 1}, 27, -50, 50);
  ce.forward(logits, std::vector<int>{0, 1, 2, 3, 4});
  for (int n = 0; n < 5; ++n) {
    double s = 0;
    for (double v : ce.probabilities().sample(n)) s += v;
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(SoftmaxCrossEntropy, StableForHugeLogits) {
  SoftmaxCrossEntropy ce;
  const Tensor4 logits({1, 2, 1, 1}, {1000.0, 0.0});
  EXPECT_NEAR(ce.forward(logits, std::vector<int>{1}), 1000.0, 1e-9);
}

TEST(SoftmaxCrossEntropy, BackwardMatchesFiniteDifferences) {
  SoftmaxCrossEntropy ce;
  Tensor4 logits = random_tensor({4, 5, 1, 1}, 28, -3, 3);
  const std::vector<int> labels{4, 0, 2, 2};
  ce.forward(logits, labels);
  const Tensor4 grad = ce.backward();
  auto loss = [&] {
    SoftmaxCrossEntropy probe;
    return probe.forward(logits, labels);
  };
  EXPECT_LE(max_fd_error(logits, grad, loss), 1e-6);
}

TEST(SoftmaxCrossEntropy, RejectsBadLabels) {
  SoftmaxCrossEntropy ce;
  EXPECT_THROW(ce.forward(Tensor4({1, 3, 1, 1}), std::vector<int>{3}), std::invalid_argument);
  EXPECT_THROW(ce.forward(Tensor4({2, 3, 1, 1}), std::vector<int>{0}), std::invalid_argument);
}
