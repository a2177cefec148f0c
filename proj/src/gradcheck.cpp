#include "gabornet/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "gabornet/gabor.hpp"
#include "gabornet/layers.hpp"
#include "gabornet/network.hpp"
#include "gabornet/random.hpp"
#include "gabornet/tensor.hpp"

namespace gabornet {

namespace {

constexpr double kPi = std::numbers::pi;

Tensor4 random_tensor(Shape4 s, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor4 t(s);
  for (double& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

int pick(Rng& rng, std::initializer_list<int> options) {
  return *(options.begin() + rng.below(options.size()));
}

int range(Rng& rng, int lo, int hi) { return lo + static_cast<int>(rng.below(hi - lo + 1)); }

double dot(const Tensor4& a, const Tensor4& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

GaborParams random_gabor(Rng& rng) {
  GaborParams p;
  p.omega = rng.uniform(0.2, 1.6);
  p.theta = rng.uniform(-kPi, kPi);
  p.psi = rng.uniform(0.0, 2.0 * kPi);
  p.sigma = rng.uniform(1.0, 6.0);
  return p;
}

/// Tracks the worst analytic-vs-numeric disagreement across a check.
class Tally {
 public:
  Tally(const GradcheckOptions& o) : fault_(o.inject_fault ? 1.01 : 1.0) {}

  void compare(double analytic, double numeric) {
    worst_ = std::max(worst_, gradient_error(analytic * fault_, numeric));
  }
  /// Compares every element of `value` against its analytic gradient under loss().
  void compare_tensor(Tensor4& value, const Tensor4& analytic, const std::function<double()>& loss) {
    for (std::size_t i = 0; i < value.size(); ++i) {
      compare(analytic[i], central_difference(loss, value[i], kGradcheckStep));
    }
  }
  double worst() const { return worst_; }

 private:
  double fault_;
  double worst_ = 0.0;
};

// Checks a layer under L = sum(G * forward(x)): input gradient and every parameter.
void check_layer(Layer& layer, Tensor4 input, Rng& rng, Tally& tally, std::uint64_t reseed = 0,
                 bool check_input = true) {
  layer.reseed(reseed);
  const Tensor4 probe_out = layer.forward(input, Mode::kTrain);
  const Tensor4 cotangent = random_tensor(probe_out.shape(), rng);
  auto loss = [&]() {
    layer.reseed(reseed);
    return dot(cotangent, layer.forward(input, Mode::kTrain));
  };
  layer.zero_grad();
  layer.reseed(reseed);
  layer.forward(input, Mode::kTrain);
  const Tensor4 grad_in = layer.backward(cotangent);
  std::vector<Tensor4> grads;
  for (auto& p : layer.parameters()) grads.push_back(*p.grad);
  if (check_input) tally.compare_tensor(input, grad_in, loss);
  auto params = layer.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) tally.compare_tensor(*params[i].value, grads[i], loss);
}

CheckResult finish(std::string group, std::string name, int configs, const Tally& t,
                   double tolerance) {
  return CheckResult{std::move(group), std::move(name), configs, t.worst(), t.worst() <= tolerance};
}

CheckResult check_conv_primitive(const GradcheckOptions& o, Rng& rng) {
  Tally tally(o);
  for (int c = 0; c < o.configurations; ++c) {
    const int k = pick(rng, {1, 3, 5});
    const ConvGeometry geom{k, pick(rng, {1, 2}), range(rng, 0, 2)};
    const int h = range(rng, std::max(1, k - 2 * geom.padding), 8);
    const int w = range(rng, std::max(1, k - 2 * geom.padding), 8);
    Tensor4 input = random_tensor({range(rng, 1, 2), range(rng, 1, 3), h, w}, rng);
    Tensor4 kernels = random_tensor({range(rng, 1, 3), input.shape().c, k, k}, rng);
    Tensor4 bias = random_tensor({kernels.shape().n, 1, 1, 1}, rng);
    const Tensor4 out = conv2d_forward(input, kernels, bias.values(), geom);
    const Tensor4 cot = random_tensor(out.shape(), rng);
    const ConvGrads g = conv2d_backward(input, kernels, geom, cot);
    auto loss = [&]() { return dot(cot, conv2d_forward(input, kernels, bias.values(), geom)); };
    tally.compare_tensor(input, g.grad_input, loss);
    tally.compare_tensor(kernels, g.grad_kernels, loss);
    tally.compare_tensor(bias, Tensor4(bias.shape(), g.grad_bias), loss);
  }
  return finish("conv", "conv2d_backward", o.configurations, tally, o.tolerance);
}

CheckResult check_conv_layer(const GradcheckOptions& o, Rng& rng) {
  Tally tally(o);
  for (int c = 0; c < o.configurations; ++c) {
    const int k = pick(rng, {1, 3, 5});
    const ConvGeometry geom{k, pick(rng, {1, 2}), range(rng, 0, 2)};
    const int c_in = range(rng, 1, 3);
    ConvLayer layer(c_in, range(rng, 1, 3), geom, rng.next_u64());
    const int extent = range(rng, std::max(1, k - 2 * geom.padding), 8);
    check_layer(layer, random_tensor({range(rng, 1, 2), c_in, extent, extent}, rng), rng, tally);
  }
  return finish("conv", "conv_layer", o.configurations, tally, o.tolerance);
}

CheckResult check_maxpool(const GradcheckOptions& o, Rng& rng) {
  Tally tally(o);
  for (int c = 0; c < o.configurations; ++c) {
    MaxPoolLayer layer(pick(rng, {2, 3}), pick(rng, {1, 2}));
    Tensor4 x({range(rng, 1, 2), range(rng, 1, 3), range(rng, 3, 8), range(rng, 3, 8)});
    // distinct values 0.01 apart, so no perturbation can change a window's winner
    std::vector<std::size_t> order(x.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    for (std::size_t i = 0; i < x.size(); ++i) x[order[i]] = 0.01 * static_cast<double>(i) - 0.5;
    check_layer(layer, x, rng, tally);
  }
  return finish("maxpool", "maxpool_layer", o.configurations, tally, o.tolerance);
}

CheckResult check_relu(const GradcheckOptions& o, Rng& rng) {
  Tally tally(o);
  for (int c = 0; c < o.configurations; ++c) {
    Tensor4 x = random_tensor({range(rng, 1, 3), range(rng, 1, 3), range(rng, 1, 6), range(rng, 1, 6)}, rng);
    // keep samples away from the kink, where central differences are meaningless
    for (double& v : x.values()) {
      if (std::abs(v) < 1e-3) v = 0.5;
    }
    ReluLayer layer;
    check_layer(layer, x, rng, tally);
  }
  return finish("relu", "relu_layer", o.configurations, tally, o.tolerance);
}

CheckResult check_dense(const GradcheckOptions& o, Rng& rng) {
  Tally tally(o);
  for (int c = 0; c < o.configurations; ++c) {
    const int in = range(rng, 1, 10);
    DenseLayer layer(in, range(rng, 1, 6), rng.next_u64());
    check_layer(layer, random_tensor({range(rng, 1, 3), in, 1, 1}, rng), rng, tally);
  }
  return finish("dense", "dense_layer", o.configurations, tally, o.tolerance);
}

CheckResult check_dropout(const GradcheckOptions& o, Rng& rng) {
  Tally tally(o);
  for (int c = 0; c < o.configurations; ++c) {
    DropoutLayer layer(rng.uniform(0.0, 0.9), 0);
    check_layer(layer, random_tensor({range(rng, 1, 3), range(rng, 1, 4), range(rng, 1, 5), range(rng, 1, 5)}, rng),
                rng, tally, rng.next_u64());
  }
  return finish("dropout", "dropout_layer", o.configurations, tally, o.tolerance);
}

CheckResult check_softmax_ce(const GradcheckOptions& o, Rng& rng) {
  Tally tally(o);
  for (int c = 0; c < o.configurations; ++c) {
    const int n = range(rng, 1, 4);
    const int classes = range(rng, 2, 6);
    Tensor4 logits = random_tensor({n, classes, 1, 1}, rng, -3.0, 3.0);
    std::vector<int> labels(n);
    for (int& l : labels) l = static_cast<int>(rng.below(classes));
    SoftmaxCrossEntropy ce;
    ce.forward(logits, labels);
    const Tensor4 grad = ce.backward();
    tally.compare_tensor(logits, grad, [&]() { return SoftmaxCrossEntropy().forward(logits, labels); });
  }
  return finish("softmax_ce", "softmax_cross_entropy", o.configurations, tally, o.tolerance);
}

CheckResult check_gabor_kernel(const GradcheckOptions& o, Rng& rng) {
  Tally tally(o);
  const int sizes[] = {3, 5, 7, 11};
  for (int d = 0; d < o.gabor_draws; ++d) {
    GaborParams p = random_gabor(rng);
    const int k = sizes[d % 4];
    const KernelParamGrads g = kernel_param_grads(p, k);
    const std::pair<double*, const KernelMatrix*> fields[] = {
        {&p.omega, &g.d_omega}, {&p.theta, &g.d_theta}, {&p.psi, &g.d_psi}, {&p.sigma, &g.d_sigma}};
    for (const auto& [field, analytic] : fields) {
      for (int r = 0; r < k; ++r) {
        for (int c = 0; c < k; ++c) {
          const double half = (k - 1) / 2.0;
          auto pixel = [&]() { return eval_gabor(c - half, r - half, p); };
          tally.compare((*analytic)(r, c), central_difference(pixel, *field, kGradcheckStep));
        }
      }
    }
  }
  return finish("gabor", "kernel_param_grads", o.gabor_draws, tally, o.tolerance);
}

CheckResult check_gabor_layer(const GradcheckOptions& o, Rng& rng) {
  Tally tally(o);
  for (int c = 0; c < o.configurations; ++c) {
    const int k = pick(rng, {3, 5, 11});
    const int c_in = range(rng, 1, 2);
    const int c_out = range(rng, 1, 4);
    GaborParamSet params(c_out, c_in, k);
    for (GaborParams& p : params.entries()) p = random_gabor(rng);
    const ConvGeometry geom{k, pick(rng, {1, 2}), range(rng, 0, k / 2)};
    GaborConvLayer layer(params, geom);
    for (double& b : layer.bias().values()) b = rng.uniform(-0.5, 0.5);
    const int extent = range(rng, std::max(1, k - 2 * geom.padding), 12);
    check_layer(layer, random_tensor({1, c_in, extent, extent}, rng), rng, tally);
  }
  return finish("gabor", "gabor_conv_layer", o.configurations, tally, o.tolerance);
}

CheckResult check_network(const GradcheckOptions& o, Rng& rng) {
  Tally tally(o);
  const int configs = std::max(1, o.configurations / 4);
  for (int c = 0; c < configs; ++c) {
    NetworkSpec spec;
    spec.in_channels = 1;
    spec.in_height = 12;
    spec.in_width = 12;
    spec.classes = 3;
    spec.seed = rng.next_u64();
    spec.layers = parse_layers(
        "gabor_conv(out=2,k=5,pad=2); relu; maxpool(window=2,stride=2); dense(out=classes); "
        "softmax_ce");
    Network net(spec);
    // random Gabor parameters rather than the bank, so every derivative is exercised
    auto& gabor = dynamic_cast<GaborConvLayer&>(net.layer(0));
    GaborParamSet ps = gabor.param_set();
    for (GaborParams& p : ps.entries()) p = random_gabor(rng);
    gabor.set_param_set(ps);

    const Tensor4 input = random_tensor({2, 1, 12, 12}, rng);
    const std::vector<int> labels = {static_cast<int>(rng.below(3)), static_cast<int>(rng.below(3))};
    auto loss = [&]() { return net.loss(net.forward(input, Mode::kTrain), labels); };
    net.zero_grad();
    loss();
    net.backward();
    auto params = net.parameters();
    std::vector<Tensor4> grads;
    for (auto& p : params) grads.push_back(*p.grad);
    for (std::size_t i = 0; i < params.size(); ++i) tally.compare_tensor(*params[i].value, grads[i], loss);
  }
  return finish("network", "gabor_toy_network", configs, tally, o.tolerance);
}

}  // namespace

double gradient_error(double analytic, double numeric, double floor) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / scale;
}

double central_difference(const std::function<double()>& f, double& x, double step) {
  const double saved = x;
  x = saved + step;
  const double plus = f();
  x = saved - step;
  const double minus = f();
  x = saved;
  return (plus - minus) / (2.0 * step);
}

std::vector<std::string> gradcheck_groups() {
  return {"conv", "maxpool", "relu", "dense", "dropout", "softmax_ce", "gabor", "network"};
}

std::vector<CheckResult> run_gradcheck(const GradcheckOptions& options) {
  using Check = CheckResult (*)(const GradcheckOptions&, Rng&);
  const std::pair<const char*, Check> checks[] = {
      {"conv", check_conv_primitive}, {"conv", check_conv_layer},
      {"maxpool", check_maxpool},     {"relu", check_relu},
      {"dense", check_dense},         {"dropout", check_dropout},
      {"softmax_ce", check_softmax_ce}, {"gabor", check_gabor_kernel},
      {"gabor", check_gabor_layer},   {"network", check_network}};
  if (!options.group.empty()) {
    const auto groups = gradcheck_groups();
    if (std::find(groups.begin(), groups.end(), options.group) == groups.end()) {
      throw std::invalid_argument("unknown gradcheck group '" + options.group + "'");
    }
  }
  std::vector<CheckResult> results;
  for (std::size_t i = 0; i < std::size(checks); ++i) {
    if (!options.group.empty() && options.group != checks[i].first) continue;
    // each check draws from its own stream so filtering does not shift the others
    Rng rng(derive_seed(options.seed, 0x47524144, i));  // "GRAD"
    results.push_back(checks[i].second(options, rng));
  }
  return results;
}

}  // namespace gabornet
