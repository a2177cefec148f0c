#include "gabornet/layers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <Eigen/Core>

#include "gabornet/optim.hpp"

namespace gabornet {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

void accumulate(Tensor4& into, const Tensor4& from) {
  for (std::size_t i = 0; i < into.size(); ++i) into[i] += from[i];
}

void he_normal(Tensor4& t, int fan_in, std::uint64_t seed) {
  Rng rng(seed);
  const double std_dev = std::sqrt(2.0 / fan_in);
  for (double& v : t.values()) v = std_dev * rng.normal();
}

const Tensor4& cached_or_throw(const std::optional<Tensor4>& cache, const char* layer) {
  if (!cache) throw std::logic_error(std::string(layer) + ": backward called before forward");
  return *cache;
}

Shape4 conv_output_shape(const Shape4& in, int c_in, int c_out, const ConvGeometry& geom,
                         const char* layer) {
  require(in.c == c_in, std::string(layer) + ": expects " + std::to_string(c_in) +
                            " input channels, got shape " + in.str());
  geom.validate(in.h, in.w);
  return Shape4{in.n, c_out, geom.output_extent(in.h), geom.output_extent(in.w)};
}

}  // namespace

void Layer::zero_grad() {
  for (auto& p : parameters()) p.grad->fill(0.0);
}

std::size_t Layer::parameter_count() {
  std::size_t total = 0;
  for (auto& p : parameters()) total += p.value->size();
  return total;
}

// ---------------------------------------------------------------- GaborConv

GaborConvLayer::GaborConvLayer(const GaborParamSet& params, const ConvGeometry& geom)
    : c_in_(params.in_channels()), c_out_(params.out_channels()), geom_(geom) {
  require(params.kernel_size() == geom.kernel,
          "gabor_conv: parameter set kernel size disagrees with geometry");
  const Shape4 table{c_out_, c_in_, 1, 1};
  for (Tensor4* t : {&omega_, &theta_, &psi_, &sigma_, &d_omega_, &d_theta_, &d_psi_, &d_sigma_}) {
    *t = Tensor4(table);
  }
  bias_ = Tensor4(Shape4{c_out_, 1, 1, 1});
  d_bias_ = Tensor4(bias_.shape());
  set_param_set(params);
}

GaborConvLayer::GaborConvLayer(int c_in, int c_out, const ConvGeometry& geom, std::uint64_t seed)
    : GaborConvLayer(init_param_set(c_out, c_in, geom.kernel, seed), geom) {}

GaborParamSet GaborConvLayer::param_set() const {
  GaborParamSet set(c_out_, c_in_, geom_.kernel);
  auto& entries = set.entries();
  for (std::size_t s = 0; s < entries.size(); ++s) {
    entries[s] = GaborParams{omega_[s], theta_[s], psi_[s], sigma_[s]};
  }
  return set;
}

void GaborConvLayer::set_param_set(const GaborParamSet& params) {
  require(params.out_channels() == c_out_ && params.in_channels() == c_in_ &&
              params.kernel_size() == geom_.kernel,
          "gabor_conv: parameter set shape mismatch");
  const auto& entries = params.entries();
  for (std::size_t s = 0; s < entries.size(); ++s) {
    omega_[s] = entries[s].omega;
    theta_[s] = entries[s].theta;
    psi_[s] = entries[s].psi;
    sigma_[s] = entries[s].sigma;
  }
}

Shape4 GaborConvLayer::output_shape(const Shape4& input) const {
  return conv_output_shape(input, c_in_, c_out_, geom_, "gabor_conv");
}

Tensor4 GaborConvLayer::forward(const Tensor4& input, Mode) {
  output_shape(input.shape());
  cached_kernels_ = materialize_kernels();
  cached_input_ = input;
  return conv2d_forward(input, cached_kernels_, bias_.values(), geom_);
}

Tensor4 GaborConvLayer::backward(const Tensor4& grad_out) {
  const Tensor4& input = cached_or_throw(cached_input_, "gabor_conv");
  ConvGrads g = conv2d_backward(input, cached_kernels_, geom_, grad_out, input_grad_required_);

  // Chain rule through kernel synthesis: dL/dparam = sum_pixels dL/dK * dK/dparam.
  const int k = geom_.kernel;
  const std::size_t slice = static_cast<std::size_t>(k) * k;
  const GaborParamSet params = param_set();
  for (std::size_t s = 0; s < params.size(); ++s) {
    const KernelParamGrads kg = kernel_param_grads(params.entries()[s], k);
    const double* dk = g.grad_kernels.data().data() + s * slice;
    auto dot = [&](const KernelMatrix& m) {
      return std::inner_product(m.values.begin(), m.values.end(), dk, 0.0);
    };
    d_omega_[s] += dot(kg.d_omega);
    d_theta_[s] += dot(kg.d_theta);
    d_psi_[s] += dot(kg.d_psi);
    d_sigma_[s] += dot(kg.d_sigma);
  }
  for (int o = 0; o < c_out_; ++o) d_bias_[o] += g.grad_bias[o];
  return std::move(g.grad_input);
}

std::vector<Parameter> GaborConvLayer::parameters() {
  return {{"omega", &omega_, &d_omega_},
          {"theta", &theta_, &d_theta_},
          {"psi", &psi_, &d_psi_},
          {"sigma", &sigma_, &d_sigma_},
          {"bias", &bias_, &d_bias_}};
}

void GaborConvLayer::project_constraints() {
  set_param_set(project_gabor_constraints(param_set()));
}

// --------------------------------------------------------------------- Conv

ConvLayer::ConvLayer(int c_in, int c_out, const ConvGeometry& geom, std::uint64_t seed)
    : geom_(geom) {
  require(c_in >= 1 && c_out >= 1, "conv: channel counts must be >= 1");
  weight_ = Tensor4(Shape4{c_out, c_in, geom.kernel, geom.kernel});
  he_normal(weight_, c_in * geom.kernel * geom.kernel, seed);
  bias_ = Tensor4(Shape4{c_out, 1, 1, 1});
  d_weight_ = Tensor4(weight_.shape());
  d_bias_ = Tensor4(bias_.shape());
}

ConvLayer::ConvLayer(Tensor4 kernels, std::vector<double> bias, const ConvGeometry& geom)
    : geom_(geom), weight_(std::move(kernels)) {
  const Shape4& ks = weight_.shape();
  require(ks.h == geom.kernel && ks.w == geom.kernel,
          "conv: kernel tensor " + ks.str() + " disagrees with geometry");
  require(bias.size() == static_cast<std::size_t>(ks.n), "conv: bias size mismatch");
  bias_ = Tensor4(Shape4{ks.n, 1, 1, 1}, std::move(bias));
  d_weight_ = Tensor4(weight_.shape());
  d_bias_ = Tensor4(bias_.shape());
}

Shape4 ConvLayer::output_shape(const Shape4& input) const {
  return conv_output_shape(input, weight_.shape().c, weight_.shape().n, geom_, "conv");
}

Tensor4 ConvLayer::forward(const Tensor4& input, Mode) {
  output_shape(input.shape());
  cached_input_ = input;
  return conv2d_forward(input, weight_, bias_.values(), geom_);
}

Tensor4 ConvLayer::backward(const Tensor4& grad_out) {
  const Tensor4& input = cached_or_throw(cached_input_, "conv");
  ConvGrads g = conv2d_backward(input, weight_, geom_, grad_out, input_grad_required_);
  accumulate(d_weight_, g.grad_kernels);
  for (std::size_t o = 0; o < g.grad_bias.size(); ++o) d_bias_[o] += g.grad_bias[o];
  return std::move(g.grad_input);
}

std::vector<Parameter> ConvLayer::parameters() {
  return {{"weight", &weight_, &d_weight_}, {"bias", &bias_, &d_bias_}};
}

// -------------------------------------------------------------------- Dense

DenseLayer::DenseLayer(int in_features, int out_features, std::uint64_t seed)
    : in_features_(in_features), out_features_(out_features) {
  require(in_features >= 1 && out_features >= 1, "dense: feature counts must be >= 1");
  weight_ = Tensor4(Shape4{out_features, in_features, 1, 1});
  he_normal(weight_, in_features, seed);
  bias_ = Tensor4(Shape4{out_features, 1, 1, 1});
  d_weight_ = Tensor4(weight_.shape());
  d_bias_ = Tensor4(bias_.shape());
}

Shape4 DenseLayer::output_shape(const Shape4& input) const {
  require(static_cast<int>(input.sample_size()) == in_features_,
          "dense: expects " + std::to_string(in_features_) + " input features, got shape " +
              input.str());
  return Shape4{input.n, out_features_, 1, 1};
}

Tensor4 DenseLayer::forward(const Tensor4& input, Mode) {
  const Shape4 out_shape = output_shape(input.shape());
  cached_input_ = input;
  const int n = input.shape().n;
  Tensor4 out(out_shape);
  Eigen::Map<const RowMatrix> x(input.data().data(), n, in_features_);
  Eigen::Map<const RowMatrix> w(weight_.data().data(), out_features_, in_features_);
  Eigen::Map<RowMatrix> y(out.data().data(), n, out_features_);
  y.noalias() = x * w.transpose();
  for (int i = 0; i < n; ++i) {
    for (int o = 0; o < out_features_; ++o) y(i, o) += bias_[o];
  }
  return out;
}

Tensor4 DenseLayer::backward(const Tensor4& grad_out) {
  const Tensor4& input = cached_or_throw(cached_input_, "dense");
  const int n = input.shape().n;
  require(grad_out.shape() == Shape4{n, out_features_, 1, 1},
          "dense: grad_out shape " + grad_out.shape().str() + " does not match output");
  Eigen::Map<const RowMatrix> x(input.data().data(), n, in_features_);
  Eigen::Map<const RowMatrix> w(weight_.data().data(), out_features_, in_features_);
  Eigen::Map<const RowMatrix> gy(grad_out.data().data(), n, out_features_);
  Eigen::Map<RowMatrix> gw(d_weight_.data().data(), out_features_, in_features_);
  gw.noalias() += gy.transpose() * x;
  for (int o = 0; o < out_features_; ++o) d_bias_[o] += gy.col(o).sum();
  if (!input_grad_required_) return {};
  Tensor4 grad_in(input.shape());
  Eigen::Map<RowMatrix> gx(grad_in.data().data(), n, in_features_);
  gx.noalias() = gy * w;
  return grad_in;
}

std::vector<Parameter> DenseLayer::parameters() {
  return {{"weight", &weight_, &d_weight_}, {"bias", &bias_, &d_bias_}};
}

// --------------------------------------------------------------------- ReLU

Tensor4 ReluLayer::forward(const Tensor4& input, Mode) {
  cached_input_ = input;
  return relu_forward(input);
}

Tensor4 ReluLayer::backward(const Tensor4& grad_out) {
  return relu_backward(cached_or_throw(cached_input_, "relu"), grad_out);
}

// ------------------------------------------------------------------ MaxPool

MaxPoolLayer::MaxPoolLayer(int window, int stride) : window_(window), stride_(stride) {
  require(window >= 1 && stride >= 1, "maxpool: window and stride must be >= 1");
}

Shape4 MaxPoolLayer::output_shape(const Shape4& input) const {
  require(window_ <= input.h && window_ <= input.w,
          "maxpool: window " + std::to_string(window_) + " larger than input " + input.str());
  return Shape4{input.n, input.c, (input.h - window_) / stride_ + 1,
                (input.w - window_) / stride_ + 1};
}

Tensor4 MaxPoolLayer::forward(const Tensor4& input, Mode) {
  MaxPoolResult r = maxpool2d(input, window_, stride_);
  cached_shape_ = input.shape();
  argmax_ = std::move(r.argmax);
  has_cache_ = true;
  return std::move(r.output);
}

Tensor4 MaxPoolLayer::backward(const Tensor4& grad_out) {
  if (!has_cache_) throw std::logic_error("maxpool: backward called before forward");
  return maxpool2d_backward(grad_out, argmax_, cached_shape_);
}

// ------------------------------------------------------------------ Dropout

DropoutLayer::DropoutLayer(double p, std::uint64_t seed) : p_(p), rng_(seed) {
  require(p >= 0.0 && p < 1.0, "dropout: rate must lie in [0, 1), got " + std::to_string(p));
}

Tensor4 DropoutLayer::forward(const Tensor4& input, Mode mode) {
  has_cache_ = true;
  if (mode == Mode::kInference || p_ == 0.0) {
    mask_.clear();
    return input;
  }
  const double keep_scale = 1.0 / (1.0 - p_);
  mask_.resize(input.size());
  Tensor4 out(input.shape());
  for (std::size_t i = 0; i < input.size(); ++i) {
    mask_[i] = rng_.uniform() < p_ ? 0.0 : keep_scale;
    out[i] = input[i] * mask_[i];
  }
  return out;
}

Tensor4 DropoutLayer::backward(const Tensor4& grad_out) {
  if (!has_cache_) throw std::logic_error("dropout: backward called before forward");
  if (mask_.empty()) return grad_out;
  require(mask_.size() == grad_out.size(), "dropout: grad_out shape does not match forward");
  Tensor4 grad_in(grad_out.shape());
  for (std::size_t i = 0; i < grad_out.size(); ++i) grad_in[i] = grad_out[i] * mask_[i];
  return grad_in;
}

// ---------------------------------------------------------- Softmax + CE

Tensor4 softmax(const Tensor4& logits) {
  const int n = logits.shape().n;
  const int k = static_cast<int>(logits.shape().sample_size());
  Tensor4 probs(logits.shape());
  for (int i = 0; i < n; ++i) {
    auto row = logits.sample(i);
    auto out = probs.sample(i);
    const double mx = *std::max_element(row.begin(), row.end());
    double total = 0.0;
    for (int j = 0; j < k; ++j) {
      out[j] = std::exp(row[j] - mx);
      total += out[j];
    }
    for (int j = 0; j < k; ++j) out[j] /= total;
  }
  return probs;
}

double SoftmaxCrossEntropy::forward(const Tensor4& logits, std::span<const int> labels) {
  const int n = logits.shape().n;
  const int k = static_cast<int>(logits.shape().sample_size());
  require(labels.size() == static_cast<std::size_t>(n),
          "softmax_ce: " + std::to_string(labels.size()) + " labels for a batch of " +
              std::to_string(n));
  require(n >= 1 && k >= 1, "softmax_ce: empty logits " + logits.shape().str());
  probs_ = softmax(logits);
  labels_.assign(labels.begin(), labels.end());
  double loss = 0.0;
  for (int i = 0; i < n; ++i) {
    require(labels[i] >= 0 && labels[i] < k,
            "softmax_ce: label " + std::to_string(labels[i]) + " outside [0, " +
                std::to_string(k) + ")");
    // log-sum-exp form: -log p_y = log(sum exp(z - max)) - (z_y - max)
    auto row = logits.sample(i);
    const double mx = *std::max_element(row.begin(), row.end());
    double total = 0.0;
    for (int j = 0; j < k; ++j) total += std::exp(row[j] - mx);
    loss += std::log(total) - (row[labels[i]] - mx);
  }
  return loss / n;
}

Tensor4 SoftmaxCrossEntropy::backward() const {
  if (labels_.empty()) throw std::logic_error("softmax_ce: backward called before forward");
  const int n = probs_.shape().n;
  Tensor4 grad = probs_;
  for (int i = 0; i < n; ++i) grad.sample(i)[labels_[i]] -= 1.0;
  for (double& v : grad.values()) v /= n;
  return grad;
}

}  // namespace gabornet
