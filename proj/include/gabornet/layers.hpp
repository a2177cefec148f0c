#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gabornet/gabor.hpp"
#include "gabornet/random.hpp"
#include "gabornet/tensor.hpp"

namespace gabornet {

enum class Mode { kTrain, kInference };

/// A learnable tensor and its gradient accumulator, owned by a layer.
struct Parameter {
  std::string name;
  Tensor4* value;
  Tensor4* grad;
};

/// Uniform forward/backward contract. Layers operate on whole batches; backward
/// must follow a forward on the same instance and adds into parameter grads.
class Layer {
 public:
  virtual ~Layer() = default;

  virtual std::string kind() const = 0;
  /// Shape produced for a given input shape. Throws std::invalid_argument when
  /// the input is incompatible.
  virtual Shape4 output_shape(const Shape4& input) const = 0;
  virtual Tensor4 forward(const Tensor4& input, Mode mode) = 0;
  virtual Tensor4 backward(const Tensor4& grad_out) = 0;

  /// Stable references to the layer's own tensors (identity, not copies).
  virtual std::vector<Parameter> parameters() { return {}; }
  /// Re-establishes parameter invariants after an optimizer step.
  virtual void project_constraints() {}
  /// Reseeds any internal randomness (dropout masks).
  virtual void reseed(std::uint64_t) {}

  void zero_grad();
  std::size_t parameter_count();

  /// The first layer of a network never needs grad_input; skipping it saves a GEMM.
  void set_input_grad_required(bool required) { input_grad_required_ = required; }
  bool input_grad_required() const { return input_grad_required_; }

 protected:
  bool input_grad_required_ = true;
};

/// Convolution whose kernels are synthesized from per-slice Gabor parameters
/// on every forward pass. Learnable state: omega/theta/psi/sigma tensors of
/// shape (c_out, c_in, 1, 1) and a (c_out, 1, 1, 1) bias.
class GaborConvLayer : public Layer {
 public:
  GaborConvLayer(const GaborParamSet& params, const ConvGeometry& geom);
  /// Bank-initialized layer with zero bias.
  GaborConvLayer(int c_in, int c_out, const ConvGeometry& geom, std::uint64_t seed);

  std::string kind() const override { return "gabor_conv"; }
  Shape4 output_shape(const Shape4& input) const override;
  Tensor4 forward(const Tensor4& input, Mode mode) override;
  Tensor4 backward(const Tensor4& grad_out) override;
  std::vector<Parameter> parameters() override;
  void project_constraints() override;

  GaborParamSet param_set() const;
  void set_param_set(const GaborParamSet& params);
  Tensor4 materialize_kernels() const { return param_set().materialize(); }
  const ConvGeometry& geometry() const { return geom_; }
  int in_channels() const { return c_in_; }
  int out_channels() const { return c_out_; }
  Tensor4& bias() { return bias_; }

 private:
  int c_in_;
  int c_out_;
  ConvGeometry geom_;
  Tensor4 omega_, theta_, psi_, sigma_, bias_;
  Tensor4 d_omega_, d_theta_, d_psi_, d_sigma_, d_bias_;
  std::optional<Tensor4> cached_input_;
  Tensor4 cached_kernels_;
};

/// Standard convolution with free kernels, He-initialized.
class ConvLayer : public Layer {
 public:
  ConvLayer(int c_in, int c_out, const ConvGeometry& geom, std::uint64_t seed);
  ConvLayer(Tensor4 kernels, std::vector<double> bias, const ConvGeometry& geom);

  std::string kind() const override { return "conv"; }
  Shape4 output_shape(const Shape4& input) const override;
  Tensor4 forward(const Tensor4& input, Mode mode) override;
  Tensor4 backward(const Tensor4& grad_out) override;
  std::vector<Parameter> parameters() override;

  const Tensor4& kernels() const { return weight_; }
  const ConvGeometry& geometry() const { return geom_; }

 private:
  ConvGeometry geom_;
  Tensor4 weight_, bias_;
  Tensor4 d_weight_, d_bias_;
  std::optional<Tensor4> cached_input_;
};

/// y = W x + b on the flattened input; output shape (n, out, 1, 1).
class DenseLayer : public Layer {
 public:
  DenseLayer(int in_features, int out_features, std::uint64_t seed);

  std::string kind() const override { return "dense"; }
  Shape4 output_shape(const Shape4& input) const override;
  Tensor4 forward(const Tensor4& input, Mode mode) override;
  Tensor4 backward(const Tensor4& grad_out) override;
  std::vector<Parameter> parameters() override;

  Tensor4& weight() { return weight_; }
  Tensor4& bias() { return bias_; }

 private:
  int in_features_;
  int out_features_;
  Tensor4 weight_, bias_;  // (out, in, 1, 1), (out, 1, 1, 1)
  Tensor4 d_weight_, d_bias_;
  std::optional<Tensor4> cached_input_;
};

class ReluLayer : public Layer {
 public:
  std::string kind() const override { return "relu"; }
  Shape4 output_shape(const Shape4& input) const override { return input; }
  Tensor4 forward(const Tensor4& input, Mode mode) override;
  Tensor4 backward(const Tensor4& grad_out) override;

 private:
  std::optional<Tensor4> cached_input_;
};

class MaxPoolLayer : public Layer {
 public:
  MaxPoolLayer(int window, int stride);

  std::string kind() const override { return "maxpool"; }
  Shape4 output_shape(const Shape4& input) const override;
  Tensor4 forward(const Tensor4& input, Mode mode) override;
  Tensor4 backward(const Tensor4& grad_out) override;

 private:
  int window_;
  int stride_;
  Shape4 cached_shape_;
  std::vector<std::size_t> argmax_;
  bool has_cache_ = false;
};

/// Inverted dropout: training zeroes each activation with probability p and
/// scales survivors by 1/(1-p); inference is the identity.
class DropoutLayer : public Layer {
 public:
  DropoutLayer(double p, std::uint64_t seed);

  std::string kind() const override { return "dropout"; }
  Shape4 output_shape(const Shape4& input) const override { return input; }
  Tensor4 forward(const Tensor4& input, Mode mode) override;
  Tensor4 backward(const Tensor4& grad_out) override;
  void reseed(std::uint64_t seed) override { rng_ = Rng(seed); }

  double rate() const { return p_; }

 private:
  double p_;
  Rng rng_;
  std::vector<double> mask_;  // empty in inference mode
  bool has_cache_ = false;
};

/// Fused softmax + mean cross-entropy over the batch.
class SoftmaxCrossEntropy {
 public:
  /// logits (n, K, 1, 1); labels in [0, K). Returns the mean loss.
  double forward(const Tensor4& logits, std::span<const int> labels);
  /// (softmax(logits) - onehot) / n
  Tensor4 backward() const;

  const Tensor4& probabilities() const { return probs_; }

 private:
  Tensor4 probs_;
  std::vector<int> labels_;
};

/// Row-wise softmax of (n, K, 1, 1) logits with max subtraction.
Tensor4 softmax(const Tensor4& logits);

}  // namespace gabornet
