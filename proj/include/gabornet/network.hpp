#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "gabornet/layers.hpp"
#include "gabornet/tensor.hpp"

namespace gabornet {

enum class LayerKind { kGaborConv, kConv, kRelu, kMaxPool, kDropout, kDense, kSoftmaxCE };

std::string to_string(LayerKind kind);

/// Declarative description of one layer. Unused fields are ignored by kinds
/// that do not take them.
struct LayerSpec {
  LayerKind kind = LayerKind::kRelu;
  int out = 0;  // conv/gabor_conv channels, dense features; 0 means "number of classes"
  int kernel = 1;
  int stride = 1;
  int pad = 0;
  int window = 2;
  double rate = 0.5;

  bool operator==(const LayerSpec&) const = default;
};

struct NetworkSpec {
  int in_channels = 1;
  int in_height = 32;
  int in_width = 32;
  int classes = 2;
  std::uint64_t seed = 0;
  std::vector<LayerSpec> layers;  // must end with softmax_ce

  bool operator==(const NetworkSpec&) const = default;
};

/// Parses "gabor_conv(out=40,k=11,pad=5); relu; maxpool(window=2,stride=2); ...".
/// `out=classes` is accepted for the class-count placeholder.
std::vector<LayerSpec> parse_layers(const std::string& text);
std::string format_layers(std::span<const LayerSpec> layers);

/// GaborConv(40, k=11, pad 5) -> ReLU -> MaxPool(2,2) -> Conv(20, k=3, pad 1) -> ReLU
/// -> MaxPool(2,2) -> Dropout(0.5) -> Dense(128) -> ReLU -> Dense(classes) -> SoftmaxCE
NetworkSpec default_gcnn_spec(int classes, int channels = 1, int image_size = 32,
                              std::uint64_t seed = 0);

/// Same network with the Gabor layer replaced by a standard conv of identical
/// channel count and geometry.
NetworkSpec cnn_twin(const NetworkSpec& spec);

/// Built network: parameterized layers followed by a fused softmax-CE loss.
class Network {
 public:
  /// Validates the layer list and instantiates layers with seeded initialization.
  /// Throws std::invalid_argument naming the first failing layer and the
  /// inferred shape chain.
  explicit Network(const NetworkSpec& spec);

  Network(const Network&) = delete;
  Network& operator=(const Network&) = delete;
  Network(Network&&) = default;
  Network& operator=(Network&&) = default;

  const NetworkSpec& spec() const { return spec_; }

  /// Returns logits (n, classes, 1, 1).
  Tensor4 forward(const Tensor4& input, Mode mode);
  /// Mean cross-entropy of the given logits; caches for backward().
  double loss(const Tensor4& logits, std::span<const int> labels);
  /// Backpropagates the last loss through every layer, accumulating gradients.
  void backward();

  /// Parameters of every layer, names prefixed "layer<i>.".
  std::vector<Parameter> parameters();
  std::size_t parameter_count();
  void zero_grad();
  void project_constraints();
  void reseed(std::uint64_t seed, int epoch);

  std::size_t num_layers() const { return layers_.size(); }
  Layer& layer(std::size_t i) { return *layers_[i]; }
  /// Index of the first layer that owns parameters, or num_layers() if none.
  std::size_t first_parameterized_layer();
  /// Input shape (batch 1) followed by every layer's output shape.
  const std::vector<Shape4>& shape_chain() const { return shape_chain_; }

 private:
  NetworkSpec spec_;
  std::vector<std::unique_ptr<Layer>> layers_;
  std::vector<Shape4> shape_chain_;
  SoftmaxCrossEntropy loss_;
};

/// Learnable scalars in the first parameterized layer, with and without bias.
struct FirstLayerCount {
  std::string kind;
  std::size_t with_bias = 0;
  std::size_t weights_only = 0;
};

FirstLayerCount first_layer_parameter_count(Network& net);

}  // namespace gabornet
