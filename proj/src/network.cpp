#include "gabornet/network.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>
#include <stdexcept>

#include "gabornet/random.hpp"

namespace gabornet {

namespace {

constexpr std::uint64_t kInitStream = 0x494e4954;     // "INIT"
constexpr std::uint64_t kDropoutStream = 0x44524f50;  // "DROP"

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

LayerKind kind_from_string(const std::string& name) {
  static const std::pair<const char*, LayerKind> kinds[] = {
      {"gabor_conv", LayerKind::kGaborConv}, {"conv", LayerKind::kConv},
      {"relu", LayerKind::kRelu},            {"maxpool", LayerKind::kMaxPool},
      {"dropout", LayerKind::kDropout},      {"dense", LayerKind::kDense},
      {"softmax_ce", LayerKind::kSoftmaxCE}};
  for (const auto& [n, k] : kinds) {
    if (name == n) return k;
  }
  throw std::invalid_argument("unknown layer kind '" + name + "'");
}

int parse_int(const std::string& key, const std::string& value) {
  std::size_t used = 0;
  int v = 0;
  try {
    v = std::stoi(value, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != value.size()) {
    throw std::invalid_argument("layer argument " + key + "=" + value + " is not an integer");
  }
  return v;
}

std::string chain_to_string(const std::vector<Shape4>& chain) {
  std::ostringstream os;
  for (std::size_t i = 0; i < chain.size(); ++i) {
    if (i) os << " -> ";
    os << chain[i].str();
  }
  return os.str();
}

bool is_parameterized(LayerKind k) {
  return k == LayerKind::kGaborConv || k == LayerKind::kConv || k == LayerKind::kDense;
}

}  // namespace

std::string to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::kGaborConv: return "gabor_conv";
    case LayerKind::kConv: return "conv";
    case LayerKind::kRelu: return "relu";
    case LayerKind::kMaxPool: return "maxpool";
    case LayerKind::kDropout: return "dropout";
    case LayerKind::kDense: return "dense";
    case LayerKind::kSoftmaxCE: return "softmax_ce";
  }
  return "?";
}

std::vector<LayerSpec> parse_layers(const std::string& text) {
  std::vector<LayerSpec> layers;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ';')) {
    item = trim(item);
    if (item.empty()) continue;
    LayerSpec spec;
    const auto open = item.find('(');
    std::string args;
    if (open == std::string::npos) {
      spec.kind = kind_from_string(item);
    } else {
      if (item.back() != ')') throw std::invalid_argument("unterminated layer '" + item + "'");
      spec.kind = kind_from_string(trim(item.substr(0, open)));
      args = item.substr(open + 1, item.size() - open - 2);
    }
    std::stringstream as(args);
    std::string arg;
    while (std::getline(as, arg, ',')) {
      arg = trim(arg);
      if (arg.empty()) continue;
      const auto eq = arg.find('=');
      if (eq == std::string::npos) {
        throw std::invalid_argument("layer argument '" + arg + "' is not key=value");
      }
      const std::string key = trim(arg.substr(0, eq));
      const std::string value = trim(arg.substr(eq + 1));
      if (key == "out") {
        spec.out = value == "classes" ? 0 : parse_int(key, value);
      } else if (key == "k" || key == "kernel") {
        spec.kernel = parse_int(key, value);
      } else if (key == "stride") {
        spec.stride = parse_int(key, value);
      } else if (key == "pad") {
        spec.pad = parse_int(key, value);
      } else if (key == "window") {
        spec.window = parse_int(key, value);
      } else if (key == "p" || key == "rate") {
        try {
          spec.rate = std::stod(value);
        } catch (const std::exception&) {
          throw std::invalid_argument("layer argument " + key + "=" + value + " is not a number");
        }
      } else {
        throw std::invalid_argument("unknown layer argument '" + key + "' in '" + item + "'");
      }
    }
    layers.push_back(spec);
  }
  return layers;
}

std::string format_layers(std::span<const LayerSpec> layers) {
  std::ostringstream os;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerSpec& l = layers[i];
    if (i) os << "; ";
    os << to_string(l.kind);
    const std::string out = l.out == 0 ? "classes" : std::to_string(l.out);
    switch (l.kind) {
      case LayerKind::kGaborConv:
      case LayerKind::kConv:
        os << "(out=" << out << ",k=" << l.kernel << ",stride=" << l.stride << ",pad=" << l.pad
           << ")";
        break;
      case LayerKind::kMaxPool:
        os << "(window=" << l.window << ",stride=" << l.stride << ")";
        break;
      case LayerKind::kDropout:
        os << "(p=" << l.rate << ")";
        break;
      case LayerKind::kDense:
        os << "(out=" << out << ")";
        break;
      default:
        break;
    }
  }
  return os.str();
}

NetworkSpec default_gcnn_spec(int classes, int channels, int image_size, std::uint64_t seed) {
  NetworkSpec spec;
  spec.in_channels = channels;
  spec.in_height = image_size;
  spec.in_width = image_size;
  spec.classes = classes;
  spec.seed = seed;
  spec.layers = parse_layers(
      "gabor_conv(out=40,k=11,stride=1,pad=5); relu; maxpool(window=2,stride=2);"
      "conv(out=20,k=3,stride=1,pad=1); relu; maxpool(window=2,stride=2);"
      "dropout(p=0.5); dense(out=128); relu; dense(out=classes); softmax_ce");
  return spec;
}

NetworkSpec cnn_twin(const NetworkSpec& spec) {
  NetworkSpec twin = spec;
  for (LayerSpec& l : twin.layers) {
    if (l.kind == LayerKind::kGaborConv) l.kind = LayerKind::kConv;
  }
  return twin;
}

Network::Network(const NetworkSpec& spec) : spec_(spec) {
  if (spec.in_channels < 1 || spec.in_height < 1 || spec.in_width < 1) {
    throw std::invalid_argument("network: input shape must be positive");
  }
  if (spec.classes < 1) throw std::invalid_argument("network: classes must be >= 1");
  if (spec.layers.empty() || spec.layers.back().kind != LayerKind::kSoftmaxCE) {
    throw std::invalid_argument("network: layer list must end with softmax_ce");
  }

  bool seen_parameterized = false;
  for (std::size_t i = 0; i + 1 < spec.layers.size(); ++i) {
    const LayerKind k = spec.layers[i].kind;
    if (k == LayerKind::kSoftmaxCE) {
      throw std::invalid_argument("network: softmax_ce may only appear as the last layer");
    }
    if (k == LayerKind::kGaborConv && seen_parameterized) {
      throw std::invalid_argument(
          "network: gabor_conv must be the first parameterized layer and appear at most once "
          "(layer " + std::to_string(i) + ")");
    }
    seen_parameterized = seen_parameterized || is_parameterized(k);
  }

  Shape4 shape{1, spec.in_channels, spec.in_height, spec.in_width};
  shape_chain_.push_back(shape);
  for (std::size_t i = 0; i + 1 < spec.layers.size(); ++i) {
    const LayerSpec& l = spec.layers[i];
    const std::uint64_t seed = derive_seed(spec.seed, kInitStream, i);
    const int out = l.out == 0 ? spec.classes : l.out;
    try {
      std::unique_ptr<Layer> layer;
      const ConvGeometry geom{l.kernel, l.stride, l.pad};
      switch (l.kind) {
        case LayerKind::kGaborConv:
          layer = std::make_unique<GaborConvLayer>(shape.c, out, geom, seed);
          break;
        case LayerKind::kConv:
          layer = std::make_unique<ConvLayer>(shape.c, out, geom, seed);
          break;
        case LayerKind::kRelu:
          layer = std::make_unique<ReluLayer>();
          break;
        case LayerKind::kMaxPool:
          layer = std::make_unique<MaxPoolLayer>(l.window, l.stride);
          break;
        case LayerKind::kDropout:
          layer = std::make_unique<DropoutLayer>(l.rate, derive_seed(spec.seed, kDropoutStream, i));
          break;
        case LayerKind::kDense:
          layer = std::make_unique<DenseLayer>(static_cast<int>(shape.sample_size()), out, seed);
          break;
        case LayerKind::kSoftmaxCE:
          break;
      }
      shape = layer->output_shape(shape);
      layers_.push_back(std::move(layer));
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("network: layer " + std::to_string(i) + " (" +
                                  to_string(l.kind) + ") rejects its input: " + e.what() +
                                  "; inferred shapes: " + chain_to_string(shape_chain_));
    }
    shape_chain_.push_back(shape);
  }
  if (shape.sample_size() != static_cast<std::size_t>(spec.classes)) {
    throw std::invalid_argument("network: final layer produces " + shape.str() + ", expected " +
                                std::to_string(spec.classes) + " class logits; inferred shapes: " +
                                chain_to_string(shape_chain_));
  }
  if (!layers_.empty()) layers_.front()->set_input_grad_required(false);
}

Tensor4 Network::forward(const Tensor4& input, Mode mode) {
  const Shape4& s = input.shape();
  if (s.c != spec_.in_channels || s.h != spec_.in_height || s.w != spec_.in_width) {
    throw std::invalid_argument("network: input " + s.str() + " does not match the network input (n," +
                                std::to_string(spec_.in_channels) + "," +
                                std::to_string(spec_.in_height) + "," +
                                std::to_string(spec_.in_width) + ")");
  }
  Tensor4 x = input;
  for (auto& layer : layers_) x = layer->forward(x, mode);
  return x.reshaped(Shape4{s.n, spec_.classes, 1, 1});
}

double Network::loss(const Tensor4& logits, std::span<const int> labels) {
  return loss_.forward(logits, labels);
}

void Network::backward() {
  Tensor4 grad = loss_.backward();
  for (std::size_t i = layers_.size(); i-- > 0;) {
    // logits were reshaped; restore the last layer's own output shape
    if (i + 1 == layers_.size()) {
      Shape4 s = shape_chain_.back();
      s.n = grad.shape().n;
      grad = grad.reshaped(s);
    }
    grad = layers_[i]->backward(grad);
  }
}

std::vector<Parameter> Network::parameters() {
  std::vector<Parameter> all;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    for (Parameter p : layers_[i]->parameters()) {
      p.name = "layer" + std::to_string(i) + "." + layers_[i]->kind() + "." + p.name;
      all.push_back(p);
    }
  }
  return all;
}

std::size_t Network::parameter_count() {
  std::size_t total = 0;
  for (auto& layer : layers_) total += layer->parameter_count();
  return total;
}

void Network::zero_grad() {
  for (auto& layer : layers_) layer->zero_grad();
}

void Network::project_constraints() {
  for (auto& layer : layers_) layer->project_constraints();
}

void Network::reseed(std::uint64_t seed, int epoch) {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    layers_[i]->reseed(derive_seed(seed, kDropoutStream + static_cast<std::uint64_t>(epoch), i));
  }
}

std::size_t Network::first_parameterized_layer() {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (!layers_[i]->parameters().empty()) return i;
  }
  return layers_.size();
}

FirstLayerCount first_layer_parameter_count(Network& net) {
  const std::size_t i = net.first_parameterized_layer();
  if (i == net.num_layers()) return {};
  Layer& layer = net.layer(i);
  FirstLayerCount count;
  count.kind = layer.kind();
  for (auto& p : layer.parameters()) {
    count.with_bias += p.value->size();
    if (p.name != "bias") count.weights_only += p.value->size();
  }
  return count;
}

}  // namespace gabornet
