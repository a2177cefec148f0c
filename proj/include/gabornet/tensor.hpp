#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace gabornet {

/// Extent of a rank-4 tensor in (batch, channel, height, width) order.
struct Shape4 {
  int n = 0;
  int c = 0;
  int h = 0;
  int w = 0;

  std::size_t numel() const {
    return static_cast<std::size_t>(n) * c * h * w;
  }
  /// Elements per batch entry (c * h * w).
  std::size_t sample_size() const {
    return static_cast<std::size_t>(c) * h * w;
  }
  bool operator==(const Shape4&) const = default;
  std::string str() const;
};

/// Dense rank-4 array of doubles, row-major in (n, c, h, w).
class Tensor4 {
 public:
  Tensor4() = default;
  explicit Tensor4(Shape4 shape, double fill = 0.0);
  Tensor4(Shape4 shape, std::vector<double> values);

  const Shape4& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }

  std::size_t offset(int n, int c, int h, int w) const {
    return ((static_cast<std::size_t>(n) * shape_.c + c) * shape_.h + h) * shape_.w + w;
  }
  double& at(int n, int c, int h, int w) { return data_[offset(n, c, h, w)]; }
  double at(int n, int c, int h, int w) const { return data_[offset(n, c, h, w)]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> sample(int n) {
    return std::span<double>(data_).subspan(n * shape_.sample_size(), shape_.sample_size());
  }
  std::span<const double> sample(int n) const {
    return std::span<const double>(data_).subspan(n * shape_.sample_size(), shape_.sample_size());
  }

  /// Same data, new shape. Element count must match.
  Tensor4 reshaped(Shape4 shape) const;
  void fill(double value);
  bool all_finite() const;

  bool operator==(const Tensor4&) const = default;

 private:
  Shape4 shape_;
  std::vector<double> data_;
};

/// Square odd kernel, stride and symmetric zero padding.
struct ConvGeometry {
  int kernel = 1;
  int stride = 1;
  int padding = 0;

  int output_extent(int input_extent) const;
  /// Throws std::invalid_argument if the geometry is invalid for this input.
  void validate(int h, int w) const;
};

// --- convolution (cross-correlation, no kernel flip) ---

/// Patch-matrix lowered convolution. input (n,c_in,h,w), kernels (c_out,c_in,k,k).
Tensor4 conv2d_forward(const Tensor4& input, const Tensor4& kernels,
                       std::span<const double> bias, const ConvGeometry& geom);

/// Literal seven-deep loop nest. Reference oracle for conv2d_forward.
Tensor4 conv2d_naive(const Tensor4& input, const Tensor4& kernels,
                     std::span<const double> bias, const ConvGeometry& geom);

struct ConvGrads {
  Tensor4 grad_input;  // empty when not requested
  Tensor4 grad_kernels;
  std::vector<double> grad_bias;
};

ConvGrads conv2d_backward(const Tensor4& input, const Tensor4& kernels,
                          const ConvGeometry& geom, const Tensor4& grad_out,
                          bool want_grad_input = true);

// --- pooling ---

struct MaxPoolResult {
  Tensor4 output;
  /// Flat offset into the input tensor of each output cell's winner.
  std::vector<std::size_t> argmax;
};

MaxPoolResult maxpool2d(const Tensor4& input, int window, int stride);
Tensor4 maxpool2d_backward(const Tensor4& grad_out, std::span<const std::size_t> argmax,
                           const Shape4& input_shape);

// --- elementwise ---

Tensor4 relu_forward(const Tensor4& x);
/// Gradient passes where x > 0; the subgradient at 0 is 0.
Tensor4 relu_backward(const Tensor4& x, const Tensor4& grad);
Tensor4 add(const Tensor4& a, const Tensor4& b);
Tensor4 scale(const Tensor4& a, double factor);
/// (n,c,h,w) -> (n, c*h*w, 1, 1)
Tensor4 flatten(const Tensor4& x);

}  // namespace gabornet
