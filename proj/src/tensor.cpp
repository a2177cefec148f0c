#include "gabornet/tensor.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace gabornet {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

void check_conv_args(const Tensor4& input, const Tensor4& kernels, std::size_t bias_size,
                     const ConvGeometry& geom, const char* op) {
  const auto& in = input.shape();
  const auto& ks = kernels.shape();
  require(ks.h == ks.w, std::string(op) + ": kernels must be square, got " + ks.str());
  require(ks.h == geom.kernel,
          std::string(op) + ": kernel tensor " + ks.str() + " disagrees with geometry kernel " +
              std::to_string(geom.kernel));
  require(ks.c == in.c, std::string(op) + ": kernel in-channels " + std::to_string(ks.c) +
                            " do not match input " + in.str());
  require(bias_size == static_cast<std::size_t>(ks.n),
          std::string(op) + ": bias has " + std::to_string(bias_size) + " entries, expected " +
              std::to_string(ks.n));
  geom.validate(in.h, in.w);
}

// Unfolds one sample into a (c*k*k) x (oh*ow) patch matrix.
void im2col(std::span<const double> image, const Shape4& s, const ConvGeometry& g, int oh,
            int ow, std::span<double> col) {
  const int k = g.kernel;
  const std::size_t cols = static_cast<std::size_t>(oh) * ow;
  for (int c = 0; c < s.c; ++c) {
    for (int dy = 0; dy < k; ++dy) {
      for (int dx = 0; dx < k; ++dx) {
        double* row = col.data() + ((static_cast<std::size_t>(c) * k + dy) * k + dx) * cols;
        for (int y = 0; y < oh; ++y) {
          const int iy = y * g.stride + dy - g.padding;
          double* dst = row + static_cast<std::size_t>(y) * ow;
          if (iy < 0 || iy >= s.h) {
            std::fill(dst, dst + ow, 0.0);
            continue;
          }
          const double* src = image.data() + (static_cast<std::size_t>(c) * s.h + iy) * s.w;
          for (int x = 0; x < ow; ++x) {
            const int ix = x * g.stride + dx - g.padding;
            dst[x] = (ix >= 0 && ix < s.w) ? src[ix] : 0.0;
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatters-adds patch gradients back onto the image.
void col2im(std::span<const double> col, const Shape4& s, const ConvGeometry& g, int oh, int ow,
            std::span<double> image) {
  const int k = g.kernel;
  const std::size_t cols = static_cast<std::size_t>(oh) * ow;
  for (int c = 0; c < s.c; ++c) {
    for (int dy = 0; dy < k; ++dy) {
      for (int dx = 0; dx < k; ++dx) {
        const double* row =
            col.data() + ((static_cast<std::size_t>(c) * k + dy) * k + dx) * cols;
        for (int y = 0; y < oh; ++y) {
          const int iy = y * g.stride + dy - g.padding;
          if (iy < 0 || iy >= s.h) continue;
          const double* src = row + static_cast<std::size_t>(y) * ow;
          double* dst = image.data() + (static_cast<std::size_t>(c) * s.h + iy) * s.w;
          for (int x = 0; x < ow; ++x) {
            const int ix = x * g.stride + dx - g.padding;
            if (ix >= 0 && ix < s.w) dst[ix] += src[x];
          }
        }
      }
    }
  }
}

}  // namespace

std::string Shape4::str() const {
  std::ostringstream os;
  os << "(" << n << "," << c << "," << h << "," << w << ")";
  return os.str();
}

Tensor4::Tensor4(Shape4 shape, double fill) : shape_(shape) {
  require(shape.n >= 0 && shape.c >= 0 && shape.h >= 0 && shape.w >= 0,
          "Tensor4: negative extent in " + shape.str());
  data_.assign(shape.numel(), fill);
}

Tensor4::Tensor4(Shape4 shape, std::vector<double> values)
    : shape_(shape), data_(std::move(values)) {
  require(data_.size() == shape.numel(), "Tensor4: " + std::to_string(data_.size()) +
                                             " values do not fill shape " + shape.str());
}

Tensor4 Tensor4::reshaped(Shape4 shape) const {
  require(shape.numel() == data_.size(),
          "reshape: cannot view " + shape_.str() + " as " + shape.str());
  return Tensor4(shape, data_);
}

void Tensor4::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

bool Tensor4::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

int ConvGeometry::output_extent(int input_extent) const {
  const int span = input_extent + 2 * padding - kernel;
  if (span < 0) return 0;
  return span / stride + 1;
}

void ConvGeometry::validate(int h, int w) const {
  require(kernel >= 1 && kernel % 2 == 1,
          "conv geometry: kernel must be odd and positive, got " + std::to_string(kernel));
  require(stride >= 1, "conv geometry: stride must be >= 1");
  require(padding >= 0, "conv geometry: padding must be >= 0");
  require(output_extent(h) >= 1 && output_extent(w) >= 1,
          "conv geometry: kernel " + std::to_string(kernel) + " with padding " +
              std::to_string(padding) + " leaves no output on a " + std::to_string(h) + "x" +
              std::to_string(w) + " input");
}

Tensor4 conv2d_forward(const Tensor4& input, const Tensor4& kernels,
                       std::span<const double> bias, const ConvGeometry& geom) {
  check_conv_args(input, kernels, bias.size(), geom, "conv2d_forward");
  const Shape4& s = input.shape();
  const int c_out = kernels.shape().n;
  const int oh = geom.output_extent(s.h);
  const int ow = geom.output_extent(s.w);
  const int patch = s.c * geom.kernel * geom.kernel;
  const int cols = oh * ow;

  Tensor4 out(Shape4{s.n, c_out, oh, ow});
  std::vector<double> col(static_cast<std::size_t>(patch) * cols);
  ConstMatrixMap kmat(kernels.data().data(), c_out, patch);
  ConstMatrixMap colmat(col.data(), patch, cols);
  for (int n = 0; n < s.n; ++n) {
    im2col(input.sample(n), s, geom, oh, ow, col);
    MatrixMap omat(out.sample(n).data(), c_out, cols);
    omat.noalias() = kmat * colmat;
    for (int o = 0; o < c_out; ++o) omat.row(o).array() += bias[o];
  }
  return out;
}

Tensor4 conv2d_naive(const Tensor4& input, const Tensor4& kernels,
                     std::span<const double> bias, const ConvGeometry& geom) {
  check_conv_args(input, kernels, bias.size(), geom, "conv2d_naive");
  const Shape4& s = input.shape();
  const int c_out = kernels.shape().n;
  const int k = geom.kernel;
  const int oh = geom.output_extent(s.h);
  const int ow = geom.output_extent(s.w);
  Tensor4 out(Shape4{s.n, c_out, oh, ow});
  for (int n = 0; n < s.n; ++n) {
    for (int o = 0; o < c_out; ++o) {
      for (int y = 0; y < oh; ++y) {
        for (int x = 0; x < ow; ++x) {
          double acc = bias[o];
          for (int i = 0; i < s.c; ++i) {
            for (int dy = 0; dy < k; ++dy) {
              for (int dx = 0; dx < k; ++dx) {
                const int iy = y * geom.stride + dy - geom.padding;
                const int ix = x * geom.stride + dx - geom.padding;
                if (iy < 0 || iy >= s.h || ix < 0 || ix >= s.w) continue;
                acc += input.at(n, i, iy, ix) * kernels.at(o, i, dy, dx);
              }
            }
          }
          out.at(n, o, y, x) = acc;
        }
      }
    }
  }
  return out;
}

ConvGrads conv2d_backward(const Tensor4& input, const Tensor4& kernels,
                          const ConvGeometry& geom, const Tensor4& grad_out,
                          bool want_grad_input) {
  check_conv_args(input, kernels, static_cast<std::size_t>(kernels.shape().n), geom,
                  "conv2d_backward");
  const Shape4& s = input.shape();
  const int c_out = kernels.shape().n;
  const int oh = geom.output_extent(s.h);
  const int ow = geom.output_extent(s.w);
  require(grad_out.shape() == Shape4{s.n, c_out, oh, ow},
          "conv2d_backward: grad_out " + grad_out.shape().str() + " does not match output " +
              Shape4{s.n, c_out, oh, ow}.str());
  const int patch = s.c * geom.kernel * geom.kernel;
  const int cols = oh * ow;

  ConvGrads g;
  g.grad_kernels = Tensor4(kernels.shape());
  g.grad_bias.assign(c_out, 0.0);
  if (want_grad_input) g.grad_input = Tensor4(s);

  std::vector<double> col(static_cast<std::size_t>(patch) * cols);
  std::vector<double> dcol(want_grad_input ? col.size() : 0);
  ConstMatrixMap kmat(kernels.data().data(), c_out, patch);
  MatrixMap dkmat(g.grad_kernels.data().data(), c_out, patch);
  ConstMatrixMap colmat(col.data(), patch, cols);
  for (int n = 0; n < s.n; ++n) {
    ConstMatrixMap gmat(grad_out.sample(n).data(), c_out, cols);
    im2col(input.sample(n), s, geom, oh, ow, col);
    dkmat.noalias() += gmat * colmat.transpose();
    for (int o = 0; o < c_out; ++o) g.grad_bias[o] += gmat.row(o).sum();
    if (want_grad_input) {
      MatrixMap dcolmat(dcol.data(), patch, cols);
      dcolmat.noalias() = kmat.transpose() * gmat;
      col2im(dcol, s, geom, oh, ow, g.grad_input.sample(n));
    }
  }
  return g;
}

MaxPoolResult maxpool2d(const Tensor4& input, int window, int stride) {
  const Shape4& s = input.shape();
  require(window >= 1, "maxpool2d: window must be >= 1");
  require(stride >= 1, "maxpool2d: stride must be >= 1");
  require(window <= s.h && window <= s.w,
          "maxpool2d: window " + std::to_string(window) + " larger than input " + s.str());
  const int oh = (s.h - window) / stride + 1;
  const int ow = (s.w - window) / stride + 1;
  MaxPoolResult r;
  r.output = Tensor4(Shape4{s.n, s.c, oh, ow});
  r.argmax.resize(r.output.size());
  std::size_t out_i = 0;
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      for (int y = 0; y < oh; ++y) {
        for (int x = 0; x < ow; ++x, ++out_i) {
          std::size_t best = input.offset(n, c, y * stride, x * stride);
          double best_v = input[best];
          for (int dy = 0; dy < window; ++dy) {
            for (int dx = 0; dx < window; ++dx) {
              const std::size_t idx = input.offset(n, c, y * stride + dy, x * stride + dx);
              // strict > keeps the first maximum in row-major scan order
              if (input[idx] > best_v) {
                best_v = input[idx];
                best = idx;
              }
            }
          }
          r.output[out_i] = best_v;
          r.argmax[out_i] = best;
        }
      }
    }
  }
  return r;
}

Tensor4 maxpool2d_backward(const Tensor4& grad_out, std::span<const std::size_t> argmax,
                           const Shape4& input_shape) {
  require(argmax.size() == grad_out.size(),
          "maxpool2d_backward: argmax table does not match grad_out " + grad_out.shape().str());
  Tensor4 grad_in(input_shape);
  for (std::size_t i = 0; i < argmax.size(); ++i) {
    require(argmax[i] < grad_in.size(), "maxpool2d_backward: argmax index out of range");
    grad_in[argmax[i]] += grad_out[i];
  }
  return grad_in;
}

Tensor4 relu_forward(const Tensor4& x) {
  Tensor4 y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
  return y;
}

Tensor4 relu_backward(const Tensor4& x, const Tensor4& grad) {
  require(x.shape() == grad.shape(), "relu_backward: shape mismatch " + x.shape().str() +
                                         " vs " + grad.shape().str());
  Tensor4 out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > 0.0 ? grad[i] : 0.0;
  return out;
}

Tensor4 add(const Tensor4& a, const Tensor4& b) {
  require(a.shape() == b.shape(),
          "add: shape mismatch " + a.shape().str() + " vs " + b.shape().str());
  Tensor4 out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

Tensor4 scale(const Tensor4& a, double factor) {
  Tensor4 out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * factor;
  return out;
}

Tensor4 flatten(const Tensor4& x) {
  const Shape4& s = x.shape();
  return x.reshaped(Shape4{s.n, s.c * s.h * s.w, 1, 1});
}

}  // namespace gabornet
