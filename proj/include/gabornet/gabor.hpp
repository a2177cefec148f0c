#pragma once

#include <cstdint>
#include <vector>

#include "gabornet/tensor.hpp"

namespace gabornet {

inline constexpr double kSigmaMin = 1e-3;
inline constexpr double kOmegaMin = 1e-3;

/// Parameters of the real Gabor function
///   g(x, y) = exp(-(x'^2 + y'^2) / (2 sigma^2)) * cos(omega x' + psi)
/// with x' = x cos(theta) + y sin(theta), y' = -x sin(theta) + y cos(theta).
struct GaborParams {
  double omega = 1.0;  // spatial frequency, rad/pixel
  double theta = 0.0;  // orientation, rad
  double psi = 0.0;    // phase, rad
  double sigma = 1.0;  // envelope width, pixels

  bool operator==(const GaborParams&) const = default;
};

/// Row-major k x k matrix of kernel pixels.
struct KernelMatrix {
  int size = 0;
  std::vector<double> values;

  explicit KernelMatrix(int k = 0) : size(k), values(static_cast<std::size_t>(k) * k, 0.0) {}
  double& operator()(int r, int c) { return values[static_cast<std::size_t>(r) * size + c]; }
  double operator()(int r, int c) const { return values[static_cast<std::size_t>(r) * size + c]; }
};

/// Partial derivatives of every kernel pixel with respect to each parameter.
struct KernelParamGrads {
  KernelMatrix d_omega;
  KernelMatrix d_theta;
  KernelMatrix d_psi;
  KernelMatrix d_sigma;
};

double eval_gabor(double x, double y, const GaborParams& p);

/// Samples g on the integer grid centred at the kernel midpoint:
/// kernel(r, c) = g(c - (k-1)/2, r - (k-1)/2). x grows rightward, y downward.
KernelMatrix make_kernel(const GaborParams& p, int k);

KernelParamGrads kernel_param_grads(const GaborParams& p, int k);

struct BankEntry {
  double omega;
  double theta;
};

/// The 5 x 8 initialization bank, frequency-major:
/// omega_n = (pi/2) * sqrt(2)^-(n-1), theta_m = (pi/8) * (m-1).
using FilterBank = std::vector<BankEntry>;
inline constexpr int kBankFrequencies = 5;
inline constexpr int kBankOrientations = 8;
inline constexpr int kBankSize = kBankFrequencies * kBankOrientations;

FilterBank build_filter_bank();

/// Dense table of Gabor parameters, one entry per (out, in) kernel slice.
class GaborParamSet {
 public:
  GaborParamSet() = default;
  GaborParamSet(int c_out, int c_in, int kernel_size);

  int out_channels() const { return c_out_; }
  int in_channels() const { return c_in_; }
  int kernel_size() const { return kernel_size_; }
  std::size_t size() const { return params_.size(); }

  GaborParams& at(int out, int in) { return params_[static_cast<std::size_t>(out) * c_in_ + in]; }
  const GaborParams& at(int out, int in) const {
    return params_[static_cast<std::size_t>(out) * c_in_ + in];
  }
  std::vector<GaborParams>& entries() { return params_; }
  const std::vector<GaborParams>& entries() const { return params_; }

  /// Kernel tensor of shape (c_out, c_in, k, k).
  Tensor4 materialize() const;

  bool operator==(const GaborParamSet&) const = default;

 private:
  int c_out_ = 0;
  int c_in_ = 0;
  int kernel_size_ = 1;
  std::vector<GaborParams> params_;
};

/// Slot s = out * c_in + in takes bank entry s mod 40; sigma = pi / omega;
/// psi ~ U(0, pi) from the seeded generator.
GaborParamSet init_param_set(int c_out, int c_in, int k, std::uint64_t rng_seed);

}  // namespace gabornet
