#include "gabornet/gabor.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "gabornet/random.hpp"

namespace gabornet {

namespace {

void check_kernel_size(int k) {
  if (k < 1 || k % 2 == 0) {
    throw std::invalid_argument("Gabor kernel size must be odd and positive, got " +
                                std::to_string(k));
  }
}

}  // namespace

double eval_gabor(double x, double y, const GaborParams& p) {
  const double ct = std::cos(p.theta);
  const double st = std::sin(p.theta);
  const double xr = x * ct + y * st;
  const double yr = -x * st + y * ct;
  const double envelope = std::exp(-(xr * xr + yr * yr) / (2.0 * p.sigma * p.sigma));
  return envelope * std::cos(p.omega * xr + p.psi);
}

KernelMatrix make_kernel(const GaborParams& p, int k) {
  check_kernel_size(k);
  const int half = (k - 1) / 2;
  KernelMatrix kernel(k);
  for (int r = 0; r < k; ++r) {
    for (int c = 0; c < k; ++c) kernel(r, c) = eval_gabor(c - half, r - half, p);
  }
  return kernel;
}

// With E the envelope, C = cos(omega x' + psi), S = sin(omega x' + psi):
//   dg/dpsi   = -E S
//   dg/domega = -E S x'
//   dg/dtheta = -E S omega y'        (dx'/dtheta = y', x'^2 + y'^2 is rotation invariant)
//   dg/dsigma =  E C (x'^2 + y'^2) / sigma^3
KernelParamGrads kernel_param_grads(const GaborParams& p, int k) {
  check_kernel_size(k);
  const int half = (k - 1) / 2;
  const double ct = std::cos(p.theta);
  const double st = std::sin(p.theta);
  const double s2 = p.sigma * p.sigma;
  KernelParamGrads g{KernelMatrix(k), KernelMatrix(k), KernelMatrix(k), KernelMatrix(k)};
  for (int r = 0; r < k; ++r) {
    const double y = r - half;
    for (int c = 0; c < k; ++c) {
      const double x = c - half;
      const double xr = x * ct + y * st;
      const double yr = -x * st + y * ct;
      const double rho2 = xr * xr + yr * yr;
      const double envelope = std::exp(-rho2 / (2.0 * s2));
      const double phase = p.omega * xr + p.psi;
      const double es = envelope * std::sin(phase);
      const double ec = envelope * std::cos(phase);
      g.d_psi(r, c) = -es;
      g.d_omega(r, c) = -es * xr;
      g.d_theta(r, c) = -es * p.omega * yr;
      g.d_sigma(r, c) = ec * rho2 / (s2 * p.sigma);
    }
  }
  return g;
}

FilterBank build_filter_bank() {
  FilterBank bank;
  bank.reserve(kBankSize);
  for (int n = 1; n <= kBankFrequencies; ++n) {
    const double omega = std::numbers::pi / 2.0 * std::pow(std::numbers::sqrt2, -(n - 1));
    for (int m = 1; m <= kBankOrientations; ++m) {
      bank.push_back({omega, std::numbers::pi / 8.0 * (m - 1)});
    }
  }
  return bank;
}

GaborParamSet::GaborParamSet(int c_out, int c_in, int kernel_size)
    : c_out_(c_out), c_in_(c_in), kernel_size_(kernel_size) {
  if (c_out < 1 || c_in < 1) {
    throw std::invalid_argument("GaborParamSet: channel counts must be >= 1");
  }
  check_kernel_size(kernel_size);
  params_.resize(static_cast<std::size_t>(c_out) * c_in);
}

Tensor4 GaborParamSet::materialize() const {
  const int k = kernel_size_;
  Tensor4 kernels(Shape4{c_out_, c_in_, k, k});
  const std::size_t slice = static_cast<std::size_t>(k) * k;
  for (std::size_t s = 0; s < params_.size(); ++s) {
    const KernelMatrix km = make_kernel(params_[s], k);
    std::copy(km.values.begin(), km.values.end(), kernels.values().begin() + s * slice);
  }
  return kernels;
}

GaborParamSet init_param_set(int c_out, int c_in, int k, std::uint64_t rng_seed) {
  GaborParamSet set(c_out, c_in, k);
  const FilterBank bank = build_filter_bank();
  Rng rng(rng_seed);
  auto& entries = set.entries();
  for (std::size_t s = 0; s < entries.size(); ++s) {
    const BankEntry& b = bank[s % bank.size()];
    entries[s].omega = b.omega;
    entries[s].theta = b.theta;
    entries[s].sigma = std::numbers::pi / b.omega;
    entries[s].psi = rng.uniform(0.0, std::numbers::pi);
  }
  return set;
}

}  // namespace gabornet
