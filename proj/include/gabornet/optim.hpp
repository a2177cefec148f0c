#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "gabornet/gabor.hpp"
#include "gabornet/layers.hpp"
#include "gabornet/tensor.hpp"

namespace gabornet {

/// Raised when a step would consume non-finite gradients.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Moment accumulators for one parameter tensor.
struct AdamState {
  Tensor4 m;
  Tensor4 v;
  std::int64_t t = 0;

  bool operator==(const AdamState&) const = default;
};

/// One bias-corrected Adam update, eps outside the square root:
///   p <- p - lr * m_hat / (sqrt(v_hat) + eps)
/// Throws NumericError (leaving everything untouched) if grad holds NaN/Inf.
void adam_step(AdamState& state, const AdamHyper& hyper, Tensor4& param, const Tensor4& grad);

/// p <- p - lr * g. Throws NumericError on non-finite gradients.
void sgd_step(Tensor4& param, const Tensor4& grad, double lr);

/// sigma <- max(sigma, 1e-3), omega <- max(omega, 1e-3); theta and psi untouched.
GaborParamSet project_gabor_constraints(GaborParamSet params);

class Optimizer {
 public:
  virtual ~Optimizer() = default;
  virtual std::string kind() const = 0;
  /// Updates every parameter from its accumulated gradient. All gradients are
  /// checked before any parameter changes.
  virtual void step(std::span<const Parameter> params) = 0;
  virtual double learning_rate() const = 0;
  virtual void set_learning_rate(double lr) = 0;
};

class Adam : public Optimizer {
 public:
  explicit Adam(AdamHyper hyper = {}) : hyper_(hyper) {}

  std::string kind() const override { return "adam"; }
  void step(std::span<const Parameter> params) override;
  double learning_rate() const override { return hyper_.lr; }
  void set_learning_rate(double lr) override { hyper_.lr = lr; }

  const AdamHyper& hyper() const { return hyper_; }
  /// One state per parameter tensor, in parameter order. Empty before the first step.
  std::vector<AdamState>& states() { return states_; }
  const std::vector<AdamState>& states() const { return states_; }

 private:
  AdamHyper hyper_;
  std::vector<AdamState> states_;
};

class Sgd : public Optimizer {
 public:
  explicit Sgd(double lr) : lr_(lr) {}

  std::string kind() const override { return "sgd"; }
  void step(std::span<const Parameter> params) override;
  double learning_rate() const override { return lr_; }
  void set_learning_rate(double lr) override { lr_ = lr; }

 private:
  double lr_;
};

/// Step decay: base_lr times every factor whose milestone epoch is <= epoch
/// (epochs count from 1).
double scheduled_learning_rate(double base_lr,
                               std::span<const std::pair<int, double>> decay, int epoch);

}  // namespace gabornet
