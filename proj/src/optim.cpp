#include "gabornet/optim.hpp"

#include <algorithm>
#include <cmath>

namespace gabornet {

namespace {

void require_finite(const Tensor4& grad, const std::string& what) {
  if (!grad.all_finite()) throw NumericError("non-finite gradient in " + what);
}

void require_same_shape(const Tensor4& param, const Tensor4& grad) {
  if (!(param.shape() == grad.shape())) {
    throw std::invalid_argument("optimizer: gradient shape " + grad.shape().str() +
                                " does not match parameter " + param.shape().str());
  }
}

}  // namespace

void adam_step(AdamState& state, const AdamHyper& hyper, Tensor4& param, const Tensor4& grad) {
  require_same_shape(param, grad);
  require_finite(grad, "adam_step");
  if (state.m.size() != param.size()) {
    state.m = Tensor4(param.shape());
    state.v = Tensor4(param.shape());
  }
  state.t += 1;
  const double t = static_cast<double>(state.t);
  const double bc1 = 1.0 - std::pow(hyper.beta1, t);
  const double bc2 = 1.0 - std::pow(hyper.beta2, t);
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad[i];
    state.m[i] = hyper.beta1 * state.m[i] + (1.0 - hyper.beta1) * g;
    state.v[i] = hyper.beta2 * state.v[i] + (1.0 - hyper.beta2) * g * g;
    const double m_hat = state.m[i] / bc1;
    const double v_hat = state.v[i] / bc2;
    param[i] -= hyper.lr * m_hat / (std::sqrt(v_hat) + hyper.eps);
  }
}

void sgd_step(Tensor4& param, const Tensor4& grad, double lr) {
  require_same_shape(param, grad);
  require_finite(grad, "sgd_step");
  for (std::size_t i = 0; i < param.size(); ++i) param[i] -= lr * grad[i];
}

GaborParamSet project_gabor_constraints(GaborParamSet params) {
  for (GaborParams& p : params.entries()) {
    p.sigma = std::max(p.sigma, kSigmaMin);
    p.omega = std::max(p.omega, kOmegaMin);
  }
  return params;
}

void Adam::step(std::span<const Parameter> params) {
  for (const Parameter& p : params) require_finite(*p.grad, p.name);
  if (states_.empty()) {
    for (const Parameter& p : params) {
      states_.push_back(AdamState{Tensor4(p.value->shape()), Tensor4(p.value->shape()), 0});
    }
  }
  if (states_.size() != params.size()) {
    throw std::invalid_argument("adam: parameter list changed between steps");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    adam_step(states_[i], hyper_, *params[i].value, *params[i].grad);
  }
}

void Sgd::step(std::span<const Parameter> params) {
  for (const Parameter& p : params) require_finite(*p.grad, p.name);
  for (const Parameter& p : params) sgd_step(*p.value, *p.grad, lr_);
}

double scheduled_learning_rate(double base_lr,
                               std::span<const std::pair<int, double>> decay, int epoch) {
  double lr = base_lr;
  for (const auto& [milestone, factor] : decay) {
    if (epoch >= milestone) lr *= factor;
  }
  return lr;
}

}  // namespace gabornet
