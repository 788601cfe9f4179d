#include "csagan/core/optim.hpp"

#include <cmath>

namespace csagan {

AdamState AdamState::for_size(size_t n, double beta1, double beta2, double eps) {
  AdamState s;
  s.m.assign(n, 0.0);
  s.v.assign(n, 0.0);
  s.beta1 = beta1;
  s.beta2 = beta2;
  s.eps = eps;
  return s;
}

void adam_step(std::span<double> values, std::span<const double> grad,
               AdamState& state, double lr) {
  if (values.size() != grad.size() || state.m.size() != values.size() ||
      state.v.size() != values.size()) {
    throw DimensionError("adam_step: parameter, gradient and moments differ in size");
  }
  if (!(lr > 0.0)) throw std::invalid_argument("adam_step: lr must be positive");
  for (double g : grad) {
    if (!std::isfinite(g)) throw NumericError("adam_step: non-finite gradient");
  }
  state.t += 1;
  const double correction1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double correction2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  for (size_t i = 0; i < values.size(); ++i) {
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grad[i];
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * grad[i] * grad[i];
    const double m_hat = state.m[i] / correction1;
    const double v_hat = state.v[i] / correction2;
    values[i] -= lr * m_hat / (std::sqrt(v_hat) + state.eps);
  }
  round_to_precision(values);
}

void Adam::set_parameters(std::vector<NamedParameter> params) {
  params_ = std::move(params);
  for (const auto& p : params_) {
    auto it = states_.find(p.name);
    if (it == states_.end() ||
        it->second.m.size() != static_cast<size_t>(p.tensor.numel())) {
      states_[p.name] = AdamState::for_size(static_cast<size_t>(p.tensor.numel()),
                                            beta1_, beta2_, eps_);
    }
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

void Adam::step(double lr) {
  for (const auto& p : params_) {
    for (double g : p.tensor.grad()) {
      if (!std::isfinite(g)) {
        throw NumericError("adam: non-finite gradient in '" + p.name + "'");
      }
    }
  }
  for (auto& p : params_) {
    if (!p.tensor.has_grad()) continue;
    adam_step(p.tensor.mutable_data(), p.tensor.grad(), states_.at(p.name), lr);
  }
}

}  // namespace csagan
