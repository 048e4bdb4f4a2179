#include "adapterlab/optim.hpp"

#include <cmath>

#include "adapterlab/error.hpp"

namespace adapterlab {

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               const AdamOptions& options) {
  if (grads.size() != params.size() || state.m.size() != params.size() ||
      state.v.size() != params.size()) {
    throw ShapeError("adam_step: param/grad/state sizes differ (" + std::to_string(params.size()) +
                     ", " + std::to_string(grads.size()) + ", " + std::to_string(state.m.size()) +
                     "/" + std::to_string(state.v.size()) + ")");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(options.beta1, t);
  const double c2 = 1.0 - std::pow(options.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = options.beta1 * state.m[i] + (1.0 - options.beta1) * g;
    state.v[i] = options.beta2 * state.v[i] + (1.0 - options.beta2) * g * g;
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    params[i] -= options.lr * m_hat / (std::sqrt(v_hat) + options.eps);
  }
}

Adam::Adam(std::vector<Tensor> params, AdamOptions options)
    : params_(std::move(params)), options_(options) {
  state_.reserve(params_.size());
  for (const auto& p : params_) state_.push_back(AdamState::zeros(p.numel()));
}

void Adam::step() {
  std::vector<double> zeros;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = params_[i];
    if (p.has_grad()) {
      adam_step(p.mutable_data(), p.grad(), state_[i], options_);
    } else {
      zeros.assign(p.numel(), 0.0);
      adam_step(p.mutable_data(), zeros, state_[i], options_);
    }
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

}  // namespace adapterlab
