#include "inflect/optimizer.hpp"

#include <cmath>

#include "inflect/errors.hpp"

namespace inflect::nn {

template <class Real>
OptimizerState<Real> make_optimizer_state(const std::vector<Var<Real>>& params) {
  OptimizerState<Real> state;
  for (const auto& p : params) {
    state.first_moment.emplace_back(p.shape());
    state.second_moment.emplace_back(p.shape());
  }
  return state;
}

template <class Real>
void adam_step(OptimizerState<Real>& state, std::vector<Var<Real>>& params, const std::vector<Tensor<Real>>& grads,
               double lr, const AdamOptions& options) {
  if (params.size() != grads.size() || params.size() != state.first_moment.size()) {
    throw ShapeError("adam_step: " + std::to_string(params.size()) + " parameters, " +
                     std::to_string(grads.size()) + " gradients, " + std::to_string(state.first_moment.size()) +
                     " moment slots");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].shape() != grads[i].shape || params[i].shape() != state.first_moment[i].shape) {
      throw ShapeError("adam_step: parameter " + std::to_string(i) + " has shape " + to_string(params[i].shape()) +
                       " but gradient " + to_string(grads[i].shape));
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(options.beta1, t);
  const double correction2 = 1.0 - std::pow(options.beta2, t);
  const auto b1 = static_cast<Real>(options.beta1);
  const auto b2 = static_cast<Real>(options.beta2);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& value = params[i].mutable_value().data;
    auto& m = state.first_moment[i].data;
    auto& v = state.second_moment[i].data;
    const auto& g = grads[i].data;
    for (std::size_t j = 0; j < value.size(); ++j) {
      m[j] = b1 * m[j] + (Real(1) - b1) * g[j];
      v[j] = b2 * v[j] + (Real(1) - b2) * g[j] * g[j];
      const double m_hat = static_cast<double>(m[j]) / correction1;
      const double v_hat = static_cast<double>(v[j]) / correction2;
      value[j] -= static_cast<Real>(lr * m_hat / (std::sqrt(v_hat) + options.epsilon));
    }
  }
}

template <class Real>
double clip_grad_norm(std::vector<Tensor<Real>>& grads, double max_norm) {
  double sq = 0;
  for (const auto& g : grads) {
    for (Real v : g.data) sq += static_cast<double>(v) * static_cast<double>(v);
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0 && norm > max_norm) {
    const auto factor = static_cast<Real>(max_norm / norm);
    for (auto& g : grads) {
      for (auto& v : g.data) v *= factor;
    }
  }
  return norm;
}

double LearningRateSchedule::at(std::uint64_t step) const {
  if (step == 0) step = 1;
  const double s = static_cast<double>(step);
  if (warmup == 0) return base;
  const double w = static_cast<double>(warmup);
  return s < w ? base * s / w : base * std::sqrt(w / s);
}

template OptimizerState<float> make_optimizer_state(const std::vector<Var<float>>&);
template OptimizerState<double> make_optimizer_state(const std::vector<Var<double>>&);
template void adam_step(OptimizerState<float>&, std::vector<Var<float>>&, const std::vector<Tensor<float>>&, double,
                        const AdamOptions&);
template void adam_step(OptimizerState<double>&, std::vector<Var<double>>&, const std::vector<Tensor<double>>&,
                        double, const AdamOptions&);
template double clip_grad_norm(std::vector<Tensor<float>>&, double);
template double clip_grad_norm(std::vector<Tensor<double>>&, double);

}  // namespace inflect::nn
