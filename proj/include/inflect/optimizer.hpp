#pragma once

#include <cstdint>
#include <vector>

#include "inflect/autograd.hpp"
#include "inflect/tensor.hpp"

namespace inflect::nn {

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

template <class Real>
struct OptimizerState {
  std::vector<Tensor<Real>> first_moment;
  std::vector<Tensor<Real>> second_moment;
  std::uint64_t step = 0;
};

template <class Real>
OptimizerState<Real> make_optimizer_state(const std::vector<Var<Real>>& params);

// One bias-corrected adaptive-moment update, in place on the parameter values.
template <class Real>
void adam_step(OptimizerState<Real>& state, std::vector<Var<Real>>& params, const std::vector<Tensor<Real>>& grads,
               double lr, const AdamOptions& options = {});

// Rescales all gradients so their joint L2 norm is at most max_norm.
// Returns the norm before clipping. max_norm <= 0 disables clipping.
template <class Real>
double clip_grad_norm(std::vector<Tensor<Real>>& grads, double max_norm);

// Linear warmup to `base` over `warmup` steps, then decay with 1/sqrt(step).
struct LearningRateSchedule {
  double base = 1e-3;
  std::uint64_t warmup = 400;

  double at(std::uint64_t step) const;
};

}  // namespace inflect::nn
