#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "inflect/autograd.hpp"

namespace inflect::testing {

struct GradCheckResult {
  double max_relative_error = 0.0;
  double max_absolute_error = 0.0;
  std::string worst;  // "name[index]" of the worst entry
  std::size_t checked = 0;
};

// Compares reverse-mode gradients of `loss` with central differences over
// every entry of every parameter. Relative error of an entry is
// |analytic - numeric| / max(|analytic|, |numeric|, floor); the floor keeps
// entries whose true gradient is (near) zero from dividing by rounding noise.
inline GradCheckResult check_gradients(const std::vector<std::pair<std::string, nn::Var<double>>>& params,
                                       const std::function<nn::Var<double>()>& loss, double h = 1e-5,
                                       double floor = 1e-6) {
  std::vector<nn::Var<double>> vars;
  for (const auto& p : params) vars.push_back(p.second);
  std::vector<nn::Tensor<double>> analytic;
  {
    nn::Graph<double> graph;
    analytic = nn::gradients(graph, loss(), vars);
  }
  GradCheckResult result;
  for (std::size_t p = 0; p < vars.size(); ++p) {
    auto& value = vars[p].mutable_value();
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double saved = value[i];
      value[i] = saved + h;
      const double up = loss().value()[0];
      value[i] = saved - h;
      const double down = loss().value()[0];
      value[i] = saved;
      const double numeric = (up - down) / (2 * h);
      const double a = analytic[p][i];
      const double abs_err = std::abs(a - numeric);
      const double rel = abs_err / std::max({std::abs(a), std::abs(numeric), floor});
      result.max_absolute_error = std::max(result.max_absolute_error, abs_err);
      if (rel > result.max_relative_error) {
        result.max_relative_error = rel;
        result.worst = params[p].first + "[" + std::to_string(i) + "]";
      }
      ++result.checked;
    }
  }
  return result;
}

}  // namespace inflect::testing
