#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "thermotune/nn/autograd.hpp"

namespace thermotune::nn {

struct GradCheckResult {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t checked = 0;
};

/// Compares tape gradients of scalar `f` with central differences over every element of `inputs`.
/// Relative error is |a − n| / max(|a|, |n|, floor).
template <typename T>
GradCheckResult grad_check(const std::function<Var<T>()>& f, std::vector<Var<T>> inputs, T step = T(1e-5),
                           double floor = 1e-6) {
  for (auto& v : inputs) v.zero_grad();
  Var<T> out = f();
  backward(out);
  std::vector<Tensor<T>> analytic;
  for (auto& v : inputs) analytic.push_back(v.has_grad() ? v.grad() : Tensor<T>(v.shape()));

  GradCheckResult res;
  NoGradGuard no_grad;
  for (std::size_t p = 0; p < inputs.size(); ++p) {
    auto& value = inputs[p].mutable_value();
    for (std::size_t k = 0; k < value.size(); ++k) {
      const T saved = value[k];
      value[k] = saved + step;
      const double up = static_cast<double>(f().item());
      value[k] = saved - step;
      const double down = static_cast<double>(f().item());
      value[k] = saved;
      const double numeric = (up - down) / (2.0 * static_cast<double>(step));
      const double a = static_cast<double>(analytic[p][k]);
      const double abs_err = std::abs(a - numeric);
      const double denom = std::max({std::abs(a), std::abs(numeric), floor});
      res.max_abs_error = std::max(res.max_abs_error, abs_err);
      res.max_rel_error = std::max(res.max_rel_error, abs_err / denom);
      ++res.checked;
    }
  }
  return res;
}

}  // namespace thermotune::nn
