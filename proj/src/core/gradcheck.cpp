#include "csagan/core/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace csagan {

GradCheckResult check_gradients(const std::function<Tensor()>& fn,
                                std::vector<Tensor> inputs,
                                const std::vector<std::string>& names,
                                const GradCheckOptions& options) {
  for (Tensor& t : inputs) t.zero_grad();
  Tensor loss = fn();
  backward(loss);
  std::vector<std::vector<double>> analytic;
  for (const Tensor& t : inputs) {
    if (t.has_grad()) {
      analytic.emplace_back(t.grad().begin(), t.grad().end());
    } else {
      analytic.emplace_back(static_cast<size_t>(t.numel()), 0.0);
    }
  }
  loss = Tensor();

  GradCheckResult result;
  for (size_t k = 0; k < inputs.size(); ++k) {
    auto values = inputs[k].mutable_data();
    const size_t n = values.size();
    size_t stride = 1;
    if (options.max_coords > 0 && n > static_cast<size_t>(options.max_coords)) {
      stride = (n + static_cast<size_t>(options.max_coords) - 1) /
               static_cast<size_t>(options.max_coords);
    }
    for (size_t i = 0; i < n; i += stride) {
      const double saved = values[i];
      values[i] = saved + options.step;
      const double up = fn().item();
      values[i] = saved - options.step;
      const double down = fn().item();
      values[i] = saved;
      const double numeric = (up - down) / (2.0 * options.step);
      const double a = analytic[k][i];
      const double abs_err = std::fabs(a - numeric);
      const double denom = std::max({std::fabs(a), std::fabs(numeric), options.floor});
      const double rel = abs_err / denom;
      result.max_abs_error = std::max(result.max_abs_error, abs_err);
      if (rel > result.max_rel_error || result.coords_checked == 0) {
        result.max_rel_error = std::max(rel, result.max_rel_error);
        const std::string label = k < names.size() ? names[k] : "input" + std::to_string(k);
        result.worst = label + "[" + std::to_string(i) + "]";
      }
      ++result.coords_checked;
    }
  }
  for (Tensor& t : inputs) t.zero_grad();
  return result;
}

}  // namespace csagan
