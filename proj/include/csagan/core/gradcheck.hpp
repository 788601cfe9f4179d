#pragma once

#include <functional>
#include <string>
#include <vector>

#include "csagan/core/tensor.hpp"

namespace csagan {

struct GradCheckOptions {
  double step = 1e-5;
  // Denominator floor: relative error is |a - n| / max(|a|, |n|, floor).
  double floor = 1e-6;
  // Check at most this many coordinates per input (0 = all), chosen with a
  // fixed stride so the selection is deterministic.
  int max_coords = 0;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  int coords_checked = 0;
  std::string worst;  // "<input>[<index>]"
};

// Compares backward() gradients of a scalar-valued function with central
// differences of the same function. `inputs` are leaves with requires_grad;
// their values are perturbed in place and restored.
GradCheckResult check_gradients(const std::function<Tensor()>& fn,
                                std::vector<Tensor> inputs,
                                const std::vector<std::string>& names = {},
                                const GradCheckOptions& options = {});

}  // namespace csagan
