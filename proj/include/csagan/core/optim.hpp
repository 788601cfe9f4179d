#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "csagan/core/tensor.hpp"

namespace csagan {

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  int64_t t = 0;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState for_size(size_t n, double beta1 = 0.5, double beta2 = 0.999,
                            double eps = 1e-8);
};

// Bias-corrected Adam update applied in place to values. A non-finite
// gradient throws NumericError and leaves values and state untouched.
void adam_step(std::span<double> values, std::span<const double> grad,
               AdamState& state, double lr);

struct NamedParameter {
  std::string name;
  Tensor tensor;
};

// Adam over a fixed set of named parameters. Moments are keyed by name so
// they survive rebuilding the parameter set between training stages.
class Adam {
 public:
  Adam(double beta1 = 0.5, double beta2 = 0.999, double eps = 1e-8)
      : beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void set_parameters(std::vector<NamedParameter> params);
  const std::vector<NamedParameter>& parameters() const { return params_; }

  void zero_grad();
  // Validates every gradient before touching any parameter, so a NaN
  // anywhere rejects the whole step.
  void step(double lr);

  std::map<std::string, AdamState>& states() { return states_; }
  const std::map<std::string, AdamState>& states() const { return states_; }

 private:
  double beta1_, beta2_, eps_;
  std::vector<NamedParameter> params_;
  std::map<std::string, AdamState> states_;
};

}  // namespace csagan
