#pragma once

#include <string>
#include <vector>

#include "csagan/core/gradcheck.hpp"

namespace csagan {

struct GradientCase {
  std::string name;
  GradCheckResult result;
};

constexpr double kGradientTolerance = 1e-4;

// Central-difference checks of every differentiable op, spectral
// normalization, the CSAM module, one MRU, one discriminator subnetwork and
// each loss. Runs at 64-bit regardless of the engine setting, which is
// restored afterwards.
std::vector<GradientCase> run_gradient_suite(uint64_t seed = 0);

}  // namespace csagan
