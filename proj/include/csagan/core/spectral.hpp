#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "csagan/core/tensor.hpp"

namespace csagan {

// Left singular vector estimate for one weight, reshaped to
// rows = dim 0, cols = product of remaining dims.
struct SpectralState {
  std::vector<double> u;
  int n_power_iterations = 1;
};

constexpr double kSpectralSigmaFloor = 1e-12;
constexpr int kSpectralWarmupIterations = 5;

// Random unit vector of the given length, refined by warm-up iterations
// against the weight when one is supplied.
SpectralState init_spectral_state(const Tensor& weight, std::mt19937_64& rng,
                                  int warmup = kSpectralWarmupIterations);

// One or more power-iteration steps: v = W^T u / |W^T u|, u = W v / |W v|.
// u is left as-is if W annihilates it, so it stays a unit vector.
void power_iterate(std::span<const double> w, int64_t rows, int64_t cols,
                   SpectralState& state, int iterations);

// sigma = u^T W v with v = W^T u / |W^T u|, clamped below.
double spectral_sigma(std::span<const double> w, int64_t rows, int64_t cols,
                      const std::vector<double>& u);

struct SpectralResult {
  Tensor weight;  // W / sigma, differentiable w.r.t. W with u, v held fixed
  SpectralState state;
  double sigma;
};

// Runs `iterations` power steps on a copy of the state, then divides W by
// the resulting estimate. iterations may be 0 (state reused as-is).
SpectralResult spectral_normalize(const Tensor& weight, const SpectralState& state,
                                  int iterations);

}  // namespace csagan
