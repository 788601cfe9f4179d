#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "csagan/core/optim.hpp"
#include "csagan/core/spectral.hpp"
#include "csagan/core/tensor.hpp"

namespace csagan {

struct NamedSpectral {
  std::string name;
  SpectralState* state;
};

// Flat view over a model's trainable tensors and spectral-norm vectors.
struct ParameterSet {
  std::vector<NamedParameter> parameters;
  std::vector<NamedSpectral> spectral;

  void append(const ParameterSet& other);
  const Tensor& find(const std::string& name) const;
};

struct ForwardContext {
  // Advance power iteration on layers whose weight is trainable.
  bool update_spectral = false;
};

// Convolution with optional bias and spectral normalization of the kernel
// (reshaped to C_out x C_in*k*k).
class Conv2dLayer {
 public:
  Conv2dLayer() = default;
  Conv2dLayer(std::string name, int in_channels, int out_channels, int kernel,
              int stride, int pad, uint64_t seed, bool spectral = true,
              bool bias = true, double gain = 1.0);

  Tensor forward(const Tensor& x, const ForwardContext& ctx);
  // Normalized kernel for this pass; advances the power iteration when
  // ctx asks for it and the kernel is trainable.
  Tensor effective_weight(const ForwardContext& ctx);

  void collect(ParameterSet& set);

  Tensor weight;
  Tensor bias;  // undefined when the layer has none
  SpectralState spectral_state;
  bool spectral = true;
  int stride = 1;
  int pad = 0;
  std::string name;
};

// Instance normalization with a learnable per-channel gain (starts at 1)
// and shift (starts at 0).
class InstanceNormLayer {
 public:
  InstanceNormLayer() = default;
  InstanceNormLayer(std::string name, int channels);

  Tensor forward(const Tensor& x) const;
  void collect(ParameterSet& set);

  Tensor gain;
  Tensor shift;
  std::string name;
};

}  // namespace csagan
