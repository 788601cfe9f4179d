#include "csagan/model/layers.hpp"

#include <cmath>
#include <random>

#include "csagan/core/ops.hpp"

namespace csagan {

void ParameterSet::append(const ParameterSet& other) {
  parameters.insert(parameters.end(), other.parameters.begin(), other.parameters.end());
  spectral.insert(spectral.end(), other.spectral.begin(), other.spectral.end());
}

const Tensor& ParameterSet::find(const std::string& name) const {
  for (const auto& p : parameters) {
    if (p.name == name) return p.tensor;
  }
  throw std::out_of_range("no parameter named " + name);
}

Conv2dLayer::Conv2dLayer(std::string layer_name, int in_channels, int out_channels,
                         int kernel, int stride_, int pad_, uint64_t seed, bool spectral_,
                         bool with_bias, double gain)
    : spectral(spectral_), stride(stride_), pad(pad_), name(std::move(layer_name)) {
  std::mt19937_64 rng(seed);
  const double fan_in = static_cast<double>(in_channels) * kernel * kernel;
  std::normal_distribution<double> normal(0.0, gain / std::sqrt(fan_in));
  std::vector<double> w(static_cast<size_t>(out_channels) * in_channels * kernel * kernel);
  for (double& v : w) v = normal(rng);
  weight = Tensor::parameter({out_channels, in_channels, kernel, kernel}, std::move(w));
  if (with_bias) {
    bias = Tensor::parameter({out_channels},
                             std::vector<double>(static_cast<size_t>(out_channels), 0.0));
  }
  if (spectral) spectral_state = init_spectral_state(weight, rng);
}

Tensor Conv2dLayer::effective_weight(const ForwardContext& ctx) {
  if (!spectral) return weight;
  const int iterations =
      (ctx.update_spectral && weight.requires_grad()) ? spectral_state.n_power_iterations : 0;
  SpectralResult r = spectral_normalize(weight, spectral_state, iterations);
  spectral_state = std::move(r.state);
  return r.weight;
}

Tensor Conv2dLayer::forward(const Tensor& x, const ForwardContext& ctx) {
  Tensor y = ops::conv2d(x, effective_weight(ctx), stride, pad);
  if (bias.defined()) y = ops::bias_add(y, bias);
  return y;
}

void Conv2dLayer::collect(ParameterSet& set) {
  set.parameters.push_back({name + ".weight", weight});
  if (bias.defined()) set.parameters.push_back({name + ".bias", bias});
  if (spectral) set.spectral.push_back({name + ".u", &spectral_state});
}

InstanceNormLayer::InstanceNormLayer(std::string layer_name, int channels)
    : name(std::move(layer_name)) {
  gain = Tensor::parameter({channels}, std::vector<double>(static_cast<size_t>(channels), 1.0));
  shift = Tensor::parameter({channels}, std::vector<double>(static_cast<size_t>(channels), 0.0));
}

Tensor InstanceNormLayer::forward(const Tensor& x) const { return ops::instance_norm(x, gain, shift); }

void InstanceNormLayer::collect(ParameterSet& set) {
  set.parameters.push_back({name + ".gain", gain});
  set.parameters.push_back({name + ".shift", shift});
}

}  // namespace csagan
