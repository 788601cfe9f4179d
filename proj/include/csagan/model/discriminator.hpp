#pragma once

#include <cstdint>
#include <vector>

#include "csagan/core/tensor.hpp"
#include "csagan/model/layers.hpp"

namespace csagan {

constexpr int kTapsPerSubnet = 3;

struct DiscriminatorConfig {
  int n_d = 3;
  int shared_depth = 2;
  // Strictly increasing; empty selects the shallowest run of n_d depths
  // whose deepest member covers the image.
  std::vector<int> depths;
  int kernel = 4;
  int stride = 2;
  int base_channels = 32;
  int max_channels = 256;
  int image_side = 64;

  std::vector<int> resolved_depths() const;
  // Throws std::invalid_argument naming the violated constraint.
  void validate() const;
  int channels_at(int layer) const;
  bool operator==(const DiscriminatorConfig&) const = default;
};

// Receptive field of a plain stack of `depth` convolutions for each entry:
// RF_l = RF_{l-1} + (kernel - 1) * stride^(l-1), RF_0 = 1.
std::vector<int64_t> receptive_field(const std::vector<int>& depths, int kernel, int stride);

struct DiscriminatorOutput {
  std::vector<Tensor> scores;             // n_d tensors [B], each in (0,1)
  std::vector<std::vector<Tensor>> taps;  // n_d x 3 activations
};

// Shared trunk of shared_depth strided convolutions feeding n_d branches
// that continue to their own depth. Each branch ends with a 3x3 convolution
// to one channel, a sigmoid and a per-sample spatial mean.
class Discriminator {
 public:
  Discriminator(const DiscriminatorConfig& config, uint64_t seed);
  Discriminator(const Discriminator&) = delete;
  Discriminator& operator=(const Discriminator&) = delete;

  const DiscriminatorConfig& config() const { return config_; }
  const std::vector<int>& depths() const { return depths_; }

  // cond [B,1,S,S] (or [1,S,S]), image [B,3,S,S] (or [3,S,S]).
  DiscriminatorOutput forward(const Tensor& cond, const Tensor& image,
                              const ForwardContext& ctx = {});

  ParameterSet parameters();
  ParameterSet trunk_parameters();
  ParameterSet branch_parameters(int subnet);

 private:
  DiscriminatorConfig config_;
  std::vector<int> depths_;
  std::vector<Conv2dLayer> trunk_;
  std::vector<std::vector<Conv2dLayer>> branches_;
  std::vector<Conv2dLayer> heads_;
};

}  // namespace csagan
