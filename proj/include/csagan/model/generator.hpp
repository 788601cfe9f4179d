#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "csagan/core/tensor.hpp"
#include "csagan/linemap/linemap.hpp"
#include "csagan/model/csam.hpp"
#include "csagan/model/layers.hpp"

namespace csagan {

struct GeneratorConfig {
  int base_channels = 32;
  int n_down = 4;
  int image_side = 64;
  bool csam_enabled = true;
  int max_channels = 256;

  // Throws std::invalid_argument naming the violated constraint.
  void validate() const;
  int channels_at(int level) const;
  // Condition scale factors consumed by generate(): 1, 2, ..., 2^n_down.
  std::vector<int> pyramid_scales() const;
  bool operator==(const GeneratorConfig&) const = default;
};

enum class Activation { kLeakyRelu, kRelu };

// Masked residual unit. Both gates and the feature branch see the
// condition at the unit's resolution:
//   m = sigmoid(conv_m([x, c]))            (C channels)
//   z = act(norm(conv_z([m * x, c])))      (C' channels, instance norm)
//   n = sigmoid(conv_n([x, c]))            (C' channels)
//   y = (1 - n) * proj(x) + n * z
// proj is a 1x1 convolution when C != C' and the identity otherwise.
class Mru {
 public:
  Mru() = default;
  Mru(std::string name, int in_channels, int out_channels, Activation act, uint64_t seed);

  Tensor forward(const Tensor& x, const Tensor& cond, const ForwardContext& ctx);
  void collect(ParameterSet& set);

  Conv2dLayer conv_m, conv_n, conv_z, proj;
  InstanceNormLayer norm_z;
  bool has_proj = false;
  Activation activation = Activation::kLeakyRelu;
  std::string name;
};

struct GenerateOptions {
  ForwardContext ctx;
  // Diagnostic: replace the encoder skip at this level with zeros.
  int zero_skip_level = -1;
};

// Encoder-decoder of MRUs with skip concatenation. Encoder MRUs run at
// S, S/2, ..., S/2^(n_down-1), each followed by a stride-2 convolution; a
// bottleneck MRU runs at S/2^n_down. Decoder levels n_down-1 .. 1 upsample
// (nearest + 3x3 conv), concatenate the matching encoder output and apply an
// MRU; CSAM precedes the last of these. Every down and up convolution is
// followed by instance norm. A final upsample, skip concat and
// 3x3 convolution with tanh produce RGB at full resolution.
class Generator {
 public:
  Generator(const GeneratorConfig& config, uint64_t seed);
  Generator(const Generator&) = delete;
  Generator& operator=(const Generator&) = delete;

  const GeneratorConfig& config() const { return config_; }

  // Stage switch: when inactive CSAM is left out of the graph entirely.
  void set_csam_active(bool active);
  bool csam_active() const { return csam_active_; }
  bool has_csam() const { return csam_ != nullptr; }

  // Condition levels keyed by extent: [B,1,S/s,S/s] for each pyramid scale.
  // Output [B,3,S,S] in (-1, 1).
  Tensor forward(const std::vector<Tensor>& condition_levels, const GenerateOptions& opts = {});
  // CSAM attention map at its insertion point for the same inputs.
  Tensor attention_map(const std::vector<Tensor>& condition_levels);

  ParameterSet parameters();
  ParameterSet csam_parameters();
  // Every parameter outside CSAM.
  ParameterSet backbone_parameters();

  int csam_resolution() const;

 private:
  const Tensor& level(const std::vector<Tensor>& levels, int64_t extent) const;

  GeneratorConfig config_;
  std::vector<Mru> encoder_;
  std::vector<Conv2dLayer> down_;
  std::vector<InstanceNormLayer> down_norm_;
  Mru bottleneck_;
  std::vector<Conv2dLayer> up_;   // index l: upsample into level l
  std::vector<InstanceNormLayer> up_norm_;
  std::vector<Mru> decoder_;      // index l (1..n_down-1)
  Conv2dLayer to_rgb_;
  std::unique_ptr<Csam> csam_;
  bool csam_active_ = true;
};

// Batched condition levels for a set of pyramids (all with equal scales).
std::vector<Tensor> stack_condition_levels(const std::vector<const ConditionPyramid*>& pyramids);

// Single-sample entry point: distance field -> RGB [3,S,S].
Tensor generate(Generator& generator, const DistanceField& field, const ConditionPyramid& pyramid);

}  // namespace csagan
