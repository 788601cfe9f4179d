#include "csagan/model/discriminator.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "csagan/core/ops.hpp"
#include "csagan/core/rng.hpp"

namespace csagan {

namespace {

constexpr double kLeakySlope = 0.2;

double leaky_gain() { return std::sqrt(2.0 / (1.0 + kLeakySlope * kLeakySlope)); }

}  // namespace

std::vector<int64_t> receptive_field(const std::vector<int>& depths, int kernel, int stride) {
  if (kernel < 1 || stride < 1) throw std::invalid_argument("kernel and stride must be >= 1");
  std::vector<int64_t> out;
  for (int depth : depths) {
    int64_t rf = 1, jump = 1;
    for (int l = 1; l <= depth; ++l) {
      rf += static_cast<int64_t>(kernel - 1) * jump;
      jump *= stride;
    }
    out.push_back(rf);
  }
  return out;
}

std::vector<int> DiscriminatorConfig::resolved_depths() const {
  if (!depths.empty()) return depths;
  int needed = 1;
  while (receptive_field({needed}, kernel, stride)[0] < image_side && needed < 64) ++needed;
  const int first = std::max({shared_depth + 1, needed - n_d + 1, kTapsPerSubnet});
  std::vector<int> out;
  for (int i = 0; i < n_d; ++i) out.push_back(first + i);
  return out;
}

void DiscriminatorConfig::validate() const {
  if (n_d < 1) throw std::invalid_argument("discriminator.n_d must be >= 1");
  if (shared_depth < 0) throw std::invalid_argument("discriminator.shared_depth must be >= 0");
  if (kernel < 1 || stride < 1) {
    throw std::invalid_argument("discriminator.kernel and discriminator.stride must be >= 1");
  }
  if (base_channels < 1 || max_channels < base_channels) {
    throw std::invalid_argument("discriminator.base_channels must be in [1, max_channels]");
  }
  const std::vector<int> d = resolved_depths();
  if (static_cast<int>(d.size()) != n_d) {
    throw std::invalid_argument("discriminator.depths must list n_d entries");
  }
  for (size_t i = 1; i < d.size(); ++i) {
    if (d[i] <= d[i - 1]) {
      throw std::invalid_argument("discriminator.depths must be strictly increasing");
    }
  }
  if (d.front() <= shared_depth) {
    throw std::invalid_argument("discriminator.shared_depth must be below every depth");
  }
  if (d.front() < kTapsPerSubnet) {
    throw std::invalid_argument("discriminator.depths must be >= 3 to provide three taps");
  }
  if (receptive_field({d.back()}, kernel, stride)[0] < image_side) {
    throw std::invalid_argument(
        "discriminator.depths: deepest receptive field is smaller than image_side");
  }
  int64_t extent = image_side;
  for (int l = 0; l < d.back(); ++l) {
    extent = (extent + 2 * ((kernel - 1) / 2) - kernel) / stride + 1;
    if (extent < 1) {
      throw std::invalid_argument("discriminator.depths: image_side too small for the deepest branch");
    }
  }
}

int DiscriminatorConfig::channels_at(int layer) const {
  int64_t c = static_cast<int64_t>(base_channels) << std::min(layer, 20);
  return static_cast<int>(std::min<int64_t>(c, max_channels));
}

Discriminator::Discriminator(const DiscriminatorConfig& config, uint64_t seed) : config_(config) {
  config_.validate();
  depths_ = config_.resolved_depths();
  const uint64_t s = derive_seed(seed, "discriminator");
  const int pad = (config_.kernel - 1) / 2;
  auto make = [&](const std::string& name, int layer) {
    const int in = layer == 0 ? 4 : config_.channels_at(layer - 1);
    return Conv2dLayer(name, in, config_.channels_at(layer), config_.kernel, config_.stride, pad,
                       derive_seed(s, name), true, true, leaky_gain());
  };
  for (int l = 0; l < config_.shared_depth; ++l) {
    trunk_.push_back(make("D.trunk" + std::to_string(l), l));
  }
  for (int i = 0; i < config_.n_d; ++i) {
    const std::string tag = "D.sub" + std::to_string(i);
    std::vector<Conv2dLayer> branch;
    for (int l = config_.shared_depth; l < depths_[i]; ++l) {
      branch.push_back(make(tag + ".conv" + std::to_string(l), l));
    }
    branches_.push_back(std::move(branch));
    heads_.emplace_back(tag + ".head", config_.channels_at(depths_[i] - 1), 1, 3, 1, 1,
                        derive_seed(s, tag + ".head"));
  }
}

DiscriminatorOutput Discriminator::forward(const Tensor& cond, const Tensor& image,
                                           const ForwardContext& ctx) {
  Tensor c = cond, y = image;
  if (c.dim() == 3) c = ops::reshape(c, {1, c.size(0), c.size(1), c.size(2)});
  if (y.dim() == 3) y = ops::reshape(y, {1, y.size(0), y.size(1), y.size(2)});
  const int64_t side = config_.image_side;
  if (c.dim() != 4 || y.dim() != 4 || c.size(1) != 1 || y.size(1) != 3 || c.size(0) != y.size(0) ||
      c.size(2) != side || c.size(3) != side || y.size(2) != side || y.size(3) != side) {
    throw DimensionError("discriminator: expected condition [B,1," + std::to_string(side) + "," +
                         std::to_string(side) + "] and image [B,3,...], got " +
                         shape_str(cond.shape()) + " and " + shape_str(image.shape()));
  }
  std::vector<Tensor> trunk_acts;
  Tensor h = ops::concat({c, y}, 1);
  for (auto& layer : trunk_) {
    h = ops::leaky_relu(layer.forward(h, ctx), kLeakySlope);
    trunk_acts.push_back(h);
  }
  DiscriminatorOutput out;
  for (int i = 0; i < config_.n_d; ++i) {
    std::vector<Tensor> acts = trunk_acts;
    Tensor b = h;
    for (auto& layer : branches_[i]) {
      b = ops::leaky_relu(layer.forward(b, ctx), kLeakySlope);
      acts.push_back(b);
    }
    out.taps.emplace_back(acts.end() - kTapsPerSubnet, acts.end());
    out.scores.push_back(ops::mean_per_sample(ops::sigmoid(heads_[i].forward(b, ctx))));
  }
  return out;
}

ParameterSet Discriminator::trunk_parameters() {
  ParameterSet set;
  for (auto& layer : trunk_) layer.collect(set);
  return set;
}

ParameterSet Discriminator::branch_parameters(int subnet) {
  ParameterSet set;
  for (auto& layer : branches_.at(subnet)) layer.collect(set);
  heads_.at(subnet).collect(set);
  return set;
}

ParameterSet Discriminator::parameters() {
  ParameterSet set = trunk_parameters();
  for (int i = 0; i < config_.n_d; ++i) set.append(branch_parameters(i));
  return set;
}

}  // namespace csagan
