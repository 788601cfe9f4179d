#include "csagan/model/generator.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "csagan/core/ops.hpp"
#include "csagan/core/rng.hpp"

namespace csagan {

namespace {

constexpr double kLeakySlope = 0.2;

Tensor activate(const Tensor& x, Activation act) {
  return act == Activation::kRelu ? ops::relu(x) : ops::leaky_relu(x, kLeakySlope);
}

double gain_for(Activation act) {
  return act == Activation::kRelu ? std::sqrt(2.0)
                                  : std::sqrt(2.0 / (1.0 + kLeakySlope * kLeakySlope));
}

int channel_axis(const Tensor& x) { return x.dim() == 4 ? 1 : 0; }

void check_extent(const Tensor& x, const Tensor& cond, const std::string& who) {
  if (x.dim() != cond.dim() || x.size(-1) != cond.size(-1) || x.size(-2) != cond.size(-2) ||
      cond.size(-3) != 1 || (x.dim() == 4 && x.size(0) != cond.size(0))) {
    throw DimensionError(who + ": condition " + shape_str(cond.shape()) +
                         " does not match features " + shape_str(x.shape()));
  }
}

}  // namespace

void GeneratorConfig::validate() const {
  if (base_channels < 8) throw std::invalid_argument("generator.base_channels must be >= 8");
  if (n_down < 2) throw std::invalid_argument("generator.n_down must be >= 2");
  if (max_channels < base_channels) {
    throw std::invalid_argument("generator.max_channels must be >= base_channels");
  }
  if (image_side <= 0 || image_side % (1 << n_down) != 0) {
    throw std::invalid_argument("generator.image_side must be divisible by 2^n_down");
  }
}

int GeneratorConfig::channels_at(int level) const {
  int64_t c = static_cast<int64_t>(base_channels) << std::min(level, 20);
  return static_cast<int>(std::min<int64_t>(c, max_channels));
}

std::vector<int> GeneratorConfig::pyramid_scales() const {
  std::vector<int> scales;
  for (int l = 0; l <= n_down; ++l) scales.push_back(1 << l);
  return scales;
}

Mru::Mru(std::string mru_name, int in_channels, int out_channels, Activation act, uint64_t seed)
    : has_proj(in_channels != out_channels), activation(act), name(std::move(mru_name)) {
  conv_m = Conv2dLayer(name + ".m", in_channels + 1, in_channels, 3, 1, 1,
                       derive_seed(seed, name + ".m"));
  conv_n = Conv2dLayer(name + ".n", in_channels + 1, out_channels, 3, 1, 1,
                       derive_seed(seed, name + ".n"));
  conv_z = Conv2dLayer(name + ".z", in_channels + 1, out_channels, 3, 1, 1,
                       derive_seed(seed, name + ".z"), true, false, gain_for(act));
  norm_z = InstanceNormLayer(name + ".z.norm", out_channels);
  if (has_proj) {
    proj = Conv2dLayer(name + ".proj", in_channels, out_channels, 1, 1, 0,
                       derive_seed(seed, name + ".proj"));
  }
}

Tensor Mru::forward(const Tensor& x, const Tensor& cond, const ForwardContext& ctx) {
  check_extent(x, cond, "mru " + name);
  const int axis = channel_axis(x);
  Tensor xc = ops::concat({x, cond}, axis);
  Tensor m = ops::sigmoid(conv_m.forward(xc, ctx));
  Tensor z = activate(norm_z.forward(conv_z.forward(ops::concat({ops::mul(m, x), cond}, axis), ctx)),
                      activation);
  Tensor n = ops::sigmoid(conv_n.forward(xc, ctx));
  Tensor skip = has_proj ? proj.forward(x, ctx) : x;
  return ops::add(ops::mul(ops::one_minus(n), skip), ops::mul(n, z));
}

void Mru::collect(ParameterSet& set) {
  conv_m.collect(set);
  conv_n.collect(set);
  conv_z.collect(set);
  norm_z.collect(set);
  if (has_proj) proj.collect(set);
}

Generator::Generator(const GeneratorConfig& config, uint64_t seed) : config_(config) {
  config_.validate();
  const int n = config_.n_down;
  const uint64_t s = derive_seed(seed, "generator");
  for (int l = 0; l < n; ++l) {
    const std::string tag = "G.enc" + std::to_string(l);
    encoder_.emplace_back(tag, l == 0 ? 1 : config_.channels_at(l), config_.channels_at(l),
                          Activation::kLeakyRelu, s);
    down_.emplace_back("G.down" + std::to_string(l), config_.channels_at(l),
                       config_.channels_at(l + 1), 4, 2, 1, derive_seed(s, "G.down", l), true,
                       false, gain_for(Activation::kLeakyRelu));
    down_norm_.emplace_back("G.down" + std::to_string(l) + ".norm", config_.channels_at(l + 1));
  }
  bottleneck_ = Mru("G.mid", config_.channels_at(n), config_.channels_at(n), Activation::kLeakyRelu,
                    s);
  up_.resize(n);
  up_norm_.resize(n);
  decoder_.resize(n);
  for (int l = n - 1; l >= 0; --l) {
    up_[l] = Conv2dLayer("G.up" + std::to_string(l), config_.channels_at(l + 1),
                         config_.channels_at(l), 3, 1, 1, derive_seed(s, "G.up", l), true, false,
                         gain_for(Activation::kRelu));
    up_norm_[l] = InstanceNormLayer("G.up" + std::to_string(l) + ".norm", config_.channels_at(l));
    if (l >= 1) {
      decoder_[l] = Mru("G.dec" + std::to_string(l), 2 * config_.channels_at(l),
                        config_.channels_at(l), Activation::kRelu, s);
    }
  }
  to_rgb_ = Conv2dLayer("G.rgb", 2 * config_.channels_at(0), 3, 3, 1, 1,
                        derive_seed(s, "G.rgb"));
  if (config_.csam_enabled) {
    // Separate stream so enabling CSAM leaves every other weight unchanged.
    csam_ = std::make_unique<Csam>("G.csam", 2 * config_.channels_at(1),
                                   derive_seed(seed, "csam"));
  }
}

void Generator::set_csam_active(bool active) { csam_active_ = active; }

int Generator::csam_resolution() const { return config_.image_side / 2; }

const Tensor& Generator::level(const std::vector<Tensor>& levels, int64_t extent) const {
  for (const auto& t : levels) {
    if (t.dim() >= 2 && t.size(-1) == extent && t.size(-2) == extent) return t;
  }
  throw std::out_of_range("generator: missing condition level with extent " +
                          std::to_string(extent));
}

Tensor Generator::forward(const std::vector<Tensor>& levels, const GenerateOptions& opts) {
  const int n = config_.n_down;
  const int side = config_.image_side;
  const Tensor& full = level(levels, side);
  const int axis = channel_axis(full);
  const ForwardContext& ctx = opts.ctx;

  std::vector<Tensor> skips(n);
  Tensor h = full;
  for (int l = 0; l < n; ++l) {
    h = encoder_[l].forward(h, level(levels, side >> l), ctx);
    skips[l] = h;
    h = ops::leaky_relu(down_norm_[l].forward(down_[l].forward(h, ctx)), kLeakySlope);
  }
  h = bottleneck_.forward(h, level(levels, side >> n), ctx);

  auto skip = [&](int l) {
    if (l == opts.zero_skip_level) return Tensor::zeros(skips[l].shape());
    return skips[l];
  };
  for (int l = n - 1; l >= 0; --l) {
    h = ops::relu(up_norm_[l].forward(up_[l].forward(ops::upsample_nearest(h, 2), ctx)));
    h = ops::concat({h, skip(l)}, axis);
    if (l == 0) break;
    const Tensor& cond = level(levels, side >> l);
    if (l == 1 && csam_ && csam_active_) h = csam_->forward(h, cond, ctx);
    h = decoder_[l].forward(h, cond, ctx);
  }
  return ops::tanh(to_rgb_.forward(h, ctx));
}

Tensor Generator::attention_map(const std::vector<Tensor>& levels) {
  if (!csam_) throw std::logic_error("generator built without CSAM");
  const int n = config_.n_down;
  const int side = config_.image_side;
  const Tensor& full = level(levels, side);
  const int axis = channel_axis(full);
  ForwardContext ctx;
  std::vector<Tensor> skips(n);
  Tensor h = full;
  for (int l = 0; l < n; ++l) {
    h = encoder_[l].forward(h, level(levels, side >> l), ctx);
    skips[l] = h;
    h = ops::leaky_relu(down_norm_[l].forward(down_[l].forward(h, ctx)), kLeakySlope);
  }
  h = bottleneck_.forward(h, level(levels, side >> n), ctx);
  for (int l = n - 1; l >= 1; --l) {
    h = ops::relu(up_norm_[l].forward(up_[l].forward(ops::upsample_nearest(h, 2), ctx)));
    h = ops::concat({h, skips[l]}, axis);
    const Tensor& cond = level(levels, side >> l);
    if (l == 1) return csam_->attention(h, cond, ctx);
    h = decoder_[l].forward(h, cond, ctx);
  }
  throw std::logic_error("unreachable");
}

ParameterSet Generator::backbone_parameters() {
  ParameterSet set;
  for (int l = 0; l < config_.n_down; ++l) {
    encoder_[l].collect(set);
    down_[l].collect(set);
    down_norm_[l].collect(set);
  }
  bottleneck_.collect(set);
  for (int l = config_.n_down - 1; l >= 0; --l) {
    up_[l].collect(set);
    up_norm_[l].collect(set);
    if (l >= 1) decoder_[l].collect(set);
  }
  to_rgb_.collect(set);
  return set;
}

ParameterSet Generator::csam_parameters() {
  ParameterSet set;
  if (csam_) csam_->collect(set);
  return set;
}

ParameterSet Generator::parameters() {
  ParameterSet set = backbone_parameters();
  set.append(csam_parameters());
  return set;
}

std::vector<Tensor> stack_condition_levels(const std::vector<const ConditionPyramid*>& pyramids) {
  if (pyramids.empty()) throw std::invalid_argument("stack_condition_levels: empty batch");
  const auto& first = pyramids.front()->levels;
  const int64_t batch = static_cast<int64_t>(pyramids.size());
  std::vector<Tensor> out;
  for (size_t k = 0; k < first.size(); ++k) {
    const auto& ref = first[k];
    std::vector<double> data;
    data.reserve(static_cast<size_t>(batch) * ref.values.size());
    for (const auto* p : pyramids) {
      const PyramidLevel& lv = p->at_extent(ref.height, ref.width);
      data.insert(data.end(), lv.values.begin(), lv.values.end());
    }
    out.push_back(Tensor::from_data({batch, 1, ref.height, ref.width}, std::move(data)));
  }
  return out;
}

Tensor generate(Generator& generator, const DistanceField& field, const ConditionPyramid& pyramid) {
  const int side = generator.config().image_side;
  if (field.height != side || field.width != side) {
    throw DimensionError("generate: field is " + std::to_string(field.height) + "x" +
                         std::to_string(field.width) + ", generator expects side " +
                         std::to_string(side));
  }
  std::vector<Tensor> levels = stack_condition_levels({&pyramid});
  Tensor out = generator.forward(levels);
  return ops::reshape(out, {3, side, side});
}

}  // namespace csagan
