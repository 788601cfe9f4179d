#include "csagan/model/csam.hpp"

#include <algorithm>

#include "csagan/core/ops.hpp"
#include "csagan/core/rng.hpp"

namespace csagan {

namespace {

struct Projected {
  Tensor f, g, h;  // [B, C_hat, N], [B, C_hat, N], [B, C, N]
  bool batched;
  Shape feature_shape;
};

Projected project(const Tensor& a, const Tensor& x, const CsamWeights& w) {
  if (a.dim() != x.dim() || (a.dim() != 3 && a.dim() != 4)) {
    throw DimensionError("csam: features and condition must both be [C,H,W] or [B,C,H,W]");
  }
  const bool batched = a.dim() == 4;
  const int64_t batch = batched ? a.size(0) : 1;
  const int64_t h = a.size(-2), wd = a.size(-1);
  if (x.size(-2) != h || x.size(-1) != wd || x.size(-3) != 1 ||
      (batched && x.size(0) != batch)) {
    throw DimensionError("csam: condition " + shape_str(x.shape()) +
                         " does not match features " + shape_str(a.shape()));
  }
  const int64_t n = h * wd;
  Tensor cat = ops::concat({a, x}, batched ? 1 : 0);
  auto flat = [&](const Tensor& t) {
    return ops::reshape(t, {batch, t.size(batched ? 1 : 0), n});
  };
  return {flat(ops::conv2d(cat, w.query, 1, 0)), flat(ops::conv2d(cat, w.key, 1, 0)),
          flat(ops::conv2d(cat, w.value, 1, 0)), batched, a.shape()};
}

Tensor attention_from(const Projected& p) {
  // scores[j][i] = g_j . f_i
  return ops::softmax_rows(ops::matmul(ops::transpose(p.g), p.f));
}

}  // namespace

int csam_reduced_channels(int channels) { return std::max(1, channels / 8); }

Tensor csam_attention(const Tensor& a, const Tensor& x, const CsamWeights& w) {
  Projected p = project(a, x, w);
  Tensor b = attention_from(p);
  if (!p.batched) b = ops::reshape(b, {b.size(1), b.size(2)});
  return b;
}

Tensor csam_forward(const Tensor& a, const Tensor& x, const CsamWeights& w) {
  Projected p = project(a, x, w);
  Tensor b = attention_from(p);
  // r[c][j] = sum_i h[c][i] * B[j][i]
  Tensor r = ops::reshape(ops::matmul(p.h, ops::transpose(b)), p.feature_shape);
  return ops::add_scaled(a, w.gamma, r);
}

Csam::Csam(std::string csam_name, int channels, uint64_t seed) : name(std::move(csam_name)) {
  const int reduced = csam_reduced_channels(channels);
  query = Conv2dLayer(name + ".f", channels + 1, reduced, 1, 1, 0, derive_seed(seed, name + ".f"),
                      true, false);
  key = Conv2dLayer(name + ".g", channels + 1, reduced, 1, 1, 0, derive_seed(seed, name + ".g"),
                    true, false);
  value = Conv2dLayer(name + ".h", channels + 1, channels, 1, 1, 0,
                      derive_seed(seed, name + ".h"), true, false);
  gamma = Tensor::parameter({1}, {0.0});
}

CsamWeights Csam::weights(const ForwardContext& ctx) {
  return {query.effective_weight(ctx), key.effective_weight(ctx), value.effective_weight(ctx),
          gamma};
}

Tensor Csam::forward(const Tensor& a, const Tensor& x, const ForwardContext& ctx) {
  return csam_forward(a, x, weights(ctx));
}

Tensor Csam::attention(const Tensor& a, const Tensor& x, const ForwardContext& ctx) {
  return csam_attention(a, x, weights(ctx));
}

void Csam::collect(ParameterSet& set) {
  query.collect(set);
  key.collect(set);
  value.collect(set);
  set.parameters.push_back({name + ".gamma", gamma});
}

}  // namespace csagan
