#pragma once

#include <cstdint>

#include "csagan/core/tensor.hpp"
#include "csagan/model/layers.hpp"

namespace csagan {

// Weights of the conditional self-attention block as used in one pass.
// Projections act on the C+1 channels of [features, condition].
struct CsamWeights {
  Tensor query;  // W_f: [C_hat, C+1, 1, 1]
  Tensor key;    // W_g: [C_hat, C+1, 1, 1]
  Tensor value;  // W_h: [C, C+1, 1, 1]
  Tensor gamma;  // [1]
};

int csam_reduced_channels(int channels);

// B[j][i] = softmax over i of f_i . g_j, for features a [C,H,W] or
// [B,C,H,W] and condition x of matching spatial extent with one channel.
// Returns [N,N] (or [B,N,N]) with N = H*W; rows index the synthesized
// position j and are stochastic.
Tensor csam_attention(const Tensor& a, const Tensor& x, const CsamWeights& w);

// o = gamma * r + a with r_j = sum_i B[j][i] h_i.
Tensor csam_forward(const Tensor& a, const Tensor& x, const CsamWeights& w);

// Owns the trainable tensors; projections are spectrally normalized 1x1
// convolutions without bias and gamma starts at exactly zero.
class Csam {
 public:
  Csam() = default;
  Csam(std::string name, int channels, uint64_t seed);

  Tensor forward(const Tensor& a, const Tensor& x, const ForwardContext& ctx);
  Tensor attention(const Tensor& a, const Tensor& x, const ForwardContext& ctx);
  void collect(ParameterSet& set);

  Conv2dLayer query, key, value;
  Tensor gamma;
  std::string name;

 private:
  CsamWeights weights(const ForwardContext& ctx);
};

}  // namespace csagan
