#pragma once

#include <vector>

#include "csagan/core/tensor.hpp"

// Differentiable tensor operations. Image tensors are [C,H,W] or batched
// [B,C,H,W]; matrices are [M,N] or batched [B,M,N].
namespace csagan::ops {

// Elementwise, identical shapes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double value);
// 1 - a
Tensor one_minus(const Tensor& a);
// a * s where s holds a single element (e.g. a trainable gain).
Tensor mul_scalar_tensor(const Tensor& a, const Tensor& s);
// a + s * b, with s a single-element tensor.
Tensor add_scaled(const Tensor& a, const Tensor& s, const Tensor& b);

// Adds a per-channel bias [C] to [C,H,W] or [B,C,H,W].
Tensor bias_add(const Tensor& x, const Tensor& bias);
// Per-sample, per-channel normalization over H,W followed by a per-channel
// affine map gain * x_hat + shift (gain, shift: [C]).
Tensor instance_norm(const Tensor& x, const Tensor& gain, const Tensor& shift, double eps = 1e-5);

Tensor relu(const Tensor& x);
Tensor leaky_relu(const Tensor& x, double slope);
Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor abs(const Tensor& x);
Tensor log(const Tensor& x);
// log(max(x, floor)); zero gradient where clamped.
Tensor log_clamped(const Tensor& x, double floor);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
// Mean over all axes but the first: [B,...] -> [B].
Tensor mean_per_sample(const Tensor& x);

Tensor reshape(const Tensor& x, Shape shape);
Tensor concat(const std::vector<Tensor>& parts, int axis);

// Rejects kernel/input channel mismatch with DimensionError.
Tensor conv2d(const Tensor& input, const Tensor& kernel, int stride, int pad);
Tensor upsample_nearest(const Tensor& x, int factor);
Tensor avg_pool(const Tensor& x, int factor);

Tensor matmul(const Tensor& a, const Tensor& b);
// Swaps the last two axes.
Tensor transpose(const Tensor& x);
// Softmax along the last axis with row-max subtraction. Rejects NaN input.
Tensor softmax_rows(const Tensor& x);

// Raw GEMM used by conv2d and matmul: C = alpha*op(A)*op(B) + beta*C,
// row-major. Runs in single precision when the engine is in f32 mode.
void gemm(bool trans_a, bool trans_b, int64_t m, int64_t n, int64_t k,
          double alpha, const double* a, const double* b, double beta,
          double* c);

}  // namespace csagan::ops
