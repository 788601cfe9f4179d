#include "csagan/core/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

namespace csagan::ops {

namespace {

template <typename Fn>
void accumulate(const std::shared_ptr<TensorImpl>& parent, Fn&& fn) {
  if (parent->requires_grad) fn(parent->ensure_grad());
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " +
                         shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

void require_single(const Tensor& s, const char* op) {
  if (s.numel() != 1) {
    throw DimensionError(std::string(op) + ": expected a single-element tensor");
  }
}

// Views any [.., C, H, W] tensor as batch x C x H x W.
struct ImageDims {
  int64_t batch, channels, height, width;
  bool batched;
};

ImageDims image_dims(const Tensor& x, const char* op) {
  const Shape& s = x.shape();
  if (s.size() == 3) return {1, s[0], s[1], s[2], false};
  if (s.size() == 4) return {s[0], s[1], s[2], s[3], true};
  throw DimensionError(std::string(op) + ": expected [C,H,W] or [B,C,H,W], got " +
                       shape_str(s));
}

Shape image_shape(const ImageDims& d, int64_t c, int64_t h, int64_t w) {
  if (d.batched) return {d.batch, c, h, w};
  return {c, h, w};
}

template <typename Forward, typename Derivative>
Tensor unary(const Tensor& x, const char* name, Forward f, Derivative df) {
  auto in = x.data();
  std::vector<double> out(in.size());
  for (size_t i = 0; i < in.size(); ++i) out[i] = f(in[i]);
  return make_result(x.shape(), std::move(out), name, {x},
                     [df](TensorImpl& self) {
                       const auto& xin = self.parents[0]->data;
                       accumulate(self.parents[0], [&](std::vector<double>& g) {
                         for (size_t i = 0; i < g.size(); ++i) {
                           g[i] += self.grad[i] * df(xin[i], self.data[i]);
                         }
                       });
                     });
}

template <typename Scalar>
using RowMat =
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
void gemm_impl(bool trans_a, bool trans_b, int64_t m, int64_t n, int64_t k,
               Scalar alpha, const Scalar* a, const Scalar* b, Scalar beta,
               Scalar* c) {
  using Map = Eigen::Map<const RowMat<Scalar>>;
  Eigen::Map<RowMat<Scalar>> cm(c, m, n);
  Map am(a, trans_a ? k : m, trans_a ? m : k);
  Map bm(b, trans_b ? n : k, trans_b ? k : n);
  if (beta == Scalar(0)) {
    cm.setZero();
  } else if (beta != Scalar(1)) {
    cm *= beta;
  }
  if (!trans_a && !trans_b) {
    cm.noalias() += alpha * (am * bm);
  } else if (trans_a && !trans_b) {
    cm.noalias() += alpha * (am.transpose() * bm);
  } else if (!trans_a && trans_b) {
    cm.noalias() += alpha * (am * bm.transpose());
  } else {
    cm.noalias() += alpha * (am.transpose() * bm.transpose());
  }
}

void im2col(const double* x, int64_t channels, int64_t height, int64_t width,
            int k, int stride, int pad, int64_t out_h, int64_t out_w,
            double* cols) {
  const int64_t out_n = out_h * out_w;
  for (int64_t c = 0; c < channels; ++c) {
    const double* xc = x + c * height * width;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        double* row = cols + ((c * k + ky) * k + kx) * out_n;
        for (int64_t oy = 0; oy < out_h; ++oy) {
          const int64_t iy = oy * stride - pad + ky;
          double* dst = row + oy * out_w;
          if (iy < 0 || iy >= height) {
            std::fill(dst, dst + out_w, 0.0);
            continue;
          }
          const double* src = xc + iy * width;
          for (int64_t ox = 0; ox < out_w; ++ox) {
            const int64_t ix = ox * stride - pad + kx;
            dst[ox] = (ix >= 0 && ix < width) ? src[ix] : 0.0;
          }
        }
      }
    }
  }
}

void col2im_add(const double* cols, int64_t channels, int64_t height,
                int64_t width, int k, int stride, int pad, int64_t out_h,
                int64_t out_w, double* x) {
  const int64_t out_n = out_h * out_w;
  for (int64_t c = 0; c < channels; ++c) {
    double* xc = x + c * height * width;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const double* row = cols + ((c * k + ky) * k + kx) * out_n;
        for (int64_t oy = 0; oy < out_h; ++oy) {
          const int64_t iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= height) continue;
          double* dst = xc + iy * width;
          const double* src = row + oy * out_w;
          for (int64_t ox = 0; ox < out_w; ++ox) {
            const int64_t ix = ox * stride - pad + kx;
            if (ix >= 0 && ix < width) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

}  // namespace

void gemm(bool trans_a, bool trans_b, int64_t m, int64_t n, int64_t k,
          double alpha, const double* a, const double* b, double beta,
          double* c) {
  if (m == 0 || n == 0) return;
  if (precision() == Precision::kF64) {
    gemm_impl<double>(trans_a, trans_b, m, n, k, alpha, a, b, beta, c);
    return;
  }
  std::vector<float> af(a, a + m * k), bf(b, b + k * n), cf(c, c + m * n);
  gemm_impl<float>(trans_a, trans_b, m, n, k, static_cast<float>(alpha),
                   af.data(), bf.data(), static_cast<float>(beta), cf.data());
  std::copy(cf.begin(), cf.end(), c);
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  auto x = a.data(), y = b.data();
  std::vector<double> out(x.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = x[i] + y[i];
  return make_result(a.shape(), std::move(out), "add", {a, b},
                     [](TensorImpl& self) {
                       for (int p = 0; p < 2; ++p) {
                         accumulate(self.parents[p], [&](std::vector<double>& g) {
                           for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
                         });
                       }
                     });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  auto x = a.data(), y = b.data();
  std::vector<double> out(x.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = x[i] - y[i];
  return make_result(a.shape(), std::move(out), "sub", {a, b},
                     [](TensorImpl& self) {
                       accumulate(self.parents[0], [&](std::vector<double>& g) {
                         for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
                       });
                       accumulate(self.parents[1], [&](std::vector<double>& g) {
                         for (size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
                       });
                     });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  auto x = a.data(), y = b.data();
  std::vector<double> out(x.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
  return make_result(a.shape(), std::move(out), "mul", {a, b},
                     [](TensorImpl& self) {
                       const auto& xa = self.parents[0]->data;
                       const auto& xb = self.parents[1]->data;
                       accumulate(self.parents[0], [&](std::vector<double>& g) {
                         for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * xb[i];
                       });
                       accumulate(self.parents[1], [&](std::vector<double>& g) {
                         for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * xa[i];
                       });
                     });
}

Tensor scale(const Tensor& a, double factor) {
  return unary(
      a, "scale", [factor](double v) { return v * factor; },
      [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& a, double value) {
  return unary(
      a, "add_scalar", [value](double v) { return v + value; },
      [](double, double) { return 1.0; });
}

Tensor one_minus(const Tensor& a) {
  return unary(
      a, "one_minus", [](double v) { return 1.0 - v; },
      [](double, double) { return -1.0; });
}

Tensor mul_scalar_tensor(const Tensor& a, const Tensor& s) {
  require_single(s, "mul_scalar_tensor");
  const double gain = s.item();
  auto x = a.data();
  std::vector<double> out(x.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = x[i] * gain;
  return make_result(a.shape(), std::move(out), "mul_scalar_tensor", {a, s},
                     [](TensorImpl& self) {
                       const auto& xa = self.parents[0]->data;
                       const double gain = self.parents[1]->data[0];
                       accumulate(self.parents[0], [&](std::vector<double>& g) {
                         for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * gain;
                       });
                       accumulate(self.parents[1], [&](std::vector<double>& g) {
                         double total = 0.0;
                         for (size_t i = 0; i < xa.size(); ++i) total += self.grad[i] * xa[i];
                         g[0] += total;
                       });
                     });
}

Tensor add_scaled(const Tensor& a, const Tensor& s, const Tensor& b) {
  require_same_shape(a, b, "add_scaled");
  require_single(s, "add_scaled");
  const double gain = s.item();
  auto x = a.data(), y = b.data();
  std::vector<double> out(x.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = gain * y[i] + x[i];
  return make_result(a.shape(), std::move(out), "add_scaled", {a, s, b},
                     [](TensorImpl& self) {
                       const double gain = self.parents[1]->data[0];
                       const auto& yb = self.parents[2]->data;
                       accumulate(self.parents[0], [&](std::vector<double>& g) {
                         for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
                       });
                       accumulate(self.parents[1], [&](std::vector<double>& g) {
                         double total = 0.0;
                         for (size_t i = 0; i < yb.size(); ++i) total += self.grad[i] * yb[i];
                         g[0] += total;
                       });
                       accumulate(self.parents[2], [&](std::vector<double>& g) {
                         for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * gain;
                       });
                     });
}

Tensor bias_add(const Tensor& x, const Tensor& bias) {
  const ImageDims d = image_dims(x, "bias_add");
  if (bias.dim() != 1 || bias.size(0) != d.channels) {
    throw DimensionError("bias_add: bias " + shape_str(bias.shape()) +
                         " does not match channels of " + shape_str(x.shape()));
  }
  const int64_t plane = d.height * d.width;
  auto in = x.data();
  auto b = bias.data();
  std::vector<double> out(in.begin(), in.end());
  for (int64_t n = 0; n < d.batch; ++n)
    for (int64_t c = 0; c < d.channels; ++c) {
      double* dst = out.data() + (n * d.channels + c) * plane;
      for (int64_t i = 0; i < plane; ++i) dst[i] += b[static_cast<size_t>(c)];
    }
  return make_result(x.shape(), std::move(out), "bias_add", {x, bias},
                     [d, plane](TensorImpl& self) {
                       accumulate(self.parents[0], [&](std::vector<double>& g) {
                         for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
                       });
                       accumulate(self.parents[1], [&](std::vector<double>& g) {
                         for (int64_t n = 0; n < d.batch; ++n)
                           for (int64_t c = 0; c < d.channels; ++c) {
                             const double* src =
                                 self.grad.data() + (n * d.channels + c) * plane;
                             double total = 0.0;
                             for (int64_t i = 0; i < plane; ++i) total += src[i];
                             g[static_cast<size_t>(c)] += total;
                           }
                       });
                     });
}

Tensor instance_norm(const Tensor& x, const Tensor& gain, const Tensor& shift, double eps) {
  const ImageDims d = image_dims(x, "instance_norm");
  for (const Tensor* p : {&gain, &shift}) {
    if (p->dim() != 1 || p->size(0) != d.channels) {
      throw DimensionError("instance_norm: affine " + shape_str(p->shape()) +
                           " does not match channels of " + shape_str(x.shape()));
    }
  }
  const int64_t plane = d.height * d.width;
  const int64_t planes = d.batch * d.channels;
  auto in = x.data();
  auto gv = gain.data();
  auto bv = shift.data();
  // x_hat and 1/sigma are kept for the backward pass.
  auto x_hat = std::make_shared<std::vector<double>>(in.size());
  auto inv_std = std::make_shared<std::vector<double>>(static_cast<size_t>(planes));
  std::vector<double> out(in.size());
  for (int64_t p = 0; p < planes; ++p) {
    const double* src = in.data() + p * plane;
    double mu = 0.0;
    for (int64_t i = 0; i < plane; ++i) mu += src[i];
    mu /= static_cast<double>(plane);
    double var = 0.0;
    for (int64_t i = 0; i < plane; ++i) var += (src[i] - mu) * (src[i] - mu);
    var /= static_cast<double>(plane);
    const double r = 1.0 / std::sqrt(var + eps);
    (*inv_std)[static_cast<size_t>(p)] = r;
    const auto c = static_cast<size_t>(p % d.channels);
    for (int64_t i = 0; i < plane; ++i) {
      const double h = (src[i] - mu) * r;
      (*x_hat)[static_cast<size_t>(p * plane + i)] = h;
      out[static_cast<size_t>(p * plane + i)] = gv[c] * h + bv[c];
    }
  }
  return make_result(
      x.shape(), std::move(out), "instance_norm", {x, gain, shift},
      [d, plane, planes, x_hat, inv_std](TensorImpl& self) {
        const auto& gw = self.parents[1]->data;
        accumulate(self.parents[0], [&](std::vector<double>& g) {
          for (int64_t p = 0; p < planes; ++p) {
            const double* dy = self.grad.data() + p * plane;
            const double* h = x_hat->data() + p * plane;
            double m_dy = 0.0, m_dyh = 0.0;
            for (int64_t i = 0; i < plane; ++i) {
              m_dy += dy[i];
              m_dyh += dy[i] * h[i];
            }
            m_dy /= static_cast<double>(plane);
            m_dyh /= static_cast<double>(plane);
            const double k =
                gw[static_cast<size_t>(p % d.channels)] * (*inv_std)[static_cast<size_t>(p)];
            for (int64_t i = 0; i < plane; ++i) {
              g[static_cast<size_t>(p * plane + i)] += k * (dy[i] - m_dy - h[i] * m_dyh);
            }
          }
        });
        accumulate(self.parents[1], [&](std::vector<double>& g) {
          for (int64_t p = 0; p < planes; ++p) {
            double total = 0.0;
            for (int64_t i = 0; i < plane; ++i) {
              total += self.grad[static_cast<size_t>(p * plane + i)] *
                       (*x_hat)[static_cast<size_t>(p * plane + i)];
            }
            g[static_cast<size_t>(p % d.channels)] += total;
          }
        });
        accumulate(self.parents[2], [&](std::vector<double>& g) {
          for (int64_t p = 0; p < planes; ++p) {
            double total = 0.0;
            for (int64_t i = 0; i < plane; ++i) total += self.grad[static_cast<size_t>(p * plane + i)];
            g[static_cast<size_t>(p % d.channels)] += total;
          }
        });
      });
}

Tensor relu(const Tensor& x) {
  return unary(
      x, "relu", [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor leaky_relu(const Tensor& x, double slope) {
  return unary(
      x, "leaky_relu", [slope](double v) { return v > 0.0 ? v : slope * v; },
      [slope](double v, double) { return v > 0.0 ? 1.0 : slope; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      x, "sigmoid",
      [](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& x) {
  return unary(
      x, "tanh", [](double v) { return std::tanh(v); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor abs(const Tensor& x) {
  return unary(
      x, "abs", [](double v) { return std::fabs(v); },
      [](double v, double) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

Tensor log(const Tensor& x) {
  return unary(
      x, "log", [](double v) { return std::log(v); },
      [](double v, double) { return 1.0 / v; });
}

Tensor log_clamped(const Tensor& x, double floor) {
  return unary(
      x, "log_clamped", [floor](double v) { return std::log(std::max(v, floor)); },
      [floor](double v, double) { return v > floor ? 1.0 / v : 0.0; });
}

Tensor sum(const Tensor& x) {
  double total = 0.0;
  for (double v : x.data()) total += v;
  return make_result({1}, {total}, "sum", {x}, [](TensorImpl& self) {
    accumulate(self.parents[0], [&](std::vector<double>& g) {
      for (double& v : g) v += self.grad[0];
    });
  });
}

Tensor mean(const Tensor& x) {
  const double n = static_cast<double>(x.numel());
  if (x.numel() == 0) throw DimensionError("mean of empty tensor");
  double total = 0.0;
  for (double v : x.data()) total += v;
  return make_result({1}, {total / n}, "mean", {x}, [n](TensorImpl& self) {
    accumulate(self.parents[0], [&](std::vector<double>& g) {
      const double share = self.grad[0] / n;
      for (double& v : g) v += share;
    });
  });
}

Tensor mean_per_sample(const Tensor& x) {
  if (x.dim() < 2) throw DimensionError("mean_per_sample needs rank >= 2");
  const int64_t batch = x.size(0);
  const int64_t inner = x.numel() / batch;
  auto in = x.data();
  std::vector<double> out(static_cast<size_t>(batch));
  for (int64_t b = 0; b < batch; ++b) {
    double total = 0.0;
    for (int64_t i = 0; i < inner; ++i) total += in[static_cast<size_t>(b * inner + i)];
    out[static_cast<size_t>(b)] = total / static_cast<double>(inner);
  }
  return make_result({batch}, std::move(out), "mean_per_sample", {x},
                     [batch, inner](TensorImpl& self) {
                       accumulate(self.parents[0], [&](std::vector<double>& g) {
                         for (int64_t b = 0; b < batch; ++b) {
                           const double share =
                               self.grad[static_cast<size_t>(b)] / static_cast<double>(inner);
                           for (int64_t i = 0; i < inner; ++i)
                             g[static_cast<size_t>(b * inner + i)] += share;
                         }
                       });
                     });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw DimensionError("reshape: cannot view " + shape_str(x.shape()) +
                         " as " + shape_str(shape));
  }
  auto in = x.data();
  return make_result(std::move(shape), std::vector<double>(in.begin(), in.end()),
                     "reshape", {x}, [](TensorImpl& self) {
                       accumulate(self.parents[0], [&](std::vector<double>& g) {
                         for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
                       });
                     });
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
  if (parts.empty()) throw DimensionError("concat of zero tensors");
  const Shape& first = parts[0].shape();
  const int rank = static_cast<int>(first.size());
  if (axis < 0) axis += rank;
  if (axis < 0 || axis >= rank) throw DimensionError("concat: axis out of range");
  Shape out_shape = first;
  out_shape[static_cast<size_t>(axis)] = 0;
  for (const Tensor& p : parts) {
    const Shape& s = p.shape();
    if (static_cast<int>(s.size()) != rank) throw DimensionError("concat: rank mismatch");
    for (int d = 0; d < rank; ++d) {
      if (d != axis && s[static_cast<size_t>(d)] != first[static_cast<size_t>(d)]) {
        throw DimensionError("concat: extent mismatch " + shape_str(s) + " vs " +
                             shape_str(first));
      }
    }
    out_shape[static_cast<size_t>(axis)] += s[static_cast<size_t>(axis)];
  }
  int64_t outer = 1, inner = 1;
  for (int d = 0; d < axis; ++d) outer *= first[static_cast<size_t>(d)];
  for (int d = axis + 1; d < rank; ++d) inner *= first[static_cast<size_t>(d)];
  const int64_t out_chunk = out_shape[static_cast<size_t>(axis)] * inner;

  std::vector<int64_t> chunks, offsets;
  int64_t offset = 0;
  for (const Tensor& p : parts) {
    const int64_t chunk = p.size(axis) * inner;
    chunks.push_back(chunk);
    offsets.push_back(offset);
    offset += chunk;
  }
  std::vector<double> out(static_cast<size_t>(shape_numel(out_shape)));
  for (size_t p = 0; p < parts.size(); ++p) {
    auto src = parts[p].data();
    for (int64_t o = 0; o < outer; ++o) {
      std::copy_n(src.data() + o * chunks[p], chunks[p],
                  out.data() + o * out_chunk + offsets[p]);
    }
  }
  return make_result(std::move(out_shape), std::move(out), "concat", parts,
                     [chunks, offsets, outer, out_chunk](TensorImpl& self) {
                       for (size_t p = 0; p < chunks.size(); ++p) {
                         accumulate(self.parents[p], [&](std::vector<double>& g) {
                           for (int64_t o = 0; o < outer; ++o) {
                             const double* src =
                                 self.grad.data() + o * out_chunk + offsets[p];
                             double* dst = g.data() + o * chunks[p];
                             for (int64_t i = 0; i < chunks[p]; ++i) dst[i] += src[i];
                           }
                         });
                       }
                     });
}

Tensor conv2d(const Tensor& input, const Tensor& kernel, int stride, int pad) {
  const ImageDims d = image_dims(input, "conv2d");
  if (kernel.dim() != 4) {
    throw DimensionError("conv2d: kernel must be [C_out,C_in,k,k], got " +
                         shape_str(kernel.shape()));
  }
  const int64_t c_out = kernel.size(0);
  const int64_t c_in = kernel.size(1);
  const int k = static_cast<int>(kernel.size(2));
  if (kernel.size(3) != k) throw DimensionError("conv2d: kernel must be square");
  if (c_in != d.channels) {
    throw DimensionError("conv2d: input has " + std::to_string(d.channels) +
                         " channels but kernel expects " + std::to_string(c_in));
  }
  if (k < 1 || stride < 1 || pad < 0) {
    throw std::invalid_argument("conv2d: need k >= 1, stride >= 1, pad >= 0");
  }
  if (d.height + 2 * pad < k || d.width + 2 * pad < k) {
    throw DimensionError("conv2d: padded input smaller than kernel");
  }
  const int64_t out_h = (d.height + 2 * pad - k) / stride + 1;
  const int64_t out_w = (d.width + 2 * pad - k) / stride + 1;
  const int64_t out_n = out_h * out_w;
  const int64_t in_plane = d.channels * d.height * d.width;
  const int64_t patch = c_in * k * k;
  const bool pointwise = (k == 1 && stride == 1 && pad == 0);

  auto x = input.data();
  auto w = kernel.data();
  std::vector<double> out(static_cast<size_t>(d.batch * c_out * out_n));
  std::vector<double> cols(pointwise ? 0 : static_cast<size_t>(patch * out_n));
  for (int64_t b = 0; b < d.batch; ++b) {
    const double* xb = x.data() + b * in_plane;
    const double* cb = xb;
    if (!pointwise) {
      im2col(xb, d.channels, d.height, d.width, k, stride, pad, out_h, out_w,
             cols.data());
      cb = cols.data();
    }
    gemm(false, false, c_out, out_n, patch, 1.0, w.data(), cb, 0.0,
         out.data() + b * c_out * out_n);
  }

  return make_result(
      image_shape(d, c_out, out_h, out_w), std::move(out), "conv2d",
      {input, kernel},
      [=](TensorImpl& self) {
        const auto& xin = self.parents[0]->data;
        const auto& win = self.parents[1]->data;
        const bool need_x = self.parents[0]->requires_grad;
        const bool need_w = self.parents[1]->requires_grad;
        std::vector<double> col_buf(pointwise ? 0 : static_cast<size_t>(patch * out_n));
        std::vector<double> gcol(need_x && !pointwise ? static_cast<size_t>(patch * out_n) : 0);
        double* gw = need_w ? self.parents[1]->ensure_grad().data() : nullptr;
        double* gx = need_x ? self.parents[0]->ensure_grad().data() : nullptr;
        for (int64_t b = 0; b < d.batch; ++b) {
          const double* gout = self.grad.data() + b * c_out * out_n;
          const double* xb = xin.data() + b * in_plane;
          if (need_w) {
            const double* cb = xb;
            if (!pointwise) {
              im2col(xb, d.channels, d.height, d.width, k, stride, pad, out_h,
                     out_w, col_buf.data());
              cb = col_buf.data();
            }
            gemm(false, true, c_out, patch, out_n, 1.0, gout, cb, 1.0, gw);
          }
          if (need_x) {
            if (pointwise) {
              gemm(true, false, patch, out_n, c_out, 1.0, win.data(), gout, 1.0,
                   gx + b * in_plane);
            } else {
              gemm(true, false, patch, out_n, c_out, 1.0, win.data(), gout, 0.0,
                   gcol.data());
              col2im_add(gcol.data(), d.channels, d.height, d.width, k, stride,
                         pad, out_h, out_w, gx + b * in_plane);
            }
          }
        }
      });
}

Tensor upsample_nearest(const Tensor& x, int factor) {
  const ImageDims d = image_dims(x, "upsample_nearest");
  if (factor < 1) throw std::invalid_argument("upsample factor must be >= 1");
  const int64_t oh = d.height * factor, ow = d.width * factor;
  const int64_t planes = d.batch * d.channels;
  auto in = x.data();
  std::vector<double> out(static_cast<size_t>(planes * oh * ow));
  for (int64_t p = 0; p < planes; ++p) {
    const double* src = in.data() + p * d.height * d.width;
    double* dst = out.data() + p * oh * ow;
    for (int64_t y = 0; y < oh; ++y)
      for (int64_t xx = 0; xx < ow; ++xx)
        dst[y * ow + xx] = src[(y / factor) * d.width + xx / factor];
  }
  return make_result(image_shape(d, d.channels, oh, ow), std::move(out),
                     "upsample_nearest", {x}, [=](TensorImpl& self) {
                       accumulate(self.parents[0], [&](std::vector<double>& g) {
                         for (int64_t p = 0; p < planes; ++p) {
                           const double* src = self.grad.data() + p * oh * ow;
                           double* dst = g.data() + p * d.height * d.width;
                           for (int64_t y = 0; y < oh; ++y)
                             for (int64_t xx = 0; xx < ow; ++xx)
                               dst[(y / factor) * d.width + xx / factor] +=
                                   src[y * ow + xx];
                         }
                       });
                     });
}

Tensor avg_pool(const Tensor& x, int factor) {
  const ImageDims d = image_dims(x, "avg_pool");
  if (factor < 1 || d.height % factor != 0 || d.width % factor != 0) {
    throw DimensionError("avg_pool: factor " + std::to_string(factor) +
                         " does not divide " + shape_str(x.shape()));
  }
  const int64_t oh = d.height / factor, ow = d.width / factor;
  const int64_t planes = d.batch * d.channels;
  const double inv = 1.0 / static_cast<double>(factor * factor);
  auto in = x.data();
  std::vector<double> out(static_cast<size_t>(planes * oh * ow), 0.0);
  for (int64_t p = 0; p < planes; ++p) {
    const double* src = in.data() + p * d.height * d.width;
    double* dst = out.data() + p * oh * ow;
    for (int64_t y = 0; y < d.height; ++y)
      for (int64_t xx = 0; xx < d.width; ++xx)
        dst[(y / factor) * ow + xx / factor] += src[y * d.width + xx];
    for (int64_t i = 0; i < oh * ow; ++i) dst[i] *= inv;
  }
  return make_result(image_shape(d, d.channels, oh, ow), std::move(out),
                     "avg_pool", {x}, [=](TensorImpl& self) {
                       accumulate(self.parents[0], [&](std::vector<double>& g) {
                         for (int64_t p = 0; p < planes; ++p) {
                           const double* src = self.grad.data() + p * oh * ow;
                           double* dst = g.data() + p * d.height * d.width;
                           for (int64_t y = 0; y < d.height; ++y)
                             for (int64_t xx = 0; xx < d.width; ++xx)
                               dst[y * d.width + xx] +=
                                   src[(y / factor) * ow + xx / factor] * inv;
                         }
                       });
                     });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  const bool batched = a.dim() == 3;
  if (!((a.dim() == 2 && b.dim() == 2) || (a.dim() == 3 && b.dim() == 3))) {
    throw DimensionError("matmul: expected two matrices or two batches, got " +
                         shape_str(a.shape()) + " and " + shape_str(b.shape()));
  }
  const int64_t batch = batched ? a.size(0) : 1;
  const int64_t m = a.size(-2), k = a.size(-1), n = b.size(-1);
  if (b.size(-2) != k || (batched && b.size(0) != batch)) {
    throw DimensionError("matmul: inner extents differ: " + shape_str(a.shape()) +
                         " x " + shape_str(b.shape()));
  }
  auto x = a.data(), y = b.data();
  std::vector<double> out(static_cast<size_t>(batch * m * n));
  for (int64_t i = 0; i < batch; ++i) {
    gemm(false, false, m, n, k, 1.0, x.data() + i * m * k, y.data() + i * k * n,
         0.0, out.data() + i * m * n);
  }
  Shape shape = batched ? Shape{batch, m, n} : Shape{m, n};
  return make_result(std::move(shape), std::move(out), "matmul", {a, b},
                     [=](TensorImpl& self) {
                       const auto& xa = self.parents[0]->data;
                       const auto& xb = self.parents[1]->data;
                       accumulate(self.parents[0], [&](std::vector<double>& g) {
                         for (int64_t i = 0; i < batch; ++i)
                           gemm(false, true, m, k, n, 1.0,
                                self.grad.data() + i * m * n, xb.data() + i * k * n,
                                1.0, g.data() + i * m * k);
                       });
                       accumulate(self.parents[1], [&](std::vector<double>& g) {
                         for (int64_t i = 0; i < batch; ++i)
                           gemm(true, false, k, n, m, 1.0, xa.data() + i * m * k,
                                self.grad.data() + i * m * n, 1.0,
                                g.data() + i * k * n);
                       });
                     });
}

Tensor transpose(const Tensor& x) {
  if (x.dim() < 2) throw DimensionError("transpose needs rank >= 2");
  const int64_t rows = x.size(-2), cols = x.size(-1);
  const int64_t batch = x.numel() / (rows * cols);
  Shape shape = x.shape();
  std::swap(shape[shape.size() - 1], shape[shape.size() - 2]);
  auto in = x.data();
  std::vector<double> out(in.size());
  for (int64_t b = 0; b < batch; ++b)
    for (int64_t r = 0; r < rows; ++r)
      for (int64_t c = 0; c < cols; ++c)
        out[static_cast<size_t>(b * rows * cols + c * rows + r)] =
            in[static_cast<size_t>(b * rows * cols + r * cols + c)];
  return make_result(std::move(shape), std::move(out), "transpose", {x},
                     [=](TensorImpl& self) {
                       accumulate(self.parents[0], [&](std::vector<double>& g) {
                         for (int64_t b = 0; b < batch; ++b)
                           for (int64_t r = 0; r < rows; ++r)
                             for (int64_t c = 0; c < cols; ++c)
                               g[static_cast<size_t>(b * rows * cols + r * cols + c)] +=
                                   self.grad[static_cast<size_t>(b * rows * cols + c * rows + r)];
                       });
                     });
}

Tensor softmax_rows(const Tensor& x) {
  if (x.dim() < 1) throw DimensionError("softmax_rows needs rank >= 1");
  const int64_t cols = x.size(-1);
  const int64_t rows = cols == 0 ? 0 : x.numel() / cols;
  auto in = x.data();
  for (double v : in) {
    if (std::isnan(v)) throw NumericError("softmax_rows: NaN input");
  }
  std::vector<double> out(in.size());
  for (int64_t r = 0; r < rows; ++r) {
    const double* src = in.data() + r * cols;
    double* dst = out.data() + r * cols;
    const double peak = *std::max_element(src, src + cols);
    double total = 0.0;
    for (int64_t c = 0; c < cols; ++c) {
      dst[c] = std::exp(src[c] - peak);
      total += dst[c];
    }
    for (int64_t c = 0; c < cols; ++c) dst[c] /= total;
  }
  return make_result(x.shape(), std::move(out), "softmax_rows", {x},
                     [=](TensorImpl& self) {
                       accumulate(self.parents[0], [&](std::vector<double>& g) {
                         for (int64_t r = 0; r < rows; ++r) {
                           const double* y = self.data.data() + r * cols;
                           const double* gy = self.grad.data() + r * cols;
                           double dot = 0.0;
                           for (int64_t c = 0; c < cols; ++c) dot += gy[c] * y[c];
                           double* gx = g.data() + r * cols;
                           for (int64_t c = 0; c < cols; ++c) gx[c] += y[c] * (gy[c] - dot);
                         }
                       });
                     });
}

}  // namespace csagan::ops
