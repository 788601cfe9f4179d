#include "csagan/core/spectral.hpp"

#include <cmath>

namespace csagan {

namespace {

void matrix_dims(const Tensor& w, int64_t& rows, int64_t& cols) {
  if (w.dim() < 1 || w.numel() == 0) {
    throw DimensionError("spectral norm of an empty weight");
  }
  rows = w.size(0);
  cols = w.numel() / rows;
}

// out = W^T u
void mat_t_vec(std::span<const double> w, int64_t rows, int64_t cols,
               const std::vector<double>& u, std::vector<double>& out) {
  out.assign(static_cast<size_t>(cols), 0.0);
  for (int64_t r = 0; r < rows; ++r) {
    const double ur = u[static_cast<size_t>(r)];
    const double* row = w.data() + r * cols;
    for (int64_t c = 0; c < cols; ++c) out[static_cast<size_t>(c)] += row[c] * ur;
  }
}

// out = W v
void mat_vec(std::span<const double> w, int64_t rows, int64_t cols,
             const std::vector<double>& v, std::vector<double>& out) {
  out.assign(static_cast<size_t>(rows), 0.0);
  for (int64_t r = 0; r < rows; ++r) {
    const double* row = w.data() + r * cols;
    double acc = 0.0;
    for (int64_t c = 0; c < cols; ++c) acc += row[c] * v[static_cast<size_t>(c)];
    out[static_cast<size_t>(r)] = acc;
  }
}

double norm(const std::vector<double>& x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s);
}

// Right vector for the current u; false when W^T u vanishes.
bool right_vector(std::span<const double> w, int64_t rows, int64_t cols,
                  const std::vector<double>& u, std::vector<double>& v) {
  mat_t_vec(w, rows, cols, u, v);
  const double n = norm(v);
  if (n < kSpectralSigmaFloor) return false;
  for (double& x : v) x /= n;
  return true;
}

}  // namespace

SpectralState init_spectral_state(const Tensor& weight, std::mt19937_64& rng,
                                  int warmup) {
  int64_t rows = 0, cols = 0;
  matrix_dims(weight, rows, cols);
  std::normal_distribution<double> normal(0.0, 1.0);
  SpectralState state;
  state.u.resize(static_cast<size_t>(rows));
  double n = 0.0;
  do {
    for (double& x : state.u) x = normal(rng);
    n = norm(state.u);
  } while (n == 0.0);
  for (double& x : state.u) x /= n;
  if (warmup > 0) power_iterate(weight.data(), rows, cols, state, warmup);
  return state;
}

void power_iterate(std::span<const double> w, int64_t rows, int64_t cols,
                   SpectralState& state, int iterations) {
  if (static_cast<int64_t>(state.u.size()) != rows) {
    throw DimensionError("power_iterate: u has wrong length");
  }
  std::vector<double> v, u_next;
  for (int it = 0; it < iterations; ++it) {
    if (!right_vector(w, rows, cols, state.u, v)) return;
    mat_vec(w, rows, cols, v, u_next);
    const double n = norm(u_next);
    if (n < kSpectralSigmaFloor) return;
    for (double& x : u_next) x /= n;
    state.u.swap(u_next);
  }
}

double spectral_sigma(std::span<const double> w, int64_t rows, int64_t cols,
                      const std::vector<double>& u) {
  std::vector<double> v, wv;
  if (!right_vector(w, rows, cols, u, v)) return kSpectralSigmaFloor;
  mat_vec(w, rows, cols, v, wv);
  double sigma = 0.0;
  for (int64_t r = 0; r < rows; ++r) sigma += u[static_cast<size_t>(r)] * wv[static_cast<size_t>(r)];
  return std::max(sigma, kSpectralSigmaFloor);
}

SpectralResult spectral_normalize(const Tensor& weight, const SpectralState& state,
                                  int iterations) {
  int64_t rows = 0, cols = 0;
  matrix_dims(weight, rows, cols);
  SpectralState next = state;
  power_iterate(weight.data(), rows, cols, next, iterations);

  auto w = weight.data();
  std::vector<double> v;
  double sigma = kSpectralSigmaFloor;
  const bool live = right_vector(w, rows, cols, next.u, v);
  if (live) sigma = spectral_sigma(w, rows, cols, next.u);
  if (!live) v.assign(static_cast<size_t>(cols), 0.0);

  std::vector<double> out(w.begin(), w.end());
  for (double& x : out) x /= sigma;
  const std::vector<double> u = next.u;
  const bool clamped = sigma <= kSpectralSigmaFloor;
  Tensor normalized = make_result(
      weight.shape(), std::move(out), "spectral_normalize", {weight},
      [u, v, sigma, rows, cols, clamped](TensorImpl& self) {
        const auto& win = self.parents[0]->data;
        auto& g = self.parents[0]->ensure_grad();
        double inner = 0.0;
        for (size_t i = 0; i < g.size(); ++i) inner += self.grad[i] * win[i];
        const double coupling = clamped ? 0.0 : inner / (sigma * sigma);
        for (int64_t r = 0; r < rows; ++r)
          for (int64_t c = 0; c < cols; ++c) {
            const size_t i = static_cast<size_t>(r * cols + c);
            g[i] += self.grad[i] / sigma -
                    coupling * u[static_cast<size_t>(r)] * v[static_cast<size_t>(c)];
          }
      });
  return {std::move(normalized), std::move(next), sigma};
}

}  // namespace csagan
