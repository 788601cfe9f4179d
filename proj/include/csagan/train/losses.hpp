#pragma once

#include <vector>

#include "csagan/core/tensor.hpp"

namespace csagan {

constexpr double kLogFloor = 1e-7;

struct LossWeights {
  double lambda = 100.0;  // L1
  double mu = 1.0;        // feature matching

  bool operator==(const LossWeights&) const = default;
};

// Minimax value (1/N_D) sum_i [log D_i(real) + log(1 - D_i(fake))] on
// per-subnetwork scalars. Scores must lie in [0, 1].
double adversarial_value(const std::vector<double>& real, const std::vector<double>& fake);

// Same value on batched score tensors ([B] per subnetwork), averaged over
// the batch; differentiable. The discriminator minimizes its negation.
// Scores outside [0, 1] throw std::invalid_argument, NaN throws NumericError.
Tensor adversarial_loss(const std::vector<Tensor>& real, const std::vector<Tensor>& fake);

// Non-saturating generator surrogate: (1/N_D) sum_i -log D_i(fake).
Tensor generator_adversarial_loss(const std::vector<Tensor>& fake);

// Mean absolute difference.
Tensor l1_loss(const Tensor& y, const Tensor& y_hat);

// (1/(N_D N_Q)) sum_i sum_q mean |fake_iq - real_iq|.
Tensor feature_matching_loss(const std::vector<std::vector<Tensor>>& taps_fake,
                             const std::vector<std::vector<Tensor>>& taps_real);

// adv + lambda * l1 + mu * fm; non-finite components throw NumericError.
double total_objective(double adv, double l1, double fm, const LossWeights& w = {});
Tensor total_objective(const Tensor& adv, const Tensor& l1, const Tensor& fm,
                       const LossWeights& w = {});

}  // namespace csagan
