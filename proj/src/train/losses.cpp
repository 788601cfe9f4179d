#include "csagan/train/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "csagan/core/ops.hpp"

namespace csagan {

namespace {

void check_score(double s) {
  if (std::isnan(s)) throw NumericError("adversarial loss: NaN score");
  if (!(s >= 0.0 && s <= 1.0)) {
    throw std::invalid_argument("adversarial loss: score " + std::to_string(s) +
                                " outside [0, 1]");
  }
}

void check_scores(const std::vector<Tensor>& scores) {
  for (const auto& t : scores)
    for (double s : t.data()) check_score(s);
}

void check_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw NumericError(std::string("total objective: non-finite ") + what);
}

}  // namespace

double adversarial_value(const std::vector<double>& real, const std::vector<double>& fake) {
  if (real.empty() || real.size() != fake.size()) {
    throw std::invalid_argument("adversarial loss: need one real and one fake score per subnetwork");
  }
  double acc = 0.0;
  for (size_t i = 0; i < real.size(); ++i) {
    check_score(real[i]);
    check_score(fake[i]);
    acc += std::log(std::max(real[i], kLogFloor)) + std::log(std::max(1.0 - fake[i], kLogFloor));
  }
  return acc / static_cast<double>(real.size());
}

Tensor adversarial_loss(const std::vector<Tensor>& real, const std::vector<Tensor>& fake) {
  if (real.empty() || real.size() != fake.size()) {
    throw std::invalid_argument("adversarial loss: need one real and one fake score per subnetwork");
  }
  check_scores(real);
  check_scores(fake);
  Tensor acc;
  for (size_t i = 0; i < real.size(); ++i) {
    Tensor term = ops::add(ops::mean(ops::log_clamped(real[i], kLogFloor)),
                           ops::mean(ops::log_clamped(ops::one_minus(fake[i]), kLogFloor)));
    acc = acc.defined() ? ops::add(acc, term) : term;
  }
  return ops::scale(acc, 1.0 / static_cast<double>(real.size()));
}

Tensor generator_adversarial_loss(const std::vector<Tensor>& fake) {
  if (fake.empty()) throw std::invalid_argument("adversarial loss: no subnetwork scores");
  check_scores(fake);
  Tensor acc;
  for (const auto& f : fake) {
    Tensor term = ops::mean(ops::log_clamped(f, kLogFloor));
    acc = acc.defined() ? ops::add(acc, term) : term;
  }
  return ops::scale(acc, -1.0 / static_cast<double>(fake.size()));
}

Tensor l1_loss(const Tensor& y, const Tensor& y_hat) {
  if (y.shape() != y_hat.shape()) {
    throw DimensionError("l1 loss: shapes " + shape_str(y.shape()) + " and " +
                         shape_str(y_hat.shape()) + " differ");
  }
  return ops::mean(ops::abs(ops::sub(y_hat, y)));
}

Tensor feature_matching_loss(const std::vector<std::vector<Tensor>>& taps_fake,
                             const std::vector<std::vector<Tensor>>& taps_real) {
  if (taps_fake.empty() || taps_fake.size() != taps_real.size()) {
    throw DimensionError("feature matching: subnetwork counts differ");
  }
  Tensor acc;
  size_t terms = 0;
  for (size_t i = 0; i < taps_fake.size(); ++i) {
    if (taps_fake[i].empty() || taps_fake[i].size() != taps_real[i].size()) {
      throw DimensionError("feature matching: tap counts differ at subnetwork " +
                           std::to_string(i));
    }
    if (taps_fake[i].size() != taps_fake.front().size()) {
      throw DimensionError("feature matching: subnetworks carry different tap counts");
    }
    for (size_t q = 0; q < taps_fake[i].size(); ++q) {
      if (taps_fake[i][q].shape() != taps_real[i][q].shape()) {
        throw DimensionError("feature matching: tap shape mismatch at (" + std::to_string(i) +
                             ", " + std::to_string(q) + ")");
      }
      Tensor term = ops::mean(ops::abs(ops::sub(taps_fake[i][q], taps_real[i][q])));
      acc = acc.defined() ? ops::add(acc, term) : term;
      ++terms;
    }
  }
  return ops::scale(acc, 1.0 / static_cast<double>(terms));
}

double total_objective(double adv, double l1, double fm, const LossWeights& w) {
  check_finite(adv, "adversarial term");
  check_finite(l1, "L1 term");
  check_finite(fm, "feature-matching term");
  return adv + w.lambda * l1 + w.mu * fm;
}

Tensor total_objective(const Tensor& adv, const Tensor& l1, const Tensor& fm,
                       const LossWeights& w) {
  total_objective(adv.item(), l1.item(), fm.item(), w);
  return ops::add(adv, ops::add(ops::scale(l1, w.lambda), ops::scale(fm, w.mu)));
}

}  // namespace csagan
