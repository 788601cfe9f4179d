#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "csagan/linemap/image.hpp"
#include "csagan/metrics/metrics.hpp"

namespace csagan {

// Maps images to feature rows and class probabilities. Images of any size are
// area-resized to the provider's input side first.
class FeatureProvider {
 public:
  virtual ~FeatureProvider() = default;
  virtual std::string id() const = 0;
  virtual FeatureSet features(const std::vector<Image>& images) const = 0;
  virtual ClassProbSet class_probs(const std::vector<Image>& images) const = 0;
};

// Fixed Gaussian projection of RGB pixels; probabilities are a softmax over a
// second fixed projection of the features.
class RandomProjectionProvider : public FeatureProvider {
 public:
  RandomProjectionProvider(int side = 32, int dims = 64, int classes = 10, uint64_t seed = 0);
  std::string id() const override { return "random-projection"; }
  FeatureSet features(const std::vector<Image>& images) const override;
  ClassProbSet class_probs(const std::vector<Image>& images) const override;

 private:
  int side_;
  Eigen::MatrixXd proj_;    // dims x 3*side*side
  Eigen::MatrixXd logits_;  // classes x dims
};

// One-hidden-layer classifier over 8x8 pooled RGB; features are the hidden
// activations.
class ToyClassifierProvider : public FeatureProvider {
 public:
  static constexpr int kInputSide = 8;
  static constexpr int kHidden = 32;

  // Full-batch Adam on softmax cross-entropy.
  static ToyClassifierProvider fit(const std::vector<Image>& images, const std::vector<int>& labels,
                                   int classes, uint64_t seed, int iterations = 400);

  std::string id() const override { return "toy-classifier"; }
  FeatureSet features(const std::vector<Image>& images) const override;
  ClassProbSet class_probs(const std::vector<Image>& images) const override;
  std::vector<int> predict(const std::vector<Image>& images) const;

 private:
  Eigen::MatrixXd hidden(const Eigen::MatrixXd& x) const;
  Eigen::MatrixXd w1_, w2_;
  Eigen::RowVectorXd b1_, b2_;
};

// Rows of 3*side*side values in [0, 1], channel-last.
Eigen::MatrixXd pixel_rows(const std::vector<Image>& images, int side);

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits);

}  // namespace csagan
