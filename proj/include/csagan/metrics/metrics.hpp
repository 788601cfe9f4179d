#pragma once

#include <string>

#include <Eigen/Dense>

namespace csagan {

// M x d feature rows from one provider.
struct FeatureSet {
  Eigen::MatrixXd features;
  std::string provider_id;
};

// M x K class probabilities; rows on the simplex.
struct ClassProbSet {
  Eigen::MatrixXd probs;
};

constexpr double kSimplexTolerance = 1e-9;

// ||mu_a - mu_b||^2 + Tr(S_a + S_b - 2 (S_a S_b)^{1/2}) with unbiased sample
// covariances. The trace of the root is taken from the eigenvalues of
// S_a^{1/2} S_b S_a^{1/2}, negatives clamped to 0. Result clamped to >= 0.
double frechet_distance(const FeatureSet& a, const FeatureSet& b);

// (x.y / d + 1)^3
double kid_kernel(const Eigen::VectorXd& x, const Eigen::VectorXd& y);

// Unbiased MMD^2 with the cubic kernel, reported unscaled.
double kid(const FeatureSet& a, const FeatureSet& b);

struct InceptionScore {
  double mean = 0.0;
  double std = 0.0;  // population std over splits
};

// exp(mean_x KL(p(.|x) || p_bar)) per contiguous split; the first M % n_splits
// splits get one extra row.
InceptionScore inception_score(const ClassProbSet& p, int n_splits = 1);

}  // namespace csagan
