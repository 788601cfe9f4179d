#include "csagan/metrics/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace csagan {

namespace {

void check_pair(const FeatureSet& a, const FeatureSet& b, const char* what) {
  if (a.features.cols() != b.features.cols()) {
    throw std::invalid_argument(std::string(what) + ": feature dimensions differ (" +
                                std::to_string(a.features.cols()) + " vs " +
                                std::to_string(b.features.cols()) + ")");
  }
  if (a.features.cols() == 0) throw std::invalid_argument(std::string(what) + ": empty features");
  if (a.features.rows() < 2 || b.features.rows() < 2) {
    throw std::invalid_argument(std::string(what) + ": need at least two samples per set");
  }
  if (!a.features.allFinite() || !b.features.allFinite()) {
    throw std::invalid_argument(std::string(what) + ": non-finite features");
  }
}

Eigen::MatrixXd covariance(const Eigen::MatrixXd& x, const Eigen::RowVectorXd& mu) {
  const Eigen::MatrixXd c = x.rowwise() - mu;
  return (c.transpose() * c) / static_cast<double>(x.rows() - 1);
}

Eigen::MatrixXd sqrt_psd(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()));
  const Eigen::VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

double frechet_distance(const FeatureSet& a, const FeatureSet& b) {
  check_pair(a, b, "frechet distance");
  const Eigen::RowVectorXd mu_a = a.features.colwise().mean();
  const Eigen::RowVectorXd mu_b = b.features.colwise().mean();
  const Eigen::MatrixXd s_a = covariance(a.features, mu_a);
  const Eigen::MatrixXd s_b = covariance(b.features, mu_b);
  const Eigen::MatrixXd ra = sqrt_psd(s_a);
  const Eigen::MatrixXd inner = ra * s_b * ra;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (inner + inner.transpose()),
                                                    Eigen::EigenvaluesOnly);
  const double tr_root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  const double d = (mu_a - mu_b).squaredNorm() + s_a.trace() + s_b.trace() - 2.0 * tr_root;
  return std::max(d, 0.0);
}

double kid_kernel(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  const double t = x.dot(y) / static_cast<double>(x.size()) + 1.0;
  return t * t * t;
}

double kid(const FeatureSet& a, const FeatureSet& b) {
  check_pair(a, b, "kid");
  const double d = static_cast<double>(a.features.cols());
  auto gram = [d](const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
    Eigen::MatrixXd k = (x * y.transpose()).array() / d + 1.0;
    return Eigen::MatrixXd(k.array().cube());
  };
  const Eigen::MatrixXd kxx = gram(a.features, a.features);
  const Eigen::MatrixXd kyy = gram(b.features, b.features);
  const Eigen::MatrixXd kxy = gram(a.features, b.features);
  const double m = static_cast<double>(a.features.rows());
  const double n = static_cast<double>(b.features.rows());
  const double xx = (kxx.sum() - kxx.trace()) / (m * (m - 1.0));
  const double yy = (kyy.sum() - kyy.trace()) / (n * (n - 1.0));
  return xx + yy - 2.0 * kxy.sum() / (m * n);
}

InceptionScore inception_score(const ClassProbSet& p, int n_splits) {
  const Eigen::Index m = p.probs.rows();
  if (m == 0 || p.probs.cols() == 0) throw std::invalid_argument("inception score: empty input");
  if (n_splits < 1 || n_splits > m) {
    throw std::invalid_argument("inception score: n_splits must lie in [1, " + std::to_string(m) +
                                "]");
  }
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto row = p.probs.row(i);
    if (!row.allFinite() || row.minCoeff() < 0.0 ||
        std::abs(row.sum() - 1.0) > kSimplexTolerance) {
      throw std::invalid_argument("inception score: row " + std::to_string(i) +
                                  " is not on the simplex");
    }
  }
  std::vector<double> scores;
  Eigen::Index start = 0;
  for (int s = 0; s < n_splits; ++s) {
    const Eigen::Index len = m / n_splits + (s < m % n_splits ? 1 : 0);
    const auto block = p.probs.middleRows(start, len);
    const Eigen::RowVectorXd marginal = block.colwise().mean();
    double kl = 0.0;
    for (Eigen::Index i = 0; i < len; ++i) {
      for (Eigen::Index k = 0; k < block.cols(); ++k) {
        const double q = block(i, k);
        if (q > 0.0) kl += q * (std::log(q) - std::log(marginal(k)));
      }
    }
    scores.push_back(std::exp(kl / static_cast<double>(len)));
    start += len;
  }
  InceptionScore out;
  for (double v : scores) out.mean += v;
  out.mean /= static_cast<double>(scores.size());
  for (double v : scores) out.std += (v - out.mean) * (v - out.mean);
  out.std = std::sqrt(out.std / static_cast<double>(scores.size()));
  return out;
}

}  // namespace csagan
