#include "csagan/metrics/providers.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "csagan/core/rng.hpp"

namespace csagan {

namespace {

Eigen::MatrixXd gaussian(int rows, int cols, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, stddev);
  Eigen::MatrixXd m(rows, cols);
  for (int c = 0; c < cols; ++c)
    for (int r = 0; r < rows; ++r) m(r, c) = n(rng);
  return m;
}

Image as_rgb(const Image& im) {
  if (im.channels == 3) return im;
  if (im.channels != 1) throw ImageError("provider: expected 1 or 3 channels");
  Image out(im.height, im.width, 3);
  for (int y = 0; y < im.height; ++y)
    for (int x = 0; x < im.width; ++x)
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = im.at(y, x, 0);
  return out;
}

}  // namespace

Eigen::MatrixXd pixel_rows(const std::vector<Image>& images, int side) {
  Eigen::MatrixXd rows(static_cast<Eigen::Index>(images.size()), 3 * side * side);
  for (size_t i = 0; i < images.size(); ++i) {
    Image im = as_rgb(images[i]);
    if (im.height != side || im.width != side) im = resize_area(im, side, side);
    for (size_t k = 0; k < im.pixels.size(); ++k) rows(static_cast<Eigen::Index>(i), k) = im.pixels[k];
  }
  return rows;
}

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd out = logits.colwise() - logits.rowwise().maxCoeff();
  out = out.array().exp();
  out.array().colwise() /= out.rowwise().sum().array();
  return out;
}

RandomProjectionProvider::RandomProjectionProvider(int side, int dims, int classes, uint64_t seed)
    : side_(side) {
  if (side < 1 || dims < 1 || classes < 2) {
    throw std::invalid_argument("random projection: side, dims >= 1 and classes >= 2 required");
  }
  auto rng = make_rng(seed, "random-projection");
  const int in = 3 * side * side;
  proj_ = gaussian(dims, in, 1.0 / std::sqrt(static_cast<double>(in)), rng);
  logits_ = gaussian(classes, dims, 1.0, rng);
}

FeatureSet RandomProjectionProvider::features(const std::vector<Image>& images) const {
  return {pixel_rows(images, side_) * proj_.transpose(), id()};
}

ClassProbSet RandomProjectionProvider::class_probs(const std::vector<Image>& images) const {
  return {softmax_rows(features(images).features * logits_.transpose())};
}

ToyClassifierProvider ToyClassifierProvider::fit(const std::vector<Image>& images,
                                                 const std::vector<int>& labels, int classes,
                                                 uint64_t seed, int iterations) {
  if (images.empty() || images.size() != labels.size()) {
    throw std::invalid_argument("toy classifier: need one label per image");
  }
  if (classes < 2) throw std::invalid_argument("toy classifier: need at least two classes");
  for (int l : labels) {
    if (l < 0 || l >= classes) throw std::invalid_argument("toy classifier: label out of range");
  }
  const Eigen::MatrixXd x = pixel_rows(images, kInputSide).array() - 0.5;
  const auto m = static_cast<double>(images.size());
  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(x.rows(), classes);
  for (size_t i = 0; i < labels.size(); ++i) y(static_cast<Eigen::Index>(i), labels[i]) = 1.0;

  auto rng = make_rng(seed, "toy-classifier");
  ToyClassifierProvider p;
  p.w1_ = gaussian(static_cast<int>(x.cols()), kHidden, 1.0 / std::sqrt(static_cast<double>(x.cols())), rng);
  p.b1_ = Eigen::RowVectorXd::Zero(kHidden);
  p.w2_ = gaussian(kHidden, classes, 1.0 / std::sqrt(static_cast<double>(kHidden)), rng);
  p.b2_ = Eigen::RowVectorXd::Zero(classes);

  struct Moments {
    Eigen::MatrixXd m, v;
  };
  auto zeros = [](const auto& t) { return Moments{Eigen::MatrixXd::Zero(t.rows(), t.cols()), Eigen::MatrixXd::Zero(t.rows(), t.cols())}; };
  Moments mw1 = zeros(p.w1_), mb1 = zeros(p.b1_), mw2 = zeros(p.w2_), mb2 = zeros(p.b2_);
  const double lr = 0.01, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  for (int it = 1; it <= iterations; ++it) {
    const Eigen::MatrixXd h = p.hidden(x);
    const Eigen::MatrixXd prob = softmax_rows((h * p.w2_).rowwise() + p.b2_);
    const Eigen::MatrixXd dlogits = (prob - y) / m;
    const Eigen::MatrixXd gw2 = h.transpose() * dlogits;
    const Eigen::MatrixXd gb2 = dlogits.colwise().sum();
    const Eigen::MatrixXd dh = (dlogits * p.w2_.transpose()).array() * (1.0 - h.array().square());
    const Eigen::MatrixXd gw1 = x.transpose() * dh;
    const Eigen::MatrixXd gb1 = dh.colwise().sum();
    const double c1 = 1.0 - std::pow(beta1, it), c2 = 1.0 - std::pow(beta2, it);
    auto step = [&](auto& w, Moments& mo, const Eigen::MatrixXd& g) {
      mo.m = beta1 * mo.m + (1.0 - beta1) * g;
      mo.v = beta2 * mo.v + (1.0 - beta2) * g.cwiseProduct(g);
      w.array() -= lr * (mo.m.array() / c1) / ((mo.v.array() / c2).sqrt() + eps);
    };
    step(p.w1_, mw1, gw1);
    step(p.b1_, mb1, gb1);
    step(p.w2_, mw2, gw2);
    step(p.b2_, mb2, gb2);
  }
  return p;
}

Eigen::MatrixXd ToyClassifierProvider::hidden(const Eigen::MatrixXd& x) const {
  return ((x * w1_).rowwise() + b1_).array().tanh();
}

FeatureSet ToyClassifierProvider::features(const std::vector<Image>& images) const {
  return {hidden(pixel_rows(images, kInputSide).array() - 0.5), id()};
}

ClassProbSet ToyClassifierProvider::class_probs(const std::vector<Image>& images) const {
  const Eigen::MatrixXd h = features(images).features;
  return {softmax_rows((h * w2_).rowwise() + b2_)};
}

std::vector<int> ToyClassifierProvider::predict(const std::vector<Image>& images) const {
  const Eigen::MatrixXd p = class_probs(images).probs;
  std::vector<int> out(static_cast<size_t>(p.rows()));
  for (Eigen::Index i = 0; i < p.rows(); ++i) p.row(i).maxCoeff(&out[static_cast<size_t>(i)]);
  return out;
}

}  // namespace csagan
