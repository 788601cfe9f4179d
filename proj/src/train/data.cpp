#include "csagan/train/data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <stdexcept>

#include "csagan/core/rng.hpp"
#include "csagan/model/generator.hpp"

namespace csagan {

std::vector<double> image_to_target(const Image& photo) {
  if (photo.channels != 3 || photo.height != photo.width) {
    throw std::invalid_argument("target image must be square RGB");
  }
  const int side = photo.height;
  const size_t plane = static_cast<size_t>(side) * side;
  std::vector<double> out(3 * plane);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < side; ++y)
      for (int x = 0; x < side; ++x)
        out[c * plane + static_cast<size_t>(y) * side + x] = 2.0 * photo.at(y, x, c) - 1.0;
  return out;
}

Image target_to_image(std::span<const double> chw, int side) {
  const size_t plane = static_cast<size_t>(side) * side;
  if (chw.size() != 3 * plane) throw std::invalid_argument("target_to_image: size mismatch");
  Image img;
  img.height = img.width = side;
  img.channels = 3;
  img.pixels.resize(3 * plane);
  for (int c = 0; c < 3; ++c)
    for (size_t p = 0; p < plane; ++p)
      img.pixels[p * 3 + c] =
          static_cast<float>(std::clamp((chw[c * plane + p] + 1.0) * 0.5, 0.0, 1.0));
  return img;
}

Sample make_sample(std::string name, const Image& photo, const ProbEdgeMap& edges, double tau,
                   int min_pixels, const std::vector<int>& scales) {
  Sample s = make_sample_from_field(std::move(name), photo,
                                    distance_field(extract_linemap(edges, tau, min_pixels)), scales);
  s.tau = tau;
  return s;
}

Sample make_sample_from_field(std::string name, const Image& photo, const DistanceField& field,
                              const std::vector<int>& scales) {
  if (field.height != photo.height || field.width != photo.width) {
    throw std::invalid_argument("sample " + name + ": distance field and photo sizes differ");
  }
  Sample s;
  s.name = std::move(name);
  s.side = photo.height;
  s.pyramid = build_condition_pyramid(field, scales);
  s.target = image_to_target(photo);
  return s;
}

Batch make_batch(const std::vector<Sample>& samples, const std::vector<size_t>& indices) {
  if (indices.empty()) throw std::invalid_argument("make_batch: empty batch");
  std::vector<const ConditionPyramid*> pyramids;
  const int side = samples.at(indices.front()).side;
  const int64_t b = static_cast<int64_t>(indices.size());
  std::vector<double> target;
  target.reserve(static_cast<size_t>(b) * 3 * side * side);
  for (size_t i : indices) {
    const Sample& s = samples.at(i);
    if (s.side != side) throw std::invalid_argument("make_batch: mixed sample sizes");
    pyramids.push_back(&s.pyramid);
    target.insert(target.end(), s.target.begin(), s.target.end());
  }
  Batch batch;
  batch.levels = stack_condition_levels(pyramids);
  for (const auto& t : batch.levels) {
    if (t.size(-1) == side) batch.cond = t;
  }
  if (!batch.cond.defined()) throw std::invalid_argument("make_batch: no full-resolution level");
  batch.target = Tensor::from_data({b, 3, side, side}, std::move(target));
  return batch;
}

namespace {

struct Rgb {
  float r, g, b;
};

constexpr std::array<Rgb, kToyClasses> kClassColor = {
    Rgb{0.85f, 0.15f, 0.15f}, Rgb{0.15f, 0.6f, 0.2f}, Rgb{0.15f, 0.25f, 0.85f},
    Rgb{0.9f, 0.55f, 0.1f}};

bool inside_shape(int label, double x, double y, double cx, double cy, double r, double angle) {
  const double dx = x - cx, dy = y - cy;
  const double u = std::cos(angle) * dx + std::sin(angle) * dy;
  const double v = -std::sin(angle) * dx + std::cos(angle) * dy;
  switch (label) {
    case 0:
      return u * u + v * v <= r * r;
    case 1:
      return std::abs(u) <= 0.8 * r && std::abs(v) <= 0.8 * r;
    case 2: {
      // Upward triangle inscribed in radius r.
      const double h = 1.5 * r;
      const double top = -r, bottom = top + h;
      if (v < top || v > bottom) return false;
      const double half = (v - top) / h * std::sqrt(3.0) * r / 2.0;
      return std::abs(u) <= half;
    }
    default:
      return std::abs(u) + std::abs(v) <= r;
  }
}

}  // namespace

Image draw_toy_shape(int index, int side, uint64_t seed, bool interior_detail, int* label_out) {
  std::mt19937_64 rng = make_rng(seed, "toy-shape", static_cast<uint64_t>(index));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int label = static_cast<int>(rng() % kToyClasses);
  const double scale = side / 32.0;
  const double r = (8.0 + 4.0 * unit(rng)) * scale;
  const double cx = side / 2.0 + (unit(rng) - 0.5) * 6.0 * scale;
  const double cy = side / 2.0 + (unit(rng) - 0.5) * 6.0 * scale;
  const double angle = (label == 0 ? 0.0 : (unit(rng) - 0.5) * 0.6);
  const double stripe_offset = (unit(rng) - 0.5) * r * 0.6;
  const double stripe_width = 1.5 * scale;
  const Rgb fill = kClassColor[label];
  const Rgb light{fill.r + 0.55f * (1 - fill.r), fill.g + 0.55f * (1 - fill.g),
                  fill.b + 0.55f * (1 - fill.b)};

  Image img;
  img.height = img.width = side;
  img.channels = 3;
  img.pixels.assign(static_cast<size_t>(side) * side * 3, 1.0f);
  constexpr int kSuper = 4;
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      float acc[3] = {0, 0, 0};
      for (int sy = 0; sy < kSuper; ++sy) {
        for (int sx = 0; sx < kSuper; ++sx) {
          const double px = x + (sx + 0.5) / kSuper, py = y + (sy + 0.5) / kSuper;
          Rgb c{1.0f, 1.0f, 1.0f};
          if (inside_shape(label, px, py, cx, cy, r, angle)) {
            c = fill;
            const double rel = (px - cx) - (py - cy) - stripe_offset;
            if (interior_detail && std::abs(rel) <= stripe_width) c = light;
          }
          acc[0] += c.r;
          acc[1] += c.g;
          acc[2] += c.b;
        }
      }
      for (int ch = 0; ch < 3; ++ch) {
        img.pixels[(static_cast<size_t>(y) * side + x) * 3 + ch] = acc[ch] / (kSuper * kSuper);
      }
    }
  }
  if (label_out) *label_out = label;
  return img;
}

Sample toy_sample_at_tau(int index, const ToyOptions& options, double tau,
                         const std::vector<int>& scales) {
  int label = -1;
  Image photo = draw_toy_shape(index, options.side, options.seed, options.interior_detail, &label);
  Sample s = make_sample("toy" + std::to_string(index), photo, detect_edges(photo), tau,
                         options.min_pixels, scales);
  s.label = label;
  return s;
}

std::vector<Sample> make_toy_dataset(const ToyOptions& options, const std::vector<int>& scales) {
  if (options.count < 1) throw std::invalid_argument("toy dataset: count must be >= 1");
  if (options.tau_min > options.tau_max) throw std::invalid_argument("toy dataset: tau range");
  std::mt19937_64 rng = make_rng(options.seed, "toy-tau");
  std::uniform_real_distribution<double> tau(options.tau_min, options.tau_max);
  std::vector<Sample> out;
  out.reserve(static_cast<size_t>(options.count));
  for (int i = 0; i < options.count; ++i) {
    const double t = options.tau_min == options.tau_max ? options.tau_min : tau(rng);
    out.push_back(toy_sample_at_tau(i, options, t, scales));
  }
  return out;
}

}  // namespace csagan
