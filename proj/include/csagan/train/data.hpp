#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "csagan/core/tensor.hpp"
#include "csagan/linemap/image.hpp"
#include "csagan/linemap/linemap.hpp"

namespace csagan {

// One training pair: condition pyramid from the line map and the RGB target
// mapped to [-1, 1], stored CHW.
struct Sample {
  std::string name;
  int label = -1;  // toy shape class; -1 when unknown
  double tau = 0.0;
  ConditionPyramid pyramid;
  std::vector<double> target;
  int side = 0;
};

struct Batch {
  std::vector<Tensor> levels;  // [B,1,e,e] per pyramid extent
  Tensor cond;                 // full-resolution level
  Tensor target;               // [B,3,S,S]
  int64_t size() const { return target.size(0); }
};

std::vector<double> image_to_target(const Image& photo);
Image target_to_image(std::span<const double> chw, int side);

// Edge probabilities -> line map at tau -> distance field -> pyramid.
Sample make_sample(std::string name, const Image& photo, const ProbEdgeMap& edges, double tau,
                   int min_pixels, const std::vector<int>& scales);

Sample make_sample_from_field(std::string name, const Image& photo, const DistanceField& field,
                              const std::vector<int>& scales);

Batch make_batch(const std::vector<Sample>& samples, const std::vector<size_t>& indices);

struct ToyOptions {
  int count = 256;
  int side = 32;
  double tau_min = 0.3;
  double tau_max = 0.3;
  int min_pixels = 4;
  // Faint stripe inside each shape; only low thresholds keep its edges.
  bool interior_detail = true;
  uint64_t seed = 0;
};

constexpr int kToyClasses = 4;

// Procedural filled shape (disc, square, triangle, diamond) with a
// class-dependent color on white. Deterministic in (seed, index).
Image draw_toy_shape(int index, int side, uint64_t seed, bool interior_detail, int* label = nullptr);

std::vector<Sample> make_toy_dataset(const ToyOptions& options, const std::vector<int>& scales);

// Same shape rebuilt at a different threshold.
Sample toy_sample_at_tau(int index, const ToyOptions& options, double tau,
                         const std::vector<int>& scales);

}  // namespace csagan
