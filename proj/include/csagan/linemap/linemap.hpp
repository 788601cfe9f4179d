#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "csagan/linemap/image.hpp"

namespace csagan {

// Per-pixel edge probability, row-major, values in [0, 1].
struct ProbEdgeMap {
  int height = 0;
  int width = 0;
  std::vector<double> values;

  double at(int y, int x) const { return values[static_cast<size_t>(y) * width + x]; }
};

// Binary line mask, row-major; 1 marks a line pixel.
struct LineMap {
  int height = 0;
  int width = 0;
  std::vector<uint8_t> mask;

  LineMap() = default;
  LineMap(int h, int w) : height(h), width(w), mask(static_cast<size_t>(h) * w, 0) {}
  uint8_t at(int y, int x) const { return mask[static_cast<size_t>(y) * width + x]; }
  uint8_t& at(int y, int x) { return mask[static_cast<size_t>(y) * width + x]; }
  size_t count() const;
};

// Unsigned Euclidean distance (in pixels) to the nearest line pixel.
struct DistanceField {
  int height = 0;
  int width = 0;
  std::vector<double> values;

  double at(int y, int x) const { return values[static_cast<size_t>(y) * width + x]; }
  // Diagonal length, used for empty maps and for normalization.
  double max_distance() const;
};

struct PyramidLevel {
  int scale = 1;
  int height = 0;
  int width = 0;
  std::vector<double> values;  // normalized to [0, 1]
};

// Ordered coarse to fine (largest scale factor first).
struct ConditionPyramid {
  std::vector<PyramidLevel> levels;

  // Throws std::out_of_range when no level has this extent.
  const PyramidLevel& at_extent(int height, int width) const;
};

// Source of edge probabilities for a photo.
class EdgeProvider {
 public:
  virtual ~EdgeProvider() = default;
  virtual ProbEdgeMap edges(const Image& photo, const std::string& name) const = 0;
};

// Normalized gradient magnitude of a smoothed grayscale image.
ProbEdgeMap detect_edges(const Image& photo);

class GradientEdgeProvider : public EdgeProvider {
 public:
  ProbEdgeMap edges(const Image& photo, const std::string& name) const override;
};

// Loads "<dir>/<stem>.png" as a grayscale probability map.
class PrecomputedEdgeProvider : public EdgeProvider {
 public:
  explicit PrecomputedEdgeProvider(std::filesystem::path dir) : dir_(std::move(dir)) {}
  ProbEdgeMap edges(const Image& photo, const std::string& name) const override;

 private:
  std::filesystem::path dir_;
};

struct LineMapOptions {
  // 2x2 opening before thinning; drops one-pixel-wide speckle but keeps any
  // stroke at least two pixels wide.
  bool open_before_thinning = true;
};

LineMap threshold_edges(const ProbEdgeMap& p, double tau);
LineMap open_2x2(const LineMap& lines);
// Directional boundary peeling; deletes only simple, non-end pixels.
LineMap thin(const LineMap& lines);
LineMap remove_short_components(const LineMap& lines, int min_pixels);
int count_components(const LineMap& lines);

// Threshold at tau, optional opening, thinning, short-component removal.
LineMap extract_linemap(const ProbEdgeMap& p, double tau, int min_pixels,
                        const LineMapOptions& options = {});

// Exact EDT by separable lower envelopes of parabolas; an empty map yields
// max_distance() everywhere.
DistanceField distance_field(const LineMap& lines);

// Average-pools field / max_distance() by each scale factor.
ConditionPyramid build_condition_pyramid(const DistanceField& field,
                                         const std::vector<int>& scales);

// Line map from a drawing: dark pixels (gray < 0.5) are lines.
LineMap linemap_from_drawing(const Image& drawing);
Image linemap_to_image(const LineMap& lines);

// "CSDF" file: magic, u32 height, u32 width (little-endian), float32 values.
void write_csdf(const std::filesystem::path& path, const DistanceField& field);
DistanceField read_csdf(const std::filesystem::path& path);

}  // namespace csagan
