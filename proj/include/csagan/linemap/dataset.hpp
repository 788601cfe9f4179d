#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "csagan/linemap/image.hpp"

namespace csagan {

struct SplitIndices {
  std::vector<size_t> train;
  std::vector<size_t> test;
};

// Seeded shuffle of [0, count) cut at round(ratio * count), clamped so both
// sides are non-empty. Requires count >= 2 and 0 < ratio < 1.
SplitIndices split_indices(size_t count, double ratio, uint64_t seed);

struct PhotoSample {
  std::string name;  // file name within the source directory
  Image photo;       // side x side RGB
};

struct Dataset {
  std::vector<PhotoSample> train;
  std::vector<PhotoSample> test;
};

// Lists *.png in photo_dir (sorted by name), drops unreadable files with a
// warning on stderr, center-crops and resizes the rest to side x side, then
// splits them. Throws when fewer than two readable images remain.
Dataset make_dataset(const std::filesystem::path& photo_dir, double split_ratio,
                     uint64_t seed, int side = 256);

}  // namespace csagan
