#include "csagan/linemap/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <iostream>
#include <numeric>

#include "csagan/core/rng.hpp"

namespace csagan {

SplitIndices split_indices(size_t count, double ratio, uint64_t seed) {
  if (count < 2) throw std::invalid_argument("dataset needs at least two images");
  if (!(ratio > 0.0 && ratio < 1.0)) {
    throw std::invalid_argument("split ratio must lie strictly between 0 and 1");
  }
  std::vector<size_t> order(count);
  std::iota(order.begin(), order.end(), size_t{0});
  auto rng = make_rng(seed, "dataset-split");
  // Fisher-Yates with explicit draws keeps the permutation independent of
  // the standard library's shuffle implementation.
  for (size_t i = count - 1; i > 0; --i) {
    const size_t j = static_cast<size_t>(rng() % (i + 1));
    std::swap(order[i], order[j]);
  }
  size_t n_train = static_cast<size_t>(std::llround(ratio * static_cast<double>(count)));
  n_train = std::clamp<size_t>(n_train, 1, count - 1);
  SplitIndices split;
  split.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  split.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  return split;
}

Dataset make_dataset(const std::filesystem::path& photo_dir, double split_ratio,
                     uint64_t seed, int side) {
  if (!std::filesystem::is_directory(photo_dir)) {
    throw std::invalid_argument("not a directory: " + photo_dir.string());
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(photo_dir)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (ext == ".png") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<PhotoSample> samples;
  for (const auto& path : files) {
    try {
      Image photo = read_png(path, 3);
      photo = resize_area(center_crop_square(photo), side, side);
      samples.push_back({path.filename().string(), std::move(photo)});
    } catch (const std::exception& e) {
      std::cerr << "warning: skipping " << path.string() << ": " << e.what() << "\n";
    }
  }
  if (samples.size() < 2) {
    throw std::invalid_argument("need at least two readable images in " + photo_dir.string());
  }
  const SplitIndices split = split_indices(samples.size(), split_ratio, seed);
  Dataset dataset;
  for (size_t i : split.train) dataset.train.push_back(samples[i]);
  for (size_t i : split.test) dataset.test.push_back(samples[i]);
  return dataset;
}

}  // namespace csagan
