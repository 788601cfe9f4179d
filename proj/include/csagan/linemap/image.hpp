#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace csagan {

class ImageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Interleaved (row-major, channel-last) image with values in [0, 1].
struct Image {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<float> pixels;

  Image() = default;
  Image(int h, int w, int c, float fill = 0.0f);

  bool empty() const { return pixels.empty(); }
  float& at(int y, int x, int c) {
    return pixels[(static_cast<size_t>(y) * width + x) * channels + c];
  }
  float at(int y, int x, int c) const {
    return pixels[(static_cast<size_t>(y) * width + x) * channels + c];
  }
};

// Decodes to 1 (gray) or 3 (RGB) channels; alpha is composited on white.
Image read_png(const std::filesystem::path& path, int channels = 3);
// Written to a temporary sibling and renamed into place.
void write_png(const std::filesystem::path& path, const Image& image);

Image to_grayscale(const Image& image);
Image center_crop_square(const Image& image);
// Area-weighted resampling; exact box averaging when shrinking.
Image resize_area(const Image& image, int height, int width);

}  // namespace csagan
