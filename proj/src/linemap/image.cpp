#include "csagan/linemap/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>

#include "csagan/util/atomic_file.hpp"

namespace csagan {

Image::Image(int h, int w, int c, float fill)
    : height(h), width(w), channels(c),
      pixels(static_cast<size_t>(h) * static_cast<size_t>(w) * static_cast<size_t>(c), fill) {}

Image read_png(const std::filesystem::path& path, int channels) {
  if (channels != 1 && channels != 3) {
    throw std::invalid_argument("read_png: channels must be 1 or 3");
  }
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.c_str())) {
    throw ImageError("cannot read PNG " + path.string() + ": " + png.message);
  }
  png.format = channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  std::vector<png_byte> buffer(PNG_IMAGE_SIZE(png));
  png_color white{255, 255, 255};
  if (!png_image_finish_read(&png, &white, buffer.data(), 0, nullptr)) {
    std::string message = png.message;
    png_image_free(&png);
    throw ImageError("cannot decode PNG " + path.string() + ": " + message);
  }
  Image image(static_cast<int>(png.height), static_cast<int>(png.width), channels);
  for (size_t i = 0; i < buffer.size(); ++i) image.pixels[i] = buffer[i] / 255.0f;
  return image;
}

void write_png(const std::filesystem::path& path, const Image& image) {
  if (image.channels != 1 && image.channels != 3) {
    throw std::invalid_argument("write_png: channels must be 1 or 3");
  }
  std::vector<png_byte> buffer(image.pixels.size());
  for (size_t i = 0; i < buffer.size(); ++i) {
    const float v = std::clamp(image.pixels[i], 0.0f, 1.0f);
    buffer[i] = static_cast<png_byte>(std::lround(v * 255.0f));
  }
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(image.width);
  png.height = static_cast<png_uint_32>(image.height);
  png.format = image.channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&png, nullptr, &size, 0, buffer.data(), 0, nullptr)) {
    throw ImageError("cannot encode PNG: " + std::string(png.message));
  }
  std::string encoded(size, '\0');
  if (!png_image_write_to_memory(&png, encoded.data(), &size, 0, buffer.data(), 0,
                                 nullptr)) {
    throw ImageError("cannot encode PNG: " + std::string(png.message));
  }
  encoded.resize(size);
  write_file_atomic(path, encoded);
}

Image to_grayscale(const Image& image) {
  if (image.channels == 1) return image;
  Image gray(image.height, image.width, 1);
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x)
      gray.at(y, x, 0) = 0.299f * image.at(y, x, 0) + 0.587f * image.at(y, x, 1) +
                         0.114f * image.at(y, x, 2);
  return gray;
}

Image center_crop_square(const Image& image) {
  const int side = std::min(image.height, image.width);
  const int y0 = (image.height - side) / 2;
  const int x0 = (image.width - side) / 2;
  Image out(side, side, image.channels);
  for (int y = 0; y < side; ++y)
    for (int x = 0; x < side; ++x)
      for (int c = 0; c < image.channels; ++c) out.at(y, x, c) = image.at(y + y0, x + x0, c);
  return out;
}

namespace {

// Weights of source samples covering each destination sample along one axis.
struct Span {
  int first;
  std::vector<double> weights;
};

std::vector<Span> area_spans(int src, int dst) {
  std::vector<Span> spans(static_cast<size_t>(dst));
  const double ratio = static_cast<double>(src) / dst;
  for (int i = 0; i < dst; ++i) {
    const double lo = i * ratio, hi = (i + 1) * ratio;
    const int first = static_cast<int>(std::floor(lo));
    const int last = std::min(src - 1, static_cast<int>(std::ceil(hi)) - 1);
    Span& s = spans[static_cast<size_t>(i)];
    s.first = first;
    for (int j = first; j <= last; ++j) {
      const double overlap = std::min(hi, j + 1.0) - std::max(lo, static_cast<double>(j));
      s.weights.push_back(std::max(0.0, overlap) / ratio);
    }
  }
  return spans;
}

}  // namespace

Image resize_area(const Image& image, int height, int width) {
  if (image.empty() || height <= 0 || width <= 0) {
    throw std::invalid_argument("resize_area: empty image or target");
  }
  if (height == image.height && width == image.width) return image;
  const auto rows = area_spans(image.height, height);
  const auto cols = area_spans(image.width, width);
  Image out(height, width, image.channels);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      for (int c = 0; c < image.channels; ++c) {
        const Span& ry = rows[static_cast<size_t>(y)];
        const Span& cx = cols[static_cast<size_t>(x)];
        double acc = 0.0;
        for (size_t a = 0; a < ry.weights.size(); ++a)
          for (size_t b = 0; b < cx.weights.size(); ++b)
            acc += ry.weights[a] * cx.weights[b] *
                   image.at(ry.first + static_cast<int>(a), cx.first + static_cast<int>(b), c);
        out.at(y, x, c) = static_cast<float>(acc);
      }
  return out;
}

}  // namespace csagan
