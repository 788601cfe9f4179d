#include "csagan/linemap/linemap.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "csagan/util/atomic_file.hpp"

namespace csagan {

size_t LineMap::count() const {
  return static_cast<size_t>(std::count(mask.begin(), mask.end(), uint8_t{1}));
}

double DistanceField::max_distance() const {
  return std::sqrt(static_cast<double>(height) * height + static_cast<double>(width) * width);
}

const PyramidLevel& ConditionPyramid::at_extent(int height, int width) const {
  for (const auto& level : levels) {
    if (level.height == height && level.width == width) return level;
  }
  throw std::out_of_range("condition pyramid has no " + std::to_string(height) + "x" +
                          std::to_string(width) + " level");
}

ProbEdgeMap detect_edges(const Image& photo) {
  if (photo.empty()) throw std::invalid_argument("detect_edges: empty image");
  const Image gray = to_grayscale(photo);
  const int h = gray.height, w = gray.width;
  auto clamp_at = [&](const std::vector<double>& img, int y, int x) {
    y = std::clamp(y, 0, h - 1);
    x = std::clamp(x, 0, w - 1);
    return img[static_cast<size_t>(y) * w + x];
  };
  std::vector<double> src(gray.pixels.begin(), gray.pixels.end());
  // [1 2 1]/4 binomial smoothing, separable, replicate borders.
  std::vector<double> tmp(src.size()), smooth(src.size());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      tmp[static_cast<size_t>(y) * w + x] =
          (clamp_at(src, y, x - 1) + 2.0 * clamp_at(src, y, x) + clamp_at(src, y, x + 1)) / 4.0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      smooth[static_cast<size_t>(y) * w + x] =
          (clamp_at(tmp, y - 1, x) + 2.0 * clamp_at(tmp, y, x) + clamp_at(tmp, y + 1, x)) / 4.0;

  ProbEdgeMap p{h, w, std::vector<double>(src.size(), 0.0)};
  double peak = 0.0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double gx = (clamp_at(smooth, y - 1, x + 1) + 2.0 * clamp_at(smooth, y, x + 1) +
                         clamp_at(smooth, y + 1, x + 1)) -
                        (clamp_at(smooth, y - 1, x - 1) + 2.0 * clamp_at(smooth, y, x - 1) +
                         clamp_at(smooth, y + 1, x - 1));
      const double gy = (clamp_at(smooth, y + 1, x - 1) + 2.0 * clamp_at(smooth, y + 1, x) +
                         clamp_at(smooth, y + 1, x + 1)) -
                        (clamp_at(smooth, y - 1, x - 1) + 2.0 * clamp_at(smooth, y - 1, x) +
                         clamp_at(smooth, y - 1, x + 1));
      const double m = std::sqrt(gx * gx + gy * gy);
      p.values[static_cast<size_t>(y) * w + x] = m;
      peak = std::max(peak, m);
    }
  // Flat images stay all-zero; tiny float noise is not an edge.
  if (peak > 1e-9) {
    for (double& v : p.values) v = std::clamp(v / peak, 0.0, 1.0);
  } else {
    std::fill(p.values.begin(), p.values.end(), 0.0);
  }
  return p;
}

ProbEdgeMap GradientEdgeProvider::edges(const Image& photo, const std::string&) const {
  return detect_edges(photo);
}

ProbEdgeMap PrecomputedEdgeProvider::edges(const Image& photo,
                                           const std::string& name) const {
  const auto path = dir_ / (std::filesystem::path(name).stem().string() + ".png");
  Image map = read_png(path, 1);
  if (map.height != photo.height || map.width != photo.width) {
    map = resize_area(map, photo.height, photo.width);
  }
  ProbEdgeMap p{map.height, map.width, {}};
  p.values.reserve(map.pixels.size());
  for (float v : map.pixels) p.values.push_back(std::clamp(static_cast<double>(v), 0.0, 1.0));
  return p;
}

LineMap threshold_edges(const ProbEdgeMap& p, double tau) {
  if (!(tau >= 0.0 && tau <= 1.0)) throw std::invalid_argument("tau must lie in [0, 1]");
  LineMap lines(p.height, p.width);
  for (size_t i = 0; i < p.values.size(); ++i) lines.mask[i] = p.values[i] > tau ? 1 : 0;
  return lines;
}

LineMap open_2x2(const LineMap& lines) {
  const int h = lines.height, w = lines.width;
  // Erosion anchored at the top-left of the 2x2 element, dilation mirrors it.
  LineMap eroded(h, w);
  for (int y = 0; y + 1 < h; ++y)
    for (int x = 0; x + 1 < w; ++x)
      eroded.at(y, x) = lines.at(y, x) & lines.at(y + 1, x) & lines.at(y, x + 1) &
                        lines.at(y + 1, x + 1);
  LineMap opened(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      uint8_t v = eroded.at(y, x);
      if (y > 0) v |= eroded.at(y - 1, x);
      if (x > 0) v |= eroded.at(y, x - 1);
      if (y > 0 && x > 0) v |= eroded.at(y - 1, x - 1);
      opened.at(y, x) = v;
    }
  return opened;
}

namespace {

// Neighbors in counter-clockwise order starting east: E, NE, N, NW, W, SW, S, SE.
constexpr std::array<int, 8> kDy = {0, -1, -1, -1, 0, 1, 1, 1};
constexpr std::array<int, 8> kDx = {1, 1, 0, -1, -1, -1, 0, 1};

std::array<uint8_t, 8> ring(const LineMap& m, int y, int x) {
  std::array<uint8_t, 8> n{};
  for (int k = 0; k < 8; ++k) {
    const int yy = y + kDy[static_cast<size_t>(k)], xx = x + kDx[static_cast<size_t>(k)];
    n[static_cast<size_t>(k)] =
        (yy >= 0 && yy < m.height && xx >= 0 && xx < m.width) ? m.at(yy, xx) : 0;
  }
  return n;
}

// Yokoi connectivity number for 8-connectivity; 1 means removing the pixel
// neither splits nor merges components.
int connectivity8(const std::array<uint8_t, 8>& n) {
  int c = 0;
  for (int k = 0; k < 8; k += 2) {
    const int a = 1 - n[static_cast<size_t>(k)];
    const int b = 1 - n[static_cast<size_t>((k + 1) % 8)];
    const int d = 1 - n[static_cast<size_t>((k + 2) % 8)];
    c += a - a * b * d;
  }
  return c;
}

}  // namespace

LineMap thin(const LineMap& lines) {
  LineMap current = lines;
  // Border directions as indices into the ring: N, S, E, W.
  constexpr std::array<int, 4> kBorders = {2, 6, 0, 4};
  std::vector<size_t> doomed;
  bool changed = true;
  while (changed) {
    changed = false;
    for (int border : kBorders) {
      doomed.clear();
      for (int y = 0; y < current.height; ++y)
        for (int x = 0; x < current.width; ++x) {
          if (!current.at(y, x)) continue;
          const auto n = ring(current, y, x);
          if (n[static_cast<size_t>(border)]) continue;
          int neighbors = 0;
          for (uint8_t v : n) neighbors += v;
          if (neighbors < 2) continue;
          if (connectivity8(n) != 1) continue;
          doomed.push_back(static_cast<size_t>(y) * current.width + x);
        }
      for (size_t i : doomed) current.mask[i] = 0;
      changed = changed || !doomed.empty();
    }
  }
  return current;
}

namespace {

// 8-connected labels; returns component sizes indexed by label - 1.
std::vector<int> label_components(const LineMap& lines, std::vector<int>& labels) {
  labels.assign(lines.mask.size(), 0);
  std::vector<int> sizes;
  std::vector<std::pair<int, int>> stack;
  for (int y = 0; y < lines.height; ++y)
    for (int x = 0; x < lines.width; ++x) {
      const size_t idx = static_cast<size_t>(y) * lines.width + x;
      if (!lines.mask[idx] || labels[idx]) continue;
      const int label = static_cast<int>(sizes.size()) + 1;
      int size = 0;
      labels[idx] = label;
      stack.emplace_back(y, x);
      while (!stack.empty()) {
        auto [cy, cx] = stack.back();
        stack.pop_back();
        ++size;
        for (int k = 0; k < 8; ++k) {
          const int ny = cy + kDy[static_cast<size_t>(k)], nx = cx + kDx[static_cast<size_t>(k)];
          if (ny < 0 || ny >= lines.height || nx < 0 || nx >= lines.width) continue;
          const size_t nidx = static_cast<size_t>(ny) * lines.width + nx;
          if (lines.mask[nidx] && !labels[nidx]) {
            labels[nidx] = label;
            stack.emplace_back(ny, nx);
          }
        }
      }
      sizes.push_back(size);
    }
  return sizes;
}

}  // namespace

LineMap remove_short_components(const LineMap& lines, int min_pixels) {
  if (min_pixels < 1) throw std::invalid_argument("min_pixels must be >= 1");
  std::vector<int> labels;
  const auto sizes = label_components(lines, labels);
  LineMap out(lines.height, lines.width);
  for (size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] && sizes[static_cast<size_t>(labels[i] - 1)] >= min_pixels) out.mask[i] = 1;
  }
  return out;
}

int count_components(const LineMap& lines) {
  std::vector<int> labels;
  return static_cast<int>(label_components(lines, labels).size());
}

LineMap extract_linemap(const ProbEdgeMap& p, double tau, int min_pixels,
                        const LineMapOptions& options) {
  LineMap lines = threshold_edges(p, tau);
  if (options.open_before_thinning) lines = open_2x2(lines);
  return remove_short_components(thin(lines), min_pixels);
}

namespace {

// 1-D squared distance transform of sampled function f (Felzenszwalb &
// Huttenlocher lower envelope). Infinite samples carry no parabola.
void edt_1d(const std::vector<double>& f, std::vector<double>& d, std::vector<int>& v,
            std::vector<double>& z) {
  const int n = static_cast<int>(f.size());
  constexpr double kInf = std::numeric_limits<double>::infinity();
  int k = -1;
  for (int q = 0; q < n; ++q) {
    if (f[static_cast<size_t>(q)] == kInf) continue;
    while (k >= 0) {
      const int p = v[static_cast<size_t>(k)];
      const double s = ((f[static_cast<size_t>(q)] + static_cast<double>(q) * q) -
                        (f[static_cast<size_t>(p)] + static_cast<double>(p) * p)) /
                       (2.0 * (q - p));
      if (s <= z[static_cast<size_t>(k)]) {
        --k;
      } else {
        break;
      }
    }
    ++k;
    v[static_cast<size_t>(k)] = q;
    z[static_cast<size_t>(k)] =
        k == 0 ? -kInf
               : ((f[static_cast<size_t>(q)] + static_cast<double>(q) * q) -
                  (f[static_cast<size_t>(v[static_cast<size_t>(k - 1)])] +
                   static_cast<double>(v[static_cast<size_t>(k - 1)]) * v[static_cast<size_t>(k - 1)])) /
                     (2.0 * (q - v[static_cast<size_t>(k - 1)]));
    z[static_cast<size_t>(k + 1)] = kInf;
  }
  if (k < 0) {
    std::fill(d.begin(), d.end(), kInf);
    return;
  }
  int j = 0;
  for (int q = 0; q < n; ++q) {
    while (z[static_cast<size_t>(j + 1)] < q) ++j;
    const int p = v[static_cast<size_t>(j)];
    d[static_cast<size_t>(q)] = static_cast<double>(q - p) * (q - p) + f[static_cast<size_t>(p)];
  }
}

}  // namespace

DistanceField distance_field(const LineMap& lines) {
  const int h = lines.height, w = lines.width;
  DistanceField field{h, w, std::vector<double>(static_cast<size_t>(h) * w)};
  if (lines.count() == 0) {
    std::fill(field.values.begin(), field.values.end(), field.max_distance());
    return field;
  }
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> sq(field.values.size());
  for (size_t i = 0; i < sq.size(); ++i) sq[i] = lines.mask[i] ? 0.0 : kInf;

  const int n = std::max(h, w);
  std::vector<double> f, d;
  std::vector<int> v(static_cast<size_t>(n));
  std::vector<double> z(static_cast<size_t>(n) + 1);
  f.resize(static_cast<size_t>(h));
  d.resize(static_cast<size_t>(h));
  for (int x = 0; x < w; ++x) {
    for (int y = 0; y < h; ++y) f[static_cast<size_t>(y)] = sq[static_cast<size_t>(y) * w + x];
    edt_1d(f, d, v, z);
    for (int y = 0; y < h; ++y) sq[static_cast<size_t>(y) * w + x] = d[static_cast<size_t>(y)];
  }
  f.resize(static_cast<size_t>(w));
  d.resize(static_cast<size_t>(w));
  for (int y = 0; y < h; ++y) {
    std::copy_n(sq.begin() + static_cast<std::ptrdiff_t>(y) * w, w, f.begin());
    edt_1d(f, d, v, z);
    for (int x = 0; x < w; ++x)
      field.values[static_cast<size_t>(y) * w + x] = std::sqrt(d[static_cast<size_t>(x)]);
  }
  return field;
}

ConditionPyramid build_condition_pyramid(const DistanceField& field,
                                         const std::vector<int>& scales) {
  std::vector<int> sorted = scales;
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  const double inv_max = 1.0 / field.max_distance();
  ConditionPyramid pyramid;
  for (int s : sorted) {
    if (s < 1 || field.height % s != 0 || field.width % s != 0) {
      throw std::invalid_argument("pyramid scale " + std::to_string(s) +
                                  " does not divide " + std::to_string(field.height) + "x" +
                                  std::to_string(field.width));
    }
    PyramidLevel level{s, field.height / s, field.width / s, {}};
    level.values.assign(static_cast<size_t>(level.height) * level.width, 0.0);
    const double weight = inv_max / (static_cast<double>(s) * s);
    for (int y = 0; y < field.height; ++y)
      for (int x = 0; x < field.width; ++x)
        level.values[static_cast<size_t>(y / s) * level.width + x / s] += field.at(y, x) * weight;
    for (double& v : level.values) v = std::clamp(v, 0.0, 1.0);
    pyramid.levels.push_back(std::move(level));
  }
  return pyramid;
}

LineMap linemap_from_drawing(const Image& drawing) {
  const Image gray = to_grayscale(drawing);
  LineMap lines(gray.height, gray.width);
  for (size_t i = 0; i < gray.pixels.size(); ++i) lines.mask[i] = gray.pixels[i] < 0.5f ? 1 : 0;
  return lines;
}

Image linemap_to_image(const LineMap& lines) {
  Image img(lines.height, lines.width, 1, 1.0f);
  for (size_t i = 0; i < lines.mask.size(); ++i) {
    if (lines.mask[i]) img.pixels[i] = 0.0f;
  }
  return img;
}

namespace {

void put_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

uint32_t get_u32(const unsigned char* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

}  // namespace

void write_csdf(const std::filesystem::path& path, const DistanceField& field) {
  std::string out = "CSDF";
  put_u32(out, static_cast<uint32_t>(field.height));
  put_u32(out, static_cast<uint32_t>(field.width));
  for (double v : field.values) put_u32(out, std::bit_cast<uint32_t>(static_cast<float>(v)));
  write_file_atomic(path, out);
}

DistanceField read_csdf(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || bytes.compare(0, 4, "CSDF") != 0) {
    throw std::runtime_error(path.string() + ": not a CSDF file");
  }
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  DistanceField field;
  field.height = static_cast<int>(get_u32(p + 4));
  field.width = static_cast<int>(get_u32(p + 8));
  const size_t n = static_cast<size_t>(field.height) * field.width;
  if (bytes.size() != 12 + 4 * n) {
    throw std::runtime_error(path.string() + ": CSDF payload size mismatch");
  }
  field.values.resize(n);
  for (size_t i = 0; i < n; ++i)
    field.values[i] = static_cast<double>(std::bit_cast<float>(get_u32(p + 12 + 4 * i)));
  return field;
}

}  // namespace csagan
