#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "evdn/kogtl.hpp"

namespace evdn {

std::size_t EdgeMap::count() const {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
}

std::vector<std::pair<int, int>> EdgeMap::pixels() const {
  std::vector<std::pair<int, int>> out;
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      if (at(x, y)) out.emplace_back(x, y);
  return out;
}

namespace {

struct Plane {
  int w, h;
  std::vector<double> v;
  Plane(int w_, int h_) : w(w_), h(h_), v(static_cast<std::size_t>(w_) * h_, 0.0) {}
  double& at(int x, int y) { return v[static_cast<std::size_t>(y) * w + x]; }
  // replicate padding
  double clamped(int x, int y) const {
    x = std::clamp(x, 0, w - 1);
    y = std::clamp(y, 0, h - 1);
    return v[static_cast<std::size_t>(y) * w + x];
  }
};

Plane gaussian_blur(const GrayImage& img, double sigma) {
  Plane src(img.width, img.height);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) src.v[i] = img.pixels[i];
  if (sigma <= 0.0) return src;
  const int r = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * r + 1));
  double total = 0.0;
  for (int i = -r; i <= r; ++i) {
    k[static_cast<std::size_t>(i + r)] = std::exp(-0.5 * i * i / (sigma * sigma));
    total += k[static_cast<std::size_t>(i + r)];
  }
  for (double& c : k) c /= total;
  Plane tmp(img.width, img.height), out(img.width, img.height);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      double acc = 0.0;
      for (int i = -r; i <= r; ++i) acc += k[static_cast<std::size_t>(i + r)] * src.clamped(x + i, y);
      tmp.at(x, y) = acc;
    }
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      double acc = 0.0;
      for (int i = -r; i <= r; ++i) acc += k[static_cast<std::size_t>(i + r)] * tmp.clamped(x, y + i);
      out.at(x, y) = acc;
    }
  return out;
}

}  // namespace

EdgeMap canny_edges(const GrayImage& image, const CannyConfig& config, std::int64_t t_us) {
  if (image.width <= 0 || image.height <= 0) throw std::invalid_argument("empty image");
  if (!(config.low >= 0.0 && config.low <= config.high))
    throw std::invalid_argument("canny thresholds must satisfy 0 <= low <= high");
  const int W = image.width, H = image.height;
  EdgeMap edges{W, H, t_us, std::vector<std::uint8_t>(static_cast<std::size_t>(W) * H, 0)};
  const Plane b = gaussian_blur(image, config.sigma);

  Plane gx(W, H), gy(W, H), mag(W, H);
  double max_mag = 0.0;
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      const double sx = (b.clamped(x + 1, y - 1) + 2 * b.clamped(x + 1, y) + b.clamped(x + 1, y + 1)) -
                        (b.clamped(x - 1, y - 1) + 2 * b.clamped(x - 1, y) + b.clamped(x - 1, y + 1));
      const double sy = (b.clamped(x - 1, y + 1) + 2 * b.clamped(x, y + 1) + b.clamped(x + 1, y + 1)) -
                        (b.clamped(x - 1, y - 1) + 2 * b.clamped(x, y - 1) + b.clamped(x + 1, y - 1));
      gx.at(x, y) = sx;
      gy.at(x, y) = sy;
      mag.at(x, y) = std::hypot(sx, sy);
      max_mag = std::max(max_mag, mag.at(x, y));
    }
  if (max_mag <= 1e-9) return edges;

  // Non-maximum suppression along the quantized gradient direction. Strict on the
  // negative side, non-strict on the positive side, so plateaus of two equal maxima
  // keep exactly one pixel.
  std::vector<double> thin(static_cast<std::size_t>(W) * H, 0.0);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      const double m = mag.at(x, y);
      if (m <= 0.0) continue;
      double angle = std::atan2(gy.at(x, y), gx.at(x, y)) * 180.0 / M_PI;
      if (angle < 0) angle += 180.0;
      int ox, oy;
      if (angle < 22.5 || angle >= 157.5) {
        ox = 1, oy = 0;
      } else if (angle < 67.5) {
        ox = 1, oy = 1;
      } else if (angle < 112.5) {
        ox = 0, oy = 1;
      } else {
        ox = -1, oy = 1;
      }
      const double before = mag.clamped(x - ox, y - oy);
      const double after = mag.clamped(x + ox, y + oy);
      const bool inside_before = x - ox >= 0 && x - ox < W && y - oy >= 0 && y - oy < H;
      const bool inside_after = x + ox >= 0 && x + ox < W && y + oy >= 0 && y + oy < H;
      if ((!inside_before || m > before) && (!inside_after || m >= after))
        thin[static_cast<std::size_t>(y) * W + x] = m;
    }

  const double hi = config.high * max_mag, lo = config.low * max_mag;
  std::vector<std::size_t> stack;
  for (std::size_t i = 0; i < thin.size(); ++i)
    if (thin[i] >= hi && thin[i] > 0.0) {
      edges.mask[i] = 1;
      stack.push_back(i);
    }
  while (!stack.empty()) {
    const std::size_t i = stack.back();
    stack.pop_back();
    const int x = static_cast<int>(i % W), y = static_cast<int>(i / W);
    for (int ny = std::max(0, y - 1); ny <= std::min(H - 1, y + 1); ++ny)
      for (int nx = std::max(0, x - 1); nx <= std::min(W - 1, x + 1); ++nx) {
        const std::size_t j = static_cast<std::size_t>(ny) * W + nx;
        if (!edges.mask[j] && thin[j] >= lo && thin[j] > 0.0) {
          edges.mask[j] = 1;
          stack.push_back(j);
        }
      }
  }
  return edges;
}

}  // namespace evdn
