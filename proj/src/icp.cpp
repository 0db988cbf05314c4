#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "evdn/kogtl.hpp"

namespace evdn {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// 1-D squared distance transform of a sampled function (lower envelope of parabolas).
void dt1d(const std::vector<double>& f, std::vector<double>& d) {
  const int n = static_cast<int>(f.size());
  std::vector<int> v(static_cast<std::size_t>(n));
  std::vector<double> z(static_cast<std::size_t>(n) + 1);
  int k = -1;
  for (int q = 0; q < n; ++q) {
    if (f[q] == kInf) continue;
    if (k < 0) {
      k = 0;
      v[0] = q;
      z[0] = -kInf;
      z[1] = kInf;
      continue;
    }
    double s;
    while (true) {
      const int p = v[k];
      s = ((f[q] + static_cast<double>(q) * q) - (f[p] + static_cast<double>(p) * p)) / (2.0 * (q - p));
      if (s <= z[k] && k > 0) {
        --k;
        continue;
      }
      break;
    }
    if (s <= z[k]) {  // k == 0 and the new parabola dominates everywhere
      v[0] = q;
      z[0] = -kInf;
      z[1] = kInf;
      continue;
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = kInf;
  }
  d.assign(static_cast<std::size_t>(n), kInf);
  if (k < 0) return;
  int j = 0;
  for (int q = 0; q < n; ++q) {
    while (z[j + 1] < q) ++j;
    const double diff = q - v[j];
    d[q] = diff * diff + f[v[j]];
  }
}

}  // namespace

std::vector<double> distance_transform(const EdgeMap& edges) {
  const int W = edges.width, H = edges.height;
  std::vector<double> grid(static_cast<std::size_t>(W) * H);
  for (std::size_t i = 0; i < grid.size(); ++i) grid[i] = edges.mask[i] ? 0.0 : kInf;
  std::vector<double> f, d;
  for (int x = 0; x < W; ++x) {
    f.resize(static_cast<std::size_t>(H));
    for (int y = 0; y < H; ++y) f[y] = grid[static_cast<std::size_t>(y) * W + x];
    dt1d(f, d);
    for (int y = 0; y < H; ++y) grid[static_cast<std::size_t>(y) * W + x] = d[y];
  }
  for (int y = 0; y < H; ++y) {
    f.assign(grid.begin() + static_cast<std::ptrdiff_t>(y) * W,
             grid.begin() + static_cast<std::ptrdiff_t>(y + 1) * W);
    dt1d(f, d);
    for (int x = 0; x < W; ++x) grid[static_cast<std::size_t>(y) * W + x] = std::sqrt(d[x]);
  }
  return grid;
}

IcpResult icp_align(std::span<const Point2> points, const EdgeMap& edges, const IcpConfig& config) {
  if (points.empty()) throw std::invalid_argument("ICP needs at least one point");
  if (edges.count() == 0) throw std::invalid_argument("ICP needs a non-empty edge map");
  if (config.max_iterations < 1) throw std::invalid_argument("ICP needs at least one iteration");
  const int W = edges.width, H = edges.height;
  const std::vector<double> dist = distance_transform(edges);
  const double cap = config.max_distance;
  const double cap2 = cap * cap;

  // Closest point on the edge curve: edge pixels joined to their 8-neighbours by segments.
  // Returns squared distance and writes the foot point.
  auto closest_on_curve = [&](double qx, double qy, int rx, int ry, int radius, double& bx, double& by) {
    double best = kInf;
    for (int y = std::max(0, ry - radius); y <= std::min(H - 1, ry + radius); ++y)
      for (int x = std::max(0, rx - radius); x <= std::min(W - 1, rx + radius); ++x) {
        if (!edges.at(x, y)) continue;
        auto consider = [&](double px, double py) {
          const double d2 = (px - qx) * (px - qx) + (py - qy) * (py - qy);
          if (d2 < best) best = d2, bx = px, by = py;
        };
        consider(x, y);
        // each segment once: to the neighbours after (x, y) in raster order
        static constexpr int kNext[4][2] = {{1, 0}, {-1, 1}, {0, 1}, {1, 1}};
        for (const auto& n : kNext) {
          const int nx = x + n[0], ny = y + n[1];
          if (nx < 0 || nx >= W || ny >= H || !edges.at(nx, ny)) continue;
          const double sx = n[0], sy = n[1];
          const double u = std::clamp(((qx - x) * sx + (qy - y) * sy) / (sx * sx + sy * sy), 0.0, 1.0);
          consider(x + u * sx, y + u * sy);
        }
      }
    return best;
  };

  IcpResult result;
  auto assign = [&](double& sum_dx, double& sum_dy, std::size_t& inliers) {
    double cost = 0.0;
    sum_dx = sum_dy = 0.0;
    inliers = 0;
    for (const auto& p : points) {
      const double qx = p.x - result.dx, qy = p.y - result.dy;
      const int rx = std::clamp(static_cast<int>(std::lround(qx)), 0, W - 1);
      const int ry = std::clamp(static_cast<int>(std::lround(qy)), 0, H - 1);
      const double off = std::hypot(qx - rx, qy - ry);
      // The curve is never farther than half a diagonal from its pixels.
      const double bound = dist[static_cast<std::size_t>(ry) * W + rx];
      if (bound - off - M_SQRT1_2 > cap) {
        cost += cap2;
        continue;
      }
      const int radius = static_cast<int>(std::ceil(std::min(bound + 2.0 * off, cap + off))) + 2;
      double bx = 0, by = 0;
      const double best = closest_on_curve(qx, qy, rx, ry, radius, bx, by);
      if (best > cap2) {
        cost += cap2;
        continue;
      }
      cost += best;
      sum_dx += qx - bx;
      sum_dy += qy - by;
      ++inliers;
    }
    return std::sqrt(cost / static_cast<double>(points.size()));
  };

  for (int it = 0; it < config.max_iterations; ++it) {
    double sx, sy;
    std::size_t inliers;
    const double residual = assign(sx, sy, inliers);
    result.residual_history.push_back(residual);
    result.residual = residual;
    result.inliers = inliers;
    result.iterations = it + 1;
    if (inliers == 0) break;
    const double ux = sx / static_cast<double>(inliers), uy = sy / static_cast<double>(inliers);
    result.dx += ux;
    result.dy += uy;
    if (std::hypot(ux, uy) < config.tolerance) {
      result.converged = true;
      break;
    }
  }
  // Residual at the final translation.
  double sx, sy;
  std::size_t inliers;
  result.residual = assign(sx, sy, inliers);
  result.inliers = inliers;
  return result;
}

}  // namespace evdn
