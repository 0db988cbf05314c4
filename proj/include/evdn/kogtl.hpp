#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "evdn/event.hpp"
#include "evdn/image.hpp"

namespace evdn {

struct CannyConfig {
  double sigma = 1.4;
  double low = 0.1;   // fraction of the largest gradient magnitude
  double high = 0.3;
};

struct EdgeMap {
  int width = 0;
  int height = 0;
  std::int64_t t_us = 0;
  std::vector<std::uint8_t> mask;

  bool at(int x, int y) const { return mask[static_cast<std::size_t>(y) * width + x] != 0; }
  std::size_t count() const;
  std::vector<std::pair<int, int>> pixels() const;
};

/// Gaussian blur, Sobel gradients, non-maximum suppression, double-threshold hysteresis.
EdgeMap canny_edges(const GrayImage& image, const CannyConfig& config = {}, std::int64_t t_us = 0);

/// Exact Euclidean distance (in pixels) from every pixel to the nearest edge pixel;
/// +inf everywhere when the map is empty.
std::vector<double> distance_transform(const EdgeMap& edges);

struct IcpConfig {
  int max_iterations = 50;
  double tolerance = 0.01;    // stop once the update norm falls below this, in pixels
  double max_distance = 6.0;  // correspondences farther than this count as outliers
};

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

/// `dx, dy` is the displacement of the points relative to the edges, so
/// point - (dx, dy) lands on the edge set. `residual` is the RMS point-to-edge distance
/// with outliers clamped to max_distance.
struct IcpResult {
  double dx = 0.0;
  double dy = 0.0;
  double residual = 0.0;
  int iterations = 0;
  bool converged = false;
  std::size_t inliers = 0;
  std::vector<double> residual_history;  // residual before each update
};

/// Translation-only ICP. Points are matched to the closest point of the edge curve, i.e. the edge
/// pixels joined to their 8-neighbours by straight segments.
IcpResult icp_align(std::span<const Point2> points, const EdgeMap& edges, const IcpConfig& config = {});

struct FrameBatch {
  std::size_t frame = 0;  // index into the frame list
  std::size_t begin = 0;  // event index range [begin, end)
  std::size_t end = 0;
};

struct Synchronization {
  std::size_t pre_begin = 0;  // events before the first frame
  std::size_t pre_end = 0;
  std::vector<FrameBatch> batches;
};

/// Batch i holds events with t_i <= t - offset < t_{i+1}; the last batch is unbounded above.
Synchronization synchronize(const EventStream& events, std::span<const ApsFrame> frames,
                            std::int64_t start_offset_us = 0);

/// Real iff the shifted pixel lies within Chebyshev distance B of an edge pixel.
std::vector<Label> label_events(std::span<const Event> batch, const EdgeMap& edges, double dx,
                                double dy, int B);

struct LabelingConfig {
  int B = 2;
  CannyConfig canny;
  IcpConfig icp;
  std::int64_t start_offset_us = 0;
  std::string pose_tag;  // when set, only frames carrying this tag are used
};

struct BatchReport {
  std::size_t frame = 0;
  std::int64_t frame_t_us = 0;
  std::size_t events = 0;
  std::size_t edge_pixels = 0;
  IcpResult icp;
  std::size_t labeled_real = 0;
};

struct LabelingResult {
  EventStream stream;  // input events with labels set; pre-frame events are unknown
  std::size_t pre_frame_events = 0;
  std::vector<BatchReport> batches;
};

LabelingResult kogtl_pipeline(const EventStream& events, std::span<const ApsFrame> frames,
                              const LabelingConfig& config = {});

}  // namespace evdn
