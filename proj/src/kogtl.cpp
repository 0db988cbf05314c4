#include "evdn/kogtl.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace evdn {

Synchronization synchronize(const EventStream& events, std::span<const ApsFrame> frames,
                            std::int64_t start_offset_us) {
  if (frames.empty()) throw std::invalid_argument("no frames to synchronize against");
  for (std::size_t i = 1; i < frames.size(); ++i)
    if (frames[i].t_us < frames[i - 1].t_us) throw std::invalid_argument("frames are not sorted by time");
  const auto ev = events.events();
  // first event index whose shifted time is >= t
  auto first_at = [&](std::int64_t t) {
    return static_cast<std::size_t>(
        std::lower_bound(ev.begin(), ev.end(), t,
                         [&](const Event& e, std::int64_t v) { return e.t - start_offset_us < v; }) -
        ev.begin());
  };
  Synchronization sync;
  sync.pre_end = first_at(frames.front().t_us);
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const std::size_t b = first_at(frames[i].t_us);
    const std::size_t e = i + 1 < frames.size() ? first_at(frames[i + 1].t_us) : ev.size();
    sync.batches.push_back(FrameBatch{i, b, e});
  }
  return sync;
}

namespace {

// Chebyshev dilation of the edge mask by B.
std::vector<std::uint8_t> dilate(const EdgeMap& edges, int B) {
  const int W = edges.width, H = edges.height;
  std::vector<std::uint8_t> rows(edges.mask.size(), 0), out(edges.mask.size(), 0);
  for (int y = 0; y < H; ++y) {
    int last = -1000000;  // column of the most recent edge pixel to the left
    for (int x = 0; x < W; ++x) {
      if (edges.at(x, y)) last = x;
      if (x - last <= B) rows[static_cast<std::size_t>(y) * W + x] = 1;
    }
    last = 1000000;
    for (int x = W - 1; x >= 0; --x) {
      if (edges.at(x, y)) last = x;
      if (last - x <= B) rows[static_cast<std::size_t>(y) * W + x] = 1;
    }
  }
  for (int x = 0; x < W; ++x) {
    int last = -1000000;
    for (int y = 0; y < H; ++y) {
      if (rows[static_cast<std::size_t>(y) * W + x]) last = y;
      if (y - last <= B) out[static_cast<std::size_t>(y) * W + x] = 1;
    }
    last = 1000000;
    for (int y = H - 1; y >= 0; --y) {
      if (rows[static_cast<std::size_t>(y) * W + x]) last = y;
      if (last - y <= B) out[static_cast<std::size_t>(y) * W + x] = 1;
    }
  }
  return out;
}

}  // namespace

std::vector<Label> label_events(std::span<const Event> batch, const EdgeMap& edges, double dx,
                                double dy, int B) {
  if (B < 0) throw std::invalid_argument("proximity window B must be >= 0");
  const auto near = dilate(edges, B);
  std::vector<Label> out;
  out.reserve(batch.size());
  for (const auto& e : batch) {
    const long x = std::lround(e.x - dx), y = std::lround(e.y - dy);
    const bool inside = x >= 0 && x < edges.width && y >= 0 && y < edges.height;
    out.push_back(inside && near[static_cast<std::size_t>(y) * edges.width + x] ? Label::real
                                                                               : Label::noise);
  }
  return out;
}

LabelingResult kogtl_pipeline(const EventStream& events, std::span<const ApsFrame> frames,
                              const LabelingConfig& config) {
  std::vector<ApsFrame> selected;
  for (const auto& f : frames)
    if (config.pose_tag.empty() || f.pose_tag == config.pose_tag) selected.push_back(f);
  if (selected.empty()) throw std::invalid_argument("no frames available for labeling");
  const auto sync = synchronize(events, selected, config.start_offset_us);

  std::vector<Event> out(events.begin(), events.end());
  LabelingResult result;
  for (std::size_t i = sync.pre_begin; i < sync.pre_end; ++i) out[i].label = Label::unknown;
  result.pre_frame_events = sync.pre_end - sync.pre_begin;

  for (const auto& b : sync.batches) {
    const ApsFrame& frame = selected[b.frame];
    BatchReport rep;
    rep.frame = b.frame;
    rep.frame_t_us = frame.t_us;
    rep.events = b.end - b.begin;
    if (rep.events == 0) {
      result.batches.push_back(rep);
      continue;
    }
    const EdgeMap edges = canny_edges(frame.image, config.canny, frame.t_us);
    rep.edge_pixels = edges.count();
    const auto batch = events.events().subspan(b.begin, b.end - b.begin);
    if (rep.edge_pixels > 0) {
      std::vector<Point2> pts;
      pts.reserve(batch.size());
      for (const auto& e : batch) pts.push_back({static_cast<double>(e.x), static_cast<double>(e.y)});
      rep.icp = icp_align(pts, edges, config.icp);
    }
    const auto labels = label_events(batch, edges, rep.icp.dx, rep.icp.dy, config.B);
    for (std::size_t k = 0; k < labels.size(); ++k) {
      out[b.begin + k].label = labels[k];
      if (labels[k] == Label::real) ++rep.labeled_real;
    }
    result.batches.push_back(rep);
  }
  result.stream = EventStream(std::move(out), events.geometry());
  return result;
}

}  // namespace evdn
