#include "evdn/graph_builder.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace evdn {

void VolumeSpec::validate() const {
  if (half_extent < 0) throw std::invalid_argument("volume half extent L must be >= 0");
  if (depth_us <= 0) throw std::invalid_argument("volume depth T must be > 0");
}

RecencyStore::RecencyStore(SensorGeometry geometry, std::size_t capacity)
    : geometry_(geometry),
      capacity_(capacity),
      slots_(geometry.pixel_count() * capacity),
      head_(geometry.pixel_count(), 0),
      count_(geometry.pixel_count(), 0) {
  if (capacity == 0) throw std::invalid_argument("recency store capacity must be >= 1");
}

void RecencyStore::clear() {
  std::fill(head_.begin(), head_.end(), 0u);
  std::fill(count_.begin(), count_.end(), 0u);
  next_seq_ = 0;
  last_t_ = 0;
}

void RecencyStore::insert(const Event& e) {
  if (!geometry_.contains(e.x, e.y))
    throw std::out_of_range("event at (" + std::to_string(e.x) + "," + std::to_string(e.y) +
                            ") outside sensor geometry");
  if (next_seq_ > 0 && e.t < last_t_)
    throw std::invalid_argument("recency store requires non-decreasing timestamps");
  std::size_t pix = geometry_.index(e.x, e.y);
  std::uint32_t h = head_[pix];
  slots_[pix * capacity_ + h] = Slot{e.t, next_seq_++};
  head_[pix] = static_cast<std::uint32_t>((h + 1) % capacity_);
  if (count_[pix] < capacity_) ++count_[pix];
  last_t_ = e.t;
}

std::vector<std::int64_t> RecencyStore::timestamps_at(int x, int y) const {
  std::size_t pix = geometry_.index(x, y);
  std::vector<std::int64_t> out;
  const Slot* base = slots_.data() + pix * capacity_;
  std::uint32_t h = head_[pix];
  for (std::uint32_t k = 0; k < count_[pix]; ++k) {
    std::uint32_t slot = static_cast<std::uint32_t>((h + capacity_ - 1 - k) % capacity_);
    out.push_back(base[slot].t);
  }
  return out;
}

std::vector<NeighborEvent> RecencyStore::query(const Event& e, const VolumeSpec& spec) const {
  std::vector<NeighborEvent> found;
  query_into(e, spec, found);
  return found;
}

void RecencyStore::query_into(const Event& e, const VolumeSpec& spec,
                              std::vector<NeighborEvent>& found) const {
  found.clear();
  if (spec.n_max == 0) return;
  const int L = spec.half_extent;
  const std::int64_t oldest = e.t - spec.depth_us;
  const int x0 = std::max(0, e.x - L), x1 = std::min(geometry_.width - 1, e.x + L);
  const int y0 = std::max(0, e.y - L), y1 = std::min(geometry_.height - 1, e.y + L);
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      std::size_t pix = geometry_.index(x, y);
      const Slot* base = slots_.data() + pix * capacity_;
      std::uint32_t h = head_[pix];
      for (std::uint32_t k = 0; k < count_[pix]; ++k) {
        const Slot& s = base[(h + capacity_ - 1 - k) % capacity_];
        if (s.t < oldest) break;
        if (s.t <= e.t) found.push_back(NeighborEvent{x, y, s.t, s.seq});
      }
    }
  }
  auto newer = [](const NeighborEvent& a, const NeighborEvent& b) {
    return a.t != b.t ? a.t > b.t : a.seq > b.seq;
  };
  if (found.size() > spec.n_max) {
    std::partial_sort(found.begin(), found.begin() + static_cast<std::ptrdiff_t>(spec.n_max),
                      found.end(), newer);
    found.resize(spec.n_max);
  } else {
    std::sort(found.begin(), found.end(), newer);
  }
}

EventGraph build_graph(const Event& e, const std::vector<NeighborEvent>& neighbors,
                       const VolumeSpec& spec) {
  EventGraph g;
  g.interest = RawNode{e.x, e.y, e.t};
  std::size_t n = std::min(neighbors.size(), spec.n_max);
  g.neighbors.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    g.neighbors.push_back(RawNode{neighbors[i].x, neighbors[i].y, neighbors[i].t});
  return g;
}

NormalizedGraph normalize_graph(const EventGraph& g, const VolumeSpec& spec) {
  const double span = kNormHigh - kNormLow;
  const double L = spec.half_extent;
  const double T = static_cast<double>(spec.depth_us);
  auto map_space = [&](int v, int center) {
    if (spec.half_extent == 0) return 0.5 * (kNormLow + kNormHigh);
    return kNormLow + span * (static_cast<double>(v - center) + L) / (2.0 * L);
  };
  auto map_time = [&](std::int64_t t) {
    return kNormLow + span * (T - static_cast<double>(g.interest.t - t)) / T;
  };
  NormalizedGraph out;
  out.nodes.reserve(g.node_count());
  out.nodes.push_back({map_space(g.interest.x, g.interest.x), map_space(g.interest.y, g.interest.y),
                       map_time(g.interest.t)});
  for (const auto& n : g.neighbors)
    out.nodes.push_back({map_space(n.x, g.interest.x), map_space(n.y, g.interest.y), map_time(n.t)});
  return out;
}

GraphBuilder::GraphBuilder(SensorGeometry geometry, VolumeSpec spec, std::size_t capacity)
    : spec_(spec), store_(geometry, capacity == 0 ? std::max<std::size_t>(spec.n_max, 1) : capacity) {
  spec_.validate();
}

EventGraph GraphBuilder::next(const Event& e) {
  auto neighbors = store_.query(e, spec_);
  EventGraph g = build_graph(e, neighbors, spec_);
  store_.insert(e);
  return g;
}

}  // namespace evdn
