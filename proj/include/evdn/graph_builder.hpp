#pragma once

#include <cstdint>
#include <vector>

#include "evdn/event.hpp"

namespace evdn {

/// Local-volume shape: a (2L+1)x(2L+1) pixel window over the preceding T microseconds,
/// holding at most n_max neighbors.
struct VolumeSpec {
  int half_extent = 2;
  std::int64_t depth_us = 50'000;
  std::size_t n_max = 10;

  int window() const { return 2 * half_extent + 1; }
  void validate() const;
  friend bool operator==(const VolumeSpec&, const VolumeSpec&) = default;
};

/// A stored past event. `seq` is the arrival index, used to order simultaneous events.
struct NeighborEvent {
  int x = 0;
  int y = 0;
  std::int64_t t = 0;
  std::uint64_t seq = 0;

  friend bool operator==(const NeighborEvent&, const NeighborEvent&) = default;
};

struct RawNode {
  int x = 0;
  int y = 0;
  std::int64_t t = 0;
  friend bool operator==(const RawNode&, const RawNode&) = default;
};

/// Star graph: every neighbor has a directed edge into the interest node.
/// Neighbors are ordered newest first, later arrival first on equal timestamps.
struct EventGraph {
  RawNode interest;
  std::vector<RawNode> neighbors;

  std::size_t node_count() const { return neighbors.size() + 1; }
  friend bool operator==(const EventGraph&, const EventGraph&) = default;
};

struct NormalizedNode {
  double x = 0.0;
  double y = 0.0;
  double t = 0.0;
  friend bool operator==(const NormalizedNode&, const NormalizedNode&) = default;
};

/// Node 0 is the interest node; features are in [0.05, 0.95].
struct NormalizedGraph {
  std::vector<NormalizedNode> nodes;
  std::size_t node_count() const { return nodes.size(); }
  friend bool operator==(const NormalizedGraph&, const NormalizedGraph&) = default;
};

inline constexpr double kNormLow = 0.05;
inline constexpr double kNormHigh = 0.95;

/// Per-pixel ring buffers of the K most recent events.
class RecencyStore {
 public:
  RecencyStore(SensorGeometry geometry, std::size_t capacity);

  void insert(const Event& e);

  /// The <= n_max most recent stored events inside e's local volume. Call before inserting e.
  std::vector<NeighborEvent> query(const Event& e, const VolumeSpec& spec) const;
  /// As query(), reusing `out` to avoid allocation.
  void query_into(const Event& e, const VolumeSpec& spec, std::vector<NeighborEvent>& out) const;

  /// Stored timestamps at one pixel, newest first.
  std::vector<std::int64_t> timestamps_at(int x, int y) const;

  std::size_t capacity() const { return capacity_; }
  const SensorGeometry& geometry() const { return geometry_; }
  std::uint64_t inserted() const { return next_seq_; }
  void clear();

 private:
  struct Slot {
    std::int64_t t;
    std::uint64_t seq;
  };

  SensorGeometry geometry_;
  std::size_t capacity_;
  std::vector<Slot> slots_;
  std::vector<std::uint32_t> head_;   // next write position per pixel
  std::vector<std::uint32_t> count_;  // filled entries per pixel
  std::uint64_t next_seq_ = 0;
  std::int64_t last_t_ = 0;
};

EventGraph build_graph(const Event& e, const std::vector<NeighborEvent>& neighbors,
                       const VolumeSpec& spec);

NormalizedGraph normalize_graph(const EventGraph& g, const VolumeSpec& spec);

/// Streaming wrapper: query, build and normalize, then insert.
class GraphBuilder {
 public:
  GraphBuilder(SensorGeometry geometry, VolumeSpec spec, std::size_t capacity = 0);

  /// Graph for `e` against everything seen so far; `e` is inserted afterwards.
  EventGraph next(const Event& e);
  void skip(const Event& e) { store_.insert(e); }

  const VolumeSpec& spec() const { return spec_; }
  const RecencyStore& store() const { return store_; }

 private:
  VolumeSpec spec_;
  RecencyStore store_;
};

}  // namespace evdn
