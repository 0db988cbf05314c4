#pragma once

#include <cstdint>
#include <deque>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "evdn/event.hpp"

namespace evdn {

enum class Decision : std::uint8_t { noise = 0, real = 1 };

/// Online event classifier: consumes one event at a time and updates its own state.
class EventFilter {
 public:
  virtual ~EventFilter() = default;

  virtual std::string name() const = 0;
  virtual Decision step(const Event& e) = 0;
  /// All events in one call. Must produce exactly the decisions of repeated step().
  virtual std::vector<Decision> run_batch(std::span<const Event> events);
  virtual void reset() = 0;
  /// Number of state cells the filter keeps for the configured sensor.
  virtual std::size_t memory_cells() const = 0;
};

std::vector<Decision> run_filter(std::span<const Event> events, EventFilter& filter);
inline std::vector<Decision> run_filter(const EventStream& stream, EventFilter& filter) {
  return run_filter(stream.events(), filter);
}

/// Delbruck background-activity filter: an event is real when at least `min_support`
/// pixels of the (2L+1)^2 window (own pixel included) fired within [t - T, t).
struct BaConfig {
  int half_extent = 1;
  std::int64_t window_us = 1000;
  int min_support = 8;
};

class BaFilter final : public EventFilter {
 public:
  BaFilter(SensorGeometry geometry, BaConfig config = {});
  std::string name() const override { return "ba"; }
  Decision step(const Event& e) override;
  void reset() override;
  std::size_t memory_cells() const override { return last_.size(); }

 private:
  SensorGeometry geometry_;
  BaConfig config_;
  std::vector<std::int64_t> last_;  // one timestamp cell per pixel
};

/// Nearest-neighbour filter: real when any pixel of the (2L+1)^2 window fired within [t - T, t).
struct NnbConfig {
  int half_extent = 1;
  std::int64_t window_us = 1000;
};

class NnbFilter final : public EventFilter {
 public:
  NnbFilter(SensorGeometry geometry, NnbConfig config = {});
  std::string name() const override { return "nnb"; }
  Decision step(const Event& e) override;
  void reset() override;
  std::size_t memory_cells() const override { return last_.size(); }

 private:
  SensorGeometry geometry_;
  NnbConfig config_;
  std::vector<std::int64_t> last_;
};

/// Liu sub-sampled filter: one timestamp cell per 2^S x 2^S pixel group; real when the
/// event's group or one of its 8 neighbouring groups holds a timestamp in [t - T, t).
struct LiuConfig {
  int subsample = 1;
  std::int64_t window_us = 1000;
};

class LiuFilter final : public EventFilter {
 public:
  LiuFilter(SensorGeometry geometry, LiuConfig config = {});
  std::string name() const override { return "liu" + std::to_string(config_.subsample); }
  Decision step(const Event& e) override;
  void reset() override;
  std::size_t memory_cells() const override { return last_.size(); }
  int groups_x() const { return gx_; }
  int groups_y() const { return gy_; }

 private:
  SensorGeometry geometry_;
  LiuConfig config_;
  int gx_ = 0;
  int gy_ = 0;
  std::vector<std::int64_t> last_;
};

/// Khodamoradi row/column filter: one (timestamp, polarity) record per column and per row.
/// Real when a column record in {x-1, x, x+1} and a row record in {y-1, y, y+1} are both
/// within [t - T, t); the event then overwrites column x and row y.
struct KhodamoradiConfig {
  std::int64_t window_us = 1000;
  bool match_polarity = false;
};

class KhodamoradiFilter final : public EventFilter {
 public:
  struct Cell {
    std::int64_t t = kEmpty;
    int p = 0;
  };
  static constexpr std::int64_t kEmpty = INT64_MIN;

  KhodamoradiFilter(SensorGeometry geometry, KhodamoradiConfig config = {});
  std::string name() const override { return "khodamoradi"; }
  Decision step(const Event& e) override;
  void reset() override;
  /// Record pairs: exactly width + height.
  std::size_t memory_cells() const override { return columns_.size() + rows_.size(); }
  const Cell& column(int x) const { return columns_[static_cast<std::size_t>(x)]; }
  const Cell& row(int y) const { return rows_[static_cast<std::size_t>(y)]; }

 private:
  SensorGeometry geometry_;
  KhodamoradiConfig config_;
  std::vector<Cell> columns_;
  std::vector<Cell> rows_;
};

/// Yang density filter. Density counts the arriving event plus events from other pixels in
/// the (2L+1)^2 x T region; real when density >= threshold and the pixel is not hot.
/// A pixel is hot when, over the trailing hot window, it fired at least `hot_count` times
/// while its neighbourhood (itself excluded) produced fewer than `hot_support` events.
struct YangConfig {
  int half_extent = 2;
  std::int64_t window_us = 5000;
  int density = 3;
  std::int64_t hot_window_us = 100'000;
  int hot_count = 20;
  int hot_support = 3;
};

class YangFilter final : public EventFilter {
 public:
  YangFilter(SensorGeometry geometry, YangConfig config = {});
  std::string name() const override { return "yang"; }
  Decision step(const Event& e) override;
  void reset() override;
  std::size_t memory_cells() const override;
  bool is_hot(int x, int y) const { return hot_[geometry_.index(x, y)] != 0; }

 private:
  void expire(std::size_t pix, std::int64_t now);

  SensorGeometry geometry_;
  YangConfig config_;
  std::vector<std::deque<std::int64_t>> recent_;  // per-pixel timestamps within the hot window
  std::vector<std::uint8_t> hot_;
};

/// Factory for the conventional filters by CLI name: ba, nnb, liu1, liu2, khodamoradi, yang.
struct BaselineConfigs {
  BaConfig ba;
  NnbConfig nnb;
  LiuConfig liu;  // subsample is taken from the filter name
  KhodamoradiConfig khodamoradi;
  YangConfig yang;
};

std::unique_ptr<EventFilter> make_baseline(const std::string& name, SensorGeometry geometry,
                                           const BaselineConfigs& configs = {});
std::vector<std::string> baseline_names();

}  // namespace evdn
