#include "evdn/filters.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace evdn {

namespace {

constexpr std::int64_t kNever = std::numeric_limits<std::int64_t>::min();

bool within(std::int64_t prev, std::int64_t now, std::int64_t window) {
  return prev != kNever && prev < now && prev >= now - window;
}

void require_inside(const SensorGeometry& g, const Event& e) {
  if (!g.contains(e.x, e.y)) throw std::out_of_range("event outside sensor geometry");
}

}  // namespace

std::vector<Decision> EventFilter::run_batch(std::span<const Event> events) {
  std::vector<Decision> out;
  out.reserve(events.size());
  for (const auto& e : events) out.push_back(step(e));
  return out;
}

std::vector<Decision> run_filter(std::span<const Event> events, EventFilter& filter) {
  return filter.run_batch(events);
}

// --- Delbruck background activity ------------------------------------------------

BaFilter::BaFilter(SensorGeometry geometry, BaConfig config)
    : geometry_(geometry), config_(config), last_(geometry.pixel_count(), kNever) {}

void BaFilter::reset() { std::fill(last_.begin(), last_.end(), kNever); }

Decision BaFilter::step(const Event& e) {
  require_inside(geometry_, e);
  const int L = config_.half_extent;
  int support = 0;
  for (int y = std::max(0, e.y - L); y <= std::min(geometry_.height - 1, e.y + L); ++y)
    for (int x = std::max(0, e.x - L); x <= std::min(geometry_.width - 1, e.x + L); ++x)
      if (within(last_[geometry_.index(x, y)], e.t, config_.window_us)) ++support;
  last_[geometry_.index(e.x, e.y)] = e.t;
  return support >= config_.min_support ? Decision::real : Decision::noise;
}

// --- Nearest neighbour ------------------------------------------------------------

NnbFilter::NnbFilter(SensorGeometry geometry, NnbConfig config)
    : geometry_(geometry), config_(config), last_(geometry.pixel_count(), kNever) {}

void NnbFilter::reset() { std::fill(last_.begin(), last_.end(), kNever); }

Decision NnbFilter::step(const Event& e) {
  require_inside(geometry_, e);
  const int L = config_.half_extent;
  bool supported = false;
  for (int y = std::max(0, e.y - L); y <= std::min(geometry_.height - 1, e.y + L) && !supported; ++y)
    for (int x = std::max(0, e.x - L); x <= std::min(geometry_.width - 1, e.x + L); ++x)
      if (within(last_[geometry_.index(x, y)], e.t, config_.window_us)) {
        supported = true;
        break;
      }
  last_[geometry_.index(e.x, e.y)] = e.t;
  return supported ? Decision::real : Decision::noise;
}

// --- Liu sub-sampled groups -------------------------------------------------------

LiuFilter::LiuFilter(SensorGeometry geometry, LiuConfig config)
    : geometry_(geometry), config_(config) {
  if (config.subsample < 0 || config.subsample > 8)
    throw std::invalid_argument("Liu subsample factor out of range");
  const int size = 1 << config.subsample;
  gx_ = (geometry.width + size - 1) / size;
  gy_ = (geometry.height + size - 1) / size;
  last_.assign(static_cast<std::size_t>(gx_) * static_cast<std::size_t>(gy_), kNever);
}

void LiuFilter::reset() { std::fill(last_.begin(), last_.end(), kNever); }

Decision LiuFilter::step(const Event& e) {
  require_inside(geometry_, e);
  const int cx = e.x >> config_.subsample;
  const int cy = e.y >> config_.subsample;
  bool supported = false;
  for (int y = std::max(0, cy - 1); y <= std::min(gy_ - 1, cy + 1) && !supported; ++y)
    for (int x = std::max(0, cx - 1); x <= std::min(gx_ - 1, cx + 1); ++x)
      if (within(last_[static_cast<std::size_t>(y) * gx_ + x], e.t, config_.window_us)) {
        supported = true;
        break;
      }
  last_[static_cast<std::size_t>(cy) * gx_ + cx] = e.t;
  return supported ? Decision::real : Decision::noise;
}

// --- Khodamoradi row/column -------------------------------------------------------

KhodamoradiFilter::KhodamoradiFilter(SensorGeometry geometry, KhodamoradiConfig config)
    : geometry_(geometry),
      config_(config),
      columns_(static_cast<std::size_t>(geometry.width)),
      rows_(static_cast<std::size_t>(geometry.height)) {}

void KhodamoradiFilter::reset() {
  std::fill(columns_.begin(), columns_.end(), Cell{});
  std::fill(rows_.begin(), rows_.end(), Cell{});
}

Decision KhodamoradiFilter::step(const Event& e) {
  require_inside(geometry_, e);
  auto supports = [&](const Cell& c) {
    return within(c.t, e.t, config_.window_us) && (!config_.match_polarity || c.p == e.p);
  };
  bool column_ok = false;
  for (int x = std::max(0, e.x - 1); x <= std::min(geometry_.width - 1, e.x + 1); ++x)
    column_ok = column_ok || supports(columns_[static_cast<std::size_t>(x)]);
  bool row_ok = false;
  for (int y = std::max(0, e.y - 1); y <= std::min(geometry_.height - 1, e.y + 1); ++y)
    row_ok = row_ok || supports(rows_[static_cast<std::size_t>(y)]);
  columns_[static_cast<std::size_t>(e.x)] = Cell{e.t, e.p};
  rows_[static_cast<std::size_t>(e.y)] = Cell{e.t, e.p};
  return column_ok && row_ok ? Decision::real : Decision::noise;
}

// --- Yang density -----------------------------------------------------------------

YangFilter::YangFilter(SensorGeometry geometry, YangConfig config)
    : geometry_(geometry),
      config_(config),
      recent_(geometry.pixel_count()),
      hot_(geometry.pixel_count(), 0) {
  if (config.hot_window_us < config.window_us)
    throw std::invalid_argument("Yang hot-pixel window must cover the density window");
}

void YangFilter::reset() {
  for (auto& d : recent_) d.clear();
  std::fill(hot_.begin(), hot_.end(), 0);
}

std::size_t YangFilter::memory_cells() const { return geometry_.pixel_count(); }

void YangFilter::expire(std::size_t pix, std::int64_t now) {
  auto& d = recent_[pix];
  while (!d.empty() && d.front() < now - config_.hot_window_us) d.pop_front();
}

Decision YangFilter::step(const Event& e) {
  require_inside(geometry_, e);
  const int L = config_.half_extent;
  const std::size_t own = geometry_.index(e.x, e.y);
  int density = 1;  // the arriving event
  int neighbourhood = 0;
  for (int y = std::max(0, e.y - L); y <= std::min(geometry_.height - 1, e.y + L); ++y)
    for (int x = std::max(0, e.x - L); x <= std::min(geometry_.width - 1, e.x + L); ++x) {
      const std::size_t pix = geometry_.index(x, y);
      if (pix == own) continue;
      expire(pix, e.t);
      const auto& d = recent_[pix];
      for (auto it = d.rbegin(); it != d.rend(); ++it) {
        if (*it >= e.t) continue;
        if (*it < e.t - config_.window_us) break;
        ++density;
      }
      for (auto ts : d)
        if (ts < e.t) ++neighbourhood;
    }
  expire(own, e.t);
  recent_[own].push_back(e.t);
  const bool hot = static_cast<int>(recent_[own].size()) >= config_.hot_count &&
                   neighbourhood < config_.hot_support;
  hot_[own] = hot ? 1 : 0;
  return density >= config_.density && !hot ? Decision::real : Decision::noise;
}

// --- factory ----------------------------------------------------------------------

std::vector<std::string> baseline_names() {
  return {"ba", "nnb", "liu1", "liu2", "khodamoradi", "yang"};
}

std::unique_ptr<EventFilter> make_baseline(const std::string& name, SensorGeometry geometry,
                                           const BaselineConfigs& configs) {
  if (name == "ba") return std::make_unique<BaFilter>(geometry, configs.ba);
  if (name == "nnb") return std::make_unique<NnbFilter>(geometry, configs.nnb);
  if (name == "liu1" || name == "liu2") {
    LiuConfig c = configs.liu;
    c.subsample = name == "liu1" ? 1 : 2;
    return std::make_unique<LiuFilter>(geometry, c);
  }
  if (name == "khodamoradi") return std::make_unique<KhodamoradiFilter>(geometry, configs.khodamoradi);
  if (name == "yang") return std::make_unique<YangFilter>(geometry, configs.yang);
  throw std::invalid_argument("unknown filter '" + name + "'");
}

}  // namespace evdn
