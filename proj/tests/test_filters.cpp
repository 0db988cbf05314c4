#include <doctest.h>

#include <algorithm>
#include <map>

#include "evdn/filters.hpp"
#include "test_util.hpp"

using namespace evdn;

namespace {

const SensorGeometry kGeo{64, 48};

std::vector<Decision> run(EventFilter& f, const std::vector<Event>& ev) {
  std::vector<Decision> out;
  for (const auto& e : ev) out.push_back(f.step(e));
  return out;
}

constexpr Decision R = Decision::real;
constexpr Decision N = Decision::noise;

bool in_window(std::int64_t prev, std::int64_t now, std::int64_t T) { return prev < now && prev >= now - T; }

// Latest strictly earlier event index satisfying pred, or -1.
template <class Pred>
long last_before(std::span<const Event> ev, std::size_t i, Pred pred) {
  for (std::size_t j = i; j-- > 0;)
    if (pred(ev[j])) return static_cast<long>(j);
  return -1;
}

std::vector<Decision> oracle_ba(std::span<const Event> ev, const BaConfig& c) {
  std::vector<Decision> out;
  for (std::size_t i = 0; i < ev.size(); ++i) {
    int support = 0;
    for (int dy = -c.half_extent; dy <= c.half_extent; ++dy)
      for (int dx = -c.half_extent; dx <= c.half_extent; ++dx) {
        const int x = ev[i].x + dx, y = ev[i].y + dy;
        long j = last_before(ev, i, [&](const Event& e) { return e.x == x && e.y == y; });
        if (j >= 0 && in_window(ev[j].t, ev[i].t, c.window_us)) ++support;
      }
    out.push_back(support >= c.min_support ? R : N);
  }
  return out;
}

std::vector<Decision> oracle_nnb(std::span<const Event> ev, const NnbConfig& c) {
  BaConfig b{c.half_extent, c.window_us, 1};
  return oracle_ba(ev, b);
}

std::vector<Decision> oracle_liu(std::span<const Event> ev, const LiuConfig& c) {
  std::vector<Decision> out;
  const int s = c.subsample;
  for (std::size_t i = 0; i < ev.size(); ++i) {
    bool ok = false;
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        const int gx = (ev[i].x >> s) + dx, gy = (ev[i].y >> s) + dy;
        long j = last_before(ev, i, [&](const Event& e) { return (e.x >> s) == gx && (e.y >> s) == gy; });
        ok = ok || (j >= 0 && in_window(ev[j].t, ev[i].t, c.window_us));
      }
    out.push_back(ok ? R : N);
  }
  return out;
}

std::vector<Decision> oracle_khodamoradi(std::span<const Event> ev, const KhodamoradiConfig& c) {
  std::vector<Decision> out;
  for (std::size_t i = 0; i < ev.size(); ++i) {
    auto ok_with = [&](long j) {
      return j >= 0 && in_window(ev[j].t, ev[i].t, c.window_us) && (!c.match_polarity || ev[j].p == ev[i].p);
    };
    bool col = false, row = false;
    for (int d = -1; d <= 1; ++d) {
      col = col || ok_with(last_before(ev, i, [&](const Event& e) { return e.x == ev[i].x + d; }));
      row = row || ok_with(last_before(ev, i, [&](const Event& e) { return e.y == ev[i].y + d; }));
    }
    out.push_back(col && row ? R : N);
  }
  return out;
}

std::vector<Decision> oracle_yang(std::span<const Event> ev, const YangConfig& c) {
  std::vector<Decision> out;
  for (std::size_t i = 0; i < ev.size(); ++i) {
    const auto& e = ev[i];
    int density = 1, support = 0, own = 1;
    for (std::size_t j = 0; j < i; ++j) {
      const auto& o = ev[j];
      const bool same = o.x == e.x && o.y == e.y;
      if (same) {
        own += o.t >= e.t - c.hot_window_us;
        continue;
      }
      if (std::abs(o.x - e.x) > c.half_extent || std::abs(o.y - e.y) > c.half_extent) continue;
      if (in_window(o.t, e.t, c.window_us)) ++density;
      if (o.t < e.t && o.t >= e.t - c.hot_window_us) ++support;
    }
    const bool hot = own >= c.hot_count && support < c.hot_support;
    out.push_back(density >= c.density && !hot ? R : N);
  }
  return out;
}

}  // namespace

TEST_CASE("the first event is always noise") {
  const Event e{1000, 10, 10, 1};
  for (const auto& name : baseline_names()) {
    CAPTURE(name);
    auto f = make_baseline(name, kGeo);
    CHECK(f->step(e) == N);
  }
  CHECK_THROWS_AS(make_baseline("median", kGeo), std::invalid_argument);
}

TEST_CASE("events outside the sensor are rejected") {
  for (const auto& name : baseline_names()) {
    auto f = make_baseline(name, kGeo);
    CHECK_THROWS_AS(f->step(Event{0, 64, 0, 1}), std::out_of_range);
  }
}

TEST_CASE("nearest neighbour 1 ms boundary") {
  NnbFilter f(kGeo);
  CHECK(run(f, {{0, 10, 10, 1}, {1000, 11, 11, 1}}) == std::vector{N, R});  // exactly T
  f.reset();
  CHECK(run(f, {{0, 10, 10, 1}, {1001, 11, 11, 1}}) == std::vector{N, N});  // just past T
  f.reset();
  CHECK(run(f, {{0, 10, 10, 1}, {0, 11, 11, 1}}) == std::vector{N, N});  // simultaneous is not support
  f.reset();
  CHECK(run(f, {{0, 10, 10, 1}, {500, 12, 10, 1}}) == std::vector{N, N});  // outside 3x3
  f.reset();
  CHECK(run(f, {{0, 10, 10, 1}, {500, 10, 10, -1}}) == std::vector{N, R});  // own pixel counts
  CHECK(f.memory_cells() == kGeo.pixel_count());
}

TEST_CASE("background activity needs k = 8 supporting pixels") {
  std::vector<Event> ev;
  std::int64_t t = 0;
  for (int dy = -1; dy <= 1; ++dy)
    for (int dx = -1; dx <= 1; ++dx)
      if (dx != 0 || dy != 0) ev.push_back({t += 10, 20 + dx, 20 + dy, 1});
  // 7 neighbours then the centre: 7 supports, noise
  auto seven = std::vector<Event>(ev.begin(), ev.begin() + 7);
  seven.push_back({t + 10, 20, 20, 1});
  BaFilter f(kGeo);
  CHECK(run(f, seven).back() == N);
  // all 8 neighbours then the centre: 8 supports, real
  f.reset();
  auto eight = ev;
  eight.push_back({t + 10, 20, 20, 1});
  CHECK(run(f, eight).back() == R);
  // same, but the centre arrives 1 ms after the oldest neighbour plus one microsecond
  f.reset();
  auto late = ev;
  late.push_back({ev.front().t + 1001, 20, 20, 1});
  CHECK(run(f, late).back() == N);
}

TEST_CASE("yang density threshold of 3 in a 5x5 x 5 ms region") {
  YangFilter f(kGeo);
  CHECK(run(f, {{0, 10, 10, 1}, {100, 12, 12, 1}}) == std::vector{N, N});  // density 2
  f.reset();
  CHECK(run(f, {{0, 10, 10, 1}, {100, 12, 12, 1}, {200, 11, 11, 1}}) == std::vector{N, N, R});  // density 3
  f.reset();
  CHECK(run(f, {{0, 10, 10, 1}, {100, 14, 12, 1}, {200, 11, 11, 1}}).back() == N);  // (14,12) outside the 5x5 around (11,11)
  f.reset();
  CHECK(run(f, {{0, 10, 10, 1}, {100, 12, 12, 1}, {5000, 11, 11, 1}}).back() == R);  // t - T exactly
  f.reset();
  CHECK(run(f, {{0, 10, 10, 1}, {100, 12, 12, 1}, {5001, 11, 11, 1}}).back() == N);
  f.reset();
  // repeats at the own pixel do not add density
  CHECK(run(f, {{0, 11, 11, 1}, {10, 11, 11, 1}, {20, 11, 11, 1}}).back() == N);
}

TEST_CASE("yang hot pixel") {
  YangFilter f(kGeo);
  std::vector<Decision> d;
  // supporting activity around (30, 30) keeps density high
  std::vector<Event> ev;
  for (int i = 0; i < 25; ++i) {
    ev.push_back({i * 1000, 31, 30, 1});
    ev.push_back({i * 1000 + 1, 30, 30, 1});
  }
  d = run(f, ev);
  CHECK_FALSE(f.is_hot(30, 30));
  // an isolated pixel firing rapidly becomes hot on its 20th event and stays suppressed
  f.reset();
  ev.clear();
  for (int i = 0; i < 30; ++i) ev.push_back({i * 100, 5, 5, 1});
  d = run(f, ev);
  CHECK(f.is_hot(5, 5));
  for (int i = 0; i < 30; ++i) CHECK(d[static_cast<std::size_t>(i)] == N);
  // once its recent count drops below the threshold it is no longer hot
  f.step({1'000'000, 5, 5, 1});
  CHECK_FALSE(f.is_hot(5, 5));
  CHECK_THROWS_AS(YangFilter(kGeo, YangConfig{2, 5000, 3, 1000, 20, 3}), std::invalid_argument);
}

TEST_CASE("liu groups") {
  LiuFilter f1(kGeo, {1, 1000});
  CHECK(f1.groups_x() == 32);
  CHECK(f1.groups_y() == 24);
  CHECK(f1.memory_cells() == 32u * 24u);
  CHECK(f1.name() == "liu1");
  // (0,0) is group (0,0); (3,3) is group (1,1), a neighbour; (4,4) is group (2,2), not a neighbour
  CHECK(run(f1, {{0, 0, 0, 1}, {10, 3, 3, 1}}) == std::vector{N, R});
  f1.reset();
  CHECK(run(f1, {{0, 0, 0, 1}, {10, 4, 4, 1}}) == std::vector{N, N});
  f1.reset();
  CHECK(run(f1, {{0, 0, 0, 1}, {10, 1, 1, 1}}) == std::vector{N, R});  // same group
  f1.reset();
  CHECK(run(f1, {{0, 0, 0, 1}, {1001, 1, 1, 1}}) == std::vector{N, N});
  LiuFilter f2(SensorGeometry{346, 260}, {2, 1000});
  CHECK(f2.groups_x() == 87);  // ceil(346 / 4)
  CHECK(f2.groups_y() == 65);
  CHECK(run(f2, {{0, 0, 0, 1}, {10, 7, 7, 1}, {20, 12, 12, 1}}) == std::vector{N, R, N});
  CHECK_THROWS(LiuFilter(kGeo, {-1, 1000}));
}

TEST_CASE("khodamoradi needs a row and a column record") {
  KhodamoradiFilter f(kGeo);
  CHECK(f.memory_cells() == 64u + 48u);
  CHECK(run(f, {{0, 5, 5, 1}, {100, 6, 20, 1}}) == std::vector{N, N});  // column only
  CHECK(f.column(6).t == 100);
  CHECK(f.row(20).t == 100);
  CHECK(f.step({200, 30, 21, 1}) == N);   // neither
  CHECK(f.step({300, 31, 4, 1}) == R);    // column 30 from t=200, row 5 from t=0
  CHECK(f.step({1301, 40, 40, 1}) == N);  // records all older than T
}

TEST_CASE("khodamoradi overwrite semantics") {
  KhodamoradiFilter f(kGeo, {1000, true});
  f.step({0, 5, 5, 1});
  f.step({10, 5, 40, -1});  // overwrites column 5 with polarity -1
  CHECK(f.column(5).t == 10);
  CHECK(f.column(5).p == -1);
  CHECK(f.row(5).t == 0);
  // row 5 still matches, but the only column record near x=6 now has the wrong polarity
  CHECK(f.step({20, 6, 6, 1}) == N);
  KhodamoradiFilter g(kGeo, {1000, false});
  g.step({0, 5, 5, 1});
  g.step({10, 5, 40, -1});
  CHECK(g.step({20, 6, 6, 1}) == R);
  g.reset();
  CHECK(g.column(5).t == KhodamoradiFilter::kEmpty);
}

TEST_CASE("filters match their definitions on random streams") {
  SensorGeometry geo{24, 20};
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    auto s = testing::random_stream(1500, geo, seed, 60);
    auto ev = s.events();
    CHECK(run_filter(s, *make_baseline("ba", geo)) == oracle_ba(ev, BaConfig{}));
    CHECK(run_filter(s, *make_baseline("nnb", geo)) == oracle_nnb(ev, NnbConfig{}));
    CHECK(run_filter(s, *make_baseline("liu1", geo)) == oracle_liu(ev, LiuConfig{1, 1000}));
    CHECK(run_filter(s, *make_baseline("liu2", geo)) == oracle_liu(ev, LiuConfig{2, 1000}));
    CHECK(run_filter(s, *make_baseline("khodamoradi", geo)) == oracle_khodamoradi(ev, KhodamoradiConfig{}));
    KhodamoradiFilter kp(geo, {1000, true});
    CHECK(run_filter(s, kp) == oracle_khodamoradi(ev, KhodamoradiConfig{1000, true}));
    CHECK(run_filter(s, *make_baseline("yang", geo)) == oracle_yang(ev, YangConfig{}));
    YangFilter yh(geo, {1, 2000, 2, 20'000, 4, 2});
    CHECK(run_filter(s, yh) == oracle_yang(ev, YangConfig{1, 2000, 2, 20'000, 4, 2}));
  }
}

TEST_CASE("reset restores the initial state") {
  SensorGeometry geo{24, 20};
  auto s = testing::random_stream(800, geo, 11);
  for (const auto& name : baseline_names()) {
    auto f = make_baseline(name, geo);
    auto first = run_filter(s, *f);
    f->reset();
    CHECK(run_filter(s, *f) == first);
  }
}

TEST_CASE("further micro-streams") {
  BaFilter ba(kGeo);
  CHECK(run(ba, {{0, 10, 10, 1}, {5, 11, 10, 1}}) == std::vector{N, N});  // two adjacent events stay below k

  NnbFilter nnb(kGeo);
  CHECK(run(nnb, {{0, 10, 10, 1}, {999, 9, 9, 1}}) == std::vector{N, R});

  LiuFilter liu(kGeo, {1, 1000});
  CHECK(run(liu, {{0, 2, 2, 1}, {500, 3, 3, 1}}) == std::vector{N, R});  // same 2x2 group
  liu.reset();
  CHECK(run(liu, {{0, 2, 2, 1}, {500, 5, 2, 1}}) == std::vector{N, R});  // 3 px apart, adjacent groups
  liu.reset();
  CHECK(run(liu, {{0, 2, 2, 1}, {500, 11, 2, 1}}) == std::vector{N, N});  // 9 px apart

  KhodamoradiFilter kh(kGeo);
  CHECK(run(kh, {{0, 5, 5, 1}, {500, 5, 20, 1}}) == std::vector{N, N});  // column seen, no row support
  CHECK(kh.column(5).t == 500);  // the first record was replaced
  CHECK(kh.row(5).t == 0);
  CHECK(kh.row(20).t == 500);
}

TEST_CASE("yang flags a pixel firing every millisecond in a silent neighbourhood") {
  YangFilter f(kGeo);
  std::vector<Event> ev;
  for (int i = 0; i < 1000; ++i) ev.push_back({i * 1000, 40, 30, 1});
  const auto d = run(f, ev);
  CHECK(f.is_hot(40, 30));
  CHECK(std::count(d.begin(), d.end(), R) == 0);
}
