#include <doctest.h>

#include <cmath>
#include <map>

#include "evdn/graph_builder.hpp"
#include "test_util.hpp"

using namespace evdn;

TEST_CASE("volume spec validation") {
  CHECK_NOTHROW(VolumeSpec{}.validate());
  CHECK_THROWS(VolumeSpec{-1, 50'000, 10}.validate());
  CHECK_THROWS(VolumeSpec{2, 0, 10}.validate());
  CHECK_NOTHROW(VolumeSpec{0, 1, 0}.validate());
  CHECK(VolumeSpec{}.window() == 5);
}

TEST_CASE("recency insert and eviction") {
  RecencyStore store(SensorGeometry{8, 8}, 3);
  store.insert(Event{10, 2, 2, 1});
  CHECK(store.timestamps_at(2, 2) == std::vector<std::int64_t>{10});
  for (std::int64_t t : {11, 12, 13}) store.insert(Event{t, 2, 2, 1});
  CHECK(store.timestamps_at(2, 2) == std::vector<std::int64_t>{13, 12, 11});
  CHECK(store.timestamps_at(3, 3).empty());
  CHECK_THROWS_AS(store.insert(Event{14, 8, 0, 1}), std::out_of_range);
}

TEST_CASE("recency contents match last K per pixel") {
  SensorGeometry g{6, 5};
  auto s = testing::random_stream(3000, g, 17);
  RecencyStore store(g, 4);
  std::map<std::pair<int, int>, std::vector<std::int64_t>> history;
  for (const auto& e : s) {
    store.insert(e);
    history[{e.x, e.y}].push_back(e.t);
  }
  for (int y = 0; y < g.height; ++y)
    for (int x = 0; x < g.width; ++x) {
      auto h = history[{x, y}];
      std::vector<std::int64_t> expect(h.rbegin(), h.rbegin() + static_cast<std::ptrdiff_t>(std::min<std::size_t>(4, h.size())));
      CHECK(store.timestamps_at(x, y) == expect);
    }
}

TEST_CASE("query on empty store and neighbor cap") {
  VolumeSpec spec;
  RecencyStore store(SensorGeometry{20, 20}, spec.n_max);
  CHECK(store.query(Event{100, 5, 5, 1}, spec).empty());
  for (int k = 0; k < 12; ++k) store.insert(Event{1000 + k, 4 + k % 3, 5, 1});
  auto nb = store.query(Event{2000, 5, 5, 1}, spec);
  REQUIRE(nb.size() == 10);
  for (std::size_t i = 0; i < nb.size(); ++i) CHECK(nb[i].t == 1011 - static_cast<std::int64_t>(i));
}

TEST_CASE("temporal bound is closed") {
  VolumeSpec spec{1, 100, 10};
  RecencyStore store(SensorGeometry{10, 10}, 10);
  store.insert(Event{899, 6, 5, 1});  // one past t - T
  store.insert(Event{900, 5, 5, 1});  // exactly t - T
  auto nb = store.query(Event{1000, 5, 5, 1}, spec);
  REQUIRE(nb.size() == 1);
  CHECK(nb[0].t == 900);
  CHECK_THROWS_AS(store.insert(Event{800, 1, 1, 1}), std::invalid_argument);
}

TEST_CASE("ties resolved by later arrival first") {
  VolumeSpec spec{1, 100, 10};
  RecencyStore store(SensorGeometry{10, 10}, 10);
  store.insert(Event{50, 4, 4, 1});
  store.insert(Event{50, 6, 6, 1});
  store.insert(Event{50, 5, 5, 1});
  auto nb = store.query(Event{50, 5, 5, 1}, spec);
  REQUIRE(nb.size() == 3);
  CHECK(nb[0].x == 5);
  CHECK(nb[1].x == 6);
  CHECK(nb[2].x == 4);
  CHECK(nb[0].seq > nb[1].seq);
}

TEST_CASE("streaming query equals brute force over the full prefix") {
  SensorGeometry g{24, 18};
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    auto s = testing::random_stream(4000, g, seed, 200);
    for (VolumeSpec spec : {VolumeSpec{}, VolumeSpec{1, 2000, 4}, VolumeSpec{0, 500, 3}, VolumeSpec{3, 10'000, 0}}) {
      RecencyStore store(g, std::max<std::size_t>(spec.n_max, 1));
      auto ev = s.events();
      for (std::size_t i = 0; i < ev.size(); ++i) {
        auto got = store.query(ev[i], spec);
        auto want = testing::brute_neighbors(ev, i, spec);
        REQUIRE(got == want);
        store.insert(ev[i]);
      }
    }
  }
}

TEST_CASE("build_graph node counts") {
  VolumeSpec spec;
  Event e{1000, 10, 10, 1};
  auto g0 = build_graph(e, {}, spec);
  CHECK(g0.node_count() == 1);
  CHECK(g0.interest == RawNode{10, 10, 1000});
  auto g1 = build_graph(e, {NeighborEvent{10, 10, 999, 0}}, spec);
  CHECK(g1.node_count() == 2);
  CHECK(g1.neighbors[0] == RawNode{10, 10, 999});

  SensorGeometry geo{16, 16};
  auto s = testing::random_stream(2000, geo, 5);
  GraphBuilder builder(geo, spec);
  auto ev = s.events();
  for (std::size_t i = 0; i < ev.size(); ++i) {
    auto g = builder.next(ev[i]);
    std::size_t in_window = 0;
    for (std::size_t j = 0; j < i; ++j)
      if (std::abs(ev[j].x - ev[i].x) <= 2 && std::abs(ev[j].y - ev[i].y) <= 2 && ev[j].t >= ev[i].t - spec.depth_us)
        ++in_window;
    CHECK(g.node_count() == std::min<std::size_t>(spec.n_max, in_window) + 1);
  }
}

TEST_CASE("normalization corners and interest node") {
  VolumeSpec spec;
  Event e{100'000, 50, 60, 1};
  EventGraph g = build_graph(e, {NeighborEvent{48, 62, 50'000, 0}, NeighborEvent{52, 58, 75'000, 1}}, spec);
  auto n = normalize_graph(g, spec);
  REQUIRE(n.nodes.size() == 3);
  CHECK(n.nodes[0].x == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(n.nodes[0].y == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(n.nodes[0].t == doctest::Approx(0.95).epsilon(1e-15));
  CHECK(n.nodes[1].x == doctest::Approx(0.05).epsilon(1e-15));
  CHECK(n.nodes[1].y == doctest::Approx(0.95).epsilon(1e-15));
  CHECK(n.nodes[1].t == doctest::Approx(0.05).epsilon(1e-15));
  CHECK(n.nodes[2].x == doctest::Approx(0.95).epsilon(1e-15));
  CHECK(n.nodes[2].t == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("normalization is invertible, bounded and monotone") {
  VolumeSpec spec;
  SensorGeometry geo{30, 30};
  auto s = testing::random_stream(3000, geo, 33);
  GraphBuilder builder(geo, spec);
  const double span = kNormHigh - kNormLow;
  for (const auto& e : s) {
    auto g = builder.next(e);
    auto n = normalize_graph(g, spec);
    REQUIRE(n.nodes.size() == g.node_count());
    for (std::size_t j = 0; j < n.nodes.size(); ++j) {
      const RawNode raw = j == 0 ? g.interest : g.neighbors[j - 1];
      const auto& v = n.nodes[j];
      for (double f : {v.x, v.y, v.t}) {
        CHECK(f >= kNormLow);
        CHECK(f <= kNormHigh);
      }
      CHECK(std::lround((v.x - kNormLow) / span * 4.0 - 2.0) + e.x == raw.x);
      CHECK(std::lround((v.y - kNormLow) / span * 4.0 - 2.0) + e.y == raw.y);
      CHECK(e.t - std::llround(50'000.0 - (v.t - kNormLow) / span * 50'000.0) == raw.t);
      if (j > 0) CHECK(v.t <= n.nodes[j - 1].t);  // descending time maps to descending value
    }
  }
}

TEST_CASE("graph building is deterministic") {
  SensorGeometry geo{12, 12};
  auto s = testing::random_stream(1500, geo, 71);
  GraphBuilder a(geo, VolumeSpec{}), b(geo, VolumeSpec{});
  for (const auto& e : s) CHECK(a.next(e) == b.next(e));
}
