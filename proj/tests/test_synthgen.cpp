#include <doctest.h>

#include <cmath>
#include <set>

#include "evdn/synthgen.hpp"
#include "test_util.hpp"

using namespace evdn;

TEST_CASE("background noise count follows the Poisson rate") {
  SceneSpec s;
  s.geometry = {64, 48};
  s.edges.clear();
  s.noise_hz = 5.0;
  s.hot_pixels = 3;
  s.hot_hz = 100.0;
  s.duration_us = 1'000'000;
  CHECK(expected_noise_count(s) == doctest::Approx(64 * 48 * 5.0 + 300.0));
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    s.seed = seed;
    auto d = generate(s, false);
    const double bg = 64 * 48 * 5.0;
    CHECK(std::abs(static_cast<double>(d.counts.noise) - bg) < 5.0 * std::sqrt(bg));
    CHECK(std::abs(static_cast<double>(d.counts.hot) - 300.0) < 5.0 * std::sqrt(300.0));
    CHECK(d.counts.real == 0);
    CHECK(d.frames.empty());
    std::set<std::pair<int, int>> hot;
    for (std::size_t i = 0; i < d.stream.size(); ++i)
      if (d.is_hot[i]) hot.insert({d.stream[i].x, d.stream[i].y});
    CHECK(hot.size() == 3);
  }
}

TEST_CASE("generated counts and labels agree") {
  auto s = scene_preset("light.5lux");
  s.duration_us = 100'000;
  auto d = generate(s);
  CHECK(d.stream.size() == d.counts.real + d.counts.noise + d.counts.hot);
  std::size_t real = 0, hot = 0;
  for (std::size_t i = 0; i < d.stream.size(); ++i) {
    const auto& e = d.stream[i];
    CHECK(s.geometry.contains(e.x, e.y));
    CHECK(e.t >= 0);
    CHECK(e.t < s.duration_us);
    real += e.label == Label::real;
    if (d.is_hot[i]) {
      ++hot;
      CHECK(e.label == Label::noise);
    }
  }
  CHECK(real == d.counts.real);
  CHECK(hot == d.counts.hot);
  CHECK(validate_stream(d.stream, s.geometry).ok());
  CHECK(d.frames.size() == 10);
  CHECK(d.frames[3].t_us == 30'000);
}

TEST_CASE("jitter-free edges fire exactly at their crossing time") {
  SceneSpec s;
  s.geometry = {30, 20};
  s.edges = {{EdgeOrientation::vertical, 2.0, 100.0, -1}};
  s.duration_us = 200'000;
  auto d = generate(s, false);
  CHECK(d.counts.real == 20 * 20);  // columns 2..21 are crossed in [0, 0.2 s)
  for (const auto& e : d.stream) {
    CHECK(e.t == std::llround((e.x - 2.0) / 100.0 * 1e6));
    CHECK(e.p == -1);
  }
}

TEST_CASE("rendered frames place the step at the edge position") {
  SceneSpec s;
  s.geometry = {30, 20};
  s.edges = {{EdgeOrientation::vertical, 10.0, 50.0, 1}};
  auto img = render_frame(s, 100'000);  // edge at x = 15
  CHECK(img.at(15, 5) == 128 + 40);
  CHECK(img.at(16, 5) == 128 - 40);
  CHECK(img.at(0, 19) == 128 + 40);
}

TEST_CASE("generation is deterministic per seed") {
  auto s = scene_preset("light.750lux");
  s.duration_us = 50'000;
  auto a = generate(s), b = generate(s);
  CHECK(a.stream == b.stream);
  CHECK(a.frames == b.frames);
  s.seed = 2;
  CHECK_FALSE(generate(s).stream == a.stream);
}

TEST_CASE("scene text round trip and presets") {
  for (const auto& name : scene_preset_names()) {
    auto s = scene_preset(name);
    CHECK(parse_scene(format_scene(s)) == s);
  }
  auto s = parse_scene("seed=9\npreset=light.5lux\nnoise_hz=0.5 # comment\nedge=horizontal,3.5,-7,-1\n");
  CHECK(s.seed == 9);
  CHECK(s.noise_hz == 0.5);
  CHECK(s.jitter_us == scene_preset("light.5lux").jitter_us);
  REQUIRE(s.edges.size() == 1);
  CHECK(s.edges[0] == MovingEdge{EdgeOrientation::horizontal, 3.5, -7.0, -1});
  CHECK(parse_scene(format_scene(s)) == s);
  CHECK(parse_scene("edges=none\n").edges.empty());
  CHECK(parse_scene(format_scene(parse_scene("edges=none\n"))).edges.empty());
  CHECK_THROWS(scene_preset("dark"));
  CHECK_THROWS(parse_scene("colour=red\n"));
  CHECK_THROWS(parse_scene("edge=diagonal,1,1,1\n"));
  CHECK_THROWS(parse_scene("noise_hz=-1\n"));
  CHECK_THROWS_AS(parse_scene("noise_hz\n"), FormatError);
}

TEST_CASE("training set is balanced and built from the full prefix") {
  auto s = scene_preset("light.5lux");
  s.geometry = {80, 60};
  s.edges = {{EdgeOrientation::vertical, 5.0, 300.0, 1}};
  s.duration_us = 200'000;
  auto d = generate(s, false);
  VolumeSpec spec;
  auto set = build_training_set(d.stream, spec, 150, 3);
  REQUIRE(set.size() == 300);
  std::size_t real = 0;
  for (std::size_t k = 0; k < set.size(); ++k) {
    const auto& ts = set[k];
    if (k > 0) CHECK(set[k - 1].event_index < ts.event_index);
    const auto& e = d.stream[ts.event_index];
    CHECK(ts.sample.label == (e.label == Label::real ? 1 : 0));
    real += ts.sample.label;
    auto expect = normalize_graph(build_graph(e, testing::brute_neighbors(d.stream.events(), ts.event_index, spec), spec), spec);
    CHECK(ts.sample.graph == expect);
  }
  CHECK(real == 150);
  CHECK(build_training_set(d.stream, spec, 150, 3).front().event_index == set.front().event_index);
  CHECK_THROWS_AS(build_training_set(d.stream, spec, d.stream.size(), 3), std::invalid_argument);
}

TEST_CASE("split is stratified, disjoint and deterministic") {
  std::vector<TrainingSample> samples;
  for (std::size_t i = 0; i < 100; ++i) samples.push_back({i, LabeledGraph{{}, static_cast<int>(i % 2)}});
  auto sp = split_samples(samples, 0.8, 5);
  CHECK(sp.train.size() == 80);
  CHECK(sp.test.size() == 20);
  std::size_t real_test = 0;
  std::set<std::size_t> seen;
  for (const auto& s : sp.train) seen.insert(s.event_index);
  for (const auto& s : sp.test) {
    real_test += s.sample.label;
    seen.insert(s.event_index);
  }
  CHECK(real_test == 10);
  CHECK(seen.size() == 100);
  auto again = split_samples(samples, 0.8, 5);
  for (std::size_t i = 0; i < 20; ++i) CHECK(again.test[i].event_index == sp.test[i].event_index);
  CHECK(graphs_of(sp.test).size() == 20);
  CHECK(split_samples(samples, 1.0, 1).test.empty());
  CHECK_THROWS(split_samples(samples, 1.5, 1));
}

TEST_CASE("generator oracles") {
  SceneSpec clean = scene_preset("light.750lux");
  clean.noise_hz = 0.0;
  clean.hot_pixels = 0;
  clean.duration_us = 100'000;
  for (const auto& e : generate(clean, false).stream) CHECK(e.label == Label::real);

  SceneSpec empty;
  empty.geometry = {50, 40};
  empty.edges.clear();
  empty.noise_hz = 3.0;
  empty.duration_us = 2'000'000;
  auto d = generate(empty, false);
  for (const auto& e : d.stream) CHECK(e.label == Label::noise);
  const double expected = expected_noise_count(empty);
  CHECK(std::abs(static_cast<double>(d.stream.size()) - expected) <= 4.0 * std::sqrt(expected));

  SceneSpec moving;
  moving.geometry = {60, 10};
  moving.edges = {{EdgeOrientation::vertical, 0.0, 200.0, 1}};
  moving.jitter_us = 100.0;
  moving.duration_us = 300'000;
  auto m = generate(moving, false);
  // per row, timestamps grow with slope 1/v = 5000 us per column, within a few jitter widths
  for (const auto& e : m.stream) CHECK(std::abs(static_cast<double>(e.t) - 5000.0 * e.x) <= 6.0 * 100.0 + 1.0);
  std::size_t row0 = 0;
  for (const auto& e : m.stream) row0 += e.y == 0;
  CHECK(row0 >= 58);  // columns whose crossing falls inside the window, minus clipping at t = 0
}
