#include "evdn/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <stdexcept>

#include "evdn/optim.hpp"

namespace evdn {

void SceneSpec::validate() const {
  if (geometry.width <= 0 || geometry.height <= 0) throw std::invalid_argument("scene geometry must be positive");
  if (duration_us <= 0) throw std::invalid_argument("scene duration must be > 0");
  if (noise_hz < 0.0 || hot_hz < 0.0) throw std::invalid_argument("noise rates must be >= 0");
  if (jitter_us < 0.0) throw std::invalid_argument("jitter must be >= 0");
  if (frame_period_us <= 0) throw std::invalid_argument("frame period must be > 0");
  if (hot_pixels < 0 || static_cast<std::size_t>(hot_pixels) > geometry.pixel_count())
    throw std::invalid_argument("hot pixel count out of range");
  for (const auto& e : edges)
    if (e.polarity != 1 && e.polarity != -1) throw std::invalid_argument("edge polarity must be +1 or -1");
}

namespace {

std::vector<MovingEdge> default_edges() {
  return {
      {EdgeOrientation::vertical, 40.0, 60.0, 1},
      {EdgeOrientation::vertical, 220.0, -60.0, -1},
      {EdgeOrientation::horizontal, 30.0, 45.0, 1},
  };
}

}  // namespace

SceneSpec scene_preset(const std::string& name) {
  SceneSpec s;
  s.edges = default_edges();
  if (name == "light.750lux") {
    s.jitter_us = 300.0;
    s.noise_hz = 0.1;
    s.hot_pixels = 2;
    s.hot_hz = 20.0;
    s.pose_tag = "pose0";
  } else if (name == "light.5lux") {
    s.jitter_us = 4000.0;
    s.noise_hz = 2.0;
    s.hot_pixels = 4;
    s.hot_hz = 20.0;
    s.pose_tag = "pose0";
  } else {
    throw std::invalid_argument("unknown scene preset '" + name + "'");
  }
  return s;
}

std::vector<std::string> scene_preset_names() { return {"light.750lux", "light.5lux"}; }

namespace {

MovingEdge parse_edge(const std::string& value) {
  std::vector<std::string> parts;
  std::stringstream ss(value);
  std::string part;
  while (std::getline(ss, part, ',')) parts.push_back(part);
  if (parts.size() != 4) throw std::invalid_argument("edge needs orientation,position,velocity,polarity");
  MovingEdge e;
  if (parts[0] == "vertical") e.orientation = EdgeOrientation::vertical;
  else if (parts[0] == "horizontal") e.orientation = EdgeOrientation::horizontal;
  else throw std::invalid_argument("edge orientation must be vertical or horizontal");
  e.position = std::stod(parts[1]);
  e.velocity = std::stod(parts[2]);
  e.polarity = std::stoi(parts[3]);
  return e;
}

}  // namespace

SceneSpec parse_scene(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> kv;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  std::string preset;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line.erase(0, line.find_first_not_of(" \t\r"));
    line.erase(line.find_last_not_of(" \t\r") + 1);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw FormatError("expected key=value", static_cast<std::size_t>(lineno));
    std::string key = line.substr(0, eq), value = line.substr(eq + 1);
    if (key == "preset") preset = value;
    else kv.emplace_back(std::move(key), std::move(value));
  }
  SceneSpec s = preset.empty() ? SceneSpec{} : scene_preset(preset);
  bool edges_reset = false;
  for (const auto& [key, value] : kv) {
    try {
      if (key == "width") s.geometry.width = std::stoi(value);
      else if (key == "height") s.geometry.height = std::stoi(value);
      else if (key == "duration_us") s.duration_us = std::stoll(value);
      else if (key == "jitter_us") s.jitter_us = std::stod(value);
      else if (key == "noise_hz") s.noise_hz = std::stod(value);
      else if (key == "hot_pixels") s.hot_pixels = std::stoi(value);
      else if (key == "hot_hz") s.hot_hz = std::stod(value);
      else if (key == "frame_period_us") s.frame_period_us = std::stoll(value);
      else if (key == "contrast") s.contrast = std::stoi(value);
      else if (key == "pose") s.pose_tag = value;
      else if (key == "seed") s.seed = std::stoull(value);
      else if (key == "edge") {
        if (!edges_reset) s.edges.clear();
        edges_reset = true;
        s.edges.push_back(parse_edge(value));
      } else if (key == "edges" && value == "none") {
        s.edges.clear();
        edges_reset = true;
      } else {
        throw std::invalid_argument("unknown scene key '" + key + "'");
      }
    } catch (const std::logic_error& err) {
      throw std::invalid_argument("scene key '" + key + "': " + err.what());
    }
  }
  s.validate();
  return s;
}

SceneSpec load_scene(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open scene file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scene(buf.str());
}

std::string format_scene(const SceneSpec& s) {
  std::ostringstream out;
  out.precision(17);
  out << "width=" << s.geometry.width << "\nheight=" << s.geometry.height
      << "\nduration_us=" << s.duration_us << "\njitter_us=" << s.jitter_us
      << "\nnoise_hz=" << s.noise_hz << "\nhot_pixels=" << s.hot_pixels << "\nhot_hz=" << s.hot_hz
      << "\nframe_period_us=" << s.frame_period_us << "\ncontrast=" << s.contrast
      << "\npose=" << s.pose_tag << "\nseed=" << s.seed << '\n';
  if (s.edges.empty()) out << "edges=none\n";
  for (const auto& e : s.edges)
    out << "edge=" << (e.orientation == EdgeOrientation::vertical ? "vertical" : "horizontal") << ','
        << e.position << ',' << e.velocity << ',' << e.polarity << '\n';
  return out.str();
}

double expected_noise_count(const SceneSpec& s) {
  const double seconds = static_cast<double>(s.duration_us) * 1e-6;
  return s.noise_hz * static_cast<double>(s.geometry.pixel_count()) * seconds +
         static_cast<double>(s.hot_pixels) * s.hot_hz * seconds;
}

GrayImage render_frame(const SceneSpec& s, std::int64_t t_us) {
  const int W = s.geometry.width, H = s.geometry.height;
  std::vector<int> level(static_cast<std::size_t>(W) * H, 128);
  const double t = static_cast<double>(t_us) * 1e-6;
  const int half = s.contrast / 2;
  for (const auto& e : s.edges) {
    const double pos = e.position + e.velocity * t;
    const bool vertical = e.orientation == EdgeOrientation::vertical;
    const int n = vertical ? W : H;
    for (int c = 0; c < n; ++c) {
      const bool crossed = e.velocity > 0 ? pos >= c : (e.velocity < 0 ? pos <= c : false);
      const int delta = (crossed ? half : -half) * e.polarity;
      if (vertical)
        for (int y = 0; y < H; ++y) level[static_cast<std::size_t>(y) * W + c] += delta;
      else
        for (int x = 0; x < W; ++x) level[static_cast<std::size_t>(c) * W + x] += delta;
    }
  }
  GrayImage img(W, H);
  for (std::size_t i = 0; i < level.size(); ++i)
    img.pixels[i] = static_cast<std::uint8_t>(std::clamp(level[i], 0, 255));
  return img;
}

namespace {

int random_polarity(std::mt19937_64& rng) { return (rng() >> 63) ? 1 : -1; }

// Poisson arrival times in [0, duration) by exponential gaps.
template <class Emit>
void poisson_times(double rate_hz, std::int64_t duration_us, std::mt19937_64& rng, Emit emit) {
  if (rate_hz <= 0.0) return;
  const double mean_gap_us = 1e6 / rate_hz;
  double t = 0.0;
  while (true) {
    t += -std::log1p(-ad::unit_uniform(rng)) * mean_gap_us;
    const auto ti = static_cast<std::int64_t>(std::floor(t));
    if (ti >= duration_us) return;
    emit(ti);
  }
}

}  // namespace

GeneratedDataset generate(const SceneSpec& s, bool render_frames) {
  s.validate();
  std::mt19937_64 rng(s.seed);
  std::normal_distribution<double> jitter(0.0, 1.0);
  const int W = s.geometry.width, H = s.geometry.height;
  struct Tagged {
    Event e;
    std::uint8_t hot;
  };
  std::vector<Tagged> all;
  GeneratedCounts counts;

  for (const auto& edge : s.edges) {
    if (edge.velocity == 0.0) continue;
    const bool vertical = edge.orientation == EdgeOrientation::vertical;
    const int n = vertical ? W : H, span = vertical ? H : W;
    for (int c = 0; c < n; ++c) {
      const double tc_us = (c - edge.position) / edge.velocity * 1e6;
      if (tc_us < -6.0 * s.jitter_us - 1.0 || tc_us > static_cast<double>(s.duration_us) + 6.0 * s.jitter_us)
        continue;
      for (int k = 0; k < span; ++k) {
        const double dt = s.jitter_us > 0.0 ? jitter(rng) * s.jitter_us : 0.0;
        const auto t = static_cast<std::int64_t>(std::llround(tc_us + dt));
        if (t < 0 || t >= s.duration_us) continue;
        const int x = vertical ? c : k, y = vertical ? k : c;
        all.push_back({Event{t, x, y, edge.polarity, Label::real}, 0});
        ++counts.real;
      }
    }
  }
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x)
      poisson_times(s.noise_hz, s.duration_us, rng, [&](std::int64_t t) {
        all.push_back({Event{t, x, y, random_polarity(rng), Label::noise}, 0});
        ++counts.noise;
      });
  std::vector<std::size_t> hot_pixels;
  while (hot_pixels.size() < static_cast<std::size_t>(s.hot_pixels)) {
    const std::size_t pix = rng() % s.geometry.pixel_count();
    if (std::find(hot_pixels.begin(), hot_pixels.end(), pix) == hot_pixels.end()) hot_pixels.push_back(pix);
  }
  for (auto pix : hot_pixels) {
    const int x = static_cast<int>(pix % W), y = static_cast<int>(pix / W);
    poisson_times(s.hot_hz, s.duration_us, rng, [&](std::int64_t t) {
      all.push_back({Event{t, x, y, random_polarity(rng), Label::noise}, 1});
      ++counts.hot;
    });
  }
  std::stable_sort(all.begin(), all.end(), [](const Tagged& a, const Tagged& b) { return a.e.t < b.e.t; });

  GeneratedDataset out;
  std::vector<Event> events;
  events.reserve(all.size());
  out.is_hot.reserve(all.size());
  for (const auto& a : all) {
    events.push_back(a.e);
    out.is_hot.push_back(a.hot);
  }
  out.stream = EventStream(std::move(events), s.geometry);
  out.counts = counts;
  if (render_frames)
    for (std::int64_t t = 0; t < s.duration_us; t += s.frame_period_us)
      out.frames.push_back(ApsFrame{render_frame(s, t), t, s.pose_tag});
  return out;
}

std::vector<TrainingSample> build_training_set(const EventStream& stream, const VolumeSpec& spec,
                                               std::size_t per_class, std::uint64_t seed) {
  const auto& g = stream.geometry();
  std::vector<std::size_t> real, noise;
  for (std::size_t i = 0; i < stream.size(); ++i) {
    const Event& e = stream[i];
    if (!g.contains(e.x, e.y)) continue;
    if (e.label == Label::real) real.push_back(i);
    else if (e.label == Label::noise) noise.push_back(i);
  }
  if (real.size() < per_class || noise.size() < per_class)
    throw std::invalid_argument("stream has " + std::to_string(real.size()) + " real and " +
                                std::to_string(noise.size()) + " noise events, need " +
                                std::to_string(per_class) + " of each");
  std::mt19937_64 rng(seed);
  std::shuffle(real.begin(), real.end(), rng);
  std::shuffle(noise.begin(), noise.end(), rng);
  std::vector<std::uint8_t> chosen(stream.size(), 0);
  for (std::size_t i = 0; i < per_class; ++i) chosen[real[i]] = chosen[noise[i]] = 1;

  GraphBuilder builder(g, spec);
  std::vector<TrainingSample> out;
  out.reserve(2 * per_class);
  for (std::size_t i = 0; i < stream.size(); ++i) {
    const Event& e = stream[i];
    if (!g.contains(e.x, e.y)) continue;
    if (!chosen[i]) {
      builder.skip(e);
      continue;
    }
    out.push_back(TrainingSample{i, LabeledGraph{normalize_graph(builder.next(e), spec),
                                                 e.label == Label::real ? 1 : 0}});
  }
  return out;
}

DataSplit split_samples(std::vector<TrainingSample> samples, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction >= 0.0 && train_fraction <= 1.0))
    throw std::invalid_argument("train fraction must be in [0, 1]");
  std::mt19937_64 rng(seed);
  DataSplit split;
  for (int cls = 0; cls <= 1; ++cls) {
    std::vector<TrainingSample> group;
    for (auto& s : samples)
      if (s.sample.label == cls) group.push_back(std::move(s));
    std::shuffle(group.begin(), group.end(), rng);
    const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(group.size())));
    for (std::size_t i = 0; i < group.size(); ++i)
      (i < n_train ? split.train : split.test).push_back(std::move(group[i]));
  }
  auto by_index = [](const TrainingSample& a, const TrainingSample& b) { return a.event_index < b.event_index; };
  std::sort(split.train.begin(), split.train.end(), by_index);
  std::sort(split.test.begin(), split.test.end(), by_index);
  return split;
}

std::vector<LabeledGraph> graphs_of(const std::vector<TrainingSample>& samples) {
  std::vector<LabeledGraph> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.sample);
  return out;
}

}  // namespace evdn
