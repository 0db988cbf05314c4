#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "evdn/event.hpp"
#include "evdn/graph_builder.hpp"
#include "evdn/image.hpp"
#include "evdn/training.hpp"

namespace evdn {

enum class EdgeOrientation { vertical, horizontal };

/// A straight edge spanning the sensor, moving at constant velocity.
/// Vertical edges sit at x = position + velocity * t, horizontal ones at y = ...
struct MovingEdge {
  EdgeOrientation orientation = EdgeOrientation::vertical;
  double position = 0.0;  // px at t = 0
  double velocity = 0.0;  // px/s
  int polarity = 1;       // sign of the brightness change when the edge passes a pixel
  friend bool operator==(const MovingEdge&, const MovingEdge&) = default;
};

struct SceneSpec {
  SensorGeometry geometry;
  std::int64_t duration_us = 1'000'000;
  std::vector<MovingEdge> edges;
  double jitter_us = 0.0;      // std dev of real-event timestamp noise
  double noise_hz = 0.0;       // background-activity rate per pixel
  int hot_pixels = 0;
  double hot_hz = 0.0;         // rate of each hot pixel
  std::int64_t frame_period_us = 10'000;
  int contrast = 80;           // intensity step across an edge
  std::string pose_tag = "pose0";
  std::uint64_t seed = 1;

  void validate() const;
  friend bool operator==(const SceneSpec&, const SceneSpec&) = default;
};

/// Named scene presets: "light.750lux" (sparse noise, tight timing) and "light.5lux"
/// (heavy noise, loose timing).
SceneSpec scene_preset(const std::string& name);
std::vector<std::string> scene_preset_names();

/// Line-based key=value scene description. A `preset=` line, wherever it appears, is applied
/// first; `edge=vertical|horizontal,position,velocity,polarity` lines replace the preset edges.
SceneSpec parse_scene(const std::string& text);
SceneSpec load_scene(const std::filesystem::path& path);
std::string format_scene(const SceneSpec& scene);

struct GeneratedCounts {
  std::size_t real = 0;
  std::size_t noise = 0;  // background activity
  std::size_t hot = 0;
};

struct GeneratedDataset {
  EventStream stream;  // ground-truth labels set
  std::vector<ApsFrame> frames;
  GeneratedCounts counts;
  std::vector<std::uint8_t> is_hot;  // per event: emitted by a hot pixel
};

GeneratedDataset generate(const SceneSpec& scene, bool render_frames = true);

/// Instantaneous scene intensity at time t.
GrayImage render_frame(const SceneSpec& scene, std::int64_t t_us);

/// lambda * W * H * duration + hot_pixels * lambda_hot * duration, durations in seconds.
double expected_noise_count(const SceneSpec& scene);

struct TrainingSample {
  std::size_t event_index = 0;
  LabeledGraph sample;
};

/// `per_class` events of each label drawn uniformly without replacement (seeded); each
/// graph is built from the full stream prefix. Output is ordered by event index.
std::vector<TrainingSample> build_training_set(const EventStream& stream, const VolumeSpec& spec,
                                               std::size_t per_class, std::uint64_t seed);

/// Seeded shuffle then split: the first `train_fraction` share goes to training.
struct DataSplit {
  std::vector<TrainingSample> train;
  std::vector<TrainingSample> test;
};
DataSplit split_samples(std::vector<TrainingSample> samples, double train_fraction,
                        std::uint64_t seed);

std::vector<LabeledGraph> graphs_of(const std::vector<TrainingSample>& samples);

}  // namespace evdn
