#pragma once

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "evdn/filters.hpp"
#include "evdn/graph_builder.hpp"
#include "evdn/inference.hpp"

namespace evdn {

struct TimingOptions {
  std::size_t warmup = 100;  // events pushed through a throwaway instance first
  std::size_t repeats = 5;
};

struct TimingReport {
  PredictMode mode = PredictMode::sequential;
  std::size_t events = 0;
  double mean_s = 0.0;    // per event
  double stddev_s = 0.0;  // per event; across calls (sequential) or repetitions (batch)
  double median_s = 0.0;  // median over repetitions of the per-event mean
  double total_s = 0.0;   // wall time of the median repetition
  std::vector<Decision> decisions;
};

using FilterFactory = std::function<std::unique_ptr<EventFilter>()>;

/// Sequential mode times each step() call; batch mode times one run_batch() call.
/// Every repetition starts from a fresh filter and must reproduce the same decisions.
TimingReport time_filter(const FilterFactory& factory, std::span<const Event> events, PredictMode mode,
                         const TimingOptions& options = {});

struct ModeComparison {
  TimingReport sequential;
  TimingReport batch;
};

/// Times both modes and throws std::logic_error if their decisions differ.
ModeComparison compare_modes(const FilterFactory& factory, std::span<const Event> events,
                             const TimingOptions& options = {});

struct MemoryEstimate {
  std::size_t window_cells = 0;    // (2L+1)^2
  std::size_t nodes = 0;           // N_g
  std::size_t elements = 0;        // window_cells * nodes
  std::size_t comparison_elements = 0;  // 25 * 25 * 2 * 2 patch of the CNN baseline
  double ratio = 0.0;              // comparison_elements / elements
  std::size_t feature_bytes = 0;   // per-event node features actually held: (N_g+1) * 3 doubles
  std::size_t store_bytes = 0;     // recency store for the whole sensor
  std::size_t parameters = 0;
};

inline constexpr std::size_t kCnnPatchElements = 25 * 25 * 2 * 2;

MemoryEstimate memory_estimate(const VolumeSpec& spec, const SensorGeometry& geometry = {},
                               const DenoiseModel* model = nullptr);

}  // namespace evdn
