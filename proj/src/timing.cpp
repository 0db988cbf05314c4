#include "evdn/timing.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

namespace evdn {

namespace {

using Clock = std::chrono::steady_clock;

double seconds(Clock::duration d) { return std::chrono::duration<double>(d).count(); }

struct Repetition {
  double per_event_mean = 0.0;
  double per_event_var = 0.0;
  double total = 0.0;
};

}  // namespace

TimingReport time_filter(const FilterFactory& factory, std::span<const Event> events, PredictMode mode,
                         const TimingOptions& options) {
  if (events.empty()) throw std::invalid_argument("cannot time an empty stream");
  if (options.repeats == 0) throw std::invalid_argument("need at least one repetition");
  TimingReport report;
  report.mode = mode;
  report.events = events.size();
  const double n = static_cast<double>(events.size());

  std::vector<Repetition> reps;
  for (std::size_t r = 0; r < options.repeats; ++r) {
    {
      auto warm = factory();
      const auto head = events.first(std::min(options.warmup, events.size()));
      if (mode == PredictMode::batch) warm->run_batch(head);
      else
        for (const auto& e : head) warm->step(e);
    }
    auto filter = factory();
    std::vector<Decision> decisions;
    Repetition rep;
    if (mode == PredictMode::batch) {
      const auto t0 = Clock::now();
      decisions = filter->run_batch(events);
      rep.total = seconds(Clock::now() - t0);
      rep.per_event_mean = rep.total / n;
    } else {
      decisions.reserve(events.size());
      double sum = 0.0, sum_sq = 0.0;
      const auto start = Clock::now();
      for (const auto& e : events) {
        const auto t0 = Clock::now();
        decisions.push_back(filter->step(e));
        const double dt = seconds(Clock::now() - t0);
        sum += dt;
        sum_sq += dt * dt;
      }
      rep.total = seconds(Clock::now() - start);
      rep.per_event_mean = sum / n;
      rep.per_event_var = std::max(0.0, sum_sq / n - rep.per_event_mean * rep.per_event_mean);
    }
    if (r == 0) report.decisions = std::move(decisions);
    else if (decisions != report.decisions)
      throw std::logic_error("filter decisions changed between repetitions");
    reps.push_back(rep);
  }

  std::vector<Repetition> sorted = reps;
  std::sort(sorted.begin(), sorted.end(),
            [](const Repetition& a, const Repetition& b) { return a.per_event_mean < b.per_event_mean; });
  const Repetition& median = sorted[sorted.size() / 2];
  report.median_s = median.per_event_mean;
  report.total_s = median.total;

  double mean = 0.0;
  for (const auto& r : reps) mean += r.per_event_mean;
  mean /= static_cast<double>(reps.size());
  report.mean_s = mean;
  if (mode == PredictMode::sequential) {
    double var = 0.0;
    for (const auto& r : reps) var += r.per_event_var + (r.per_event_mean - mean) * (r.per_event_mean - mean);
    report.stddev_s = std::sqrt(var / static_cast<double>(reps.size()));
  } else {
    double var = 0.0;
    for (const auto& r : reps) var += (r.per_event_mean - mean) * (r.per_event_mean - mean);
    report.stddev_s = std::sqrt(var / static_cast<double>(reps.size()));
  }
  return report;
}

ModeComparison compare_modes(const FilterFactory& factory, std::span<const Event> events,
                             const TimingOptions& options) {
  ModeComparison c{time_filter(factory, events, PredictMode::sequential, options),
                   time_filter(factory, events, PredictMode::batch, options)};
  if (c.sequential.decisions != c.batch.decisions)
    throw std::logic_error("sequential and batch decisions differ");
  return c;
}

MemoryEstimate memory_estimate(const VolumeSpec& spec, const SensorGeometry& geometry,
                               const DenoiseModel* model) {
  spec.validate();
  MemoryEstimate m;
  const auto w = static_cast<std::size_t>(spec.window());
  m.window_cells = w * w;
  m.nodes = spec.n_max;
  m.elements = m.window_cells * m.nodes;
  m.comparison_elements = kCnnPatchElements;
  m.ratio = m.elements == 0 ? 0.0 : static_cast<double>(m.comparison_elements) / static_cast<double>(m.elements);
  m.feature_bytes = (spec.n_max + 1) * 3 * sizeof(double);
  const std::size_t capacity = std::max<std::size_t>(spec.n_max, 1);
  m.store_bytes = geometry.pixel_count() * (capacity * (sizeof(std::int64_t) + sizeof(std::uint64_t)) +
                                            2 * sizeof(std::uint32_t));
  if (model) m.parameters = model->params().scalar_count();
  return m;
}

}  // namespace evdn
