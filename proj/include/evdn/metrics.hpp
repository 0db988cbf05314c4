#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "evdn/event.hpp"
#include "evdn/filters.hpp"

namespace evdn {

/// Confusion counts with the convention
///   TP: real predicted real      TN: noise predicted noise
///   FP: real predicted noise     FN: noise predicted real
/// so TP + FP is the number of real events and TN + FN the number of noise events.
struct ConfusionCounts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fn = 0;

  std::uint64_t total() const { return tp + fp + tn + fn; }
  std::uint64_t real_events() const { return tp + fp; }
  std::uint64_t noise_events() const { return tn + fn; }
  ConfusionCounts& operator+=(const ConfusionCounts& o) {
    tp += o.tp, fp += o.fp, tn += o.tn, fn += o.fn;
    return *this;
  }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

/// Undefined ratios are NaN; SNR is +inf when FN = 0 and TP > 0.
struct Metrics {
  double accuracy = 0.0;
  double sr = 0.0;   // TP / (TP + FP)
  double nr = 0.0;   // FN / (TN + FN)
  double snr = 0.0;  // TP / FN
};

/// Throws on length mismatch or unknown truth labels.
ConfusionCounts confusion(std::span<const Decision> predictions, std::span<const Label> truths);
ConfusionCounts confusion(std::span<const Decision> predictions, const EventStream& stream);
/// Only the listed event indices.
ConfusionCounts confusion_at(std::span<const Decision> predictions, const EventStream& stream,
                             std::span<const std::size_t> indices);

Metrics metrics_from_counts(const ConfusionCounts& c);

struct WindowResult {
  std::int64_t t_begin = 0;  // window [t_begin, t_end)
  std::int64_t t_end = 0;
  ConfusionCounts counts;
  Metrics metrics;
};

/// Metrics per half-open interval [k*interval, (k+1)*interval), from the window holding the
/// first event to the window holding the last.
std::vector<WindowResult> windowed_eval(const EventStream& stream, std::span<const Decision> predictions,
                                        std::int64_t interval_us);

}  // namespace evdn
