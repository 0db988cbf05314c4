#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "evdn/metrics.hpp"
#include "evdn/timing.hpp"

namespace evdn {

/// Fixed six-decimal rendering; NaN prints as "nan", infinities as "inf" / "-inf".
std::string format_number(double v);

struct MetricRow {
  std::string name;
  ConfusionCounts counts;
};

/// CSV: name,tp,fp,tn,fn,accuracy,sr,nr,snr
std::string format_metric_table(std::span<const MetricRow> rows);

/// Whitespace-separated series for plotting: t_begin_us t_end_us tp fp tn fn accuracy sr nr snr.
/// Header line starts with '#'.
std::string format_window_series(std::span<const WindowResult> windows);

struct TimingRow {
  std::string name;
  TimingReport report;
};

/// CSV: name,mode,events,mean_s,stddev_s,median_s,total_s
std::string format_timing_table(std::span<const TimingRow> rows);

/// CSV of the memory comparison: key,value
std::string format_memory(const MemoryEstimate& m);

/// Decision file: header "index,t_us,x,y,decision", one row per event, decision 1 = real.
std::string format_decisions(std::span<const Event> events, std::span<const Decision> decisions);
/// Reads the decision column back; rows must be in index order starting at 0.
std::vector<Decision> parse_decisions(const std::string& text);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace evdn
