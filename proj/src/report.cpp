#include "evdn/report.hpp"

#include <fmt/format.h>

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace evdn {

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return fmt::format("{:.6f}", v);
}

namespace {

std::string count_fields(const ConfusionCounts& c) {
  return fmt::format("{},{},{},{}", c.tp, c.fp, c.tn, c.fn);
}

std::string metric_fields(const Metrics& m, char sep) {
  return format_number(m.accuracy) + sep + format_number(m.sr) + sep + format_number(m.nr) + sep +
         format_number(m.snr);
}

}  // namespace

std::string format_metric_table(std::span<const MetricRow> rows) {
  std::string out = "name,tp,fp,tn,fn,accuracy,sr,nr,snr\n";
  for (const auto& r : rows)
    out += r.name + ',' + count_fields(r.counts) + ',' + metric_fields(metrics_from_counts(r.counts), ',') + '\n';
  return out;
}

std::string format_window_series(std::span<const WindowResult> windows) {
  std::string out = "# t_begin_us t_end_us tp fp tn fn accuracy sr nr snr\n";
  for (const auto& w : windows)
    out += fmt::format("{} {} {} {} {} {} ", w.t_begin, w.t_end, w.counts.tp, w.counts.fp, w.counts.tn,
                       w.counts.fn) +
           metric_fields(w.metrics, ' ') + '\n';
  return out;
}

std::string format_timing_table(std::span<const TimingRow> rows) {
  std::string out = "name,mode,events,mean_s,stddev_s,median_s,total_s\n";
  for (const auto& r : rows)
    out += fmt::format("{},{},{},{:.9e},{:.9e},{:.9e},{:.6f}\n", r.name, to_string(r.report.mode),
                       r.report.events, r.report.mean_s, r.report.stddev_s, r.report.median_s,
                       r.report.total_s);
  return out;
}

std::string format_memory(const MemoryEstimate& m) {
  return fmt::format(
      "key,value\nwindow_cells,{}\nnodes,{}\nelements,{}\ncomparison_elements,{}\nratio,{}\n"
      "feature_bytes,{}\nstore_bytes,{}\nparameters,{}\n",
      m.window_cells, m.nodes, m.elements, m.comparison_elements, format_number(m.ratio), m.feature_bytes,
      m.store_bytes, m.parameters);
}

std::string format_decisions(std::span<const Event> events, std::span<const Decision> decisions) {
  if (events.size() != decisions.size())
    throw std::invalid_argument("decision count does not match event count");
  std::string out = "index,t_us,x,y,decision\n";
  for (std::size_t i = 0; i < events.size(); ++i)
    out += fmt::format("{},{},{},{},{}\n", i, events[i].t, events[i].x, events[i].y,
                       decisions[i] == Decision::real ? 1 : 0);
  return out;
}

std::vector<Decision> parse_decisions(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::vector<Decision> out;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (lineno == 1 && line.rfind("index", 0) == 0) continue;
    const auto comma = line.find(',');
    const auto last = line.rfind(',');
    if (comma == std::string::npos) throw FormatError("expected index,...,decision", lineno);
    std::size_t index = 0;
    try {
      index = std::stoull(line.substr(0, comma));
    } catch (const std::logic_error&) {
      throw FormatError("bad index", lineno);
    }
    if (index != out.size()) throw FormatError("decision rows out of order", lineno);
    const std::string d = line.substr(last + 1);
    if (d == "1")
      out.push_back(Decision::real);
    else if (d == "0")
      out.push_back(Decision::noise);
    else
      throw FormatError("decision must be 0 or 1", lineno);
  }
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace evdn
