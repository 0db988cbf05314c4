#include "evdn/event.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

namespace evdn {

namespace {

constexpr std::array<char, 8> kBinaryMagic = {'E', 'V', 'S', 'T', '0', '0', '0', '1'};
constexpr std::size_t kRecordSize = 16;

template <typename T>
bool parse_int(std::string_view field, T& out) {
  while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
  while (!field.empty() && (field.back() == ' ' || field.back() == '\t' || field.back() == '\r'))
    field.remove_suffix(1);
  if (field.empty()) return false;
  if (field.front() == '+') field.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), out);
  return ec == std::errc() && ptr == field.data() + field.size();
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

Label label_from_int(int v) {
  switch (v) {
    case -1: return Label::unknown;
    case 0: return Label::noise;
    case 1: return Label::real;
    default: throw std::invalid_argument("label out of range: " + std::to_string(v));
  }
}

void put_le(std::string& buf, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint64_t get_le(const unsigned char* p, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

void check_order(const std::vector<Event>& events) {
  for (std::size_t i = 1; i < events.size(); ++i)
    if (events[i].t < events[i - 1].t) throw TimestampRegression(i);
}

}  // namespace

TimestampRegression::TimestampRegression(std::size_t index)
    : std::runtime_error("timestamp regression at event index " + std::to_string(index)),
      index_(index) {}

EventStream::EventStream(std::vector<Event> events, SensorGeometry geometry)
    : events_(std::move(events)), geometry_(geometry) {
  if (geometry_.width < 1 || geometry_.height < 1)
    throw std::invalid_argument("sensor geometry must be at least 1x1");
  check_order(events_);
}

FileFormat parse_format(const std::string& name) {
  if (name == "csv") return FileFormat::csv;
  if (name == "bin" || name == "binary") return FileFormat::binary;
  throw std::invalid_argument("unknown event format '" + name + "' (expected csv or bin)");
}

EventStream parse_csv_events(const std::string& text, SensorGeometry geometry) {
  std::vector<Event> events;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  bool has_label_column = false;
  bool first_content = true;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    std::string_view line(text.data() + pos, (nl == std::string::npos ? text.size() : nl) - pos);
    pos = nl == std::string::npos ? text.size() : nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    if (first_content) {
      first_content = false;
      char c = line.front();
      if (!(c == '-' || c == '+' || (c >= '0' && c <= '9'))) {
        auto header = split_fields(line);
        if (header.size() < 4 || header.size() > 5 || header[0] != "t_us" || header[1] != "x" ||
            header[2] != "y" || header[3] != "p" || (header.size() == 5 && header[4] != "label"))
          throw FormatError("line " + std::to_string(line_no) + ": unrecognized CSV header",
                            line_no);
        has_label_column = header.size() == 5;
        continue;
      }
    }
    auto fields = split_fields(line);
    if (fields.size() != 4 && fields.size() != 5)
      throw FormatError("line " + std::to_string(line_no) + ": expected 4 or 5 fields, got " +
                            std::to_string(fields.size()),
                        line_no);
    Event e;
    int p = 0;
    if (!parse_int(fields[0], e.t) || e.t < 0 || !parse_int(fields[1], e.x) ||
        !parse_int(fields[2], e.y) || !parse_int(fields[3], p) || (p != -1 && p != 1))
      throw FormatError("line " + std::to_string(line_no) + ": malformed record", line_no);
    e.p = p;
    if (fields.size() == 5) {
      std::string_view lf = fields[4];
      int lv = -1;
      bool blank = lf.find_first_not_of(" \t") == std::string_view::npos;
      if (!blank && (!parse_int(lf, lv) || lv < -1 || lv > 1))
        throw FormatError("line " + std::to_string(line_no) + ": malformed label", line_no);
      e.label = label_from_int(lv);
    } else if (has_label_column) {
      e.label = Label::unknown;
    }
    if (!events.empty() && e.t < events.back().t) throw TimestampRegression(events.size());
    events.push_back(e);
  }
  return EventStream(std::move(events), geometry);
}

std::string format_csv_events(const EventStream& stream) {
  bool labeled = std::any_of(stream.begin(), stream.end(),
                             [](const Event& e) { return e.label != Label::unknown; });
  std::string out = labeled ? "t_us,x,y,p,label\n" : "t_us,x,y,p\n";
  out.reserve(out.size() + stream.size() * 24);
  for (const auto& e : stream) {
    out += std::to_string(e.t);
    out += ',';
    out += std::to_string(e.x);
    out += ',';
    out += std::to_string(e.y);
    out += ',';
    out += e.p < 0 ? "-1" : "1";
    if (labeled) {
      out += ',';
      out += std::to_string(static_cast<int>(e.label));
    }
    out += '\n';
  }
  return out;
}

EventStream read_events(const std::filesystem::path& path, FileFormat format,
                        SensorGeometry geometry) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open event file " + path.string());
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (format == FileFormat::csv) return parse_csv_events(data, geometry);

  if (data.size() < kBinaryMagic.size() ||
      std::memcmp(data.data(), kBinaryMagic.data(), kBinaryMagic.size()) != 0)
    throw FormatError("missing EVST0001 magic", 0);
  std::size_t body = data.size() - kBinaryMagic.size();
  if (body % kRecordSize != 0)
    throw FormatError("truncated record at byte offset " +
                          std::to_string(kBinaryMagic.size() + body / kRecordSize * kRecordSize),
                      kBinaryMagic.size() + body / kRecordSize * kRecordSize);
  std::vector<Event> events;
  events.reserve(body / kRecordSize);
  const auto* bytes = reinterpret_cast<const unsigned char*>(data.data());
  for (std::size_t off = kBinaryMagic.size(); off < data.size(); off += kRecordSize) {
    const unsigned char* r = bytes + off;
    Event e;
    e.t = static_cast<std::int64_t>(get_le(r, 8));
    e.x = static_cast<int>(get_le(r + 8, 2));
    e.y = static_cast<int>(get_le(r + 10, 2));
    auto p = static_cast<std::int8_t>(r[12]);
    auto l = static_cast<std::int8_t>(r[13]);
    if (e.t < 0 || (p != -1 && p != 1) || l < -1 || l > 1)
      throw FormatError("malformed record at byte offset " + std::to_string(off), off);
    e.p = p;
    e.label = static_cast<Label>(l);
    if (!events.empty() && e.t < events.back().t) throw TimestampRegression(events.size());
    events.push_back(e);
  }
  return EventStream(std::move(events), geometry);
}

void write_events(const EventStream& stream, const std::filesystem::path& path, FileFormat format) {
  std::string data;
  if (format == FileFormat::csv) {
    data = format_csv_events(stream);
  } else {
    data.reserve(kBinaryMagic.size() + stream.size() * kRecordSize);
    data.append(kBinaryMagic.data(), kBinaryMagic.size());
    for (const auto& e : stream) {
      if (e.x < 0 || e.x > 0xFFFF || e.y < 0 || e.y > 0xFFFF)
        throw std::out_of_range("pixel coordinate does not fit the binary record");
      put_le(data, static_cast<std::uint64_t>(e.t), 8);
      put_le(data, static_cast<std::uint64_t>(e.x), 2);
      put_le(data, static_cast<std::uint64_t>(e.y), 2);
      data.push_back(static_cast<char>(static_cast<std::int8_t>(e.p)));
      data.push_back(static_cast<char>(static_cast<std::int8_t>(e.label)));
      data.push_back('\0');
      data.push_back('\0');
    }
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

ValidationReport validate_stream(std::span<const Event> events, const SensorGeometry& geometry) {
  ValidationReport report;
  for (std::size_t i = 0; i < events.size(); ++i) {
    const Event& e = events[i];
    if (!geometry.contains(e.x, e.y)) {
      if (report.out_of_bounds == 0) report.first_out_of_bounds = i;
      ++report.out_of_bounds;
    }
    if (e.p != -1 && e.p != 1) ++report.bad_polarity;
    if (i > 0 && e.t < events[i - 1].t) {
      if (report.regressions == 0) report.first_regression = i;
      ++report.regressions;
    }
  }
  return report;
}

std::pair<std::size_t, std::size_t> time_range(const EventStream& stream, std::int64_t t0,
                                                std::int64_t t1) {
  if (t0 > t1) throw std::invalid_argument("slice_by_time requires t0 <= t1");
  auto ev = stream.events();
  auto lo = std::lower_bound(ev.begin(), ev.end(), t0,
                             [](const Event& e, std::int64_t t) { return e.t < t; });
  auto hi = std::lower_bound(lo, ev.end(), t1,
                             [](const Event& e, std::int64_t t) { return e.t < t; });
  return {static_cast<std::size_t>(lo - ev.begin()), static_cast<std::size_t>(hi - ev.begin())};
}

EventStream slice_by_time(const EventStream& stream, std::int64_t t0, std::int64_t t1) {
  auto [first, last] = time_range(stream, t0, t1);
  auto ev = stream.events();
  return EventStream(std::vector<Event>(ev.begin() + static_cast<std::ptrdiff_t>(first),
                                        ev.begin() + static_cast<std::ptrdiff_t>(last)),
                     stream.geometry());
}

}  // namespace evdn
