#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace evdn {

/// Ground-truth class of an event. `unknown` means no label was recorded.
enum class Label : std::int8_t { unknown = -1, noise = 0, real = 1 };

struct Event {
  std::int64_t t = 0;  // microseconds
  int x = 0;
  int y = 0;
  int p = 1;  // -1 or +1
  Label label = Label::unknown;

  friend bool operator==(const Event&, const Event&) = default;
};

struct SensorGeometry {
  int width = 346;
  int height = 260;

  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width && y < height; }
  std::size_t pixel_count() const {
    return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  }
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x);
  }
  friend bool operator==(const SensorGeometry&, const SensorGeometry&) = default;
};

/// Malformed input record. `where` is a 1-based line for CSV or a byte offset for binary.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& what, std::size_t where)
      : std::runtime_error(what), where_(where) {}
  std::size_t where() const { return where_; }

 private:
  std::size_t where_;
};

class TimestampRegression : public std::runtime_error {
 public:
  explicit TimestampRegression(std::size_t index);
  std::size_t index() const { return index_; }

 private:
  std::size_t index_;
};

/// Time-ordered event sequence. Immutable once built; construction rejects
/// timestamp regressions.
class EventStream {
 public:
  EventStream() = default;
  EventStream(std::vector<Event> events, SensorGeometry geometry);

  std::span<const Event> events() const { return events_; }
  const SensorGeometry& geometry() const { return geometry_; }
  std::size_t size() const { return events_.size(); }
  bool empty() const { return events_.empty(); }
  const Event& operator[](std::size_t i) const { return events_[i]; }
  auto begin() const { return events_.begin(); }
  auto end() const { return events_.end(); }

  friend bool operator==(const EventStream&, const EventStream&) = default;

 private:
  std::vector<Event> events_;
  SensorGeometry geometry_;
};

enum class FileFormat { csv, binary };

FileFormat parse_format(const std::string& name);

EventStream read_events(const std::filesystem::path& path, FileFormat format,
                        SensorGeometry geometry = {});
void write_events(const EventStream& stream, const std::filesystem::path& path, FileFormat format);

// In-memory variants used by the file functions; exposed for tests.
EventStream parse_csv_events(const std::string& text, SensorGeometry geometry = {});
std::string format_csv_events(const EventStream& stream);

struct ValidationReport {
  std::size_t out_of_bounds = 0;
  std::size_t bad_polarity = 0;
  std::size_t regressions = 0;  // indices i with t[i] < t[i-1]
  std::size_t first_regression = 0;
  std::size_t first_out_of_bounds = 0;

  bool ok() const { return out_of_bounds == 0 && bad_polarity == 0 && regressions == 0; }
};

ValidationReport validate_stream(std::span<const Event> events, const SensorGeometry& geometry);
inline ValidationReport validate_stream(const EventStream& stream, const SensorGeometry& geometry) {
  return validate_stream(stream.events(), geometry);
}

/// Events with t0 <= t < t1, in original order.
EventStream slice_by_time(const EventStream& stream, std::int64_t t0, std::int64_t t1);

/// Index range [first, last) of events with t0 <= t < t1.
std::pair<std::size_t, std::size_t> time_range(const EventStream& stream, std::int64_t t0,
                                                std::int64_t t1);

}  // namespace evdn
