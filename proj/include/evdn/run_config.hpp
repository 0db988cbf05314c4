#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "evdn/event.hpp"
#include "evdn/filters.hpp"
#include "evdn/kogtl.hpp"
#include "evdn/model.hpp"
#include "evdn/timing.hpp"
#include "evdn/training.hpp"

namespace evdn {

/// Every tunable of the toolkit as one flat key=value table. Keys not in the default table
/// are rejected.
class RunConfig {
 public:
  RunConfig();

  static RunConfig parse(const std::string& text);
  static RunConfig load(const std::filesystem::path& path);

  /// "key=value"; throws on unknown keys.
  void set(const std::string& key, const std::string& value);
  void apply_override(const std::string& assignment);
  const std::string& get(const std::string& key) const;
  bool has(const std::string& key) const { return values_.count(key) != 0; }

  std::int64_t get_int(const std::string& key) const;
  std::uint64_t get_uint(const std::string& key) const;
  double get_double(const std::string& key) const;
  bool get_bool(const std::string& key) const;

  /// Canonical form: sorted key=value lines.
  std::string canonical() const;
  /// 64-bit FNV-1a of canonical().
  std::uint64_t hash() const;
  std::string hash_hex() const;

  SensorGeometry geometry() const;
  VolumeSpec volume() const;
  ModelConfig model() const;
  TrainConfig training() const;
  BaselineConfigs baselines() const;
  LabelingConfig labeling() const;
  TimingOptions timing() const;

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

std::uint64_t fnv1a64(const std::string& data);

}  // namespace evdn
