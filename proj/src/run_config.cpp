#include "evdn/run_config.hpp"

#include <fmt/format.h>

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace evdn {

namespace {

const std::map<std::string, std::string>& defaults() {
  static const std::map<std::string, std::string> table = {
      {"sensor.width", "346"},
      {"sensor.height", "260"},
      {"volume.L", "2"},
      {"volume.T_us", "50000"},
      {"volume.N_max", "10"},
      {"msg.variant", "7q"},
      {"msg.width", "4"},
      {"msg.reference", "mean"},
      {"transformer.heads", "2"},
      {"transformer.encoders", "2"},
      {"transformer.decoders", "2"},
      {"transformer.ff_mult", "4"},
      {"transformer.single_token", "false"},
      {"transformer.ln_eps", "1e-05"},
      {"model.seed", "1"},
      {"train.lr", "0.001"},
      {"train.beta1", "0.9"},
      {"train.beta2", "0.999"},
      {"train.adam_eps", "1e-08"},
      {"train.epochs", "30"},
      {"train.batch", "64"},
      {"train.seed", "1"},
      {"train.per_class", "4000"},
      {"train.split", "0.8"},
      {"ba.L", "1"},
      {"ba.T_us", "1000"},
      {"ba.k", "8"},
      {"nnb.L", "1"},
      {"nnb.T_us", "1000"},
      {"liu.T_us", "1000"},
      {"khodamoradi.T_us", "1000"},
      {"khodamoradi.match_polarity", "false"},
      {"yang.L", "2"},
      {"yang.T_us", "5000"},
      {"yang.density", "3"},
      {"yang.hot_window_us", "100000"},
      {"yang.hot_count", "20"},
      {"yang.hot_support", "3"},
      {"kogtl.B", "2"},
      {"kogtl.canny_sigma", "1.4"},
      {"kogtl.canny_low", "0.1"},
      {"kogtl.canny_high", "0.3"},
      {"kogtl.icp_max_iter", "50"},
      {"kogtl.icp_tol", "0.01"},
      {"kogtl.icp_max_distance", "6"},
      {"kogtl.start_offset_us", "0"},
      {"kogtl.pose", ""},
      {"eval.interval_us", "10000"},
      {"bench.warmup", "100"},
      {"bench.repeats", "5"},
      {"bench.threads", "1"},
  };
  return table;
}

std::string trim(std::string s) {
  s.erase(0, s.find_first_not_of(" \t\r"));
  s.erase(s.find_last_not_of(" \t\r") + 1);
  return s;
}

}  // namespace

RunConfig::RunConfig() : values_(defaults()) {}

RunConfig RunConfig::parse(const std::string& text) {
  RunConfig c;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("expected key=value", static_cast<std::size_t>(lineno));
    c.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

void RunConfig::set(const std::string& key, const std::string& value) {
  auto it = values_.find(key);
  if (it == values_.end()) throw std::invalid_argument("unknown config key '" + key + "'");
  it->second = value;
}

void RunConfig::apply_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw std::invalid_argument("override must be key=value: " + assignment);
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

const std::string& RunConfig::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw std::invalid_argument("unknown config key '" + key + "'");
  return it->second;
}

namespace {

template <class T, class F>
T convert(const std::string& key, const std::string& value, F f) {
  try {
    std::size_t used = 0;
    T v = f(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::logic_error&) {
    throw std::invalid_argument("config key '" + key + "' has invalid value '" + value + "'");
  }
}

}  // namespace

std::int64_t RunConfig::get_int(const std::string& key) const {
  return convert<std::int64_t>(key, get(key), [](const std::string& s, std::size_t* u) { return std::stoll(s, u); });
}

std::uint64_t RunConfig::get_uint(const std::string& key) const {
  const auto& v = get(key);
  if (!v.empty() && v[0] == '-') throw std::invalid_argument("config key '" + key + "' must be non-negative");
  return convert<std::uint64_t>(key, v, [](const std::string& s, std::size_t* u) { return std::stoull(s, u); });
}

double RunConfig::get_double(const std::string& key) const {
  return convert<double>(key, get(key), [](const std::string& s, std::size_t* u) { return std::stod(s, u); });
}

bool RunConfig::get_bool(const std::string& key) const {
  const auto& v = get(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw std::invalid_argument("config key '" + key + "' must be true or false");
}

std::string RunConfig::canonical() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + '=' + v + '\n';
  return out;
}

std::uint64_t fnv1a64(const std::string& data) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::uint64_t RunConfig::hash() const { return fnv1a64(canonical()); }

std::string RunConfig::hash_hex() const { return fmt::format("{:016x}", hash()); }

SensorGeometry RunConfig::geometry() const {
  SensorGeometry g;
  g.width = static_cast<int>(get_int("sensor.width"));
  g.height = static_cast<int>(get_int("sensor.height"));
  if (g.width <= 0 || g.height <= 0) throw std::invalid_argument("sensor size must be positive");
  return g;
}

VolumeSpec RunConfig::volume() const {
  VolumeSpec v;
  v.half_extent = static_cast<int>(get_int("volume.L"));
  v.depth_us = get_int("volume.T_us");
  v.n_max = get_uint("volume.N_max");
  v.validate();
  return v;
}

ModelConfig RunConfig::model() const {
  ModelConfig m;
  m.quantities = QuantitySet::parse(get("msg.variant"));
  m.width = get_uint("msg.width");
  m.reference = parse_message_reference(get("msg.reference"));
  m.heads = get_uint("transformer.heads");
  m.encoders = get_uint("transformer.encoders");
  m.decoders = get_uint("transformer.decoders");
  m.ff_mult = get_uint("transformer.ff_mult");
  m.single_token = get_bool("transformer.single_token");
  m.ln_eps = get_double("transformer.ln_eps");
  m.volume = volume();
  m.validate();
  return m;
}

TrainConfig RunConfig::training() const {
  TrainConfig t;
  t.adam.lr = get_double("train.lr");
  t.adam.beta1 = get_double("train.beta1");
  t.adam.beta2 = get_double("train.beta2");
  t.adam.eps = get_double("train.adam_eps");
  t.epochs = get_uint("train.epochs");
  t.batch_size = get_uint("train.batch");
  t.seed = get_uint("train.seed");
  return t;
}

BaselineConfigs RunConfig::baselines() const {
  BaselineConfigs b;
  b.ba.half_extent = static_cast<int>(get_int("ba.L"));
  b.ba.window_us = get_int("ba.T_us");
  b.ba.min_support = static_cast<int>(get_int("ba.k"));
  b.nnb.half_extent = static_cast<int>(get_int("nnb.L"));
  b.nnb.window_us = get_int("nnb.T_us");
  b.liu.window_us = get_int("liu.T_us");
  b.khodamoradi.window_us = get_int("khodamoradi.T_us");
  b.khodamoradi.match_polarity = get_bool("khodamoradi.match_polarity");
  b.yang.half_extent = static_cast<int>(get_int("yang.L"));
  b.yang.window_us = get_int("yang.T_us");
  b.yang.density = static_cast<int>(get_int("yang.density"));
  b.yang.hot_window_us = get_int("yang.hot_window_us");
  b.yang.hot_count = static_cast<int>(get_int("yang.hot_count"));
  b.yang.hot_support = static_cast<int>(get_int("yang.hot_support"));
  return b;
}

LabelingConfig RunConfig::labeling() const {
  LabelingConfig l;
  l.B = static_cast<int>(get_int("kogtl.B"));
  if (l.B < 0) throw std::invalid_argument("kogtl.B must be >= 0");
  l.canny.sigma = get_double("kogtl.canny_sigma");
  l.canny.low = get_double("kogtl.canny_low");
  l.canny.high = get_double("kogtl.canny_high");
  l.icp.max_iterations = static_cast<int>(get_int("kogtl.icp_max_iter"));
  l.icp.tolerance = get_double("kogtl.icp_tol");
  l.icp.max_distance = get_double("kogtl.icp_max_distance");
  l.start_offset_us = get_int("kogtl.start_offset_us");
  l.pose_tag = get("kogtl.pose");
  return l;
}

TimingOptions RunConfig::timing() const {
  TimingOptions t;
  t.warmup = get_uint("bench.warmup");
  t.repeats = get_uint("bench.repeats");
  return t;
}

}  // namespace evdn
