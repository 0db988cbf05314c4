// evdn: command-line front end for synthesis, labeling, training, filtering and evaluation.

#include <fmt/format.h>

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "evdn/event.hpp"
#include "evdn/filters.hpp"
#include "evdn/image.hpp"
#include "evdn/inference.hpp"
#include "evdn/kogtl.hpp"
#include "evdn/metrics.hpp"
#include "evdn/model.hpp"
#include "evdn/report.hpp"
#include "evdn/run_config.hpp"
#include "evdn/synthgen.hpp"
#include "evdn/timing.hpp"
#include "evdn/training.hpp"

#ifndef EVDN_VERSION
#define EVDN_VERSION "dev"
#endif

namespace fs = std::filesystem;
using namespace evdn;

namespace {

constexpr const char* kConventionHeader =
    "# confusion convention: TP = real kept, TN = noise removed, FP = real event predicted noise, "
    "FN = noise event predicted real";

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = ".";
  std::vector<std::string> overrides;
  std::string format = "auto";
};

class Run {
 public:
  Run(const Globals& g, std::string command) : globals_(g), command_(std::move(command)) {
    if (!g.config_path.empty()) config_ = RunConfig::load(g.config_path);
    for (const auto& o : g.overrides) config_.apply_override(o);
    if (g.seed) {
      const auto s = std::to_string(*g.seed);
      config_.set("model.seed", s);
      config_.set("train.seed", s);
    }
    fs::create_directories(g.out_dir);
  }

  RunConfig& config() { return config_; }

  /// Output paths are placed under --out-dir unless absolute.
  fs::path output(const std::string& name) {
    fs::path p(name);
    if (p.is_relative()) p = fs::path(globals_.out_dir) / p;
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    outputs_.push_back(p.string());
    return p;
  }

  FileFormat format_for(const fs::path& path) const {
    if (globals_.format != "auto") return parse_format(globals_.format);
    return path.extension() == ".csv" ? FileFormat::csv : FileFormat::binary;
  }

  EventStream read(const std::string& path) {
    inputs_.push_back(path);
    return read_events(path, format_for(path), config_.geometry());
  }

  void write(const EventStream& stream, const std::string& name) {
    const auto p = output(name);
    write_events(stream, p, format_for(p));
  }

  void note(const std::string& key, nlohmann::json value) { extra_[key] = std::move(value); }

  void finish() {
    nlohmann::json m;
    m["command"] = command_;
    m["version"] = EVDN_VERSION;
    m["formats"] = {{"events", "EVST0001"}, {"model", "EVDN0001"}};
    m["config_hash"] = config_.hash_hex();
    m["config"] = config_.values();
    if (globals_.seed) m["seed"] = *globals_.seed;
    m["inputs"] = inputs_;
    m["outputs"] = outputs_;
    if (!extra_.is_null()) m["results"] = extra_;
    write_text(fs::path(globals_.out_dir) / "manifest.json", m.dump(2) + "\n");
  }

 private:
  const Globals& globals_;
  std::string command_;
  RunConfig config_;
  std::vector<std::string> inputs_, outputs_;
  nlohmann::json extra_;
};

// Events with a known label, and the matching decisions.
struct KnownSubset {
  EventStream stream;
  std::vector<Decision> decisions;
  std::size_t unknown = 0;
};

KnownSubset known_subset(const EventStream& stream, std::span<const Decision> decisions) {
  if (decisions.size() != stream.size())
    throw std::invalid_argument(fmt::format("{} decisions for {} events", decisions.size(), stream.size()));
  KnownSubset k;
  std::vector<Event> events;
  for (std::size_t i = 0; i < stream.size(); ++i) {
    if (stream[i].label == Label::unknown) {
      ++k.unknown;
      continue;
    }
    events.push_back(stream[i]);
    k.decisions.push_back(decisions[i]);
  }
  k.stream = EventStream(std::move(events), stream.geometry());
  return k;
}

std::unique_ptr<EventFilter> make_filter(const std::string& algo, const RunConfig& cfg,
                                         const DenoiseModel* model, unsigned threads) {
  if (algo == "gnnt") {
    if (!model) throw std::invalid_argument("--algo gnnt needs --model");
    return std::make_unique<GnnFilter>(*model, cfg.geometry(), threads);
  }
  return make_baseline(algo, cfg.geometry(), cfg.baselines());
}

std::vector<std::string> algo_names() {
  auto names = baseline_names();
  names.push_back("gnnt");
  return names;
}

void print_table(const std::vector<MetricRow>& rows) {
  std::cout << kConventionHeader << '\n' << format_metric_table(rows);
}

// ---- subcommands ----

struct SynthArgs {
  std::string scene, preset = "light.750lux", out_events = "events.bin", out_frames = "frames",
                     manifest = "counts.csv";
  bool no_frames = false;
};

void cmd_synth(const Globals& g, const SynthArgs& a) {
  Run run(g, "synth");
  SceneSpec scene = a.scene.empty() ? scene_preset(a.preset) : load_scene(a.scene);
  if (g.seed) scene.seed = *g.seed;
  const auto data = generate(scene, !a.no_frames);
  run.write(data.stream, a.out_events);
  if (!a.no_frames) write_frames(data.frames, run.output(a.out_frames));
  write_text(run.output(a.manifest),
             fmt::format("key,value\nevents,{}\nreal,{}\nnoise,{}\nhot,{}\nframes,{}\nseed,{}\n",
                         data.stream.size(), data.counts.real, data.counts.noise, data.counts.hot,
                         data.frames.size(), scene.seed));
  write_text(run.output("scene.cfg"), format_scene(scene));
  run.note("events", data.stream.size());
  run.note("real", data.counts.real);
  run.note("noise", data.counts.noise);
  run.note("hot", data.counts.hot);
  run.finish();
  fmt::print("{} events ({} real, {} noise, {} hot), {} frames\n", data.stream.size(), data.counts.real,
             data.counts.noise, data.counts.hot, data.frames.size());
}

struct LabelArgs {
  std::string events, frames, out = "labeled.bin", report = "batches.csv", sweep_out = "b_sweep.csv";
  std::vector<int> b_sweep;
};

void cmd_label(const Globals& g, const LabelArgs& a) {
  Run run(g, "label");
  const auto stream = run.read(a.events);
  const auto frames = read_frames(a.frames, run.config().geometry());
  const auto result = kogtl_pipeline(stream, frames, run.config().labeling());
  run.write(result.stream, a.out);
  std::string table = "frame,t_us,events,edge_pixels,dx,dy,residual,iterations,converged,labeled_real\n";
  std::size_t real = 0, labeled = 0;
  for (const auto& b : result.batches) {
    table += fmt::format("{},{},{},{},{},{},{},{},{},{}\n", b.frame, b.frame_t_us, b.events, b.edge_pixels,
                         format_number(b.icp.dx), format_number(b.icp.dy), format_number(b.icp.residual),
                         b.icp.iterations, b.icp.converged ? 1 : 0, b.labeled_real);
    real += b.labeled_real;
    labeled += b.events;
  }
  write_text(run.output(a.report), table);
  run.note("labeled", labeled);
  run.note("labeled_real", real);
  run.note("pre_frame_unknown", result.pre_frame_events);
  if (!a.b_sweep.empty()) {
    std::string sweep = "B,labeled,labeled_real,real_fraction\n";
    for (int B : a.b_sweep) {
      auto cfg = run.config().labeling();
      cfg.B = B;
      std::size_t n = 0, r = 0;
      for (const auto& b : kogtl_pipeline(stream, frames, cfg).batches) n += b.events, r += b.labeled_real;
      sweep += fmt::format("{},{},{},{}\n", B, n, r,
                           format_number(n ? static_cast<double>(r) / static_cast<double>(n) : 0.0));
    }
    write_text(run.output(a.sweep_out), sweep);
  }
  run.finish();
  fmt::print("{} batches, {} events labeled ({} real), {} before the first frame left unknown\n",
             result.batches.size(), labeled, real, result.pre_frame_events);
}

struct TrainArgs {
  std::vector<std::string> data;
  std::string out = "model.evdn", log = "train_log.csv";
};

void cmd_train(const Globals& g, const TrainArgs& a) {
  Run run(g, "train");
  auto& cfg = run.config();
  const auto volume = cfg.volume();
  const auto per_class = cfg.get_uint("train.per_class");
  const auto seed = cfg.get_uint("train.seed");
  std::vector<LabeledGraph> train_set, test_set;
  for (std::size_t f = 0; f < a.data.size(); ++f) {
    const auto stream = run.read(a.data[f]);
    auto split = split_samples(build_training_set(stream, volume, per_class, seed + f),
                               cfg.get_double("train.split"), seed + f);
    for (auto& s : split.train) train_set.push_back(std::move(s.sample));
    for (auto& s : split.test) test_set.push_back(std::move(s.sample));
  }
  auto tc = cfg.training();
  tc.on_epoch = [](std::size_t epoch, double loss) { fmt::print("epoch {:3d}  loss {:.6f}\n", epoch + 1, loss); };
  fmt::print("training on {} graphs, testing on {}\n", train_set.size(), test_set.size());
  auto result = train_new(cfg.model(), cfg.get_uint("model.seed"), train_set, tc);
  result.model.save(run.output(a.out));
  std::string log = "epoch,loss\n";
  for (std::size_t e = 0; e < result.history.epoch_loss.size(); ++e)
    log += fmt::format("{},{}\n", e + 1, format_number(result.history.epoch_loss[e]));
  write_text(run.output(a.log), log);
  const double train_acc = graph_accuracy(result.model, train_set);
  const double test_acc = test_set.empty() ? std::nan("") : graph_accuracy(result.model, test_set);
  run.note("train_graphs", train_set.size());
  run.note("test_graphs", test_set.size());
  run.note("train_accuracy", format_number(train_acc));
  run.note("test_accuracy", format_number(test_acc));
  run.finish();
  fmt::print("train accuracy {}  test accuracy {}\n", format_number(train_acc), format_number(test_acc));
}

struct FilterArgs {
  std::string algo = "gnnt", model, in, out = "decisions.csv", mode = "batch";
  unsigned threads = 1;
};

void cmd_filter(const Globals& g, const FilterArgs& a) {
  Run run(g, "filter");
  const auto stream = run.read(a.in);
  std::optional<DenoiseModel> model;
  if (!a.model.empty()) model = DenoiseModel::load(a.model);
  auto filter = make_filter(a.algo, run.config(), model ? &*model : nullptr, a.threads);
  const auto mode = parse_predict_mode(a.mode);
  std::vector<Decision> decisions;
  if (mode == PredictMode::batch) {
    decisions = filter->run_batch(stream.events());
  } else {
    decisions.reserve(stream.size());
    for (const auto& e : stream) decisions.push_back(filter->step(e));
  }
  write_text(run.output(a.out), format_decisions(stream.events(), decisions));
  std::size_t real = 0;
  for (auto d : decisions) real += d == Decision::real;
  run.note("algo", a.algo);
  run.note("mode", to_string(mode));
  run.note("events", stream.size());
  run.note("kept", real);
  run.finish();
  fmt::print("{}: kept {} of {} events\n", a.algo, real, stream.size());
}

struct EvalArgs {
  std::string events, decisions, name = "run", out = "metrics.csv", series = "series.dat";
  std::int64_t interval_us = 0;
};

void cmd_eval(const Globals& g, const EvalArgs& a) {
  Run run(g, "eval");
  const auto stream = run.read(a.events);
  const auto decisions = parse_decisions(read_text(a.decisions));
  const auto known = known_subset(stream, decisions);
  const auto counts = confusion(known.decisions, known.stream);
  const std::vector<MetricRow> rows{{a.name, counts}};
  write_text(run.output(a.out), format_metric_table(rows));
  const auto interval = a.interval_us > 0 ? a.interval_us : run.config().get_int("eval.interval_us");
  write_text(run.output(a.series), format_window_series(windowed_eval(known.stream, known.decisions, interval)));
  const auto m = metrics_from_counts(counts);
  run.note("accuracy", format_number(m.accuracy));
  run.note("unknown_skipped", known.unknown);
  run.finish();
  print_table(rows);
  if (known.unknown) fmt::print("# {} events with unknown label skipped\n", known.unknown);
}

struct BenchArgs {
  std::string in, model, out = "timing.csv", memory = "memory.csv";
  std::vector<std::string> algos;
  unsigned threads = 1;
};

void cmd_bench(const Globals& g, const BenchArgs& a) {
  Run run(g, "bench");
  const auto stream = run.read(a.in);
  std::optional<DenoiseModel> model;
  if (!a.model.empty()) model = DenoiseModel::load(a.model);
  auto algos = a.algos;
  if (algos.empty()) {
    algos = baseline_names();
    if (model) algos.push_back("gnnt");
  }
  const auto opts = run.config().timing();
  std::vector<TimingRow> rows;
  std::cout << "name,seq_mean_s,batch_mean_s,events_per_s_batch\n";
  for (const auto& algo : algos) {
    FilterFactory factory = [&] { return make_filter(algo, run.config(), model ? &*model : nullptr, a.threads); };
    const auto cmp = compare_modes(factory, stream.events(), opts);
    rows.push_back({algo, cmp.sequential});
    rows.push_back({algo, cmp.batch});
    const double rate = cmp.batch.mean_s > 0 ? 1.0 / cmp.batch.mean_s : std::nan("");
    fmt::print("{},{:.3e},{:.3e},{:.0f}\n", algo, cmp.sequential.mean_s, cmp.batch.mean_s, rate);
  }
  write_text(run.output(a.out), format_timing_table(rows));
  write_text(run.output(a.memory),
             format_memory(memory_estimate(run.config().volume(), run.config().geometry(),
                                           model ? &*model : nullptr)));
  run.finish();
}

struct ReportArgs {
  std::string events, out = "metrics.csv", series_dir = "series";
  std::vector<std::string> decisions;  // name=path
  std::int64_t interval_us = 0;
};

void cmd_report(const Globals& g, const ReportArgs& a) {
  Run run(g, "report");
  const auto stream = run.read(a.events);
  const auto interval = a.interval_us > 0 ? a.interval_us : run.config().get_int("eval.interval_us");
  std::vector<MetricRow> rows;
  for (const auto& spec : a.decisions) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0) throw std::invalid_argument("--decisions expects name=path");
    const std::string name = spec.substr(0, eq);
    const auto known = known_subset(stream, parse_decisions(read_text(spec.substr(eq + 1))));
    rows.push_back({name, confusion(known.decisions, known.stream)});
    write_text(run.output(a.series_dir + "/" + name + ".dat"),
               format_window_series(windowed_eval(known.stream, known.decisions, interval)));
  }
  write_text(run.output(a.out), format_metric_table(rows));
  run.finish();
  print_table(rows);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Event-camera denoising toolkit"};
  app.set_version_flag("--version", EVDN_VERSION);
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config_path, "key=value run configuration file")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "seed for the model, training and scene generators");
  app.add_option("--out-dir", g.out_dir, "directory for all outputs and manifest.json");
  app.add_option("--set", g.overrides, "config override key=value (repeatable)");
  app.add_option("--format", g.format, "event file format")->check(CLI::IsMember({"auto", "csv", "bin"}));

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "generate a labeled synthetic scene");
  s->add_option("--scene", synth.scene, "scene file")->check(CLI::ExistingFile);
  s->add_option("--preset", synth.preset, "scene preset when no scene file is given")
      ->check(CLI::IsMember(scene_preset_names()));
  s->add_option("--out-events", synth.out_events);
  s->add_option("--out-frames", synth.out_frames);
  s->add_option("--manifest", synth.manifest, "counts table");
  s->add_flag("--no-frames", synth.no_frames);
  s->callback([&] { cmd_synth(g, synth); });

  LabelArgs label;
  auto* l = app.add_subcommand("label", "label events against frames");
  l->add_option("--events", label.events)->required()->check(CLI::ExistingFile);
  l->add_option("--frames", label.frames)->required()->check(CLI::ExistingDirectory);
  l->add_option("--out", label.out);
  l->add_option("--report", label.report, "per-frame alignment table");
  l->add_option("--b-sweep", label.b_sweep, "proximity windows to report the real fraction for")
      ->check(CLI::NonNegativeNumber);
  l->add_option("--b-sweep-out", label.sweep_out);
  l->callback([&] { cmd_label(g, label); });

  TrainArgs train;
  auto* t = app.add_subcommand("train", "train a classifier on labeled event files");
  t->add_option("--data", train.data, "labeled event file (repeatable)")->required()->check(CLI::ExistingFile);
  t->add_option("--out", train.out);
  t->add_option("--log", train.log);
  t->callback([&] { cmd_train(g, train); });

  FilterArgs filter;
  auto* f = app.add_subcommand("filter", "classify every event of a stream");
  f->add_option("--algo", filter.algo)->check(CLI::IsMember(algo_names()));
  f->add_option("--model", filter.model)->check(CLI::ExistingFile);
  f->add_option("--in", filter.in)->required()->check(CLI::ExistingFile);
  f->add_option("--out", filter.out);
  f->add_option("--mode", filter.mode)->check(CLI::IsMember({"seq", "sequential", "batch"}));
  f->add_option("--threads", filter.threads)->check(CLI::PositiveNumber);
  f->callback([&] { cmd_filter(g, filter); });

  EvalArgs eval;
  auto* e = app.add_subcommand("eval", "score a decision file against labels");
  e->add_option("--events", eval.events)->required()->check(CLI::ExistingFile);
  e->add_option("--decisions", eval.decisions)->required()->check(CLI::ExistingFile);
  e->add_option("--name", eval.name);
  e->add_option("--out", eval.out);
  e->add_option("--series", eval.series);
  e->add_option("--interval-us", eval.interval_us);
  e->callback([&] { cmd_eval(g, eval); });

  BenchArgs bench;
  auto* b = app.add_subcommand("bench", "time filters in sequential and batch mode");
  b->add_option("--in", bench.in)->required()->check(CLI::ExistingFile);
  b->add_option("--model", bench.model)->check(CLI::ExistingFile);
  b->add_option("--algo", bench.algos)->check(CLI::IsMember(algo_names()));
  b->add_option("--out", bench.out);
  b->add_option("--memory", bench.memory);
  b->add_option("--threads", bench.threads)->check(CLI::PositiveNumber);
  b->callback([&] { cmd_bench(g, bench); });

  ReportArgs report;
  auto* r = app.add_subcommand("report", "metric table and series for several decision files");
  r->add_option("--events", report.events)->required()->check(CLI::ExistingFile);
  r->add_option("--decisions", report.decisions, "name=path (repeatable)")->required();
  r->add_option("--out", report.out);
  r->add_option("--series-dir", report.series_dir);
  r->add_option("--interval-us", report.interval_us);
  r->callback([&] { cmd_report(g, report); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    return app.exit(err);
  } catch (const std::exception& err) {
    std::cerr << "evdn: " << err.what() << '\n';
    return 1;
  }
  return 0;
}
