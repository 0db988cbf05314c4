#include "evdn/metrics.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace evdn {

namespace {

void tally(ConfusionCounts& c, Decision pred, Label truth, std::size_t index) {
  const bool said_real = pred == Decision::real;
  switch (truth) {
    case Label::real:
      (said_real ? c.tp : c.fp) += 1;
      break;
    case Label::noise:
      (said_real ? c.fn : c.tn) += 1;
      break;
    default:
      throw std::invalid_argument("event " + std::to_string(index) + " has no ground-truth label");
  }
}

}  // namespace

ConfusionCounts confusion(std::span<const Decision> predictions, std::span<const Label> truths) {
  if (predictions.size() != truths.size())
    throw std::invalid_argument("prediction and truth sequences differ in length");
  ConfusionCounts c;
  for (std::size_t i = 0; i < truths.size(); ++i) tally(c, predictions[i], truths[i], i);
  return c;
}

ConfusionCounts confusion(std::span<const Decision> predictions, const EventStream& stream) {
  if (predictions.size() != stream.size())
    throw std::invalid_argument("prediction count does not match stream length");
  ConfusionCounts c;
  for (std::size_t i = 0; i < stream.size(); ++i) tally(c, predictions[i], stream[i].label, i);
  return c;
}

ConfusionCounts confusion_at(std::span<const Decision> predictions, const EventStream& stream,
                             std::span<const std::size_t> indices) {
  if (predictions.size() != stream.size())
    throw std::invalid_argument("prediction count does not match stream length");
  ConfusionCounts c;
  for (auto i : indices) {
    if (i >= stream.size()) throw std::out_of_range("event index out of range");
    tally(c, predictions[i], stream[i].label, i);
  }
  return c;
}

Metrics metrics_from_counts(const ConfusionCounts& c) {
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  auto ratio = [&](std::uint64_t num, std::uint64_t den) {
    return den == 0 ? nan : static_cast<double>(num) / static_cast<double>(den);
  };
  Metrics m;
  m.accuracy = ratio(c.tp + c.tn, c.total());
  m.sr = ratio(c.tp, c.tp + c.fp);
  m.nr = ratio(c.fn, c.tn + c.fn);
  if (c.fn == 0) m.snr = c.tp > 0 ? std::numeric_limits<double>::infinity() : nan;
  else m.snr = ratio(c.tp, c.fn);
  return m;
}

std::vector<WindowResult> windowed_eval(const EventStream& stream, std::span<const Decision> predictions,
                                        std::int64_t interval_us) {
  if (interval_us <= 0) throw std::invalid_argument("evaluation interval must be > 0");
  if (predictions.size() != stream.size())
    throw std::invalid_argument("prediction count does not match stream length");
  std::vector<WindowResult> out;
  if (stream.empty()) return out;
  auto window_of = [&](std::int64_t t) {
    // floor division, valid for negative timestamps too
    return t >= 0 ? t / interval_us : -((-t + interval_us - 1) / interval_us);
  };
  const std::int64_t first = window_of(stream[0].t);
  const std::int64_t last = window_of(stream[stream.size() - 1].t);
  out.resize(static_cast<std::size_t>(last - first + 1));
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k].t_begin = (first + static_cast<std::int64_t>(k)) * interval_us;
    out[k].t_end = out[k].t_begin + interval_us;
  }
  for (std::size_t i = 0; i < stream.size(); ++i)
    tally(out[static_cast<std::size_t>(window_of(stream[i].t) - first)].counts, predictions[i],
          stream[i].label, i);
  for (auto& w : out) w.metrics = metrics_from_counts(w.counts);
  return out;
}

}  // namespace evdn
