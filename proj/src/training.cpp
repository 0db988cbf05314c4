#include "evdn/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "evdn/inference.hpp"

namespace evdn {

namespace {

std::vector<ad::Tensor> quantity_matrices(std::span<const LabeledGraph> data, MessageReference ref) {
  std::vector<ad::Tensor> out;
  out.reserve(data.size());
  for (const auto& s : data) {
    if (s.label != 0 && s.label != 1) throw std::invalid_argument("training labels must be 0 or 1");
    out.push_back(compute_quantities(s.graph, compute_means(s.graph), ref));
  }
  return out;
}

}  // namespace

TrainHistory train(DenoiseModel& model, std::span<const LabeledGraph> data, const TrainConfig& config) {
  if (data.empty()) throw std::invalid_argument("training set is empty");
  if (config.batch_size == 0) throw std::invalid_argument("batch size must be >= 1");
  const auto Q = quantity_matrices(data, model.config().reference);
  auto& params = model.params();
  params.zero_grad();
  ad::AdamState state(params);
  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);

  TrainHistory history;
  ad::Tape tape;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const double weight = 1.0 / static_cast<double>(end - start);
      double batch_total = 0.0;
      for (std::size_t i = start; i < end; ++i) {
        const std::size_t idx = order[i];
        tape.clear();
        ad::Var logits = model.logits_from_quantities(tape, tape.constant(Q[idx]));
        ad::Var loss = ad::cross_entropy(logits, data[idx].label);
        const double value = loss.value()[0];
        if (!std::isfinite(value))
          throw NonFiniteLoss("non-finite loss " + std::to_string(value) + " at epoch " +
                              std::to_string(epoch) + ", sample " + std::to_string(idx) +
                              ", logits (" + std::to_string(logits.value()[0]) + ", " +
                              std::to_string(logits.value()[1]) + ")");
        tape.backward(loss, weight);
        batch_total += value;
      }
      tape.clear();
      ad::adam_step(params, state, config.adam);
      history.step_loss.push_back(batch_total * weight);
      epoch_total += batch_total;
    }
    const double epoch_mean = epoch_total / static_cast<double>(order.size());
    history.epoch_loss.push_back(epoch_mean);
    if (config.on_epoch) config.on_epoch(epoch, epoch_mean);
  }
  return history;
}

TrainResult train_new(const ModelConfig& model_config, std::uint64_t model_seed,
                      std::span<const LabeledGraph> data, const TrainConfig& config) {
  TrainResult r{DenoiseModel::create(model_config, model_seed), {}};
  r.history = train(r.model, data, config);
  return r;
}

double mean_loss(DenoiseModel& model, std::span<const LabeledGraph> data) {
  if (data.empty()) throw std::invalid_argument("empty data set");
  InferenceEngine engine(model);
  std::vector<double> h(engine.signature_length());
  double total = 0.0;
  for (const auto& s : data) {
    engine.signature(s.graph, h);
    auto z = engine.logits(h);
    total += ad::cross_entropy_value(z, s.label);
  }
  return total / static_cast<double>(data.size());
}

std::vector<Decision> classify_graphs(const DenoiseModel& model, std::span<const LabeledGraph> data) {
  InferenceEngine engine(model);
  std::vector<double> h(engine.signature_length());
  std::vector<Decision> out;
  out.reserve(data.size());
  for (const auto& s : data) {
    engine.signature(s.graph, h);
    out.push_back(engine.decide(h));
  }
  return out;
}

double graph_accuracy(const DenoiseModel& model, std::span<const LabeledGraph> data) {
  if (data.empty()) throw std::invalid_argument("empty data set");
  const auto d = classify_graphs(model, data);
  std::size_t hit = 0;
  for (std::size_t i = 0; i < d.size(); ++i)
    if (static_cast<int>(d[i]) == data[i].label) ++hit;
  return static_cast<double>(hit) / static_cast<double>(d.size());
}

}  // namespace evdn
