#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "evdn/filters.hpp"
#include "evdn/graph_builder.hpp"
#include "evdn/model.hpp"
#include "evdn/optim.hpp"

namespace evdn {

struct LabeledGraph {
  NormalizedGraph graph;
  int label = 0;  // 0 noise, 1 real
};

struct TrainConfig {
  ad::AdamConfig adam;
  std::size_t epochs = 30;
  std::size_t batch_size = 64;
  std::uint64_t seed = 1;  // shuffling order
  /// Called after every epoch with (epoch index, mean training loss).
  std::function<void(std::size_t, double)> on_epoch;
};

struct TrainHistory {
  std::vector<double> step_loss;   // mean loss of each mini-batch, before its update
  std::vector<double> epoch_loss;  // mean loss over each epoch
};

class NonFiniteLoss : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Mini-batch Adam on mean cross-entropy. Deterministic for a given model and seed.
TrainHistory train(DenoiseModel& model, std::span<const LabeledGraph> data, const TrainConfig& config);

struct TrainResult {
  DenoiseModel model;
  TrainHistory history;
};

/// Fresh model from `model_seed`, then train().
TrainResult train_new(const ModelConfig& model_config, std::uint64_t model_seed,
                      std::span<const LabeledGraph> data, const TrainConfig& config);

/// Mean cross-entropy of the model over a labeled set.
double mean_loss(DenoiseModel& model, std::span<const LabeledGraph> data);

std::vector<Decision> classify_graphs(const DenoiseModel& model, std::span<const LabeledGraph> data);
double graph_accuracy(const DenoiseModel& model, std::span<const LabeledGraph> data);

}  // namespace evdn
