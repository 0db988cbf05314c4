#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "evdn/event.hpp"
#include "evdn/filters.hpp"
#include "evdn/graph_builder.hpp"
#include "evdn/model.hpp"

namespace evdn {

/// Allocation-free forward pass over a trained model. Attention projections are packed at
/// construction and the rest is read in place, so build the engine after training and keep
/// the model alive. One engine per thread.
class InferenceEngine {
 public:
  explicit InferenceEngine(const DenoiseModel& model);

  std::size_t signature_length() const { return sig_len_; }
  const ModelConfig& config() const { return model_->config(); }

  /// Graph signature of a normalized graph.
  void signature(const NormalizedGraph& g, std::span<double> h);
  /// Graph signature straight from an event and its queried neighbors.
  void signature(const Event& e, std::span<const NeighborEvent> neighbors, std::span<double> h);

  std::array<double, 2> logits(std::span<const double> h);
  ClassProbabilities probabilities(std::span<const double> h);
  Decision decide(std::span<const double> h) {
    auto z = logits(h);
    return z[1] > z[0] ? Decision::real : Decision::noise;
  }

 private:
  struct Mha {
    std::vector<double> wqkv;  // D x (3 * heads * D); per head: q, k, v column blocks
    const double* wo;
  };
  struct Ln {
    const double* gain;
    const double* bias;
  };
  struct Ffn {
    const double *w1, *b1, *w2, *b2;
  };
  struct Encoder {
    Mha mha;
    Ln ln1, ln2;
    Ffn ffn;
  };
  struct Decoder {
    Mha mha1, mha2;
    Ln ln1, ln2, ln3;
    Ffn ffn;
  };

  void eventconv(std::size_t m, std::span<double> h);
  void layer_norm(const double* x, const Ln& ln, double* out) const;
  void multi_head(const double* x, const Mha& mha, double* out);
  void feed_forward(const double* x, const Ffn& ffn, double* out);

  const DenoiseModel* model_;
  std::size_t S_, D_, F_, heads_, sig_len_;
  double ln_eps_;
  std::vector<std::size_t> selected_;
  std::vector<const double*> conv_w_, conv_b_;
  std::vector<Encoder> enc_;
  std::vector<Decoder> dec_;
  const double* head_w_;
  const double* head_b_;

  // workspace
  std::vector<double> nodes_;  // m x 3 normalized features
  std::vector<double> quant_;  // m x 7
  std::vector<double> x_, n1_, n2_, a_, b_, qkv_, scores_, concat_, hidden_;
};

enum class PredictMode { sequential, batch };

PredictMode parse_predict_mode(const std::string& name);
std::string to_string(PredictMode mode);

struct StreamPrediction {
  std::vector<Decision> decisions;   // one per input event; skipped events are noise
  std::vector<std::size_t> skipped;  // indices of out-of-bounds events
};

/// Streaming GNN classification: per event, query, build and normalize the graph,
/// classify, then insert the event. Batch mode builds every graph first and classifies
/// them afterwards (optionally on several threads); decisions are identical.
StreamPrediction predict_stream(std::span<const Event> events, const SensorGeometry& geometry,
                                const DenoiseModel& model, PredictMode mode,
                                unsigned threads = 1);
inline StreamPrediction predict_stream(const EventStream& stream, const DenoiseModel& model,
                                       PredictMode mode, unsigned threads = 1) {
  return predict_stream(stream.events(), stream.geometry(), model, mode, threads);
}

/// The GNN-Transformer as an online EventFilter.
class GnnFilter final : public EventFilter {
 public:
  GnnFilter(const DenoiseModel& model, SensorGeometry geometry, unsigned threads = 1);

  std::string name() const override { return "gnnt"; }
  Decision step(const Event& e) override;
  std::vector<Decision> run_batch(std::span<const Event> events) override;
  void reset() override { store_.clear(); }
  /// Per-event working set: window cells times node capacity.
  std::size_t memory_cells() const override;

 private:
  const DenoiseModel* model_;
  SensorGeometry geometry_;
  unsigned threads_;
  RecencyStore store_;
  InferenceEngine engine_;
  std::vector<NeighborEvent> neighbors_;
  std::vector<double> h_;
};

}  // namespace evdn
