#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "evdn/autodiff.hpp"
#include "evdn/eventconv.hpp"
#include "evdn/graph_builder.hpp"
#include "evdn/transformer.hpp"

namespace evdn {

struct ModelConfig {
  QuantitySet quantities = QuantitySet::variant7();
  std::size_t width = 4;  // EventConv channels per quantity
  MessageReference reference = MessageReference::mean;
  std::size_t heads = 2;
  std::size_t encoders = 2;
  std::size_t decoders = 2;
  std::size_t ff_mult = 4;
  bool single_token = false;  // one token of width q*width instead of q tokens of width `width`
  double ln_eps = 1e-5;
  VolumeSpec volume;

  std::size_t signature_length() const { return quantities.count() * width; }
  std::size_t tokens() const { return single_token ? 1 : quantities.count(); }
  std::size_t token_dim() const { return single_token ? signature_length() : width; }
  std::size_t ff_dim() const { return ff_mult * token_dim(); }
  void validate() const;

  /// key=value lines stored in the checkpoint header.
  std::string to_header() const;
  static ModelConfig from_header(const std::string& text);
};

/// Class probabilities: index 0 noise, index 1 real.
using ClassProbabilities = std::array<double, 2>;

/// EventConv + encoder/decoder stacks + classifier head.
class DenoiseModel {
 public:
  static DenoiseModel create(const ModelConfig& config, std::uint64_t seed);
  static DenoiseModel from_parameters(const ModelConfig& config, ad::ParameterSet params);

  const ModelConfig& config() const { return config_; }
  ad::ParameterSet& params() { return params_; }
  const ad::ParameterSet& params() const { return params_; }

  const EventConvParams& eventconv() const { return conv_; }
  const std::vector<EncoderLayerParams>& encoder_layers() const { return encoder_; }
  const std::vector<DecoderLayerParams>& decoder_layers() const { return decoder_; }
  std::size_t head_weight() const { return head_w_; }
  std::size_t head_bias() const { return head_b_; }

  /// Signature (1 x q*width) to 1 x 2 logits.
  ad::Var logits_from_signature(ad::Tape& tape, ad::Var signature);
  /// Quantity matrix (m x 7) to 1 x 2 logits.
  ad::Var logits_from_quantities(ad::Tape& tape, ad::Var quantities);

  /// Tape-based classification of a raw signature (used for verification, not throughput).
  ClassProbabilities classify(std::span<const double> signature);

  void save(const std::filesystem::path& path) const;
  static DenoiseModel load(const std::filesystem::path& path);

 private:
  void bind();

  ModelConfig config_;
  ad::ParameterSet params_;
  EventConvParams conv_;
  std::vector<EncoderLayerParams> encoder_;
  std::vector<DecoderLayerParams> decoder_;
  std::size_t head_w_ = 0;
  std::size_t head_b_ = 0;
};

/// Argmax with ties resolved to noise.
inline bool decide_real(const ClassProbabilities& p) { return p[1] > p[0]; }

}  // namespace evdn
