#pragma once

#include <random>
#include <span>
#include <string>
#include <vector>

#include "evdn/autodiff.hpp"

namespace evdn {

/// Per-head projections W^Q, W^K, W^V (D x D each) and the output map W^o ((heads*D) x D).
struct MhaParams {
  std::vector<std::size_t> wq, wk, wv;
  std::size_t wo = 0;

  std::size_t heads() const { return wq.size(); }
  static MhaParams create(ad::ParameterSet& params, const std::string& prefix, std::size_t heads,
                          std::size_t dim, std::mt19937_64& rng);
  static MhaParams bind(const ad::ParameterSet& params, const std::string& prefix,
                        std::size_t heads);
};

/// max(0, x W1 + b1) W2 + b2
struct FfnParams {
  std::size_t w1 = 0, b1 = 0, w2 = 0, b2 = 0;

  static FfnParams create(ad::ParameterSet& params, const std::string& prefix, std::size_t dim,
                          std::size_t hidden, std::mt19937_64& rng);
  static FfnParams bind(const ad::ParameterSet& params, const std::string& prefix);
};

struct LayerNormParams {
  std::size_t gain = 0, bias = 0;

  static LayerNormParams create(ad::ParameterSet& params, const std::string& prefix,
                                std::size_t dim);
  static LayerNormParams bind(const ad::ParameterSet& params, const std::string& prefix);
};

struct EncoderLayerParams {
  MhaParams mha;
  LayerNormParams ln1, ln2;
  FfnParams ffn;
};

struct DecoderLayerParams {
  MhaParams mha1, mha2;
  LayerNormParams ln1, ln2, ln3;
  FfnParams ffn;
};

/// softmax(Q K^T / sqrt(d_q)) V, softmax over each row of scores.
ad::Var attention(ad::Var q, ad::Var k, ad::Var v);

/// Concat(Z_1..Z_d) W^o with Z_h = attention(x W^Q_h, x W^K_h, x W^V_h).
ad::Var multi_head(ad::Tape& tape, ad::Var x, const MhaParams& mha, ad::ParameterSet& params);

ad::Var feed_forward(ad::Tape& tape, ad::Var x, const FfnParams& ffn, ad::ParameterSet& params);

ad::Var apply_layer_norm(ad::Tape& tape, ad::Var x, const LayerNormParams& ln,
                         ad::ParameterSet& params, double eps);

/// Pre-norm encoder stack:
///   y' = MHA(LN1(y)) + y
///   y  = FFN(LN2(y')) + y'
ad::Var encoder_forward(ad::Tape& tape, ad::Var tokens, std::span<const EncoderLayerParams> layers,
                        ad::ParameterSet& params, double ln_eps);

/// Decoder stack fed by the encoder output; both attention blocks read LN(z) of the
/// layer input:
///   z'  = MHA1(LN1(z)) + z
///   z'' = MHA2(LN2(z)) + z'
///   z   = FFN(LN3(z'')) + z''
ad::Var decoder_forward(ad::Tape& tape, ad::Var encoded, std::span<const DecoderLayerParams> layers,
                        ad::ParameterSet& params, double ln_eps);

}  // namespace evdn
