#include "evdn/transformer.hpp"

#include <cmath>

#include "evdn/optim.hpp"

namespace evdn {

MhaParams MhaParams::create(ad::ParameterSet& params, const std::string& prefix, std::size_t heads,
                            std::size_t dim, std::mt19937_64& rng) {
  if (heads == 0) throw std::invalid_argument("attention needs at least one head");
  MhaParams mha;
  for (std::size_t h = 0; h < heads; ++h) {
    const std::string hp = prefix + ".head" + std::to_string(h);
    mha.wq.push_back(params.add(hp + ".wq", ad::uniform_init({dim, dim}, dim, rng)));
    mha.wk.push_back(params.add(hp + ".wk", ad::uniform_init({dim, dim}, dim, rng)));
    mha.wv.push_back(params.add(hp + ".wv", ad::uniform_init({dim, dim}, dim, rng)));
  }
  mha.wo = params.add(prefix + ".wo", ad::uniform_init({heads * dim, dim}, heads * dim, rng));
  return mha;
}

MhaParams MhaParams::bind(const ad::ParameterSet& params, const std::string& prefix,
                          std::size_t heads) {
  MhaParams mha;
  for (std::size_t h = 0; h < heads; ++h) {
    const std::string hp = prefix + ".head" + std::to_string(h);
    mha.wq.push_back(params.index_of(hp + ".wq"));
    mha.wk.push_back(params.index_of(hp + ".wk"));
    mha.wv.push_back(params.index_of(hp + ".wv"));
  }
  mha.wo = params.index_of(prefix + ".wo");
  return mha;
}

FfnParams FfnParams::create(ad::ParameterSet& params, const std::string& prefix, std::size_t dim,
                            std::size_t hidden, std::mt19937_64& rng) {
  FfnParams f;
  f.w1 = params.add(prefix + ".w1", ad::uniform_init({dim, hidden}, dim, rng));
  f.b1 = params.add(prefix + ".b1", ad::uniform_init({1, hidden}, dim, rng));
  f.w2 = params.add(prefix + ".w2", ad::uniform_init({hidden, dim}, hidden, rng));
  f.b2 = params.add(prefix + ".b2", ad::uniform_init({1, dim}, hidden, rng));
  return f;
}

FfnParams FfnParams::bind(const ad::ParameterSet& params, const std::string& prefix) {
  return FfnParams{params.index_of(prefix + ".w1"), params.index_of(prefix + ".b1"),
                   params.index_of(prefix + ".w2"), params.index_of(prefix + ".b2")};
}

LayerNormParams LayerNormParams::create(ad::ParameterSet& params, const std::string& prefix,
                                        std::size_t dim) {
  LayerNormParams ln;
  ln.gain = params.add(prefix + ".gain", ad::Tensor({1, dim}, 1.0));
  ln.bias = params.add(prefix + ".bias", ad::Tensor({1, dim}, 0.0));
  return ln;
}

LayerNormParams LayerNormParams::bind(const ad::ParameterSet& params, const std::string& prefix) {
  return LayerNormParams{params.index_of(prefix + ".gain"), params.index_of(prefix + ".bias")};
}

ad::Var attention(ad::Var q, ad::Var k, ad::Var v) {
  const std::size_t dq = q.value().cols();
  if (k.value().cols() != dq)
    throw ad::ShapeError("attention: query width " + std::to_string(dq) + " != key width " +
                         std::to_string(k.value().cols()));
  ad::Var scores = ad::scale(ad::matmul(q, ad::transpose(k)), 1.0 / std::sqrt(static_cast<double>(dq)));
  return ad::matmul(ad::softmax(scores, 1), v);
}

ad::Var multi_head(ad::Tape& tape, ad::Var x, const MhaParams& mha, ad::ParameterSet& params) {
  std::vector<ad::Var> heads;
  heads.reserve(mha.heads());
  for (std::size_t h = 0; h < mha.heads(); ++h) {
    ad::Var q = ad::matmul(x, tape.parameter(params[mha.wq[h]]));
    ad::Var k = ad::matmul(x, tape.parameter(params[mha.wk[h]]));
    ad::Var v = ad::matmul(x, tape.parameter(params[mha.wv[h]]));
    heads.push_back(attention(q, k, v));
  }
  ad::Var joined = heads.size() == 1 ? heads.front() : ad::concat(heads, 1);
  return ad::matmul(joined, tape.parameter(params[mha.wo]));
}

ad::Var feed_forward(ad::Tape& tape, ad::Var x, const FfnParams& ffn, ad::ParameterSet& params) {
  ad::Var hidden = ad::relu(ad::add(ad::matmul(x, tape.parameter(params[ffn.w1])),
                                    tape.parameter(params[ffn.b1])));
  return ad::add(ad::matmul(hidden, tape.parameter(params[ffn.w2])), tape.parameter(params[ffn.b2]));
}

ad::Var apply_layer_norm(ad::Tape& tape, ad::Var x, const LayerNormParams& ln,
                         ad::ParameterSet& params, double eps) {
  return ad::layer_norm(x, tape.parameter(params[ln.gain]), tape.parameter(params[ln.bias]), eps);
}

ad::Var encoder_forward(ad::Tape& tape, ad::Var tokens, std::span<const EncoderLayerParams> layers,
                        ad::ParameterSet& params, double ln_eps) {
  ad::Var y = tokens;
  for (const auto& layer : layers) {
    ad::Var attended = multi_head(tape, apply_layer_norm(tape, y, layer.ln1, params, ln_eps),
                                  layer.mha, params);
    ad::Var y1 = ad::add(attended, y);
    ad::Var ff = feed_forward(tape, apply_layer_norm(tape, y1, layer.ln2, params, ln_eps),
                              layer.ffn, params);
    y = ad::add(ff, y1);
  }
  return y;
}

ad::Var decoder_forward(ad::Tape& tape, ad::Var encoded, std::span<const DecoderLayerParams> layers,
                        ad::ParameterSet& params, double ln_eps) {
  ad::Var z = encoded;
  for (const auto& layer : layers) {
    ad::Var a1 = multi_head(tape, apply_layer_norm(tape, z, layer.ln1, params, ln_eps), layer.mha1,
                            params);
    ad::Var z1 = ad::add(a1, z);
    ad::Var a2 = multi_head(tape, apply_layer_norm(tape, z, layer.ln2, params, ln_eps), layer.mha2,
                            params);
    ad::Var z2 = ad::add(a2, z1);
    ad::Var ff = feed_forward(tape, apply_layer_norm(tape, z2, layer.ln3, params, ln_eps),
                              layer.ffn, params);
    z = ad::add(ff, z2);
  }
  return z;
}

}  // namespace evdn
