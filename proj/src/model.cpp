#include "evdn/model.hpp"

#include <map>
#include <sstream>

#include "evdn/checkpoint.hpp"
#include "evdn/optim.hpp"

namespace evdn {

void ModelConfig::validate() const {
  if (width == 0) throw std::invalid_argument("msg.width must be >= 1");
  if (heads == 0) throw std::invalid_argument("transformer.heads must be >= 1");
  if (encoders == 0) throw std::invalid_argument("transformer.encoders must be >= 1");
  if (decoders == 0) throw std::invalid_argument("transformer.decoders must be >= 1");
  if (ff_mult == 0) throw std::invalid_argument("transformer.ff_mult must be >= 1");
  if (!(ln_eps >= 0.0)) throw std::invalid_argument("layer norm epsilon must be >= 0");
  volume.validate();
}

std::string ModelConfig::to_header() const {
  std::ostringstream out;
  out.precision(17);
  out << "msg.variant=" << quantities.to_string() << '\n'
      << "msg.width=" << width << '\n'
      << "msg.reference=" << to_string(reference) << '\n'
      << "transformer.heads=" << heads << '\n'
      << "transformer.encoders=" << encoders << '\n'
      << "transformer.decoders=" << decoders << '\n'
      << "transformer.ff_mult=" << ff_mult << '\n'
      << "transformer.single_token=" << (single_token ? "true" : "false") << '\n'
      << "transformer.ln_eps=" << ln_eps << '\n'
      << "volume.L=" << volume.half_extent << '\n'
      << "volume.T_us=" << volume.depth_us << '\n'
      << "volume.N_max=" << volume.n_max << '\n';
  return out.str();
}

ModelConfig ModelConfig::from_header(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw std::runtime_error("malformed checkpoint header line: " + line);
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto get = [&](const char* key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw std::runtime_error(std::string("checkpoint header missing ") + key);
    return it->second;
  };
  ModelConfig c;
  c.quantities = QuantitySet::parse(get("msg.variant"));
  c.width = std::stoul(get("msg.width"));
  c.reference = parse_message_reference(get("msg.reference"));
  c.heads = std::stoul(get("transformer.heads"));
  c.encoders = std::stoul(get("transformer.encoders"));
  c.decoders = std::stoul(get("transformer.decoders"));
  c.ff_mult = std::stoul(get("transformer.ff_mult"));
  c.single_token = get("transformer.single_token") == "true";
  c.ln_eps = std::stod(get("transformer.ln_eps"));
  c.volume.half_extent = std::stoi(get("volume.L"));
  c.volume.depth_us = std::stoll(get("volume.T_us"));
  c.volume.n_max = std::stoul(get("volume.N_max"));
  c.validate();
  return c;
}

namespace {
std::string enc_prefix(std::size_t i) { return "encoder." + std::to_string(i); }
std::string dec_prefix(std::size_t i) { return "decoder." + std::to_string(i); }
}  // namespace

DenoiseModel DenoiseModel::create(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  DenoiseModel m;
  m.config_ = config;
  std::mt19937_64 rng(seed);
  const std::size_t D = config.token_dim();
  EventConvParams::create(m.params_, config.quantities, config.width, rng);
  for (std::size_t i = 0; i < config.encoders; ++i) {
    const auto p = enc_prefix(i);
    LayerNormParams::create(m.params_, p + ".ln1", D);
    MhaParams::create(m.params_, p + ".mha", config.heads, D, rng);
    LayerNormParams::create(m.params_, p + ".ln2", D);
    FfnParams::create(m.params_, p + ".ffn", D, config.ff_dim(), rng);
  }
  for (std::size_t i = 0; i < config.decoders; ++i) {
    const auto p = dec_prefix(i);
    LayerNormParams::create(m.params_, p + ".ln1", D);
    MhaParams::create(m.params_, p + ".mha1", config.heads, D, rng);
    LayerNormParams::create(m.params_, p + ".ln2", D);
    MhaParams::create(m.params_, p + ".mha2", config.heads, D, rng);
    LayerNormParams::create(m.params_, p + ".ln3", D);
    FfnParams::create(m.params_, p + ".ffn", D, config.ff_dim(), rng);
  }
  const std::size_t flat = config.signature_length();
  m.params_.add("head.weight", ad::uniform_init({flat, 2}, flat, rng));
  m.params_.add("head.bias", ad::uniform_init({1, 2}, flat, rng));
  m.bind();
  return m;
}

DenoiseModel DenoiseModel::from_parameters(const ModelConfig& config, ad::ParameterSet params) {
  config.validate();
  DenoiseModel m;
  m.config_ = config;
  m.params_ = std::move(params);
  m.bind();
  return m;
}

void DenoiseModel::bind() {
  const auto& c = config_;
  conv_ = EventConvParams::bind(params_, c.quantities, c.width);
  encoder_.clear();
  decoder_.clear();
  for (std::size_t i = 0; i < c.encoders; ++i) {
    const auto p = enc_prefix(i);
    encoder_.push_back(EncoderLayerParams{MhaParams::bind(params_, p + ".mha", c.heads),
                                          LayerNormParams::bind(params_, p + ".ln1"),
                                          LayerNormParams::bind(params_, p + ".ln2"),
                                          FfnParams::bind(params_, p + ".ffn")});
  }
  for (std::size_t i = 0; i < c.decoders; ++i) {
    const auto p = dec_prefix(i);
    decoder_.push_back(DecoderLayerParams{MhaParams::bind(params_, p + ".mha1", c.heads),
                                          MhaParams::bind(params_, p + ".mha2", c.heads),
                                          LayerNormParams::bind(params_, p + ".ln1"),
                                          LayerNormParams::bind(params_, p + ".ln2"),
                                          LayerNormParams::bind(params_, p + ".ln3"),
                                          FfnParams::bind(params_, p + ".ffn")});
  }
  head_w_ = params_.index_of("head.weight");
  head_b_ = params_.index_of("head.bias");
  const std::size_t D = c.token_dim();
  for (const auto& layer : encoder_)
    if (params_[layer.mha.wq.front()].value.rows() != D)
      throw std::invalid_argument("encoder parameters do not match token dimension");
  if (params_[head_w_].value.rows() != c.signature_length() || params_[head_w_].value.cols() != 2)
    throw std::invalid_argument("classifier head shape does not match signature length");
}

ad::Var DenoiseModel::logits_from_signature(ad::Tape& tape, ad::Var signature) {
  const auto& c = config_;
  if (signature.value().size() != c.signature_length())
    throw ad::ShapeError("signature length " + std::to_string(signature.value().size()) +
                         " != " + std::to_string(c.signature_length()));
  ad::Var tokens = ad::reshape(signature, c.tokens(), c.token_dim());
  ad::Var enc = encoder_forward(tape, tokens, encoder_, params_, c.ln_eps);
  ad::Var dec = decoder_forward(tape, enc, decoder_, params_, c.ln_eps);
  ad::Var flat = ad::reshape(dec, 1, c.signature_length());
  return ad::add(ad::matmul(flat, tape.parameter(params_[head_w_])),
                 tape.parameter(params_[head_b_]));
}

ad::Var DenoiseModel::logits_from_quantities(ad::Tape& tape, ad::Var quantities) {
  ad::Var h = eventconv_forward(tape, quantities, config_.quantities, conv_, params_);
  return logits_from_signature(tape, h);
}

ClassProbabilities DenoiseModel::classify(std::span<const double> signature) {
  ad::Tape tape;
  ad::Var h = tape.constant(
      ad::Tensor({1, signature.size()}, std::vector<double>(signature.begin(), signature.end())));
  ad::Var p = ad::softmax(logits_from_signature(tape, h), 1);
  return {p.value()[0], p.value()[1]};
}

void DenoiseModel::save(const std::filesystem::path& path) const {
  ad::save_checkpoint(path, config_.to_header(), params_);
}

DenoiseModel DenoiseModel::load(const std::filesystem::path& path) {
  auto ck = ad::load_checkpoint(path);
  return from_parameters(ModelConfig::from_header(ck.header), std::move(ck.params));
}

}  // namespace evdn
