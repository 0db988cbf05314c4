#include "evdn/inference.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <thread>

namespace evdn {

namespace {

// out (r x n) = a (r x k) * b (k x n) [+ bias]
void matmul(const double* __restrict a, const double* __restrict b, double* __restrict out,
            std::size_t r, std::size_t k, std::size_t n, const double* __restrict bias = nullptr) {
  for (std::size_t i = 0; i < r; ++i) {
    double* __restrict o = out + i * n;
    const double* __restrict arow = a + i * k;
    if (bias)
      for (std::size_t j = 0; j < n; ++j) o[j] = bias[j];
    else
      for (std::size_t j = 0; j < n; ++j) o[j] = 0.0;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      const double* __restrict brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) o[j] += av * brow[j];
    }
  }
}

const double* ptr(const ad::ParameterSet& params, std::size_t index) {
  return params[index].value.data().data();
}

}  // namespace

InferenceEngine::InferenceEngine(const DenoiseModel& model) : model_(&model) {
  const auto& c = model.config();
  const auto& params = model.params();
  S_ = c.tokens();
  D_ = c.token_dim();
  F_ = c.ff_dim();
  heads_ = c.heads;
  sig_len_ = c.signature_length();
  ln_eps_ = c.ln_eps;
  selected_ = c.quantities.indices();
  for (auto k : selected_) {
    conv_w_.push_back(ptr(params, *model.eventconv().weight[k]));
    conv_b_.push_back(ptr(params, *model.eventconv().bias[k]));
  }
  auto mha = [&](const MhaParams& m) {
    Mha out;
    const std::size_t D = c.token_dim(), cols = 3 * m.heads() * D;
    out.wqkv.resize(D * cols);
    for (std::size_t h = 0; h < m.heads(); ++h) {
      const double* parts[3] = {ptr(params, m.wq[h]), ptr(params, m.wk[h]), ptr(params, m.wv[h])};
      for (std::size_t part = 0; part < 3; ++part)
        for (std::size_t r = 0; r < D; ++r)
          for (std::size_t col = 0; col < D; ++col)
            out.wqkv[r * cols + (3 * h + part) * D + col] = parts[part][r * D + col];
    }
    out.wo = ptr(params, m.wo);
    return out;
  };
  auto ln = [&](const LayerNormParams& l) { return Ln{ptr(params, l.gain), ptr(params, l.bias)}; };
  auto ffn = [&](const FfnParams& f) {
    return Ffn{ptr(params, f.w1), ptr(params, f.b1), ptr(params, f.w2), ptr(params, f.b2)};
  };
  for (const auto& l : model.encoder_layers())
    enc_.push_back(Encoder{mha(l.mha), ln(l.ln1), ln(l.ln2), ffn(l.ffn)});
  for (const auto& l : model.decoder_layers())
    dec_.push_back(Decoder{mha(l.mha1), mha(l.mha2), ln(l.ln1), ln(l.ln2), ln(l.ln3), ffn(l.ffn)});
  head_w_ = ptr(params, model.head_weight());
  head_b_ = ptr(params, model.head_bias());

  const std::size_t SD = S_ * D_;
  for (auto* buf : {&x_, &n1_, &n2_, &a_, &b_}) buf->resize(SD);
  qkv_.resize(SD * 3 * heads_);
  scores_.resize(S_ * S_);
  concat_.resize(S_ * heads_ * D_);
  hidden_.resize(S_ * F_);
}

void InferenceEngine::signature(const NormalizedGraph& g, std::span<double> h) {
  const std::size_t m = g.nodes.size();
  if (m == 0) throw std::invalid_argument("graph has no nodes");
  nodes_.resize(m * 3);
  for (std::size_t j = 0; j < m; ++j) {
    nodes_[j * 3] = g.nodes[j].x;
    nodes_[j * 3 + 1] = g.nodes[j].y;
    nodes_[j * 3 + 2] = g.nodes[j].t;
  }
  eventconv(m, h);
}

void InferenceEngine::signature(const Event& e, std::span<const NeighborEvent> neighbors,
                                std::span<double> h) {
  const VolumeSpec& spec = model_->config().volume;
  const std::size_t n = std::min(neighbors.size(), spec.n_max);
  const std::size_t m = n + 1;
  const double span = kNormHigh - kNormLow;
  const double L = spec.half_extent;
  const double T = static_cast<double>(spec.depth_us);
  auto map_space = [&](int v, int center) {
    if (spec.half_extent == 0) return 0.5 * (kNormLow + kNormHigh);
    return kNormLow + span * (static_cast<double>(v - center) + L) / (2.0 * L);
  };
  auto map_time = [&](std::int64_t t) {
    return kNormLow + span * (T - static_cast<double>(e.t - t)) / T;
  };
  nodes_.resize(m * 3);
  nodes_[0] = map_space(e.x, e.x);
  nodes_[1] = map_space(e.y, e.y);
  nodes_[2] = map_time(e.t);
  for (std::size_t j = 0; j < n; ++j) {
    nodes_[(j + 1) * 3] = map_space(neighbors[j].x, e.x);
    nodes_[(j + 1) * 3 + 1] = map_space(neighbors[j].y, e.y);
    nodes_[(j + 1) * 3 + 2] = map_time(neighbors[j].t);
  }
  eventconv(m, h);
}

void InferenceEngine::eventconv(std::size_t m, std::span<double> h) {
  if (h.size() != sig_len_) throw ad::ShapeError("signature buffer has wrong length");
  double mean[3] = {0.0, 0.0, 0.0};
  for (std::size_t j = 0; j < m; ++j)
    for (int a = 0; a < 3; ++a) mean[a] += nodes_[j * 3 + a];
  const double inv = 1.0 / static_cast<double>(m);
  for (double& v : mean) v *= inv;
  double var[3] = {0.0, 0.0, 0.0};
  for (std::size_t j = 0; j < m; ++j)
    for (int a = 0; a < 3; ++a) {
      const double d = nodes_[j * 3 + a] - mean[a];
      var[a] += d * d;
    }
  const double sd[3] = {std::sqrt(var[0] * inv), std::sqrt(var[1] * inv), std::sqrt(var[2] * inv)};
  const bool from_mean = model_->config().reference == MessageReference::mean;
  const double origin[3] = {from_mean ? mean[0] : nodes_[0], from_mean ? mean[1] : nodes_[1],
                            from_mean ? mean[2] : nodes_[2]};
  quant_.resize(m * kQuantityCount);
  for (std::size_t j = 0; j < m; ++j) {
    double* row = quant_.data() + j * kQuantityCount;
    const double dx = nodes_[j * 3] - origin[0];
    const double dy = nodes_[j * 3 + 1] - origin[1];
    const double dt = nodes_[j * 3 + 2] - origin[2];
    row[0] = dx;
    row[1] = dy;
    row[2] = dt;
    row[3] = sd[0];
    row[4] = sd[1];
    row[5] = sd[2];
    row[6] = std::sqrt(dx * dx + dy * dy + dt * dt);
  }
  const std::size_t W = model_->config().width;
  for (std::size_t s = 0; s < selected_.size(); ++s) {
    const std::size_t k = selected_[s];
    const double* w = conv_w_[s];
    const double* b = conv_b_[s];
    for (std::size_t c = 0; c < W; ++c) {
      double acc = 0.0;
      for (std::size_t j = 0; j < m; ++j)
        acc += ad::sigmoid_value(quant_[j * kQuantityCount + k] * w[c] + b[c]);
      h[s * W + c] = acc;
    }
  }
}

void InferenceEngine::layer_norm(const double* x, const Ln& ln, double* out) const {
  for (std::size_t i = 0; i < S_; ++i) {
    const double* row = x + i * D_;
    double mu = 0.0;
    for (std::size_t j = 0; j < D_; ++j) mu += row[j];
    mu /= static_cast<double>(D_);
    double var = 0.0;
    for (std::size_t j = 0; j < D_; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<double>(D_);
    const double inv_std = 1.0 / std::sqrt(var + ln_eps_);
    for (std::size_t j = 0; j < D_; ++j)
      out[i * D_ + j] = (row[j] - mu) * inv_std * ln.gain[j] + ln.bias[j];
  }
}

namespace {

// One attention head over packed projections. Dim == 0 means the token width is only known
// at run time; the default width gets its own instantiation.
template <std::size_t Dim>
void attention_head(const double* __restrict proj, std::size_t cols, std::size_t S, std::size_t d_rt,
                    std::size_t qo, double* __restrict scores, double* __restrict concat,
                    std::size_t concat_cols) {
  const std::size_t D = Dim ? Dim : d_rt;
  const std::size_t ko = qo + D, vo = ko + D;
  const double scale = 1.0 / std::sqrt(static_cast<double>(D));
  for (std::size_t i = 0; i < S; ++i) {
    double* __restrict srow = scores + i * S;
    const double* __restrict qrow = proj + i * cols + qo;
    double top = -INFINITY;
    for (std::size_t j = 0; j < S; ++j) {
      const double* __restrict krow = proj + j * cols + ko;
      double dot = 0.0;
      for (std::size_t p = 0; p < D; ++p) dot += qrow[p] * krow[p];
      srow[j] = dot * scale;
      top = std::max(top, srow[j]);
    }
    double total = 0.0;
    for (std::size_t j = 0; j < S; ++j) {
      srow[j] = std::exp(srow[j] - top);
      total += srow[j];
    }
    const double inv = 1.0 / total;
    double* __restrict crow = concat + i * concat_cols;
    for (std::size_t p = 0; p < D; ++p) crow[p] = 0.0;
    for (std::size_t j = 0; j < S; ++j) {
      const double wj = srow[j] * inv;
      const double* __restrict vrow = proj + j * cols + vo;
      for (std::size_t p = 0; p < D; ++p) crow[p] += wj * vrow[p];
    }
  }
}

}  // namespace

void InferenceEngine::multi_head(const double* x, const Mha& mha, double* out) {
  const std::size_t HD = heads_ * D_, cols = 3 * HD;
  matmul(x, mha.wqkv.data(), qkv_.data(), S_, D_, cols);
  for (std::size_t h = 0; h < heads_; ++h) {
    double* concat = concat_.data() + h * D_;
    if (D_ == 4)
      attention_head<4>(qkv_.data(), cols, S_, D_, 3 * h * D_, scores_.data(), concat, HD);
    else
      attention_head<0>(qkv_.data(), cols, S_, D_, 3 * h * D_, scores_.data(), concat, HD);
  }
  matmul(concat_.data(), mha.wo, out, S_, HD, D_);
}

void InferenceEngine::feed_forward(const double* x, const Ffn& ffn, double* out) {
  matmul(x, ffn.w1, hidden_.data(), S_, D_, F_, ffn.b1);
  for (double& v : hidden_) v = v > 0.0 ? v : 0.0;
  matmul(hidden_.data(), ffn.w2, out, S_, F_, D_, ffn.b2);
}

std::array<double, 2> InferenceEngine::logits(std::span<const double> h) {
  if (h.size() != sig_len_) throw ad::ShapeError("signature has wrong length");
  const std::size_t SD = S_ * D_;
  std::copy(h.begin(), h.end(), x_.begin());
  double* x = x_.data();
  for (const auto& layer : enc_) {
    layer_norm(x, layer.ln1, n1_.data());
    multi_head(n1_.data(), layer.mha, a_.data());
    for (std::size_t i = 0; i < SD; ++i) a_[i] += x[i];  // y'
    layer_norm(a_.data(), layer.ln2, n1_.data());
    feed_forward(n1_.data(), layer.ffn, b_.data());
    for (std::size_t i = 0; i < SD; ++i) x[i] = b_[i] + a_[i];
  }
  for (const auto& layer : dec_) {
    layer_norm(x, layer.ln1, n1_.data());
    multi_head(n1_.data(), layer.mha1, a_.data());
    for (std::size_t i = 0; i < SD; ++i) a_[i] += x[i];  // z'
    layer_norm(x, layer.ln2, n2_.data());
    multi_head(n2_.data(), layer.mha2, b_.data());
    for (std::size_t i = 0; i < SD; ++i) b_[i] += a_[i];  // z''
    layer_norm(b_.data(), layer.ln3, n1_.data());
    feed_forward(n1_.data(), layer.ffn, a_.data());
    for (std::size_t i = 0; i < SD; ++i) x[i] = a_[i] + b_[i];
  }
  std::array<double, 2> z{head_b_[0], head_b_[1]};
  double acc0 = 0.0, acc1 = 0.0;
  for (std::size_t i = 0; i < SD; ++i) {
    acc0 += x[i] * head_w_[i * 2];
    acc1 += x[i] * head_w_[i * 2 + 1];
  }
  z[0] += acc0;
  z[1] += acc1;
  return z;
}

ClassProbabilities InferenceEngine::probabilities(std::span<const double> h) {
  auto z = logits(h);
  const double top = std::max(z[0], z[1]);
  const double e0 = std::exp(z[0] - top), e1 = std::exp(z[1] - top);
  return {e0 / (e0 + e1), e1 / (e0 + e1)};
}

PredictMode parse_predict_mode(const std::string& name) {
  if (name == "seq" || name == "sequential") return PredictMode::sequential;
  if (name == "batch") return PredictMode::batch;
  throw std::invalid_argument("mode must be 'seq' or 'batch', got '" + name + "'");
}

std::string to_string(PredictMode mode) {
  return mode == PredictMode::sequential ? "seq" : "batch";
}

namespace {

std::size_t store_capacity(const DenoiseModel& model) {
  return std::max<std::size_t>(model.config().volume.n_max, 1);
}

// Classifies rows [begin, end) of a signature matrix.
void classify_rows(const DenoiseModel& model, const std::vector<double>& signatures,
                   const std::vector<std::uint8_t>& valid, std::size_t begin, std::size_t end,
                   std::vector<Decision>& out) {
  InferenceEngine engine(model);
  const std::size_t len = engine.signature_length();
  for (std::size_t i = begin; i < end; ++i)
    out[i] = valid[i] ? engine.decide(std::span<const double>(signatures.data() + i * len, len))
                      : Decision::noise;
}

std::vector<Decision> classify_all(const DenoiseModel& model, const std::vector<double>& signatures,
                                   const std::vector<std::uint8_t>& valid, unsigned threads) {
  const std::size_t n = valid.size();
  std::vector<Decision> out(n, Decision::noise);
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n / 1024 + 1)));
  if (threads == 1) {
    classify_rows(model, signatures, valid, 0, n, out);
    return out;
  }
  std::vector<std::thread> pool;
  const std::size_t chunk = (n + threads - 1) / threads;
  for (unsigned t = 0; t < threads; ++t) {
    const std::size_t b = std::min(n, t * chunk), e = std::min(n, b + chunk);
    pool.emplace_back([&, b, e] { classify_rows(model, signatures, valid, b, e, out); });
  }
  for (auto& th : pool) th.join();
  return out;
}

// Graph-building phase of batch mode: fills one signature row per event.
void build_signatures(std::span<const Event> events, RecencyStore& store, InferenceEngine& engine,
                      const VolumeSpec& spec, std::vector<double>& signatures,
                      std::vector<std::uint8_t>& valid) {
  const std::size_t len = engine.signature_length();
  signatures.assign(events.size() * len, 0.0);
  valid.assign(events.size(), 0);
  std::vector<NeighborEvent> neighbors;
  for (std::size_t i = 0; i < events.size(); ++i) {
    const Event& e = events[i];
    if (!store.geometry().contains(e.x, e.y)) continue;
    store.query_into(e, spec, neighbors);
    engine.signature(e, neighbors, std::span<double>(signatures.data() + i * len, len));
    valid[i] = 1;
    store.insert(e);
  }
}

}  // namespace

StreamPrediction predict_stream(std::span<const Event> events, const SensorGeometry& geometry,
                                const DenoiseModel& model, PredictMode mode, unsigned threads) {
  StreamPrediction result;
  RecencyStore store(geometry, store_capacity(model));
  InferenceEngine engine(model);
  const VolumeSpec& spec = model.config().volume;
  for (std::size_t i = 0; i < events.size(); ++i)
    if (!geometry.contains(events[i].x, events[i].y)) result.skipped.push_back(i);

  if (mode == PredictMode::batch) {
    std::vector<double> signatures;
    std::vector<std::uint8_t> valid;
    build_signatures(events, store, engine, spec, signatures, valid);
    result.decisions = classify_all(model, signatures, valid, threads);
    return result;
  }
  result.decisions.assign(events.size(), Decision::noise);
  std::vector<NeighborEvent> neighbors;
  std::vector<double> h(engine.signature_length());
  for (std::size_t i = 0; i < events.size(); ++i) {
    const Event& e = events[i];
    if (!geometry.contains(e.x, e.y)) continue;
    store.query_into(e, spec, neighbors);
    engine.signature(e, neighbors, h);
    result.decisions[i] = engine.decide(h);
    store.insert(e);
  }
  return result;
}

GnnFilter::GnnFilter(const DenoiseModel& model, SensorGeometry geometry, unsigned threads)
    : model_(&model),
      geometry_(geometry),
      threads_(threads),
      store_(geometry, store_capacity(model)),
      engine_(model),
      h_(engine_.signature_length()) {}

Decision GnnFilter::step(const Event& e) {
  if (!geometry_.contains(e.x, e.y)) return Decision::noise;
  store_.query_into(e, model_->config().volume, neighbors_);
  engine_.signature(e, neighbors_, h_);
  const Decision d = engine_.decide(h_);
  store_.insert(e);
  return d;
}

std::vector<Decision> GnnFilter::run_batch(std::span<const Event> events) {
  std::vector<double> signatures;
  std::vector<std::uint8_t> valid;
  build_signatures(events, store_, engine_, model_->config().volume, signatures, valid);
  return classify_all(*model_, signatures, valid, threads_);
}

std::size_t GnnFilter::memory_cells() const {
  const auto& v = model_->config().volume;
  const auto w = static_cast<std::size_t>(v.window());
  return w * w * v.n_max;
}

}  // namespace evdn
