#include "evdn/eventconv.hpp"

#include <bit>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "evdn/optim.hpp"

namespace evdn {

QuantitySet::QuantitySet(std::uint8_t mask) : mask_(mask) {
  if (mask_ == 0 || mask_ >= (1u << kQuantityCount))
    throw std::invalid_argument("quantity selector must be a non-empty subset of Q1..Q7");
}

QuantitySet QuantitySet::parse(const std::string& spec) {
  if (spec == "3q" || spec == "3Qs") return variant3();
  if (spec == "4q" || spec == "4Qs") return variant4();
  if (spec == "6q" || spec == "6Qs") return variant6();
  if (spec == "7q" || spec == "7Qs") return variant7();
  std::uint8_t mask = 0;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty() && (item[0] == 'Q' || item[0] == 'q')) item.erase(0, 1);
    int k = 0;
    std::size_t used = 0;
    try {
      k = std::stoi(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size()) throw std::invalid_argument("bad quantity selector '" + spec + "'");
    if (k < 1 || k > static_cast<int>(kQuantityCount))
      throw std::invalid_argument("quantity index out of range in '" + spec + "'");
    mask |= static_cast<std::uint8_t>(1u << (k - 1));
  }
  return QuantitySet(mask);
}

std::size_t QuantitySet::count() const { return static_cast<std::size_t>(std::popcount(mask_)); }

std::vector<std::size_t> QuantitySet::indices() const {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < kQuantityCount; ++k)
    if ((mask_ >> k) & 1u) out.push_back(k);
  return out;
}

bool QuantitySet::experimental() const {
  return !(*this == variant3() || *this == variant4() || *this == variant6() ||
           *this == variant7());
}

std::string QuantitySet::to_string() const {
  if (*this == variant3()) return "3q";
  if (*this == variant4()) return "4q";
  if (*this == variant6()) return "6q";
  if (*this == variant7()) return "7q";
  std::string s;
  for (auto k : indices()) {
    if (!s.empty()) s += ',';
    s += std::to_string(k + 1);
  }
  return s;
}

MessageReference parse_message_reference(const std::string& name) {
  if (name == "mean") return MessageReference::mean;
  if (name == "interest") return MessageReference::interest;
  throw std::invalid_argument("msg.reference must be 'mean' or 'interest'");
}

std::string to_string(MessageReference ref) {
  return ref == MessageReference::mean ? "mean" : "interest";
}

GraphMeans compute_means(const NormalizedGraph& g) {
  if (g.nodes.empty()) throw std::invalid_argument("graph has no nodes");
  GraphMeans m;
  for (const auto& n : g.nodes) {
    m.x += n.x;
    m.y += n.y;
    m.t += n.t;
  }
  const double inv = 1.0 / static_cast<double>(g.nodes.size());
  m.x *= inv;
  m.y *= inv;
  m.t *= inv;
  return m;
}

ad::Tensor compute_quantities(const NormalizedGraph& g, const GraphMeans& means,
                              MessageReference ref) {
  const std::size_t m = g.nodes.size();
  ad::Tensor Q = ad::Tensor::matrix(m, kQuantityCount);
  double vx = 0.0, vy = 0.0, vt = 0.0;
  for (const auto& n : g.nodes) {
    vx += (n.x - means.x) * (n.x - means.x);
    vy += (n.y - means.y) * (n.y - means.y);
    vt += (n.t - means.t) * (n.t - means.t);
  }
  const double inv = 1.0 / static_cast<double>(m);
  const double sx = std::sqrt(vx * inv), sy = std::sqrt(vy * inv), st = std::sqrt(vt * inv);
  const NormalizedNode origin = ref == MessageReference::mean
                                    ? NormalizedNode{means.x, means.y, means.t}
                                    : g.nodes.front();
  for (std::size_t j = 0; j < m; ++j) {
    const auto& n = g.nodes[j];
    const double dx = n.x - origin.x, dy = n.y - origin.y, dt = n.t - origin.t;
    double* row = &Q.at(j, 0);
    row[0] = dx;
    row[1] = dy;
    row[2] = dt;
    row[3] = sx;
    row[4] = sy;
    row[5] = st;
    row[6] = std::sqrt(dx * dx + dy * dy + dt * dt);
  }
  return Q;
}

ad::Var quantities_on_tape(ad::Var nodes, MessageReference ref) {
  ad::Tape& tape = *nodes.tape();
  const std::size_t m = nodes.value().rows();
  if (nodes.value().cols() != 3)
    throw ad::ShapeError("node feature matrix must be m x 3, got " + nodes.value().shape_string());
  ad::Var means = ad::mean(nodes, 0);
  ad::Var centered = ad::sub(nodes, means);
  ad::Var ones = tape.constant(ad::Tensor::matrix(m, 1, 1.0));
  ad::Var stdev = ad::sqrt(ad::mean(ad::square(centered), 0));
  ad::Var spread = ad::matmul(ones, stdev);
  ad::Var diffs = centered;
  if (ref == MessageReference::interest) {
    ad::Tensor pick = ad::Tensor::matrix(1, m);
    pick[0] = 1.0;
    diffs = ad::sub(nodes, ad::matmul(tape.constant(std::move(pick)), nodes));
  }
  ad::Var dist = ad::sqrt(ad::sum(ad::square(diffs), 1));
  const ad::Var parts[] = {diffs, spread, dist};
  return ad::concat(parts, 1);
}

std::string eventconv_weight_name(std::size_t quantity) {
  return "eventconv.q" + std::to_string(quantity + 1) + ".weight";
}
std::string eventconv_bias_name(std::size_t quantity) {
  return "eventconv.q" + std::to_string(quantity + 1) + ".bias";
}

EventConvParams EventConvParams::create(ad::ParameterSet& params, const QuantitySet& selector,
                                        std::size_t width, std::mt19937_64& rng) {
  if (width == 0) throw std::invalid_argument("message width must be >= 1");
  EventConvParams conv;
  conv.width = width;
  for (auto k : selector.indices()) {
    conv.weight[k] = params.add(eventconv_weight_name(k), ad::uniform_init({1, width}, 1, rng));
    conv.bias[k] = params.add(eventconv_bias_name(k), ad::uniform_init({1, width}, 1, rng));
  }
  return conv;
}

EventConvParams EventConvParams::bind(const ad::ParameterSet& params, const QuantitySet& selector,
                                      std::size_t width) {
  EventConvParams conv;
  conv.width = width;
  for (auto k : selector.indices()) {
    conv.weight[k] = params.index_of(eventconv_weight_name(k));
    conv.bias[k] = params.index_of(eventconv_bias_name(k));
    if (params[*conv.weight[k]].value.size() != width || params[*conv.bias[k]].value.size() != width)
      throw std::invalid_argument("EventConv parameter width mismatch for Q" + std::to_string(k + 1));
  }
  return conv;
}

namespace {
void require_params(const QuantitySet& selector, const EventConvParams& conv) {
  for (auto k : selector.indices())
    if (!conv.weight[k] || !conv.bias[k])
      throw std::invalid_argument("no EventConv parameters for selected quantity Q" +
                                  std::to_string(k + 1));
}
}  // namespace

ad::Var eventconv_forward(ad::Tape& tape, ad::Var quantities, const QuantitySet& selector,
                          const EventConvParams& conv, ad::ParameterSet& params) {
  require_params(selector, conv);
  if (quantities.value().cols() != kQuantityCount)
    throw ad::ShapeError("quantity matrix must have 7 columns, got " +
                         quantities.value().shape_string());
  std::vector<ad::Var> parts;
  for (auto k : selector.indices()) {
    ad::Var column = ad::slice_cols(quantities, k, k + 1);
    ad::Var w = tape.parameter(params[*conv.weight[k]]);
    ad::Var b = tape.parameter(params[*conv.bias[k]]);
    ad::Var act = ad::sigmoid(ad::add(ad::matmul(column, w), b));
    parts.push_back(ad::sum(act, 0));
  }
  return ad::concat(parts, 1);
}

void eventconv_values(const ad::Tensor& quantities, const QuantitySet& selector,
                      const EventConvParams& conv, const ad::ParameterSet& params,
                      std::span<double> out) {
  require_params(selector, conv);
  const std::size_t m = quantities.rows();
  const std::size_t W = conv.width;
  if (out.size() != selector.count() * W)
    throw ad::ShapeError("EventConv output span has wrong length");
  std::size_t slot = 0;
  for (auto k : selector.indices()) {
    const auto& w = params[*conv.weight[k]].value;
    const auto& b = params[*conv.bias[k]].value;
    for (std::size_t c = 0; c < W; ++c) {
      double acc = 0.0;
      for (std::size_t j = 0; j < m; ++j)
        acc += ad::sigmoid_value(quantities[j * kQuantityCount + k] * w[c] + b[c]);
      out[slot * W + c] = acc;
    }
    ++slot;
  }
}

}  // namespace evdn
