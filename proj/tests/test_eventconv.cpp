#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "evdn/autodiff.hpp"
#include "evdn/eventconv.hpp"

using namespace evdn;

namespace {

NormalizedGraph random_graph(std::size_t m, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(kNormLow, kNormHigh);
  NormalizedGraph g;
  g.nodes.push_back({0.5, 0.5, 0.95});
  for (std::size_t j = 1; j < m; ++j) g.nodes.push_back({u(rng), u(rng), u(rng)});
  return g;
}

// Naive two-pass statistics.
std::vector<std::array<double, 7>> quantity_oracle(const NormalizedGraph& g, bool from_interest = false) {
  const double m = static_cast<double>(g.nodes.size());
  double mx = 0, my = 0, mt = 0;
  for (const auto& n : g.nodes) mx += n.x, my += n.y, mt += n.t;
  mx /= m, my /= m, mt /= m;
  double vx = 0, vy = 0, vt = 0;
  for (const auto& n : g.nodes) vx += (n.x - mx) * (n.x - mx), vy += (n.y - my) * (n.y - my), vt += (n.t - mt) * (n.t - mt);
  const double sx = std::sqrt(vx / m), sy = std::sqrt(vy / m), st = std::sqrt(vt / m);
  const double ox = from_interest ? g.nodes[0].x : mx, oy = from_interest ? g.nodes[0].y : my,
               ot = from_interest ? g.nodes[0].t : mt;
  std::vector<std::array<double, 7>> q;
  for (const auto& n : g.nodes) {
    const double dx = n.x - ox, dy = n.y - oy, dt = n.t - ot;
    q.push_back({dx, dy, dt, sx, sy, st, std::sqrt(dx * dx + dy * dy + dt * dt)});
  }
  return q;
}

std::vector<double> signature_of(const NormalizedGraph& g, const QuantitySet& sel, const EventConvParams& conv,
                                 const ad::ParameterSet& ps) {
  auto q = compute_quantities(g, compute_means(g));
  std::vector<double> h(sel.count() * conv.width);
  eventconv_values(q, sel, conv, ps, h);
  return h;
}

}  // namespace

TEST_CASE("quantity sets") {
  CHECK(QuantitySet::parse("3q") == QuantitySet::variant3());
  CHECK(QuantitySet::parse("4q") == QuantitySet::variant4());
  CHECK(QuantitySet::parse("6q") == QuantitySet::variant6());
  CHECK(QuantitySet::parse("7q") == QuantitySet::variant7());
  CHECK(QuantitySet::variant4().indices() == std::vector<std::size_t>{0, 1, 2, 6});
  CHECK(QuantitySet::variant6().count() == 6);
  CHECK_FALSE(QuantitySet::variant7().experimental());
  CHECK_THROWS(QuantitySet(0));
  CHECK_THROWS(QuantitySet::parse("5q"));
  CHECK_THROWS(QuantitySet::parse("Q1,,Q2"));
  CHECK(QuantitySet::parse("Q1,Q2,q7").indices() == std::vector<std::size_t>{0, 1, 6});
  CHECK(QuantitySet::parse("1,2,3,7") == QuantitySet::variant4());
}

TEST_CASE("means") {
  NormalizedGraph one{{{0.5, 0.5, 0.95}}};
  auto m1 = compute_means(one);
  CHECK(m1.x == 0.5);
  CHECK(m1.t == 0.95);
  NormalizedGraph two{{{0.05, 0.5, 0.95}, {0.95, 0.5, 0.95}}};
  CHECK(compute_means(two).x == doctest::Approx(0.5).epsilon(1e-15));
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    auto g = random_graph(1 + trial % 11, rng);
    double sx = 0, sy = 0, st = 0;
    for (const auto& n : g.nodes) sx += n.x, sy += n.y, st += n.t;
    const double m = static_cast<double>(g.nodes.size());
    auto mm = compute_means(g);
    CHECK(std::abs(mm.x - sx / m) < 1e-12);
    CHECK(std::abs(mm.y - sy / m) < 1e-12);
    CHECK(std::abs(mm.t - st / m) < 1e-12);
  }
}

TEST_CASE("quantities") {
  NormalizedGraph one{{{0.5, 0.5, 0.95}}};
  auto q1 = compute_quantities(one, compute_means(one));
  REQUIRE(q1.rows() == 1);
  REQUIRE(q1.cols() == 7);
  for (double v : q1.data()) CHECK(v == 0.0);

  NormalizedGraph sym{{{0.3, 0.5, 0.6}, {0.7, 0.5, 0.6}}};
  auto q2 = compute_quantities(sym, compute_means(sym));
  CHECK(q2.at(0, 0) == doctest::Approx(-0.2));
  CHECK(q2.at(1, 0) == doctest::Approx(0.2));
  for (std::size_t j = 0; j < 2; ++j) {
    CHECK(q2.at(j, 3) == doctest::Approx(0.2));
    CHECK(q2.at(j, 6) == doctest::Approx(0.2));
    CHECK(q2.at(j, 4) == 0.0);
    CHECK(q2.at(j, 5) == 0.0);
  }

  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    auto g = random_graph(6, rng);
    for (auto ref : {MessageReference::mean, MessageReference::interest}) {
      auto q = compute_quantities(g, compute_means(g), ref);
      auto o = quantity_oracle(g, ref == MessageReference::interest);
      for (std::size_t j = 0; j < 6; ++j)
        for (std::size_t k = 0; k < 7; ++k) CHECK(std::abs(q.at(j, k) - o[j][k]) < 1e-12);
    }
  }
}

TEST_CASE("quantities on tape agree with the direct computation") {
  std::mt19937_64 rng(3);
  auto g = random_graph(8, rng);
  ad::Tensor nodes = ad::Tensor::matrix(8, 3);
  for (std::size_t j = 0; j < 8; ++j) {
    nodes.at(j, 0) = g.nodes[j].x;
    nodes.at(j, 1) = g.nodes[j].y;
    nodes.at(j, 2) = g.nodes[j].t;
  }
  for (auto ref : {MessageReference::mean, MessageReference::interest}) {
    ad::Tape tape;
    auto q = quantities_on_tape(tape.constant(nodes), ref).value();
    auto direct = compute_quantities(g, compute_means(g), ref);
    for (std::size_t i = 0; i < q.size(); ++i) CHECK(std::abs(q[i] - direct[i]) < 1e-12);
  }
}

TEST_CASE("eventconv examples") {
  std::mt19937_64 rng(4);
  ad::ParameterSet ps;
  auto conv = EventConvParams::create(ps, QuantitySet::variant7(), 4, rng);
  NormalizedGraph one{{{0.5, 0.5, 0.95}}};
  auto h = signature_of(one, QuantitySet::variant7(), conv, ps);
  REQUIRE(h.size() == 28);
  for (std::size_t k = 0; k < 7; ++k)
    for (std::size_t c = 0; c < 4; ++c)
      CHECK(h[k * 4 + c] == doctest::Approx(ad::sigmoid_value(ps[*conv.bias[k]].value[c])).epsilon(1e-15));

  for (auto& p : ps) p.value.fill(0.0);
  auto g = random_graph(9, rng);
  for (double v : signature_of(g, QuantitySet::variant7(), conv, ps)) CHECK(v == doctest::Approx(4.5).epsilon(1e-15));
}

TEST_CASE("eventconv matches a per-node loop, is bounded and permutation invariant") {
  std::mt19937_64 rng(5);
  ad::ParameterSet ps;
  auto conv = EventConvParams::create(ps, QuantitySet::variant7(), 4, rng);
  std::uniform_real_distribution<double> u(-3, 3);
  for (auto& p : ps)
    for (auto& v : p.value.data()) v = u(rng);
  for (int trial = 0; trial < 40; ++trial) {
    auto g = random_graph(1 + trial % 11, rng);
    auto h = signature_of(g, QuantitySet::variant7(), conv, ps);
    auto q = quantity_oracle(g);
    for (std::size_t k = 0; k < 7; ++k)
      for (std::size_t c = 0; c < 4; ++c) {
        const double w = ps[*conv.weight[k]].value[c], b = ps[*conv.bias[k]].value[c];
        double acc = 0;
        for (const auto& row : q) acc += 1.0 / (1.0 + std::exp(-(w * row[k] + b)));
        CHECK(std::abs(h[k * 4 + c] - acc) < 1e-12);
        CHECK(h[k * 4 + c] > 0.0);
        CHECK(h[k * 4 + c] < static_cast<double>(g.nodes.size()));
      }
    auto shuffled = g;
    std::shuffle(shuffled.nodes.begin() + 1, shuffled.nodes.end(), rng);
    auto hs = signature_of(shuffled, QuantitySet::variant7(), conv, ps);
    for (std::size_t i = 0; i < h.size(); ++i) CHECK(std::abs(h[i] - hs[i]) < 1e-12);
  }
}

TEST_CASE("3q selector ignores the other quantities") {
  std::mt19937_64 rng(6);
  ad::ParameterSet ps;
  auto conv = EventConvParams::create(ps, QuantitySet::variant7(), 4, rng);
  auto g = random_graph(7, rng);
  auto h = signature_of(g, QuantitySet::variant3(), conv, ps);
  CHECK(h.size() == 12);
  for (std::size_t k = 3; k < 7; ++k) ps[*conv.weight[k]].value.fill(9.0);
  CHECK(signature_of(g, QuantitySet::variant3(), conv, ps) == h);

  ad::ParameterSet small;
  auto conv3 = EventConvParams::create(small, QuantitySet::variant3(), 4, rng);
  CHECK(small.size() == 6);
  ad::Tape tape;
  auto q = tape.constant(compute_quantities(g, compute_means(g)));
  CHECK_THROWS(eventconv_forward(tape, q, QuantitySet::variant7(), conv3, small));
}

TEST_CASE("eventconv gradients match finite differences") {
  std::mt19937_64 rng(7);
  ad::ParameterSet ps;
  auto conv = EventConvParams::create(ps, QuantitySet::variant7(), 4, rng);
  auto g = random_graph(6, rng);
  ad::Tensor nodes = ad::Tensor::matrix(6, 3);
  for (std::size_t j = 0; j < 6; ++j) {
    nodes.at(j, 0) = g.nodes[j].x;
    nodes.at(j, 1) = g.nodes[j].y;
    nodes.at(j, 2) = g.nodes[j].t;
  }
  const std::size_t node_param = ps.add("nodes", nodes);
  ad::Tensor w = ad::Tensor::matrix(1, 28);
  std::uniform_real_distribution<double> u(-1, 1);
  for (auto& v : w.data()) v = u(rng);
  for (auto ref : {MessageReference::mean, MessageReference::interest}) {
    const double err = ad::finite_diff_check(
        [&](ad::Tape& t) {
          auto q = quantities_on_tape(t.parameter(ps[node_param]), ref);
          auto h = eventconv_forward(t, q, QuantitySet::variant7(), conv, ps);
          return ad::sum_all(ad::mul(h, t.constant(w)));
        },
        ps, {1e-5, 1000, 1});
    CHECK(err < 1e-4);
  }
}
