#include "evdn/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace evdn::ad {

namespace {

struct Dims {
  std::size_t r, c;
};

Dims dims(const Tensor& t) { return {t.rows(), t.cols()}; }

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + a.shape_string() + " and " +
                   b.shape_string());
}

Tape& tape_of(Var a, Var b) {
  if (a.tape() == nullptr || a.tape() != b.tape())
    throw std::invalid_argument("operands recorded on different tapes");
  return *a.tape();
}

enum class Broadcast { same, row };

Broadcast broadcast_kind(const char* op, const Tensor& a, const Tensor& b) {
  if (a.size() == b.size() && dims(a).r == dims(b).r) return Broadcast::same;
  if (dims(b).r == 1 && dims(b).c == dims(a).c) return Broadcast::row;
  shape_error(op, a, b);
}

Tensor zeros_like(const Tensor& t) { return Tensor(t.shape()); }

}  // namespace

// ---------------------------------------------------------------------------
// ParameterSet

std::size_t ParameterSet::add(std::string name, Tensor value) {
  for (const auto& p : params_)
    if (p.name == name) throw std::invalid_argument("duplicate parameter name " + name);
  params_.emplace_back(std::move(name), std::move(value));
  return params_.size() - 1;
}

std::size_t ParameterSet::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < params_.size(); ++i)
    if (params_[i].name == name) return i;
  throw std::out_of_range("no parameter named " + name);
}

const Parameter* ParameterSet::find(const std::string& name) const {
  for (const auto& p : params_)
    if (p.name == name) return &p;
  return nullptr;
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

void ParameterSet::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

// ---------------------------------------------------------------------------
// Tape

const Tensor& Var::value() const { return tape_->node(id_).value; }
const Tensor& Var::grad() const { return tape_->node(id_).grad; }

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, {}, {}, nullptr});
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Var Tape::parameter(Parameter& p) {
  nodes_.push_back(Node{p.value, {}, {}, {}, &p});
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Var Tape::record(Tensor value, std::vector<std::uint32_t> inputs, BackwardFn backward) {
  nodes_.push_back(Node{std::move(value), {}, std::move(inputs), std::move(backward), nullptr});
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

void Tape::backward(Var loss, double seed) {
  if (loss.tape() != this) throw std::invalid_argument("loss recorded on another tape");
  if (loss.value().size() != 1)
    throw ShapeError("backward requires a scalar loss, got shape " + loss.value().shape_string());
  const std::uint32_t last = loss.id();
  for (std::uint32_t i = 0; i <= last; ++i) {
    Node& n = nodes_[i];
    if (n.grad.shape() != n.value.shape() || n.grad.size() != n.value.size())
      n.grad = zeros_like(n.value);
    else
      n.grad.fill(0.0);
  }
  nodes_[last].grad[0] = seed;
  for (std::uint32_t i = last + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.backward) n.backward(*this, i);
    if (n.param != nullptr) {
      auto& g = n.param->grad;
      for (std::size_t k = 0; k < g.size(); ++k) g[k] += n.grad[k];
    }
  }
}

// ---------------------------------------------------------------------------
// Primitives

Var matmul(Var a, Var b) {
  Tape& tape = tape_of(a, b);
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  auto [m, k] = dims(A);
  auto [k2, n] = dims(B);
  if (k != k2) shape_error("matmul", A, B);
  Tensor C = Tensor::matrix(m, n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      const double av = A[i * k + p];
      for (std::size_t j = 0; j < n; ++j) C[i * n + j] += av * B[p * n + j];
    }
  return tape.record(std::move(C), {a.id(), b.id()}, [m, k, n](Tape& t, std::uint32_t self) {
    auto& node = t.node(self);
    auto& na = t.node(node.inputs[0]);
    auto& nb = t.node(node.inputs[1]);
    const Tensor& G = node.grad;
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t p = 0; p < k; ++p) {
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) acc += G[i * n + j] * nb.value[p * n + j];
        na.grad[i * k + p] += acc;
      }
    for (std::size_t p = 0; p < k; ++p)
      for (std::size_t i = 0; i < m; ++i) {
        const double av = na.value[i * k + p];
        for (std::size_t j = 0; j < n; ++j) nb.grad[p * n + j] += av * G[i * n + j];
      }
  });
}

namespace {

Var add_sub(Var a, Var b, double sign, const char* op) {
  Tape& tape = tape_of(a, b);
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  Broadcast kind = broadcast_kind(op, A, B);
  Tensor C = A;
  const std::size_t cols = A.size() == 0 ? 0 : A.cols();
  for (std::size_t i = 0; i < C.size(); ++i)
    C[i] += sign * (kind == Broadcast::same ? B[i] : B[i % cols]);
  return tape.record(std::move(C), {a.id(), b.id()},
                     [kind, sign, cols](Tape& t, std::uint32_t self) {
                       auto& node = t.node(self);
                       auto& na = t.node(node.inputs[0]);
                       auto& nb = t.node(node.inputs[1]);
                       for (std::size_t i = 0; i < node.grad.size(); ++i) {
                         const double g = node.grad[i];
                         na.grad[i] += g;
                         nb.grad[kind == Broadcast::same ? i : i % cols] += sign * g;
                       }
                     });
}

template <typename F, typename D>
Var unary(Var a, F f, D df_from_xy) {
  Tape& tape = *a.tape();
  Tensor y = a.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = f(y[i]);
  return tape.record(std::move(y), {a.id()}, [df_from_xy](Tape& t, std::uint32_t self) {
    auto& node = t.node(self);
    auto& na = t.node(node.inputs[0]);
    for (std::size_t i = 0; i < node.grad.size(); ++i)
      na.grad[i] += node.grad[i] * df_from_xy(na.value[i], node.value[i]);
  });
}

}  // namespace

Var add(Var a, Var b) { return add_sub(a, b, 1.0, "add"); }
Var sub(Var a, Var b) { return add_sub(a, b, -1.0, "sub"); }

Var mul(Var a, Var b) {
  Tape& tape = tape_of(a, b);
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  Broadcast kind = broadcast_kind("mul", A, B);
  const std::size_t cols = A.size() == 0 ? 0 : A.cols();
  Tensor C = A;
  for (std::size_t i = 0; i < C.size(); ++i) C[i] *= kind == Broadcast::same ? B[i] : B[i % cols];
  return tape.record(std::move(C), {a.id(), b.id()}, [kind, cols](Tape& t, std::uint32_t self) {
    auto& node = t.node(self);
    auto& na = t.node(node.inputs[0]);
    auto& nb = t.node(node.inputs[1]);
    for (std::size_t i = 0; i < node.grad.size(); ++i) {
      const std::size_t j = kind == Broadcast::same ? i : i % cols;
      na.grad[i] += node.grad[i] * nb.value[j];
      nb.grad[j] += node.grad[i] * na.value[i];
    }
  });
}

Var scale(Var a, double c) {
  return unary(a, [c](double x) { return c * x; }, [c](double, double) { return c; });
}

double sigmoid_value(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Var sigmoid(Var a) {
  return unary(a, sigmoid_value, [](double, double y) { return y * (1.0 - y); });
}

Var relu(Var a) {
  return unary(a, [](double x) { return x > 0.0 ? x : 0.0; },
               [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var square(Var a) {
  return unary(a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var sqrt(Var a) {
  return unary(a, [](double x) { return std::sqrt(x); },
               [](double, double y) { return y > 0.0 ? 0.5 / y : 0.0; });
}

Var concat(std::span<const Var> parts, int axis) {
  if (parts.empty()) throw std::invalid_argument("concat of zero tensors");
  if (axis != 0 && axis != 1) throw std::invalid_argument("concat axis must be 0 or 1");
  Tape& tape = *parts.front().tape();
  std::vector<std::uint32_t> ids;
  std::vector<Dims> ds;
  for (const Var& v : parts) {
    if (v.tape() != &tape) throw std::invalid_argument("operands recorded on different tapes");
    ids.push_back(v.id());
    ds.push_back(dims(v.value()));
  }
  std::size_t R = 0, C = 0;
  if (axis == 0) {
    C = ds[0].c;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      if (ds[i].c != C) shape_error("concat", parts[0].value(), parts[i].value());
      R += ds[i].r;
    }
  } else {
    R = ds[0].r;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      if (ds[i].r != R) shape_error("concat", parts[0].value(), parts[i].value());
      C += ds[i].c;
    }
  }
  Tensor out = Tensor::matrix(R, C);
  std::size_t offset = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const Tensor& src = parts[p].value();
    for (std::size_t r = 0; r < ds[p].r; ++r)
      for (std::size_t c = 0; c < ds[p].c; ++c) {
        if (axis == 0)
          out.at(offset + r, c) = src[r * ds[p].c + c];
        else
          out.at(r, offset + c) = src[r * ds[p].c + c];
      }
    offset += axis == 0 ? ds[p].r : ds[p].c;
  }
  return tape.record(std::move(out), std::move(ids), [axis, ds, C](Tape& t, std::uint32_t self) {
    auto& node = t.node(self);
    std::size_t off = 0;
    for (std::size_t p = 0; p < node.inputs.size(); ++p) {
      auto& in = t.node(node.inputs[p]);
      for (std::size_t r = 0; r < ds[p].r; ++r)
        for (std::size_t c = 0; c < ds[p].c; ++c)
          in.grad[r * ds[p].c + c] +=
              axis == 0 ? node.grad[(off + r) * C + c] : node.grad[r * C + off + c];
      off += axis == 0 ? ds[p].r : ds[p].c;
    }
  });
}

namespace {

Var reduce(Var a, int axis, double factor_mode_mean) {
  if (axis != 0 && axis != 1) throw std::invalid_argument("reduction axis must be 0 or 1");
  Tape& tape = *a.tape();
  const Tensor& A = a.value();
  auto [r, c] = dims(A);
  const bool mean = factor_mode_mean != 0.0;
  Tensor out = axis == 0 ? Tensor::matrix(1, c) : Tensor::matrix(r, 1);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[axis == 0 ? j : i] += A[i * c + j];
  const double f = mean ? 1.0 / static_cast<double>(axis == 0 ? r : c) : 1.0;
  if (mean)
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= f;
  return tape.record(std::move(out), {a.id()}, [axis, r, c, f](Tape& t, std::uint32_t self) {
    auto& node = t.node(self);
    auto& na = t.node(node.inputs[0]);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) na.grad[i * c + j] += f * node.grad[axis == 0 ? j : i];
  });
}

}  // namespace

Var sum(Var a, int axis) { return reduce(a, axis, 0.0); }
Var mean(Var a, int axis) { return reduce(a, axis, 1.0); }

Var sum_all(Var a) {
  Tape& tape = *a.tape();
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  return tape.record(Tensor::scalar(s), {a.id()}, [](Tape& t, std::uint32_t self) {
    auto& node = t.node(self);
    auto& na = t.node(node.inputs[0]);
    for (std::size_t i = 0; i < na.grad.size(); ++i) na.grad[i] += node.grad[0];
  });
}

Var softmax(Var a, int axis) {
  if (axis != 0 && axis != 1) throw std::invalid_argument("softmax axis must be 0 or 1");
  Tape& tape = *a.tape();
  const Tensor& A = a.value();
  auto [r, c] = dims(A);
  Tensor y = A;
  const std::size_t lines = axis == 1 ? r : c;
  const std::size_t len = axis == 1 ? c : r;
  auto idx = [axis, c](std::size_t line, std::size_t k) {
    return axis == 1 ? line * c + k : k * c + line;
  };
  for (std::size_t line = 0; line < lines; ++line) {
    double mx = -INFINITY;
    for (std::size_t k = 0; k < len; ++k) mx = std::max(mx, y[idx(line, k)]);
    double s = 0.0;
    for (std::size_t k = 0; k < len; ++k) {
      double e = std::exp(y[idx(line, k)] - mx);
      y[idx(line, k)] = e;
      s += e;
    }
    for (std::size_t k = 0; k < len; ++k) y[idx(line, k)] /= s;
  }
  return tape.record(std::move(y), {a.id()}, [lines, len, idx](Tape& t, std::uint32_t self) {
    auto& node = t.node(self);
    auto& na = t.node(node.inputs[0]);
    for (std::size_t line = 0; line < lines; ++line) {
      double dot = 0.0;
      for (std::size_t k = 0; k < len; ++k) dot += node.grad[idx(line, k)] * node.value[idx(line, k)];
      for (std::size_t k = 0; k < len; ++k) {
        const std::size_t i = idx(line, k);
        na.grad[i] += node.value[i] * (node.grad[i] - dot);
      }
    }
  });
}

Var layer_norm(Var x, Var gain, Var bias, double eps) {
  Tape& tape = tape_of(x, gain);
  tape_of(x, bias);
  const Tensor& X = x.value();
  auto [r, c] = dims(X);
  if (gain.value().size() != c) shape_error("layer_norm gain", X, gain.value());
  if (bias.value().size() != c) shape_error("layer_norm bias", X, bias.value());
  Tensor y = X;
  std::vector<double> inv_std(r);
  std::vector<double> xhat(X.size());
  for (std::size_t i = 0; i < r; ++i) {
    double mu = 0.0;
    for (std::size_t j = 0; j < c; ++j) mu += X[i * c + j];
    mu /= static_cast<double>(c);
    double var = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      const double d = X[i * c + j] - mu;
      var += d * d;
    }
    var /= static_cast<double>(c);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < c; ++j) {
      xhat[i * c + j] = (X[i * c + j] - mu) * inv_std[i];
      y[i * c + j] = xhat[i * c + j] * gain.value()[j] + bias.value()[j];
    }
  }
  return tape.record(
      std::move(y), {x.id(), gain.id(), bias.id()},
      [r, c, inv_std = std::move(inv_std), xhat = std::move(xhat)](Tape& t, std::uint32_t self) {
        auto& node = t.node(self);
        auto& nx = t.node(node.inputs[0]);
        auto& ng = t.node(node.inputs[1]);
        auto& nb = t.node(node.inputs[2]);
        const double inv_c = 1.0 / static_cast<double>(c);
        for (std::size_t i = 0; i < r; ++i) {
          double mean_d = 0.0, mean_dx = 0.0;
          for (std::size_t j = 0; j < c; ++j) {
            const double g = node.grad[i * c + j];
            const double dxh = g * ng.value[j];
            mean_d += dxh;
            mean_dx += dxh * xhat[i * c + j];
            ng.grad[j] += g * xhat[i * c + j];
            nb.grad[j] += g;
          }
          mean_d *= inv_c;
          mean_dx *= inv_c;
          for (std::size_t j = 0; j < c; ++j) {
            const double dxh = node.grad[i * c + j] * ng.value[j];
            nx.grad[i * c + j] += inv_std[i] * (dxh - mean_d - xhat[i * c + j] * mean_dx);
          }
        }
      });
}

Var transpose(Var a) {
  Tape& tape = *a.tape();
  const Tensor& A = a.value();
  auto [r, c] = dims(A);
  Tensor out = Tensor::matrix(c, r);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = A[i * c + j];
  return tape.record(std::move(out), {a.id()}, [r, c](Tape& t, std::uint32_t self) {
    auto& node = t.node(self);
    auto& na = t.node(node.inputs[0]);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) na.grad[i * c + j] += node.grad[j * r + i];
  });
}

Var reshape(Var a, std::size_t rows, std::size_t cols) {
  Tape& tape = *a.tape();
  Tensor out = a.value().reshaped({rows, cols});
  return tape.record(std::move(out), {a.id()}, [](Tape& t, std::uint32_t self) {
    auto& node = t.node(self);
    auto& na = t.node(node.inputs[0]);
    for (std::size_t i = 0; i < node.grad.size(); ++i) na.grad[i] += node.grad[i];
  });
}

Var slice_cols(Var a, std::size_t begin, std::size_t end) {
  Tape& tape = *a.tape();
  const Tensor& A = a.value();
  auto [r, c] = dims(A);
  if (begin > end || end > c)
    throw ShapeError("slice_cols [" + std::to_string(begin) + "," + std::to_string(end) +
                     ") out of range for shape " + A.shape_string());
  const std::size_t w = end - begin;
  Tensor out = Tensor::matrix(r, w);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < w; ++j) out[i * w + j] = A[i * c + begin + j];
  return tape.record(std::move(out), {a.id()}, [r, c, w, begin](Tape& t, std::uint32_t self) {
    auto& node = t.node(self);
    auto& na = t.node(node.inputs[0]);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < w; ++j) na.grad[i * c + begin + j] += node.grad[i * w + j];
  });
}

double cross_entropy_value(std::span<const double> logits, int label) {
  if (label < 0 || static_cast<std::size_t>(label) >= logits.size())
    throw std::out_of_range("cross_entropy label " + std::to_string(label) + " out of range");
  double mx = -INFINITY;
  for (double z : logits) mx = std::max(mx, z);
  double s = 0.0;
  for (double z : logits) s += std::exp(z - mx);
  return mx + std::log(s) - logits[static_cast<std::size_t>(label)];
}

Var cross_entropy(Var logits, int label) {
  Tape& tape = *logits.tape();
  const Tensor& Z = logits.value();
  double loss = cross_entropy_value(Z.data(), label);
  return tape.record(Tensor::scalar(loss), {logits.id()}, [label](Tape& t, std::uint32_t self) {
    auto& node = t.node(self);
    auto& nz = t.node(node.inputs[0]);
    double mx = -INFINITY;
    for (double z : nz.value.data()) mx = std::max(mx, z);
    double s = 0.0;
    for (double z : nz.value.data()) s += std::exp(z - mx);
    for (std::size_t k = 0; k < nz.value.size(); ++k) {
      double p = std::exp(nz.value[k] - mx) / s;
      nz.grad[k] += node.grad[0] * (p - (static_cast<int>(k) == label ? 1.0 : 0.0));
    }
  });
}

// ---------------------------------------------------------------------------
// Gradient verification

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
  return std::abs(analytic - numeric) / denom;
}

double finite_diff_check(const std::function<Var(Tape&)>& loss, ParameterSet& params,
                         const FiniteDiffOptions& options) {
  params.zero_grad();
  {
    Tape tape;
    Var l = loss(tape);
    tape.backward(l);
  }
  std::vector<std::pair<std::size_t, std::size_t>> coords;
  for (std::size_t p = 0; p < params.size(); ++p)
    for (std::size_t k = 0; k < params[p].value.size(); ++k) coords.emplace_back(p, k);
  if (coords.size() > options.max_coordinates) {
    std::mt19937_64 rng(options.seed);
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(options.max_coordinates);
  }
  auto evaluate = [&]() {
    Tape tape;
    return loss(tape).value()[0];
  };
  double worst = 0.0;
  for (auto [p, k] : coords) {
    double& v = params[p].value[k];
    const double saved = v;
    v = saved + options.eps;
    const double up = evaluate();
    v = saved - options.eps;
    const double down = evaluate();
    v = saved;
    const double numeric = (up - down) / (2.0 * options.eps);
    worst = std::max(worst, relative_error(params[p].grad[k], numeric));
  }
  return worst;
}

}  // namespace evdn::ad
