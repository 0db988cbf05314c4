#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "evdn/tensor.hpp"

namespace evdn::ad {

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  Parameter(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)), grad(value.shape()) {}
  void zero_grad() { grad.fill(0.0); }
};

/// Ordered, name-addressable collection of parameters. Indices are stable.
class ParameterSet {
 public:
  std::size_t add(std::string name, Tensor value);
  std::size_t size() const { return params_.size(); }
  Parameter& operator[](std::size_t i) { return params_[i]; }
  const Parameter& operator[](std::size_t i) const { return params_[i]; }
  std::size_t index_of(const std::string& name) const;
  const Parameter* find(const std::string& name) const;
  std::size_t scalar_count() const;
  void zero_grad();

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

 private:
  std::vector<Parameter> params_;
};

class Tape;

/// Handle to a value recorded on a tape.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::uint32_t id) : tape_(tape), id_(id) {}

  const Tensor& value() const;
  const Tensor& grad() const;
  Tape* tape() const { return tape_; }
  std::uint32_t id() const { return id_; }

 private:
  Tape* tape_ = nullptr;
  std::uint32_t id_ = 0;
};

/// Record of primitive operations in topological order (every input precedes its consumers).
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::uint32_t self)>;

  struct Node {
    Tensor value;
    Tensor grad;
    std::vector<std::uint32_t> inputs;
    BackwardFn backward;
    Parameter* param = nullptr;
  };

  Var constant(Tensor value);
  Var parameter(Parameter& p);
  Var record(Tensor value, std::vector<std::uint32_t> inputs, BackwardFn backward);

  /// Reverse sweep from a scalar node; accumulates into Parameter::grad.
  void backward(Var loss, double seed = 1.0);

  Node& node(std::uint32_t id) { return nodes_[id]; }
  const Node& node(std::uint32_t id) const { return nodes_[id]; }
  std::size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

 private:
  std::deque<Node> nodes_;
};

// Differentiable primitives. Rank-1 operands are treated as 1 x n rows.
Var matmul(Var a, Var b);
Var add(Var a, Var b);  // b may be a 1 x n row broadcast over a's rows
Var sub(Var a, Var b);
Var mul(Var a, Var b);  // elementwise, same broadcast rule as add
Var scale(Var a, double c);
Var concat(std::span<const Var> parts, int axis);
Var sum(Var a, int axis);   // axis 0 -> 1 x cols, axis 1 -> rows x 1
Var mean(Var a, int axis);
Var sum_all(Var a);
Var sigmoid(Var a);
Var relu(Var a);
Var square(Var a);
Var sqrt(Var a);  // derivative taken as 0 where the value is 0
Var softmax(Var a, int axis);
Var layer_norm(Var x, Var gain, Var bias, double eps);  // row-wise over the last axis
Var transpose(Var a);
Var reshape(Var a, std::size_t rows, std::size_t cols);
Var slice_cols(Var a, std::size_t begin, std::size_t end);
Var cross_entropy(Var logits, int label);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }

double sigmoid_value(double x);

/// Numerically stable -log softmax(logits)[label] on plain values.
double cross_entropy_value(std::span<const double> logits, int label);

struct FiniteDiffOptions {
  double eps = 1e-5;
  std::size_t max_coordinates = 256;  // sampled without replacement across all parameters
  std::uint64_t seed = 1;
};

/// Largest relative error between reverse-mode gradients and central differences over a
/// sample of parameter coordinates. `loss` builds a scalar loss on the given tape.
double finite_diff_check(const std::function<Var(Tape&)>& loss, ParameterSet& params,
                         const FiniteDiffOptions& options = {});

/// |a - b| / max(|a|, |b|, 1e-6)
double relative_error(double analytic, double numeric);

}  // namespace evdn::ad
