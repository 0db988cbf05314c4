#include "evdn/tensor.hpp"

#include <algorithm>
#include <functional>
#include <numeric>
#include <stdexcept>

namespace evdn::ad {

namespace {
std::size_t element_count(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}
}  // namespace

std::string shape_string(const std::vector<std::size_t>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Tensor::Tensor(std::vector<std::size_t> shape, double fill)
    : shape_(std::move(shape)), data_(element_count(shape_), fill) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != element_count(shape_))
    throw std::invalid_argument("tensor data length " + std::to_string(data_.size()) +
                                " does not match shape " + ad::shape_string(shape_));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::initializer_list<double> values) {
  return Tensor({rows, cols}, std::vector<double>(values));
}

Tensor Tensor::identity(std::size_t n) {
  Tensor t = matrix(n, n);
  for (std::size_t i = 0; i < n; ++i) t.at(i, i) = 1.0;
  return t;
}

std::size_t Tensor::rows() const {
  switch (shape_.size()) {
    case 0:
    case 1: return 1;
    case 2: return shape_[0];
    default: throw std::logic_error("rows() on tensor of rank " + std::to_string(shape_.size()));
  }
}

std::size_t Tensor::cols() const {
  switch (shape_.size()) {
    case 0: return 1;
    case 1: return shape_[0];
    case 2: return shape_[1];
    default: throw std::logic_error("cols() on tensor of rank " + std::to_string(shape_.size()));
  }
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

Tensor Tensor::reshaped(std::vector<std::size_t> shape) const {
  if (element_count(shape) != data_.size())
    throw std::invalid_argument("cannot reshape " + ad::shape_string(shape_) + " to " +
                                ad::shape_string(shape));
  return Tensor(std::move(shape), data_);
}

std::string Tensor::shape_string() const { return ad::shape_string(shape_); }

}  // namespace evdn::ad
