#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "evdn/autodiff.hpp"

namespace evdn::ad {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;
  std::uint64_t step = 0;

  explicit AdamState(const ParameterSet& params);
};

/// Bias-corrected Adam update of every parameter from its accumulated gradient,
/// then clears the gradients.
void adam_step(ParameterSet& params, AdamState& state, const AdamConfig& config);

/// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
Tensor uniform_init(std::vector<std::size_t> shape, std::size_t fan_in, std::mt19937_64& rng);

/// Portable uniform double in [0, 1) from the top 53 bits of the generator output.
inline double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace evdn::ad
