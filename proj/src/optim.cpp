#include "evdn/optim.hpp"

#include <cmath>

namespace evdn::ad {

AdamState::AdamState(const ParameterSet& params) {
  for (const auto& p : params) {
    first_moment.emplace_back(p.value.shape());
    second_moment.emplace_back(p.value.shape());
  }
}

void adam_step(ParameterSet& params, AdamState& state, const AdamConfig& config) {
  if (state.first_moment.size() != params.size())
    throw std::invalid_argument("Adam state does not match the parameter set");
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t p = 0; p < params.size(); ++p) {
    Parameter& param = params[p];
    Tensor& m = state.first_moment[p];
    Tensor& v = state.second_moment[p];
    for (std::size_t k = 0; k < param.value.size(); ++k) {
      const double g = param.grad[k];
      m[k] = config.beta1 * m[k] + (1.0 - config.beta1) * g;
      v[k] = config.beta2 * v[k] + (1.0 - config.beta2) * g * g;
      const double m_hat = m[k] / c1;
      const double v_hat = v[k] / c2;
      param.value[k] -= config.lr * m_hat / (std::sqrt(v_hat) + config.eps);
    }
    param.zero_grad();
  }
}

Tensor uniform_init(std::vector<std::size_t> shape, std::size_t fan_in, std::mt19937_64& rng) {
  Tensor t(std::move(shape));
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in == 0 ? 1 : fan_in));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = (2.0 * unit_uniform(rng) - 1.0) * bound;
  return t;
}

}  // namespace evdn::ad
