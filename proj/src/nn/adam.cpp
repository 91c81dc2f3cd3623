#include "cfd/nn/adam.hpp"

#include <cmath>

#include "cfd/nn/errors.hpp"

namespace cfd::nn {

void adam_step(ParamSet& params, AdamState& state) {
  if (state.first_moment.empty()) {
    for (const auto& e : params) {
      state.first_moment.emplace_back(e.value.shape());
      state.second_moment.emplace_back(e.value.shape());
    }
  }
  if (state.first_moment.size() != params.size()) {
    throw ContractError("adam_step: optimizer state was built for a different parameter set");
  }
  for (const auto& e : params) {
    if (!e.grad_ready) throw ContractError("adam_step: missing gradient for '" + e.name + "'");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& e = params.entry(i);
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    for (std::size_t k = 0; k < e.value.size(); ++k) {
      const double g = e.grad[k];
      m[k] = state.beta1 * m[k] + (1.0 - state.beta1) * g;
      v[k] = state.beta2 * v[k] + (1.0 - state.beta2) * g * g;
      const double mhat = m[k] / c1;
      const double vhat = v[k] / c2;
      e.value[k] -= state.lr * mhat / (std::sqrt(vhat) + state.epsilon);
    }
  }
  params.zero_grad();
}

}  // namespace cfd::nn
