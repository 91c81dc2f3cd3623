#include "gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "cfd/common/rng.hpp"

namespace cfd::check {

namespace {

double loss_value(nn::ParamSet& params, const LossFn& loss) {
  nn::Tape tape;
  return loss(tape, params).value().item();
}

}  // namespace

GradCheckResult grad_check(nn::ParamSet& params, const LossFn& loss, double h, double floor,
                           std::size_t max_per_param, std::uint64_t seed) {
  params.zero_grad();
  {
    nn::Tape tape;
    nn::Var l = loss(tape, params);
    tape.backward(l);
  }
  std::vector<nn::Tensor> analytic;
  for (const auto& e : params) analytic.push_back(e.grad);
  params.zero_grad();

  Rng rng(seed);
  GradCheckResult result;
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto& entry = params.entry(p);
    std::vector<std::size_t> idx(entry.value.size());
    std::iota(idx.begin(), idx.end(), 0);
    if (max_per_param > 0 && idx.size() > max_per_param) {
      std::shuffle(idx.begin(), idx.end(), rng);
      idx.resize(max_per_param);
    }
    for (std::size_t i : idx) {
      const double saved = entry.value[i];
      entry.value[i] = saved + h;
      const double up = loss_value(params, loss);
      entry.value[i] = saved - h;
      const double down = loss_value(params, loss);
      entry.value[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic[p][i];
      const double rel =
          std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
      ++result.checked;
      if (rel > result.max_rel_error || !std::isfinite(rel)) {
        result.max_rel_error = std::isfinite(rel) ? rel : INFINITY;
        result.worst = entry.name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return result;
}

void randomize(nn::ParamSet& params, std::uint64_t seed, double lo, double hi) {
  Rng rng(seed);
  for (auto& e : params)
    for (auto& v : e.value.values()) v = sample_uniform(rng, lo, hi);
}

}  // namespace cfd::check
