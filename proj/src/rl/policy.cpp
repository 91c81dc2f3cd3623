#include "cfd/rl/policy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "cfd/common/rng.hpp"
#include "cfd/nn/adam.hpp"

namespace cfd::rl {

using nn::Tensor;
using nn::Var;

std::string to_string(UpdateScheme s) {
  return s == UpdateScheme::per_dialogue ? "per_dialogue" : "per_step";
}

UpdateScheme update_scheme_from_string(const std::string& s) {
  if (s == "per_dialogue" || s == "case1") return UpdateScheme::per_dialogue;
  if (s == "per_step" || s == "case2") return UpdateScheme::per_step;
  throw std::invalid_argument("unknown update scheme '" + s + "' (per_dialogue or per_step)");
}

void D3qnConfig::validate() const {
  if (hidden == 0) throw std::invalid_argument("d3qn.hidden must be positive");
  if (!(lr > 0.0)) throw std::invalid_argument("d3qn.lr must be positive");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("d3qn.gamma must lie in [0, 1)");
  if (!(epsilon_start >= 0.0 && epsilon_start <= 1.0 && epsilon_end >= 0.0 && epsilon_end <= 1.0))
    throw std::invalid_argument("d3qn epsilon must lie in [0, 1]");
  if (target_sync == 0) throw std::invalid_argument("d3qn.target_sync must be positive");
}

double epsilon_at(const D3qnConfig& config, std::size_t dialogue, std::size_t total) {
  if (total <= 1) return config.epsilon_end;
  const double f = std::min(1.0, double(dialogue) / double(total - 1));
  return (1.0 - f) * config.epsilon_start + f * config.epsilon_end;
}

namespace {

struct Transition {
  Vector s;
  std::vector<Vector> candidates;
  std::size_t choice = 0;
  double target = 0.0;
};

// Mean (or summed) squared TD error over the transitions; one Adam step.
double update(QNetwork& net, nn::AdamState& adam, const std::vector<Transition>& batch,
              bool sum = false) {
  nn::Tape tape;
  std::vector<Var> errors;
  for (const auto& tr : batch) {
    Var q = net.q_values(tape, tape.constant(Tensor::row(tr.s)),
                         tape.constant(stack_rows(tr.candidates)));
    Var chosen = nn::gather_rows(q, {tr.choice});
    errors.push_back(nn::square(chosen - tape.constant(Tensor::scalar(tr.target))));
  }
  Var total = errors.front();
  for (std::size_t i = 1; i < errors.size(); ++i) total = total + errors[i];
  Var loss = nn::scale(nn::sum(total), sum ? 1.0 : 1.0 / double(errors.size()));
  const double l = loss.value().item();
  if (!std::isfinite(l)) throw std::runtime_error("TD loss became non-finite");
  tape.backward(loss);
  nn::adam_step(net.params(), adam);
  return l;
}

}  // namespace

TrainedD3qn train_d3qn(CandidateEnvironment& env, const D3qnConfig& config,
                       const EpochHook& on_epoch) {
  config.validate();
  TrainedD3qn out{QNetwork(env.state_dim(), env.action_dim(), config.hidden,
                           derive_seed(config.seed, "d3qn.init")),
                  {}, {}, 0};
  out.target = out.main;
  nn::AdamState adam(config.lr);
  Rng rng(derive_seed(config.seed, "d3qn.explore"));

  const std::size_t starts = env.starts();
  const std::size_t per_epoch = config.dialogues_per_epoch ? config.dialogues_per_epoch : starts;
  const std::size_t total = per_epoch * config.epochs;
  std::vector<std::size_t> order(starts);
  std::size_t dialogue = 0;

  auto after_update = [&] {
    ++out.updates;
    if (out.updates % config.target_sync == 0) out.target.copy_from(out.main);
  };

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    double loss_sum = 0.0, return_sum = 0.0;
    std::size_t loss_count = 0;
    for (std::size_t k = 0; k < per_epoch; ++k, ++dialogue) {
      if (k % starts == 0) {
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng);
      }
      env.reset(order[k % starts]);
      const double eps = epsilon_at(config, dialogue, total);
      std::vector<Transition> pending;
      double ret = 0.0;
      while (!env.done()) {
        Transition tr;
        tr.s = env.state();
        tr.candidates = env.candidates();
        if (tr.candidates.empty()) break;
        tr.choice = sample_uniform(rng, 0.0, 1.0) < eps
                        ? sample_index(rng, tr.candidates.size())
                        : select_action(out.main, tr.s, tr.candidates);
        const StepResult r = env.step(tr.choice);
        ret += r.reward;
        const std::vector<Vector> next = r.terminal ? std::vector<Vector>{} : env.candidates();
        tr.target = td_target(out.main, out.target, r.reward, env.state(), next, config.gamma,
                              r.terminal || next.empty());
        if (config.scheme == UpdateScheme::per_step) {
          loss_sum += update(out.main, adam, {tr});
          ++loss_count;
          after_update();
        } else {
          pending.push_back(std::move(tr));
        }
      }
      if (config.scheme == UpdateScheme::per_dialogue && !pending.empty()) {
        loss_sum += update(out.main, adam, pending, config.dialogue_loss_sum);
        ++loss_count;
        after_update();
      }
      return_sum += ret;
    }
    out.history.epoch_loss.push_back(loss_count ? loss_sum / double(loss_count) : 0.0);
    out.history.epoch_return.push_back(return_sum / double(per_epoch));
    if (on_epoch) on_epoch(epoch, out.main);
  }
  return out;
}

double PolicyEvaluation::mean_reward() const {
  if (dialogues.empty()) return 0.0;
  double s = 0.0;
  for (const auto& d : dialogues) s += d.reward;
  return s / double(dialogues.size());
}

std::vector<double> PolicyEvaluation::rewards() const {
  std::vector<double> out;
  for (const auto& d : dialogues) out.push_back(d.reward);
  return out;
}

PolicyEvaluation evaluate_policy(const QNetwork& net, CandidateEnvironment& env) {
  PolicyEvaluation out;
  auto* cf_env = dynamic_cast<CounterfactualEnvironment*>(&env);
  for (std::size_t start = 0; start < env.starts(); ++start) {
    env.reset(start);
    DialogueEvaluation d;
    d.start = start;
    d.max_q = -std::numeric_limits<double>::infinity();
    double q_sum = 0.0;
    while (!env.done()) {
      const auto candidates = env.candidates();
      if (candidates.empty()) break;
      const auto q = net.q_values(env.state(), candidates);
      const std::size_t k = argmax(q);
      d.max_q = std::max(d.max_q, q[k]);
      q_sum += q[k];
      d.path.push_back(k);
      d.reward += env.step(k).reward;
    }
    if (d.path.empty()) d.max_q = 0.0;
    else d.mean_q = q_sum / double(d.path.size());
    if (cf_env) d.assembled = cf_env->assembled();
    out.dialogues.push_back(std::move(d));
  }
  return out;
}

}  // namespace cfd::rl
