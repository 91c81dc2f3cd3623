#include "cfd/rl/q_network.hpp"

#include <stdexcept>

#include "cfd/nn/errors.hpp"

namespace cfd::rl {

using nn::Tensor;
using nn::Var;

QNetwork::QNetwork(std::size_t state_dim, std::size_t action_dim, std::size_t hidden,
                   std::uint64_t seed)
    : state_dim_(state_dim), action_dim_(action_dim), hidden_(hidden) {
  if (state_dim == 0 || action_dim == 0 || hidden == 0)
    throw std::invalid_argument("Q-network dimensions must be positive");
  build_layers();
  Rng rng(seed);
  trunk_.init(params_, rng);
  advantage_.init(params_, rng);
  value_.init(params_, rng);
}

void QNetwork::build_layers() {
  trunk_ = nn::Dense{"q.trunk", state_dim_, hidden_};
  advantage_ = nn::Mlp::make("q.advantage", {hidden_ + action_dim_, hidden_, 1}, nn::Activation::tanh);
  value_ = nn::Mlp::make("q.value", {hidden_, hidden_, 1}, nn::Activation::tanh);
}

Var QNetwork::value(nn::Tape& tape, Var s) const {
  nn::Tape::Scope scope(tape, "q");
  Var phi = nn::tanh(trunk_(tape, params_, s));
  return value_(tape, params_, phi);
}

Var QNetwork::advantages(nn::Tape& tape, Var s, Var candidates) const {
  nn::Tape::Scope scope(tape, "q");
  if (s.rows() != 1) throw nn::DimensionError(tape.label("advantages") + ": expects one state row");
  Var phi = nn::tanh(trunk_(tape, params_, s));
  Var phi_rep = nn::gather_rows(phi, std::vector<std::size_t>(candidates.rows(), 0));
  return advantage_(tape, params_, nn::concat_cols({phi_rep, candidates}));
}

Var QNetwork::q_values(nn::Tape& tape, Var s, Var candidates) const {
  const std::size_t k = candidates.rows();
  Var a = advantages(tape, s, candidates);
  Var v = value(tape, s);
  Tensor centering = Tensor::identity(k);
  for (auto& x : centering.values()) x -= 1.0 / double(k);
  Var ones = tape.constant(Tensor::filled(k, 1, 1.0));
  return nn::matmul(tape.constant(std::move(centering)), a) + nn::matmul(ones, v);
}

Tensor stack_rows(const std::vector<Vector>& rows) {
  if (rows.empty()) throw std::invalid_argument("empty candidate set");
  Tensor t = Tensor::zeros(rows.size(), rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != rows.front().size())
      throw nn::DimensionError("candidate " + std::to_string(r) + " has a different dimension");
    std::copy(rows[r].begin(), rows[r].end(), &t(r, 0));
  }
  return t;
}

std::vector<double> QNetwork::q_values(const Vector& s, const std::vector<Vector>& candidates) const {
  if (candidates.empty()) throw std::invalid_argument("Q values need a non-empty candidate set");
  nn::Tape tape;
  Var q = q_values(tape, tape.constant(Tensor::row(s)), tape.constant(stack_rows(candidates)));
  return q.value().data();
}

double QNetwork::value(const Vector& s) const {
  nn::Tape tape;
  return value(tape, tape.constant(Tensor::row(s))).value().item();
}

std::vector<double> QNetwork::advantages(const Vector& s, const std::vector<Vector>& candidates) const {
  if (candidates.empty()) throw std::invalid_argument("advantages need a non-empty candidate set");
  nn::Tape tape;
  return advantages(tape, tape.constant(Tensor::row(s)), tape.constant(stack_rows(candidates))).value().data();
}

std::vector<double> dueling_combine(double v, const std::vector<double>& a) {
  if (a.empty()) throw std::invalid_argument("dueling combine needs at least one advantage");
  double mean = 0.0;
  for (double x : a) mean += x;
  mean /= double(a.size());
  std::vector<double> q;
  for (double x : a) q.push_back(v + x - mean);
  return q;
}

void QNetwork::save(const std::filesystem::path& path) const { nn::save_params(params_, path); }

QNetwork QNetwork::load(const std::filesystem::path& path) {
  nn::ParamSet p = nn::load_params(path);
  if (!p.contains("q.trunk.weight") || !p.contains("q.advantage.fc1.weight"))
    throw std::runtime_error(path.string() + " is not a Q-network checkpoint");
  QNetwork q;
  q.state_dim_ = p.value("q.trunk.weight").rows();
  q.hidden_ = p.value("q.trunk.weight").cols();
  q.action_dim_ = p.value("q.advantage.fc1.weight").rows() - q.hidden_;
  q.build_layers();
  q.params_ = std::move(p);
  return q;
}

std::size_t argmax(const std::vector<double>& values) {
  if (values.empty()) throw std::invalid_argument("argmax of an empty list");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[best]) best = i;
  return best;
}

std::size_t select_action(const QNetwork& net, const Vector& s,
                          const std::vector<Vector>& candidates) {
  return argmax(net.q_values(s, candidates));
}

double td_target(const QNetwork& main, const QNetwork& target, double r, const Vector& s_next,
                 const std::vector<Vector>& candidates_next, double gamma, bool terminal) {
  if (terminal || gamma == 0.0) return r;
  const std::size_t k = select_action(main, s_next, candidates_next);
  return r + gamma * target.q_values(s_next, candidates_next)[k];
}

}  // namespace cfd::rl
