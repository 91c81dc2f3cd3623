#include "cfd/gan/bicogan.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "cfd/dppr/dppr.hpp"
#include "cfd/nn/adam.hpp"
#include "cfd/nn/errors.hpp"

namespace cfd::gan {

using nn::Tensor;
using nn::Var;

namespace {

constexpr const char* kToleranceName = "meta.consistency_tolerance";

void put(Tensor& m, std::size_t row, std::size_t col, const Vector& v) {
  std::copy(v.begin(), v.end(), &m(row, col));
}

void put(Tensor& m, std::size_t row, std::size_t col, const TraitVector& v) {
  std::copy(v.begin(), v.end(), &m(row, col));
}

Vector slice(const Tensor& m, std::size_t row, std::size_t begin, std::size_t count) {
  const double* p = m.data().data() + row * m.cols() + begin;
  return Vector(p, p + count);
}

Tensor row_of(const Vector& v) { return Tensor::row(v); }

}  // namespace

std::vector<ScmTransition> make_transitions(const std::vector<data::Episode>& episodes,
                                            const dppr::DpprModel* dppr, std::size_t window) {
  std::vector<ScmTransition> out;
  for (std::size_t i = 0; i < episodes.size(); ++i) {
    const auto& e = episodes[i];
    std::optional<dppr::ProgressiveEstimator> est;
    if (dppr) est.emplace(*dppr, window);
    for (std::size_t t = 0; t < e.actions.size(); ++t) {
      if (!e.action_valid(t) || !e.state_valid(t + 1)) break;
      ScmTransition tr;
      tr.s = e.states[t];
      tr.a = e.actions[t];
      tr.s_next = e.states[t + 1];
      if (est)
        tr.L = est->add_turn(e.states[t], e.actions[t]);
      else
        tr.L = e.traits ? *e.traits : data::prior_traits();
      tr.episode = i;
      tr.t = t;
      out.push_back(std::move(tr));
    }
  }
  return out;
}

void BiCoGanConfig::validate() const {
  auto bad = [](const std::string& m) { throw std::invalid_argument("bicogan." + m); };
  if (hidden == 0) bad("hidden must be positive");
  if (batch == 0) bad("batch must be positive");
  if (!(lr > 0.0)) bad("lr must be positive");
  if (!(lambda >= 0.0)) bad("lambda must be >= 0");
  if (!(reconstruction >= 0.0)) bad("reconstruction must be >= 0");
  if (!(tolerance_quantile > 0.0 && tolerance_quantile <= 1.0))
    bad("tolerance_quantile must be in (0, 1]");
}

BiCoGanModel::BiCoGanModel(std::size_t dim, std::size_t hidden, std::uint64_t seed)
    : dim_(dim), hidden_(hidden) {
  if (dim == 0 || hidden == 0) throw std::invalid_argument("BiCoGAN dimensions must be positive");
  build_layers();
  Rng rng(seed);
  g_.init(ge_params_, rng);
  e_.init(ge_params_, rng);
  d_.init(d_params_, rng);
  // D starts undecided: logit 0 for every pair.
  d_params_.value("bicogan.d.fc3.weight").fill(0.0);
  d_params_.value("bicogan.d.fc3.bias").fill(0.0);
}

void BiCoGanModel::build_layers() {
  g_ = nn::Mlp::make("bicogan.g", {latent_dim(), hidden_, hidden_, dim_}, nn::Activation::tanh);
  e_ = nn::Mlp::make("bicogan.e", {dim_, hidden_, hidden_, latent_dim()}, nn::Activation::tanh);
  d_ = nn::Mlp::make("bicogan.d", {latent_dim() + dim_, hidden_, hidden_, 1},
                     nn::Activation::leaky_relu);
}

Var BiCoGanModel::generator(nn::Tape& tape, Var z) const {
  nn::Tape::Scope s(tape, "generator");
  return g_(tape, ge_params_, z);
}

Var BiCoGanModel::encoder(nn::Tape& tape, Var x) const {
  nn::Tape::Scope s(tape, "encoder");
  return e_(tape, ge_params_, x);
}

Var BiCoGanModel::discriminator_logit(nn::Tape& tape, Var z, Var x) const {
  nn::Tape::Scope s(tape, "discriminator");
  return d_(tape, d_params_, nn::concat_cols({z, x}));
}

Vector BiCoGanModel::generate(const Vector& s, const Vector& a, const TraitVector& L,
                              const Vector& eps) const {
  if (s.size() != dim_ || a.size() != dim_ || eps.size() != dim_)
    throw nn::DimensionError("generator input dimension does not match d=" + std::to_string(dim_));
  Tensor z = Tensor::zeros(1, latent_dim());
  put(z, 0, 0, s);
  put(z, 0, dim_, a);
  put(z, 0, 2 * dim_, L);
  put(z, 0, condition_dim(), eps);
  nn::Tape tape;
  return generator(tape, tape.constant(std::move(z))).value().row_vector(0);
}

Encoded BiCoGanModel::encode(const Vector& s_next) const {
  if (s_next.size() != dim_)
    throw nn::DimensionError("encoder input dimension does not match d=" + std::to_string(dim_));
  nn::Tape tape;
  const Tensor& y = encoder(tape, tape.constant(row_of(s_next))).value();
  Encoded e;
  e.s = slice(y, 0, 0, dim_);
  e.a = slice(y, 0, dim_, dim_);
  for (std::size_t k = 0; k < data::kTraitDim; ++k) e.L[k] = y(0, 2 * dim_ + k);
  e.eps = slice(y, 0, condition_dim(), dim_);
  return e;
}

double BiCoGanModel::discriminate(const Vector& s, const Vector& a, const TraitVector& L,
                                  const Vector& eps, const Vector& s_next) const {
  Tensor z = Tensor::zeros(1, latent_dim());
  put(z, 0, 0, s);
  put(z, 0, dim_, a);
  put(z, 0, 2 * dim_, L);
  put(z, 0, condition_dim(), eps);
  nn::Tape tape;
  Var logit = discriminator_logit(tape, tape.constant(std::move(z)), tape.constant(row_of(s_next)));
  return nn::stable_sigmoid(logit.value().item());
}

Vector BiCoGanModel::abduct_noise(const ScmTransition& transition) const {
  return encode(transition.s_next).eps;
}

Vector BiCoGanModel::generate_counterfactual(const Vector& s, const Vector& a_alt,
                                             const TraitVector& L, NoiseSpec noise,
                                             const Vector* factual_next) const {
  Vector eps;
  switch (noise.mode) {
    case NoiseMode::abducted:
      if (!factual_next)
        throw std::invalid_argument("abducted noise needs the factual next state");
      eps = encode(*factual_next).eps;
      break;
    case NoiseMode::zero:
      eps.assign(dim_, 0.0);
      break;
    case NoiseMode::sampled: {
      Rng rng(noise.seed);
      eps = normal_vector(rng, dim_);
      break;
    }
  }
  return generate(s, a_alt, L, eps);
}

double BiCoGanModel::consistency_error(const ScmTransition& tr) const {
  Vector g = generate_counterfactual(tr.s, tr.a, tr.L, {}, &tr.s_next);
  double sq = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) sq += (g[i] - tr.s_next[i]) * (g[i] - tr.s_next[i]);
  return std::sqrt(sq);
}

void BiCoGanModel::save(const std::filesystem::path& path) const {
  nn::ParamSet all;
  for (const auto& e : ge_params_) all.add(e.name, e.value);
  for (const auto& e : d_params_) all.add(e.name, e.value);
  all.add(kToleranceName, Tensor::scalar(tolerance_));
  nn::save_params(all, path);
}

BiCoGanModel BiCoGanModel::load(const std::filesystem::path& path) {
  nn::ParamSet all = nn::load_params(path);
  if (!all.contains("bicogan.g.fc1.weight") || !all.contains(kToleranceName))
    throw std::runtime_error(path.string() + " is not a BiCoGAN checkpoint");
  BiCoGanModel m;
  const Tensor& w = all.value("bicogan.g.fc1.weight");
  m.dim_ = (w.rows() - data::kTraitDim) / 3;
  m.hidden_ = w.cols();
  m.build_layers();
  for (const auto& e : all) {
    if (e.name == kToleranceName)
      m.tolerance_ = e.value.item();
    else if (e.name.rfind("bicogan.d.", 0) == 0)
      m.d_params_.add(e.name, e.value);
    else
      m.ge_params_.add(e.name, e.value);
  }
  return m;
}

namespace {

struct Batch {
  Tensor condition;  // [B x (2d + 5)]
  Tensor next;       // [B x d]
  Tensor noise;      // [B x d]
};

Batch make_batch(const std::vector<ScmTransition>& data, const std::vector<std::size_t>& idx,
                 std::size_t d, Rng& rng) {
  const std::size_t b = idx.size();
  Batch out{Tensor::zeros(b, 2 * d + data::kTraitDim), Tensor::zeros(b, d), Tensor::zeros(b, d)};
  for (std::size_t r = 0; r < b; ++r) {
    const auto& tr = data[idx[r]];
    put(out.condition, r, 0, tr.s);
    put(out.condition, r, d, tr.a);
    put(out.condition, r, 2 * d, tr.L);
    put(out.next, r, 0, tr.s_next);
  }
  for (auto& v : out.noise.values()) v = sample_normal(rng);
  return out;
}

void check_finite(double v, const char* what, std::size_t step) {
  if (!std::isfinite(v))
    throw std::runtime_error(std::string("BiCoGAN ") + what + " loss became non-finite at step " +
                             std::to_string(step));
}

}  // namespace

TrainedBiCoGan train_bicogan(const std::vector<ScmTransition>& transitions,
                             const BiCoGanConfig& config) {
  config.validate();
  if (transitions.empty()) throw std::invalid_argument("no transitions to train on");
  const std::size_t d = transitions.front().s.size();
  for (std::size_t i = 0; i < transitions.size(); ++i) {
    const auto& tr = transitions[i];
    if (tr.s.size() != d || tr.a.size() != d || tr.s_next.size() != d)
      throw std::invalid_argument("transition " + std::to_string(i) + " has inconsistent dimension");
  }

  TrainedBiCoGan out{BiCoGanModel(d, config.hidden, derive_seed(config.seed, "bicogan.init")), {}};
  BiCoGanModel& m = out.model;
  nn::AdamState adam_d(config.lr), adam_ge(config.lr);
  Rng rng(derive_seed(config.seed, "bicogan.train"));
  std::vector<std::size_t> order(transitions.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t step = 0;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += config.batch) {
      std::vector<std::size_t> idx(order.begin() + long(start),
                                   order.begin() + long(std::min(order.size(), start + config.batch)));
      Batch b = make_batch(transitions, idx, d, rng);
      Tensor z = Tensor::zeros(idx.size(), m.latent_dim());
      for (std::size_t r = 0; r < idx.size(); ++r) {
        std::copy(&b.condition(r, 0), &b.condition(r, 0) + m.condition_dim(), &z(r, 0));
        std::copy(&b.noise(r, 0), &b.noise(r, 0) + d, &z(r, m.condition_dim()));
      }

      // Discriminator update with encoder and generator outputs held fixed.
      {
        Tensor enc_val, fake_val;
        {
          nn::Tape t;
          enc_val = m.encoder(t, t.constant(b.next)).value();
          fake_val = m.generator(t, t.constant(z)).value();
        }
        nn::Tape t;
        Var real = m.discriminator_logit(t, t.constant(enc_val), t.constant(b.next));
        Var fake = m.discriminator_logit(t, t.constant(z), t.constant(fake_val));
        Var loss = nn::scale(nn::mean(nn::log_sigmoid(real)) +
                                 nn::mean(nn::log_sigmoid(nn::scale(fake, -1.0))),
                             -1.0);
        const double l = loss.value().item();
        check_finite(l, "discriminator", step);
        t.backward(loss);
        nn::adam_step(m.discriminator_params(), adam_d);
        out.history.discriminator.push_back(l);
      }

      // Generator/encoder update.
      {
        nn::Tape t;
        Var x = t.constant(b.next);
        Var zv = t.constant(z);
        Var enc = m.encoder(t, x);
        Var fake = m.generator(t, zv);
        Var real_logit = m.discriminator_logit(t, enc, x);
        Var fake_logit = m.discriminator_logit(t, zv, fake);
        Var adv;
        if (config.non_saturating)
          adv = nn::scale(nn::mean(nn::log_sigmoid(nn::scale(real_logit, -1.0))) +
                              nn::mean(nn::log_sigmoid(fake_logit)),
                          -1.0);
        else
          adv = nn::mean(nn::log_sigmoid(real_logit)) +
                nn::mean(nn::log_sigmoid(nn::scale(fake_logit, -1.0)));
        const double inv_b = 1.0 / double(idx.size());
        Var sa_hat = nn::slice_cols(enc, 0, 2 * d);
        Var sa = nn::slice_cols(t.constant(b.condition), 0, 2 * d);
        Var reg = nn::scale(nn::sum(nn::square(sa_hat - sa)), inv_b);
        Var eps_hat = nn::slice_cols(enc, m.condition_dim(), d);
        Var regen = m.generator(t, nn::concat_cols({t.constant(b.condition), eps_hat}));
        Var rec = nn::scale(nn::sum(nn::square(regen - x)), inv_b);
        Var loss = adv + nn::scale(reg, config.lambda) + nn::scale(rec, config.reconstruction);
        check_finite(loss.value().item(), "generator/encoder", step);
        t.backward(loss);
        nn::adam_step(m.generator_encoder_params(), adam_ge);
        m.discriminator_params().zero_grad();
        out.history.adversarial.push_back(adv.value().item());
        out.history.regularizer.push_back(reg.value().item());
        out.history.reconstruction.push_back(rec.value().item());
      }
      ++step;
    }
  }

  std::vector<double> errors;
  errors.reserve(transitions.size());
  for (const auto& tr : transitions) errors.push_back(m.consistency_error(tr));
  m.set_consistency_tolerance(quantile(std::move(errors), config.tolerance_quantile));
  return out;
}

double discriminator_accuracy(const BiCoGanModel& model,
                              const std::vector<ScmTransition>& transitions, std::uint64_t seed) {
  if (transitions.empty()) throw std::invalid_argument("no transitions");
  Rng rng(seed);
  std::vector<std::size_t> idx(transitions.size());
  std::iota(idx.begin(), idx.end(), 0);
  Batch b = make_batch(transitions, idx, model.dim(), rng);
  nn::Tape t;
  Tensor z = Tensor::zeros(idx.size(), model.latent_dim());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    std::copy(&b.condition(r, 0), &b.condition(r, 0) + model.condition_dim(), &z(r, 0));
    std::copy(&b.noise(r, 0), &b.noise(r, 0) + model.dim(), &z(r, model.condition_dim()));
  }
  Var x = t.constant(b.next);
  Var zv = t.constant(z);
  const Tensor real = model.discriminator_logit(t, model.encoder(t, x), x).value();
  const Tensor fake = model.discriminator_logit(t, zv, model.generator(t, zv)).value();
  std::size_t correct = 0;
  for (double v : real.values()) correct += v > 0.0 ? 1 : 0;
  for (double v : fake.values()) correct += v <= 0.0 ? 1 : 0;
  return double(correct) / double(real.size() + fake.size());
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double pos = q * double(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - double(lo)) * (values[hi] - values[lo]);
}

}  // namespace cfd::gan
