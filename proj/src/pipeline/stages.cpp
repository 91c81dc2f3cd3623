#include "cfd/pipeline/stages.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "cfd/cf/counterfactual.hpp"
#include "cfd/common/checksum.hpp"
#include "cfd/common/rng.hpp"
#include "cfd/data/dataset_ops.hpp"
#include "cfd/data/episode_io.hpp"
#include "cfd/dppr/regression_metrics.hpp"
#include "cfd/metrics/cca.hpp"
#include "cfd/metrics/report.hpp"
#include "cfd/rl/environments.hpp"

namespace cfd::pipeline {

namespace fs = std::filesystem;

const std::vector<Stage>& pipeline_order() {
  static const std::vector<Stage> order{Stage::gen_world,    Stage::train_dppr, Stage::train_bicogan,
                                        Stage::train_reward, Stage::gen_cf,     Stage::train_policy,
                                        Stage::evaluate,     Stage::report};
  return order;
}

std::string stage_name(Stage s) {
  switch (s) {
    case Stage::gen_world: return "gen-world";
    case Stage::train_dppr: return "train-dppr";
    case Stage::train_bicogan: return "train-bicogan";
    case Stage::train_reward: return "train-reward";
    case Stage::gen_cf: return "gen-cf";
    case Stage::train_policy: return "train-policy";
    case Stage::evaluate: return "evaluate";
    case Stage::report: return "report";
  }
  return "?";
}

std::string stage_dir(Stage s) {
  switch (s) {
    case Stage::gen_world: return "world";
    case Stage::train_dppr: return "dppr";
    case Stage::train_bicogan: return "bicogan";
    case Stage::train_reward: return "reward";
    case Stage::gen_cf: return "counterfactual";
    case Stage::train_policy: return "policy";
    case Stage::evaluate: return "evaluation";
    case Stage::report: return "report";
  }
  return "?";
}

Stage stage_from_name(const std::string& name) {
  for (Stage s : pipeline_order())
    if (stage_name(s) == name) return s;
  throw std::invalid_argument("unknown stage '" + name + "'");
}

std::string config_checksum(const ExperimentConfig& config) {
  return to_hex(fnv1a64(config_to_json(config).dump()));
}

namespace {

// Fixed formatting so reruns produce identical bytes.
std::string num(double v) {
  std::ostringstream o;
  o << std::setprecision(9) << v;
  return o.str();
}

class StageWriter {
 public:
  StageWriter(const RunContext& ctx, Stage stage) : ctx_(ctx), stage_(stage), dir_(ctx.root / stage_dir(stage)) {
    if (fs::exists(dir_ / "manifest.json") && !ctx.force)
      throw std::runtime_error(stage_dir(stage) + "/ already holds a completed " + stage_name(stage) +
                               " stage; use --force to replace it");
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }

  const fs::path& dir() const { return dir_; }
  fs::path path(const std::string& file) {
    outputs_.push_back(file);
    return dir_ / file;
  }

  void input(const fs::path& p) { inputs_[fs::relative(p, ctx_.root).generic_string()] = file_checksum(p); }

  void write_text(const std::string& file, const std::string& body) {
    std::ofstream o(path(file), std::ios::binary);
    o << body;
    if (!o) throw std::runtime_error("cannot write " + (dir_ / file).string());
  }

  void finish(const json& extra = json::object()) {
    json outputs = json::object();
    std::sort(outputs_.begin(), outputs_.end());
    for (const auto& f : outputs_) outputs[f] = file_checksum(dir_ / f);
    json m = {{"stage", stage_name(stage_)},
              {"seed", ctx_.config.seed},
              {"config", config_to_json(ctx_.config)},
              {"config_checksum", config_checksum(ctx_.config)},
              {"inputs", inputs_},
              {"outputs", outputs}};
    if (!extra.empty()) m["summary"] = extra;
    std::ofstream o(dir_ / "manifest.json", std::ios::binary);
    o << m.dump(2) << "\n";
    if (!o) throw std::runtime_error("cannot write " + (dir_ / "manifest.json").string());
  }

 private:
  const RunContext& ctx_;
  Stage stage_;
  fs::path dir_;
  std::map<std::string, std::string> inputs_;
  std::vector<std::string> outputs_;
};

// Checks that an upstream stage completed under the same config.
fs::path require(const RunContext& ctx, Stage upstream, const std::string& what, Stage requester) {
  const fs::path dir = ctx.root / stage_dir(upstream);
  const fs::path manifest = dir / "manifest.json";
  if (!fs::exists(manifest))
    throw MissingUpstream(stage_name(requester) + " requires " + what + " (run " + stage_name(upstream) +
                          " first)");
  std::ifstream in(manifest);
  json m;
  try {
    m = json::parse(in);
  } catch (const json::exception& e) {
    throw std::runtime_error(manifest.string() + ": " + e.what());
  }
  if (m.value("config_checksum", "") != config_checksum(ctx.config))
    throw std::runtime_error(stage_dir(upstream) + "/ was produced with a different config; rerun " +
                             stage_name(upstream) + " with --force");
  return dir;
}

void log(const RunContext& ctx, const std::string& line) {
  if (ctx.log) *ctx.log << line << std::endl;
}

struct WorldData {
  data::Dataset train, test;
};

WorldData load_world(const RunContext& ctx, Stage requester, StageWriter& w) {
  const fs::path dir = require(ctx, Stage::gen_world, "the synthetic world", requester);
  w.input(dir / "train.jsonl");
  w.input(dir / "test.jsonl");
  return {data::load_dataset(dir / "train.jsonl"), data::load_dataset(dir / "test.jsonl")};
}

const std::vector<data::Episode>& cf_source(const ExperimentConfig& c, const WorldData& world,
                                            std::vector<data::Episode>& storage) {
  switch (c.counterfactual.source) {
    case CfSource::train: return world.train.episodes;
    case CfSource::test: return world.test.episodes;
    case CfSource::all:
      storage = world.train.episodes;
      storage.insert(storage.end(), world.test.episodes.begin(), world.test.episodes.end());
      return storage;
  }
  return world.test.episodes;
}

dppr::DpprModel load_dppr(const RunContext& ctx, Stage requester, StageWriter& w) {
  const fs::path dir = require(ctx, Stage::train_dppr, "a trained DPPR model", requester);
  w.input(dir / "model.params");
  return dppr::DpprModel::load(dir / "model.params");
}

reward::RewardModel load_reward(const RunContext& ctx, Stage requester, StageWriter& w) {
  const fs::path dir = require(ctx, Stage::train_reward, "a trained reward model", requester);
  w.input(dir / "model.params");
  return reward::RewardModel::load(dir / "model.params");
}

std::vector<cf::CfDatabase> load_databases(const RunContext& ctx, Stage requester, StageWriter& w) {
  const fs::path dir = require(ctx, Stage::gen_cf, "counterfactual databases", requester);
  std::ifstream in(dir / "manifest.json");
  const json m = json::parse(in);
  std::vector<cf::CfDatabase> out;
  for (const auto& [file, sum] : m.at("outputs").items()) {
    if (file.rfind("db_", 0) != 0) continue;
    w.input(dir / file);
    data::Dataset d = data::load_dataset(dir / file);
    cf::CfDatabase db;
    db.index = d.database_index.value_or(out.size());
    db.strategy = d.strategy.value_or(0);
    db.episodes = std::move(d.episodes);
    out.push_back(std::move(db));
  }
  if (out.empty()) throw MissingUpstream(stage_name(requester) + " requires counterfactual databases");
  return out;
}

void gen_world(const RunContext& ctx) {
  const auto& c = ctx.config;
  StageWriter w(ctx, Stage::gen_world);
  const auto scm = world::GroundTruthScm::from_config(c.world);
  auto generated = world::generate_episodes(c.world, c.data.episodes, derive_seed(c.seed, "episodes"));
  auto filtered = data::filter_by_outcome(world::episodes_only(generated), c.data.max_outcome);
  if (filtered.all_removed) throw std::runtime_error("every generated episode exceeds data.max_outcome");
  const auto [train_idx, test_idx] =
      data::split_indices(filtered.kept.size(), 1.0 - c.data.test_fraction, derive_seed(c.seed, "split"));
  data::Dataset train{c.world.d, c.world.T, {}, {}, {}}, test{c.world.d, c.world.T, {}, {}, {}};
  for (auto i : train_idx) train.episodes.push_back(filtered.kept[i]);
  for (auto i : test_idx) test.episodes.push_back(filtered.kept[i]);
  data::save_dataset(train, w.path("train.jsonl"));
  data::save_dataset(test, w.path("test.jsonl"));
  w.write_text("scm.json", world::scm_to_json(scm) + "\n");
  log(ctx, "gen-world: " + std::to_string(train.episodes.size()) + " train / " +
               std::to_string(test.episodes.size()) + " test episodes");
  w.finish({{"train", train.episodes.size()}, {"test", test.episodes.size()}, {"removed", filtered.removed}});
}

void train_dppr_stage(const RunContext& ctx) {
  const auto& c = ctx.config;
  StageWriter w(ctx, Stage::train_dppr);
  const WorldData world = load_world(ctx, Stage::train_dppr, w);
  auto trained = dppr::train_dppr(data::window_turns(world.train.episodes, c.dppr.model.window), c.dppr.model);
  trained.model.save(w.path("model.params"));

  std::ostringstream loss;
  loss << "epoch\tloss\n";
  for (std::size_t e = 0; e < trained.history.epoch_loss.size(); ++e)
    loss << e << "\t" << num(trained.history.epoch_loss[e]) << "\n";
  w.write_text("losses.tsv", loss.str());

  std::vector<std::pair<std::size_t, dppr::RegressionMetrics>> cv_rows;
  for (std::size_t win : c.dppr.report_windows) {
    dppr::DpprConfig mc = c.dppr.model;
    mc.window = win;
    mc.seed = derive_seed(c.dppr.model.seed, win);
    cv_rows.emplace_back(win, dppr::cross_validate(data::window_turns(world.train.episodes, win), mc,
                                                   c.dppr.folds).mean);
    log(ctx, "train-dppr: " + dppr::window_label(win) + " cv mse " + num(cv_rows.back().second.mse));
  }
  std::ostringstream table;
  dppr::write_regression_table(table, cv_rows);
  w.write_text("regression.tsv", table.str());

  const auto held = dppr::evaluate(trained.model, data::window_turns(world.test.episodes, c.dppr.model.window));
  std::ostringstream holdout;
  dppr::write_regression_table(holdout, {{c.dppr.model.window, held}});
  w.write_text("holdout.tsv", holdout.str());
  w.finish({{"holdout_mse", held.mse}, {"holdout_r2", held.r2}});
}

void train_bicogan_stage(const RunContext& ctx) {
  const auto& c = ctx.config;
  StageWriter w(ctx, Stage::train_bicogan);
  const WorldData world = load_world(ctx, Stage::train_bicogan, w);
  const auto dm = load_dppr(ctx, Stage::train_bicogan, w);
  const std::size_t win = c.dppr.model.window;
  auto trained = gan::train_bicogan(gan::make_transitions(world.train.episodes, &dm, win), c.bicogan);
  trained.model.save(w.path("model.params"));

  const auto& h = trained.history;
  std::ostringstream loss;
  loss << "step\tdiscriminator\tadversarial\tregularizer\treconstruction\n";
  for (std::size_t i = 0; i < h.discriminator.size(); ++i)
    loss << i << "\t" << num(h.discriminator[i]) << "\t" << num(h.adversarial[i]) << "\t"
         << num(h.regularizer[i]) << "\t" << num(h.reconstruction[i]) << "\n";
  w.write_text("losses.tsv", loss.str());

  const auto held = gan::make_transitions(world.test.episodes, &dm, win);
  std::size_t within = 0;
  for (const auto& t : held)
    if (trained.model.consistency_error(t) <= trained.model.consistency_tolerance()) ++within;
  const double frac = held.empty() ? 0.0 : double(within) / double(held.size());
  w.write_text("consistency.tsv", "tolerance\theld_out\twithin_fraction\n" +
                                      num(trained.model.consistency_tolerance()) + "\t" +
                                      std::to_string(held.size()) + "\t" + num(frac) + "\n");
  log(ctx, "train-bicogan: tolerance " + num(trained.model.consistency_tolerance()) + ", held-out within " + num(frac));
  w.finish({{"tolerance", trained.model.consistency_tolerance()}, {"within_fraction", frac}});
}

void train_reward_stage(const RunContext& ctx) {
  const auto& c = ctx.config;
  StageWriter w(ctx, Stage::train_reward);
  const WorldData world = load_world(ctx, Stage::train_reward, w);
  auto trained = reward::train_reward(world.train.episodes, c.reward, &world.test.episodes);
  trained.model.save(w.path("model.params"));
  std::ostringstream loss;
  loss << "epoch\ttrain\tvalidation\n";
  for (std::size_t e = 0; e < trained.history.epoch_loss.size(); ++e)
    loss << e << "\t" << num(trained.history.epoch_loss[e]) << "\t"
         << num(trained.history.validation_loss[e]) << "\n";
  w.write_text("losses.tsv", loss.str());
  const double mse = reward::reward_mse(trained.model, world.test.episodes);
  log(ctx, "train-reward: held-out mse " + num(mse));
  w.finish({{"holdout_mse", mse}});
}

void gen_cf_stage(const RunContext& ctx) {
  const auto& c = ctx.config;
  const auto& cc = c.counterfactual;
  StageWriter w(ctx, Stage::gen_cf);
  const WorldData world = load_world(ctx, Stage::gen_cf, w);
  const auto dm = load_dppr(ctx, Stage::gen_cf, w);
  const fs::path gan_dir = require(ctx, Stage::train_bicogan, "a trained BiCoGAN", Stage::gen_cf);
  w.input(gan_dir / "model.params");
  const auto gan_model = gan::BiCoGanModel::load(gan_dir / "model.params");
  const auto rm = load_reward(ctx, Stage::gen_cf, w);

  std::vector<data::Episode> storage;
  const auto& source = cf_source(c, world, storage);
  double ground_truth = 0.0, recorded = 0.0;
  for (const auto& e : source) {
    ground_truth += rm.predict(e);
    recorded += e.outcome;
  }

  cf::RolloutOptions options;
  options.noise = {cc.noise, derive_seed(c.seed, "cf.noise")};
  options.reestimate_traits = cc.reestimate_traits;
  options.window = c.dppr.model.window;
  const std::uint64_t cf_seed = derive_seed(c.seed, "counterfactual");

  std::vector<cf::CfDatabase> pool;
  std::vector<cf::ScoredDatabase> scored;
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < cc.pool_limit; ++i) {
    cf::StrategySpec spec{cc.strategy, derive_seed(cf_seed, i), cc.without_replacement};
    pool.push_back(cf::build_cf_database(gan_model, source, &dm, spec, i, options));
    scored.push_back({i, cf::score_database(pool.back(), rm)});
    if (pool.size() >= cc.databases && cf::balance_feasible(scored, ground_truth, cc.databases)) {
      keep = cf::balance_select(scored, ground_truth, cc.databases);
      break;
    }
  }
  if (keep.empty()) {
    std::size_t above = 0, below = 0;
    for (const auto& s : scored) {
      above += s.reward > ground_truth;
      below += s.reward < ground_truth;
    }
    throw std::runtime_error("gen-cf: no balanced selection of " + std::to_string(cc.databases) +
                             " databases within pool_limit " + std::to_string(cc.pool_limit) + " (" +
                             std::to_string(above) + " above, " + std::to_string(below) +
                             " below the ground truth)");
  }

  std::ostringstream table;
  table << "database\tstrategy\tpredicted_cumulative\talignment_error\tkept\n";
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const bool kept = std::find(keep.begin(), keep.end(), i) != keep.end();
    table << i << "\t" << cc.strategy << "\t" << num(scored[i].reward) << "\t"
          << num(cf::alignment_error(pool[i], source)) << "\t" << (kept ? 1 : 0) << "\n";
  }
  w.write_text("databases.tsv", table.str());

  // One extra database per strategy for the strategy comparison.
  std::ostringstream align;
  align << "strategy\talignment_error\n";
  for (int s = 1; s <= 3; ++s) {
    try {
      cf::StrategySpec spec{s, derive_seed(cf_seed, "strategy" + std::to_string(s)), cc.without_replacement};
      const auto db = cf::build_cf_database(gan_model, source, &dm, spec, 0, options);
      align << s << "\t" << num(cf::alignment_error(db, source)) << "\n";
    } catch (const std::invalid_argument&) {
      align << s << "\tNA\n";
    }
  }
  w.write_text("alignment.tsv", align.str());

  for (std::size_t k : keep) {
    char name[32];
    std::snprintf(name, sizeof name, "db_%04zu.jsonl", k);
    data::Dataset d{c.world.d, c.world.T, pool[k].episodes, k, cc.strategy};
    data::save_dataset(d, w.path(name));
  }
  log(ctx, "gen-cf: kept " + std::to_string(keep.size()) + " of " + std::to_string(pool.size()) +
               " databases around ground truth " + num(ground_truth));
  w.finish({{"ground_truth_predicted", ground_truth},
            {"ground_truth_recorded", recorded},
            {"generated", pool.size()},
            {"kept", keep}});
}

std::vector<const cf::CfDatabase*> pointers(const std::vector<cf::CfDatabase>& dbs) {
  std::vector<const cf::CfDatabase*> out;
  for (const auto& d : dbs) out.push_back(&d);
  return out;
}

rl::D3qnConfig case_config(const ExperimentConfig& c, int which) {
  rl::D3qnConfig q = c.policy.model;
  q.scheme = which == 1 ? rl::UpdateScheme::per_dialogue : rl::UpdateScheme::per_step;
  q.seed = derive_seed(c.policy.model.seed, std::uint64_t(which));
  return q;
}

void train_policy_stage(const RunContext& ctx) {
  const auto& c = ctx.config;
  StageWriter w(ctx, Stage::train_policy);
  const auto dbs = load_databases(ctx, Stage::train_policy, w);
  const auto rm = load_reward(ctx, Stage::train_policy, w);
  rl::CounterfactualEnvironment env(pointers(dbs), rm);
  json summary = json::object();
  for (int which : c.policy.cases) {
    const auto trained = rl::train_d3qn(env, case_config(c, which));
    const std::string tag = "case" + std::to_string(which);
    trained.main.save(w.path(tag + ".params"));
    std::ostringstream h;
    h << "epoch\tloss\treturn\n";
    for (std::size_t e = 0; e < trained.history.epoch_loss.size(); ++e)
      h << e << "\t" << num(trained.history.epoch_loss[e]) << "\t" << num(trained.history.epoch_return[e]) << "\n";
    w.write_text(tag + "_history.tsv", h.str());
    summary[tag] = {{"updates", trained.updates}};
    log(ctx, "train-policy: " + tag + " " + std::to_string(trained.updates) + " updates");
  }
  w.finish(summary);
}

void evaluate_stage(const RunContext& ctx) {
  const auto& c = ctx.config;
  StageWriter w(ctx, Stage::evaluate);
  const fs::path policy_dir = require(ctx, Stage::train_policy, "trained policies", Stage::evaluate);
  const auto dbs = load_databases(ctx, Stage::evaluate, w);
  const auto rm = load_reward(ctx, Stage::evaluate, w);
  const WorldData world = load_world(ctx, Stage::evaluate, w);
  std::vector<data::Episode> storage;
  const auto& source = cf_source(c, world, storage);
  if (source.size() != dbs.front().episodes.size())
    throw std::runtime_error("evaluate: counterfactual databases do not match the configured source split");

  rl::CounterfactualEnvironment env(pointers(dbs), rm);
  std::vector<std::vector<double>> predicted_cols;
  std::vector<std::string> headers{"dialogue", "behavior_predicted", "behavior_recorded"};
  std::vector<double> behavior_pred, behavior_rec;
  for (const auto& e : source) {
    behavior_pred.push_back(rm.predict(e));
    behavior_rec.push_back(e.outcome);
  }
  std::ostringstream q_stats;
  q_stats << "case\tdialogue\tmax_q\tmean_q\treward\n";
  json summary = {{"behavior_predicted", reward::cumulative_sum(behavior_pred).back()},
                  {"behavior_recorded", reward::cumulative_sum(behavior_rec).back()}};
  for (int which : c.policy.cases) {
    const std::string tag = "case" + std::to_string(which);
    w.input(policy_dir / (tag + ".params"));
    const auto net = rl::QNetwork::load(policy_dir / (tag + ".params"));
    const auto ev = rl::evaluate_policy(net, env);
    for (const auto& d : ev.dialogues)
      q_stats << which << "\t" << d.start << "\t" << num(d.max_q) << "\t" << num(d.mean_q) << "\t"
              << num(d.reward) << "\n";
    predicted_cols.push_back(reward::cumulative_sum(ev.rewards()));
    headers.push_back("learned_" + tag);
    summary["learned_" + tag] = predicted_cols.back().back();
    log(ctx, "evaluate: " + tag + " cumulative " + num(predicted_cols.back().back()) + " vs behavior " +
                 num(summary["behavior_predicted"].get<double>()));
  }
  const auto bp = reward::cumulative_sum(behavior_pred), br = reward::cumulative_sum(behavior_rec);
  std::ostringstream cum;
  for (std::size_t i = 0; i < headers.size(); ++i) cum << (i ? "\t" : "") << headers[i];
  cum << "\n";
  for (std::size_t j = 0; j < source.size(); ++j) {
    cum << j << "\t" << num(bp[j]) << "\t" << num(br[j]);
    for (const auto& col : predicted_cols) cum << "\t" << num(col[j]);
    cum << "\n";
  }
  w.write_text("cumulative.tsv", cum.str());
  w.write_text("q_stats.tsv", q_stats.str());

  // Turn embeddings (state, action) of one-turn windows against trait labels.
  std::vector<data::Vector> x, y;
  for (const auto& e : world.train.episodes) {
    if (!e.traits) continue;
    for (std::size_t i = 0; i < e.turns(); ++i) {
      data::Vector v = e.states[i];
      v.insert(v.end(), e.actions[i].begin(), e.actions[i].end());
      x.push_back(std::move(v));
      y.emplace_back(e.traits->begin(), e.traits->end());
    }
  }
  std::ostringstream cca;
  cca << "component\tcorrelation\n";
  try {
    const auto r = metrics::cca_top_components(metrics::rows_to_matrix(x), metrics::rows_to_matrix(y), 2);
    for (std::size_t k = 0; k < r.correlations.size(); ++k) cca << k + 1 << "\t" << num(r.correlations[k]) << "\n";
    summary["cca"] = r.correlations;
  } catch (const std::invalid_argument& e) {
    log(ctx, std::string("evaluate: CCA skipped: ") + e.what());
  }
  w.write_text("cca.tsv", cca.str());
  w.finish(summary);
}

void report_stage(const RunContext& ctx) {
  const fs::path out = ctx.root / stage_dir(Stage::report);
  if (fs::exists(out / "manifest.json") && !ctx.force)
    throw std::runtime_error("report/ already exists; use --force to replace it");
  fs::remove_all(out);
  const auto summary = metrics::assemble_report(ctx.root, out);
  log(ctx, "report: " + std::to_string(summary.present.size()) + " sections present, " +
               std::to_string(summary.absent.size()) + " absent");
}

}  // namespace

void run_stage(Stage stage, const RunContext& ctx) {
  fs::create_directories(ctx.root);
  switch (stage) {
    case Stage::gen_world: return gen_world(ctx);
    case Stage::train_dppr: return train_dppr_stage(ctx);
    case Stage::train_bicogan: return train_bicogan_stage(ctx);
    case Stage::train_reward: return train_reward_stage(ctx);
    case Stage::gen_cf: return gen_cf_stage(ctx);
    case Stage::train_policy: return train_policy_stage(ctx);
    case Stage::evaluate: return evaluate_stage(ctx);
    case Stage::report: return report_stage(ctx);
  }
}

void run_all(const RunContext& ctx) {
  for (Stage s : pipeline_order()) run_stage(s, ctx);
}

}  // namespace cfd::pipeline
