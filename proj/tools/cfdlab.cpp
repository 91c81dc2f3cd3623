#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cfd/pipeline/config.hpp"
#include "cfd/pipeline/stages.hpp"

namespace {

namespace pl = cfd::pipeline;

constexpr int kOk = 0;
constexpr int kValidation = 1;
constexpr int kRuntime = 2;

struct Options {
  std::string config;
  std::string out;
  std::vector<std::string> overrides;
  long long seed = -1;
  bool force = false;
  bool print_config = false;
  bool quiet = false;
};

pl::ExperimentConfig resolve(const Options& o) {
  pl::json tree = pl::json::object();
  if (!o.config.empty()) {
    std::ifstream in(o.config);
    if (!in) throw pl::ConfigError(o.config, "cannot open config file");
    try {
      tree = pl::json::parse(in);
    } catch (const pl::json::parse_error& e) {
      throw pl::ConfigError(o.config, std::string("parse error: ") + e.what());
    }
  }
  if (o.seed >= 0) tree["seed"] = o.seed;
  for (const auto& a : o.overrides) pl::apply_override(tree, a);
  return pl::config_from_json(tree);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Counterfactual dialogue policy pipeline"};
  app.require_subcommand(1);
  Options o;
  std::string out_default = "run";

  std::vector<std::string> names;
  for (auto s : pl::pipeline_order()) names.push_back(pl::stage_name(s));
  names.push_back("all");
  for (const auto& name : names) {
    auto* sub = app.add_subcommand(name, name == "all" ? "run every stage in order" : "run the " + name + " stage");
    sub->add_option("-c,--config", o.config, "JSON config file (defaults apply to missing keys)");
    sub->add_option("-s,--seed", o.seed, "master seed (overrides the config)");
    sub->add_option("-o,--out", o.out, "run directory")->default_str(out_default);
    sub->add_option("--stage-override", o.overrides, "section.key=value, repeatable");
    sub->add_flag("-f,--force", o.force, "replace completed stage directories");
    sub->add_flag("--print-config", o.print_config, "print the resolved config and exit");
    sub->add_flag("-q,--quiet", o.quiet, "no progress lines");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kValidation;
  }
  const std::string which = app.get_subcommands().front()->get_name();

  pl::RunContext ctx;
  try {
    ctx.config = resolve(o);
  } catch (const pl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kValidation;
  }
  if (o.print_config) {
    std::cout << pl::config_to_json(ctx.config).dump(2) << "\n";
    return kOk;
  }
  ctx.root = o.out.empty() ? out_default : o.out;
  ctx.force = o.force;
  ctx.log = o.quiet ? nullptr : &std::cerr;

  try {
    if (which == "all") pl::run_all(ctx);
    else pl::run_stage(pl::stage_from_name(which), ctx);
  } catch (const pl::MissingUpstream& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidation;
  } catch (const pl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return kOk;
}
