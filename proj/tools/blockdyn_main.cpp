#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "blockdyn/errors.hpp"
#include "blockdyn/pipeline.hpp"

namespace bp = blockdyn::pipeline;
using bp::json;

namespace {

// Every flag a subcommand may override. One shared instance is safe because
// exactly one subcommand parses.
struct Opts {
  std::string config_path;
  std::string output;
  std::string run_id;
  std::vector<std::string> inputs;
  std::uint64_t seed = 0;
  int workers = 1;

  int window_length = 30;
  int step = 1;
  double kappa = 0.25;
  std::string tie_policy;

  std::string mode;
  std::string method;
  double gamma = 1.0;
  double coupling = 1.0;
  int k = 0;
  double consensus_fraction = 0.01;

  int states = 0;
  int s_max = 6;
  bool per_subject = false;
  std::vector<double> kappa_grid;

  std::string panel;
  std::vector<double> x;
  int replications = 10;

  std::string gen_kind;
  int gen_n = 120;
  int gen_k = 8;
  int gen_r = 10;
  int gen_t = 1;
  int gen_s = 1;
  double gen_alpha = 0.8;
  double gen_lambda = 0.9;
  std::vector<double> gen_lambdas;
  double gen_eps = 0.1;
  double gen_sigma = 0.1;
  int gen_repeats = 2;
};

void add_options(CLI::App* cmd, Opts& o) {
  cmd->add_option("-c,--config", o.config_path, "JSON run configuration; flags override it");
  cmd->add_option("-o,--output", o.output, "run output directory");
  cmd->add_option("--run-id", o.run_id, "run identifier (defaults to the output directory name)");
  cmd->add_option("--inputs", o.inputs, "time-series CSV per subject");
  cmd->add_option("--seed", o.seed, "master seed; stage seeds derive from it");
  cmd->add_option("--workers", o.workers, "worker threads for per-subject work");

  cmd->add_option("--window-length", o.window_length, "sliding-window length in scans");
  cmd->add_option("--step", o.step, "sliding-window step in scans");
  cmd->add_option("--kappa", o.kappa, "proportional threshold density in (0,1)");
  cmd->add_option("--tie-policy", o.tie_policy, "threshold tie handling: lexicographic | strict");

  cmd->add_option("--mode", o.mode, "community detection mode: multi | single");
  cmd->add_option("--method", o.method, "community detection method: louvain | spectral");
  cmd->add_option("--gamma", o.gamma, "within-layer resolution");
  cmd->add_option("--coupling", o.coupling, "interlayer coupling weight");
  cmd->add_option("--k", o.k, "community count for the spectral method");
  cmd->add_option("--consensus-fraction", o.consensus_fraction,
                  "top pair fraction kept by the association consensus");

  cmd->add_option("--states", o.states, "number of connectivity states; 0 selects automatically");
  cmd->add_option("--s-max", o.s_max, "largest state count scored by selection");
  cmd->add_flag("--per-subject", o.per_subject, "fit one state model per subject");
  cmd->add_option("--kappa-grid", o.kappa_grid, "ascending threshold grid for select-threshold");

  cmd->add_option("--panel", o.panel,
                  "accuracy sweep: community_nodes | community_subjects | community_k | "
                  "community_sparsity | states_k");
  cmd->add_option("--x", o.x, "panel x grid");
  cmd->add_option("--replications", o.replications, "panel replications per x value");

  cmd->add_option("--gen-kind", o.gen_kind, "generator: planted_static | planted_dynamic");
  cmd->add_option("--gen-n", o.gen_n, "generator nodes");
  cmd->add_option("--gen-k", o.gen_k, "generator communities");
  cmd->add_option("--gen-r", o.gen_r, "generator subjects");
  cmd->add_option("--gen-t", o.gen_t, "generator layers per subject");
  cmd->add_option("--gen-s", o.gen_s, "generator states");
  cmd->add_option("--gen-alpha", o.gen_alpha, "generator within-community density");
  cmd->add_option("--gen-lambda", o.gen_lambda, "generator contrast");
  cmd->add_option("--gen-lambdas", o.gen_lambdas, "generator per-state contrasts");
  cmd->add_option("--gen-eps", o.gen_eps, "generator per-subject diagonal jitter bound");
  cmd->add_option("--gen-sigma", o.gen_sigma, "generator logit noise scale");
  cmd->add_option("--gen-repeats", o.gen_repeats, "generator schedule passes over the states");
}

json load_base_config(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) {
    throw blockdyn::Error(blockdyn::errc::config_error, path + ": cannot read configuration file");
  }
  try {
    json doc;
    in >> doc;
    return doc;
  } catch (const json::parse_error& e) {
    throw blockdyn::Error(blockdyn::errc::config_error, path + ": " + e.what());
  }
}

// Flags win over the config file: only options the user actually passed are
// written into the document.
json overlay_flags(const CLI::App& cmd, const Opts& o) {
  json doc = load_base_config(o.config_path);
  if (!doc.is_object()) {
    throw blockdyn::Error(blockdyn::errc::config_error, "configuration must be a JSON object");
  }
  const auto set = [&](const char* flag, const char* key, const json& value) {
    if (cmd.count(flag) > 0) doc[key] = value;
  };
  set("--output", "output", o.output);
  set("--run-id", "run_id", o.run_id);
  set("--inputs", "inputs", o.inputs);
  set("--seed", "seed", o.seed);
  set("--workers", "workers", o.workers);
  set("--window-length", "window_length", o.window_length);
  set("--step", "step", o.step);
  set("--kappa", "kappa", o.kappa);
  set("--tie-policy", "tie_policy", o.tie_policy);
  set("--mode", "mode", o.mode);
  set("--method", "method", o.method);
  set("--gamma", "gamma", o.gamma);
  set("--coupling", "coupling", o.coupling);
  set("--k", "k", o.k);
  set("--consensus-fraction", "consensus_fraction", o.consensus_fraction);
  set("--states", "states", o.states);
  set("--s-max", "s_max", o.s_max);
  set("--per-subject", "per_subject", o.per_subject);
  set("--kappa-grid", "kappa_grid", o.kappa_grid);

  if (cmd.count("--panel") > 0) {
    doc["panel"]["name"] = o.panel;
  }
  if (cmd.count("--x") > 0) doc["panel"]["x"] = o.x;
  if (cmd.count("--replications") > 0) doc["panel"]["replications"] = o.replications;

  const auto set_gen = [&](const char* flag, const char* key, const json& value) {
    if (cmd.count(flag) > 0) doc["generator"][key] = value;
  };
  set_gen("--gen-kind", "kind", o.gen_kind);
  set_gen("--gen-n", "n", o.gen_n);
  set_gen("--gen-k", "k", o.gen_k);
  set_gen("--gen-r", "r", o.gen_r);
  set_gen("--gen-t", "t", o.gen_t);
  set_gen("--gen-s", "s", o.gen_s);
  set_gen("--gen-alpha", "alpha", o.gen_alpha);
  set_gen("--gen-lambda", "lambda", o.gen_lambda);
  set_gen("--gen-lambdas", "lambdas", o.gen_lambdas);
  set_gen("--gen-eps", "eps_range", o.gen_eps);
  set_gen("--gen-sigma", "sigma", o.gen_sigma);
  set_gen("--gen-repeats", "repeats", o.gen_repeats);
  return doc;
}

void print_result(const bp::StageResult& result) {
  std::cout << result.manifest.stage << ": wrote " << result.manifest_path.string() << '\n';
  const json& data = result.manifest.data;
  for (const char* key : {"q", "k", "is_consensus", "kappa_star", "by_silhouette",
                          "by_davies_bouldin", "selected_s"}) {
    if (data.contains(key)) std::cout << "  " << key << " = " << data[key].dump() << '\n';
  }
  if (data.contains("fit") && data["fit"].is_object()) {
    const json& fit = data["fit"];
    for (const char* key : {"S", "K", "converged", "log_likelihood"}) {
      if (fit.contains(key)) std::cout << "  " << key << " = " << fit[key].dump() << '\n';
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "blockdyn: shared community structure and recurring connectivity states in "
      "multilayer binary networks"};
  app.require_subcommand(1);
  Opts opts;

  struct Stage {
    const char* name;
    const char* help;
    bp::StageResult (*run)(const bp::RunConfig&);
  };
  const std::vector<Stage> stages = {
      {"build", "window time series into binary layers and averaged static networks",
       &bp::run_build},
      {"simulate", "generate a planted run directory from a generator spec", &bp::run_simulate},
      {"detect", "find the shared community structure of a built run", &bp::run_detect},
      {"states", "estimate block connectivity over time and fit recurring states", &bp::run_states},
      {"evaluate", "score estimates against planted truth, or sweep an accuracy panel",
       &bp::run_evaluate},
      {"select-threshold", "scan proportional thresholds for cost efficiency",
       &bp::run_select_threshold},
      {"select-states", "score candidate state counts on the observation rows",
       &bp::run_select_states},
  };
  for (const Stage& stage : stages) {
    CLI::App* cmd = app.add_subcommand(stage.name, stage.help);
    add_options(cmd, opts);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    for (const Stage& stage : stages) {
      const CLI::App* cmd = app.get_subcommand(stage.name);
      if (cmd->parsed()) {
        const bp::RunConfig config = bp::parse_config(overlay_flags(*cmd, opts));
        print_result(stage.run(config));
        return 0;
      }
    }
    std::cerr << "error: no subcommand given\n";
    return 2;
  } catch (const blockdyn::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return (e.code() == blockdyn::errc::config_error || e.code() == blockdyn::errc::io_error) ? 2
                                                                                              : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
