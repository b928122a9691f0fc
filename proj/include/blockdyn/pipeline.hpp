#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "blockdyn/io.hpp"
#include "blockdyn/types.hpp"

namespace blockdyn::pipeline {

using io::json;
namespace fs = std::filesystem;

// Synthetic data request. `kind` selects the family; unused fields are
// ignored by the other family.
struct GeneratorSpec {
  std::string kind;                // "planted_static" | "planted_dynamic"
  int n = 120;
  int k = 8;
  int r = 10;
  int t = 1;                       // layers per subject (dynamic only)
  int s = 1;                       // number of planted states (dynamic only)
  double alpha = 0.8;
  double lambda = 0.9;             // static contrast
  std::vector<double> lambdas;     // per-state contrasts (dynamic)
  double eps_range = 0.1;          // static per-subject diagonal jitter bound
  double sigma = 0.1;              // dynamic logit-space noise scale
  int repeats = 2;                 // schedule passes over the states
};

// One figure-panel sweep: replicate the generator across the x grid and
// summarize method accuracy per x value.
struct PanelSpec {
  std::string name;                // community_{nodes,subjects,k,sparsity} | states_k
  std::vector<double> x;
  int replications = 10;
};

struct RunConfig {
  std::vector<std::string> inputs;      // time-series CSVs, one per subject
  bool has_generator = false;
  GeneratorSpec generator;

  int window_length = 30;
  int step = 1;
  double kappa = 0.25;
  std::string tie_policy = "lexicographic";  // or "strict"

  std::string mode = "multi";           // "multi" | "single"
  std::string method = "louvain";       // "louvain" | "spectral"
  double gamma = 1.0;
  double coupling = 1.0;
  int k_override = 0;                   // community count for spectral; 0 = auto
  double consensus_fraction = 0.01;     // top pair fraction for the association step

  int num_states = 0;                   // 0 = select automatically
  int s_max = 6;
  bool per_subject = false;             // fit one state model per subject

  std::vector<double> kappa_grid;       // select-threshold grid; empty = 0.05..0.95 by 0.05

  bool has_panel = false;
  PanelSpec panel;

  std::uint64_t seed = 0;
  std::map<std::string, std::uint64_t> seeds;  // explicit per-stage overrides

  std::string output_dir;
  std::string run_id;
  int workers = 1;
};

// Stage seed: the explicit per-stage entry when present, otherwise derived
// from the master seed and the stage's fixed stream index.
std::uint64_t stage_seed(const RunConfig& config, const std::string& stage);
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);

// Parses the JSON document into a validated RunConfig.
RunConfig parse_config(const json& doc);
RunConfig load_config_file(const fs::path& path);
json config_snapshot(const RunConfig& config);

// Output directory with the environment fallback applied; errors when
// neither the config nor BLOCKDYN_OUTPUT_ROOT names one.
fs::path resolve_output_dir(const RunConfig& config);

struct StageResult {
  fs::path output_dir;
  fs::path manifest_path;
  io::Manifest manifest;
};

StageResult run_build(const RunConfig& config);
StageResult run_simulate(const RunConfig& config);
StageResult run_detect(const RunConfig& config);
StageResult run_states(const RunConfig& config);
StageResult run_evaluate(const RunConfig& config);
StageResult run_select_threshold(const RunConfig& config);
StageResult run_select_states(const RunConfig& config);

// Runs fn(i) for i in [0, count) on `workers` threads; results must be
// written into per-index slots so ordering stays deterministic.
void parallel_for(int count, int workers, const std::function<void(int)>& fn);

}  // namespace blockdyn::pipeline
