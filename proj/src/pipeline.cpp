#include "blockdyn/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <set>
#include <thread>

#include "blockdyn/blockmodel.hpp"
#include "blockdyn/community.hpp"
#include "blockdyn/dynstate.hpp"
#include "blockdyn/errors.hpp"
#include "blockdyn/metrics.hpp"
#include "blockdyn/netbuild.hpp"
#include "blockdyn/synth.hpp"

namespace blockdyn::pipeline {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

// Fixed stream index per stage so derived seeds never collide.
const std::map<std::string, std::uint64_t> kStageStreams = {
    {"build", 1},           {"detect", 2},       {"states", 3},       {"simulate", 4},
    {"evaluate", 5},        {"select_threshold", 6}, {"select_states", 7},
};

std::string pad_int(const char* prefix, int value, int width) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s%0*d", prefix, width, value);
  return buf;
}

std::string subject_tag(int r) { return pad_int("sub", r + 1, 3); }
std::string layer_rel(int r, int t) {
  return "layers/" + subject_tag(r) + pad_int("_t", t + 1, 4) + ".csv";
}
std::string averaged_rel(int r) { return "averaged/" + subject_tag(r) + ".csv"; }
std::string membership_rel(int r) { return "memberships/" + subject_tag(r) + ".csv"; }
std::string theta_rel(int r, int t) {
  return "theta/" + subject_tag(r) + pad_int("_t", t + 1, 4) + ".csv";
}

netbuild::TiePolicy tie_policy(const RunConfig& config) {
  return config.tie_policy == "strict" ? netbuild::TiePolicy::strict
                                       : netbuild::TiePolicy::lexicographic;
}

[[noreturn]] void config_fail(const std::string& msg) { throw Error(errc::config_error, msg); }

json require_field(const json& data, const char* key, const std::string& where) {
  if (!data.contains(key)) {
    config_fail(where + " does not record '" + std::string(key) + "'");
  }
  return data.at(key);
}

// The resumability contract: a stage may only read files its predecessor's
// manifest lists, and they must be unchanged since.
void consume_file(const io::Manifest& prior, const fs::path& root, const std::string& rel) {
  const auto it = prior.files.find(rel);
  if (it == prior.files.end()) {
    config_fail(rel + " is not listed in the " + prior.stage + " manifest");
  }
  const fs::path full = root / rel;
  if (!fs::exists(full)) {
    config_fail(full.string() + " is missing");
  }
  const std::string expected = it->second.at("fnv1a64").get<std::string>();
  if (io::file_hash(full) != expected) {
    config_fail(full.string() + " changed since the " + prior.stage + " stage recorded it");
  }
}

io::Manifest require_manifest(const fs::path& root, const std::string& file,
                              const std::vector<std::string>& accepted_stages,
                              const std::string& needed_by) {
  const fs::path path = root / file;
  if (!fs::exists(path)) {
    config_fail(path.string() + " not found; run the " + accepted_stages.front() +
                " stage before " + needed_by);
  }
  io::Manifest man = io::read_manifest(path);
  if (std::find(accepted_stages.begin(), accepted_stages.end(), man.stage) ==
      accepted_stages.end()) {
    config_fail(path.string() + " was written by stage '" + man.stage + "'");
  }
  return man;
}

io::Manifest start_manifest(const RunConfig& config, const std::string& stage) {
  io::Manifest man;
  man.stage = stage;
  man.config = config_snapshot(config);
  json seeds = json::object();
  for (const auto& [name, stream] : kStageStreams) {
    seeds[name] = stage_seed(config, name);
  }
  man.seeds = std::move(seeds);
  return man;
}

void finish_stage(io::Manifest& man, const fs::path& out_dir, const std::string& manifest_name,
                  Clock::time_point start) {
  man.timings_ms[man.stage] = elapsed_ms(start);
  io::write_manifest(out_dir / manifest_name, man);
}

double mean_of(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  double sum = 0.0;
  for (const double x : xs) sum += x;
  return sum / static_cast<double>(xs.size());
}

double sd_of(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean_of(xs);
  double sum = 0.0;
  for (const double x : xs) sum += (x - m) * (x - m);
  return std::sqrt(sum / static_cast<double>(xs.size() - 1));
}

Matrix layer_to_double(const BinaryMatrix& w) { return w.cast<double>(); }

std::vector<std::string> string_list(const json& arr) {
  std::vector<std::string> out;
  for (const auto& item : arr) out.push_back(item.get<std::string>());
  return out;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t stage_seed(const RunConfig& config, const std::string& stage) {
  const auto explicit_it = config.seeds.find(stage);
  if (explicit_it != config.seeds.end()) return explicit_it->second;
  const auto stream_it = kStageStreams.find(stage);
  if (stream_it == kStageStreams.end()) {
    throw Error(errc::invalid_argument, "unknown stage '" + stage + "'");
  }
  return derive_seed(config.seed, stream_it->second);
}

void parallel_for(int count, int workers, const std::function<void(int)>& fn) {
  if (count <= 0) return;
  workers = std::max(1, std::min(workers, count));
  if (workers == 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto body = [&]() {
    while (true) {
      const int i = next.fetch_add(1);
      if (i >= count) break;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) pool.emplace_back(body);
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

RunConfig parse_config(const json& doc) {
  if (!doc.is_object()) config_fail("configuration must be a JSON object");
  RunConfig config;
  try {
    if (doc.contains("inputs")) config.inputs = string_list(doc.at("inputs"));
    if (doc.contains("generator") && !doc.at("generator").is_null()) {
      config.has_generator = true;
      const json& g = doc.at("generator");
      GeneratorSpec& spec = config.generator;
      spec.kind = g.value("kind", "");
      spec.n = g.value("n", spec.n);
      spec.k = g.value("k", spec.k);
      spec.r = g.value("r", spec.r);
      spec.t = g.value("t", spec.t);
      spec.s = g.value("s", spec.s);
      spec.alpha = g.value("alpha", spec.alpha);
      spec.lambda = g.value("lambda", spec.lambda);
      if (g.contains("lambdas")) {
        spec.lambdas = g.at("lambdas").get<std::vector<double>>();
      }
      spec.eps_range = g.value("eps_range", spec.eps_range);
      spec.sigma = g.value("sigma", spec.sigma);
      spec.repeats = g.value("repeats", spec.repeats);
    }
    config.window_length = doc.value("window_length", config.window_length);
    config.step = doc.value("step", config.step);
    config.kappa = doc.value("kappa", config.kappa);
    config.tie_policy = doc.value("tie_policy", config.tie_policy);
    config.mode = doc.value("mode", config.mode);
    config.method = doc.value("method", config.method);
    config.gamma = doc.value("gamma", config.gamma);
    config.coupling = doc.value("coupling", config.coupling);
    config.k_override = doc.value("k", config.k_override);
    config.consensus_fraction = doc.value("consensus_fraction", config.consensus_fraction);
    config.num_states = doc.value("states", config.num_states);
    config.s_max = doc.value("s_max", config.s_max);
    config.per_subject = doc.value("per_subject", config.per_subject);
    if (doc.contains("kappa_grid")) {
      config.kappa_grid = doc.at("kappa_grid").get<std::vector<double>>();
    }
    if (doc.contains("panel") && !doc.at("panel").is_null()) {
      config.has_panel = true;
      const json& p = doc.at("panel");
      config.panel.name = p.value("name", "");
      if (p.contains("x")) config.panel.x = p.at("x").get<std::vector<double>>();
      config.panel.replications = p.value("replications", config.panel.replications);
    }
    config.seed = doc.value("seed", config.seed);
    if (doc.contains("seeds")) {
      for (const auto& [key, value] : doc.at("seeds").items()) {
        config.seeds[key] = value.get<std::uint64_t>();
      }
    }
    config.output_dir = doc.value("output", config.output_dir);
    config.run_id = doc.value("run_id", config.run_id);
    config.workers = doc.value("workers", config.workers);
  } catch (const json::exception& e) {
    config_fail(std::string("malformed configuration: ") + e.what());
  }

  if (!config.inputs.empty() && config.has_generator) {
    config_fail("give either input files or a generator spec, not both");
  }
  if (!(config.kappa > 0.0 && config.kappa < 1.0)) {
    config_fail("kappa must lie strictly between 0 and 1");
  }
  if (config.window_length < 3) config_fail("window_length must be at least 3");
  if (config.step < 1) config_fail("step must be at least 1");
  if (config.mode != "single" && config.mode != "multi") {
    config_fail("mode must be 'single' or 'multi'");
  }
  if (config.method != "louvain" && config.method != "spectral") {
    config_fail("method must be 'louvain' or 'spectral'");
  }
  if (config.method == "spectral" && config.k_override < 1) {
    config_fail("the spectral method needs an explicit community count; set k");
  }
  if (!(config.gamma > 0.0)) config_fail("gamma must be positive");
  if (config.coupling < 0.0) config_fail("coupling must be non-negative");
  if (!(config.consensus_fraction > 0.0 && config.consensus_fraction <= 1.0)) {
    config_fail("consensus_fraction must lie in (0, 1]");
  }
  if (config.num_states < 0) config_fail("states must be non-negative (0 = select)");
  if (config.s_max < 2) config_fail("s_max must be at least 2");
  if (config.workers < 1) config_fail("workers must be at least 1");
  if (config.tie_policy != "lexicographic" && config.tie_policy != "strict") {
    config_fail("tie_policy must be 'lexicographic' or 'strict'");
  }
  for (std::size_t i = 0; i < config.kappa_grid.size(); ++i) {
    const double v = config.kappa_grid[i];
    if (!(v > 0.0 && v < 1.0)) config_fail("kappa_grid values must lie strictly in (0, 1)");
    if (i > 0 && v <= config.kappa_grid[i - 1]) config_fail("kappa_grid must be ascending");
  }
  if (config.has_generator) {
    const std::string& kind = config.generator.kind;
    if (kind != "planted_static" && kind != "planted_dynamic") {
      config_fail("generator kind must be 'planted_static' or 'planted_dynamic'");
    }
  }
  if (config.has_panel) {
    static const std::set<std::string> kPanels = {"community_nodes", "community_subjects",
                                                  "community_k", "community_sparsity", "states_k"};
    if (kPanels.find(config.panel.name) == kPanels.end()) {
      config_fail("unknown panel '" + config.panel.name + "'");
    }
    if (config.panel.x.empty()) config_fail("panel needs a non-empty x grid");
    if (config.panel.replications < 1) config_fail("panel replications must be at least 1");
  }
  return config;
}

RunConfig load_config_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) config_fail(path.string() + ": cannot read configuration file");
  json doc;
  try {
    in >> doc;
  } catch (const json::parse_error& e) {
    config_fail(path.string() + ": " + e.what());
  }
  return parse_config(doc);
}

json config_snapshot(const RunConfig& config) {
  json doc;
  doc["inputs"] = config.inputs;
  if (config.has_generator) {
    const GeneratorSpec& spec = config.generator;
    json g;
    g["kind"] = spec.kind;
    g["n"] = spec.n;
    g["k"] = spec.k;
    g["r"] = spec.r;
    g["t"] = spec.t;
    g["s"] = spec.s;
    g["alpha"] = spec.alpha;
    g["lambda"] = spec.lambda;
    g["lambdas"] = spec.lambdas;
    g["eps_range"] = spec.eps_range;
    g["sigma"] = spec.sigma;
    g["repeats"] = spec.repeats;
    doc["generator"] = std::move(g);
  } else {
    doc["generator"] = nullptr;
  }
  doc["window_length"] = config.window_length;
  doc["step"] = config.step;
  doc["kappa"] = config.kappa;
  doc["tie_policy"] = config.tie_policy;
  doc["mode"] = config.mode;
  doc["method"] = config.method;
  doc["gamma"] = config.gamma;
  doc["coupling"] = config.coupling;
  doc["k"] = config.k_override;
  doc["consensus_fraction"] = config.consensus_fraction;
  doc["states"] = config.num_states;
  doc["s_max"] = config.s_max;
  doc["per_subject"] = config.per_subject;
  doc["kappa_grid"] = config.kappa_grid;
  if (config.has_panel) {
    json p;
    p["name"] = config.panel.name;
    p["x"] = config.panel.x;
    p["replications"] = config.panel.replications;
    doc["panel"] = std::move(p);
  } else {
    doc["panel"] = nullptr;
  }
  doc["seed"] = config.seed;
  json seeds = json::object();
  for (const auto& [key, value] : config.seeds) seeds[key] = value;
  doc["seeds"] = std::move(seeds);
  doc["output"] = config.output_dir;
  doc["run_id"] = config.run_id;
  doc["workers"] = config.workers;
  return doc;
}

fs::path resolve_output_dir(const RunConfig& config) {
  if (!config.output_dir.empty()) return config.output_dir;
  const char* root = std::getenv("BLOCKDYN_OUTPUT_ROOT");
  if (root != nullptr && *root != '\0') {
    return fs::path(root) / (config.run_id.empty() ? "run" : config.run_id);
  }
  config_fail(
      "no output directory: set 'output' in the config, pass --output, or export "
      "BLOCKDYN_OUTPUT_ROOT");
}

namespace {

std::string effective_run_id(const RunConfig& config, const fs::path& out_dir) {
  if (!config.run_id.empty()) return config.run_id;
  const std::string stem = out_dir.filename().string();
  return stem.empty() ? "run" : stem;
}

}  // namespace

StageResult run_build(const RunConfig& config) {
  const auto start = Clock::now();
  if (config.inputs.empty()) {
    config_fail("build needs time-series input files; set 'inputs'");
  }
  for (const std::string& input : config.inputs) {
    if (!fs::exists(input)) config_fail(input + ": input file is missing");
  }
  const fs::path out_dir = resolve_output_dir(config);
  fs::create_directories(out_dir);

  const int r_count = static_cast<int>(config.inputs.size());
  std::vector<int> scans(static_cast<std::size_t>(r_count), 0);
  std::vector<int> nodes(static_cast<std::size_t>(r_count), 0);
  std::vector<int> windows(static_cast<std::size_t>(r_count), 0);
  parallel_for(r_count, config.workers, [&](int r) {
    const std::string& input = config.inputs[static_cast<std::size_t>(r)];
    try {
      const io::NamedPanel named = io::read_time_series_csv(input);
      netbuild::TimeSeriesPanel panel;
      panel.subject = subject_tag(r);
      panel.values = named.values;
      scans[static_cast<std::size_t>(r)] = static_cast<int>(named.values.rows());
      nodes[static_cast<std::size_t>(r)] = static_cast<int>(named.values.cols());
      const netbuild::CorrelationSequence seq =
          netbuild::sliding_window_correlation(panel, config.window_length, config.step);
      windows[static_cast<std::size_t>(r)] = seq.size();
      for (int t = 0; t < seq.size(); ++t) {
        const BinaryMatrix layer = netbuild::proportional_threshold(
            seq.matrices[static_cast<std::size_t>(t)], config.kappa, tie_policy(config));
        io::write_binary_csv(out_dir / layer_rel(r, t), layer);
      }
      const Matrix averaged = netbuild::time_average(seq);
      const BinaryMatrix static_net =
          netbuild::proportional_threshold(averaged, config.kappa, tie_policy(config));
      io::write_binary_csv(out_dir / averaged_rel(r), static_net);
    } catch (const Error& e) {
      throw Error(e.code(), input + " (subject " + std::to_string(r + 1) + "): " + e.what());
    }
  });

  for (int r = 1; r < r_count; ++r) {
    if (nodes[static_cast<std::size_t>(r)] != nodes[0]) {
      config_fail("subjects disagree on node count: " + config.inputs[0] + " has " +
                  std::to_string(nodes[0]) + ", " + config.inputs[static_cast<std::size_t>(r)] +
                  " has " + std::to_string(nodes[static_cast<std::size_t>(r)]));
    }
  }

  io::Manifest man = start_manifest(config, "build");
  json layer_lists = json::array();
  json averaged_list = json::array();
  for (int r = 0; r < r_count; ++r) {
    json mine = json::array();
    for (int t = 0; t < windows[static_cast<std::size_t>(r)]; ++t) {
      const std::string rel = layer_rel(r, t);
      io::record_file(man, out_dir, rel);
      mine.push_back(rel);
    }
    layer_lists.push_back(std::move(mine));
    const std::string rel = averaged_rel(r);
    io::record_file(man, out_dir, rel);
    averaged_list.push_back(rel);
  }
  man.data["N"] = nodes.empty() ? 0 : nodes[0];
  const bool uniform_t = std::all_of(scans.begin(), scans.end(),
                                     [&](int t) { return t == scans[0]; });
  if (uniform_t) {
    man.data["T"] = scans.empty() ? 0 : scans[0];
  } else {
    man.data["T"] = scans;
  }
  man.data["R"] = r_count;
  man.data["kappa"] = config.kappa;
  man.data["window_length"] = config.window_length;
  man.data["step"] = config.step;
  const bool uniform_w = std::all_of(windows.begin(), windows.end(),
                                     [&](int w) { return w == windows[0]; });
  if (uniform_w) {
    man.data["num_windows"] = windows.empty() ? 0 : windows[0];
  } else {
    man.data["num_windows"] = windows;
  }
  man.data["layers"] = std::move(layer_lists);
  man.data["averaged"] = std::move(averaged_list);
  finish_stage(man, out_dir, "manifest.json", start);
  return {out_dir, out_dir / "manifest.json", std::move(man)};
}

StageResult run_simulate(const RunConfig& config) {
  const auto start = Clock::now();
  if (!config.has_generator) {
    config_fail("simulate needs a generator spec; set 'generator'");
  }
  if (!config.inputs.empty()) {
    config_fail("simulate generates its own data; drop 'inputs'");
  }
  const fs::path out_dir = resolve_output_dir(config);
  fs::create_directories(out_dir);
  const GeneratorSpec& spec = config.generator;
  const std::uint64_t seed = stage_seed(config, "simulate");

  io::Manifest man = start_manifest(config, "simulate");
  json layer_lists = json::array();
  json averaged_list = json::array();

  if (spec.kind == "planted_static") {
    const synth::PlantedStatic data =
        synth::planted_static(spec.n, spec.k, spec.r, spec.alpha, spec.lambda, spec.eps_range,
                              seed);
    for (int r = 0; r < spec.r; ++r) {
      const BinaryMatrix& w = data.ensemble[static_cast<std::size_t>(r)];
      io::write_binary_csv(out_dir / layer_rel(r, 0), w);
      io::write_binary_csv(out_dir / averaged_rel(r), w);
      io::write_matrix_csv(out_dir / ("truth/theta/" + subject_tag(r) + ".csv"),
                           data.theta_true[static_cast<std::size_t>(r)]);
      json mine = json::array();
      mine.push_back(layer_rel(r, 0));
      layer_lists.push_back(std::move(mine));
      averaged_list.push_back(averaged_rel(r));
    }
    io::write_membership_csv(out_dir / "truth/g_true.csv", data.g_true);
    man.data["T"] = 1;
    man.data["S"] = 1;
    for (int r = 0; r < spec.r; ++r) {
      io::record_file(man, out_dir, layer_rel(r, 0));
      io::record_file(man, out_dir, averaged_rel(r));
      io::record_file(man, out_dir, "truth/theta/" + subject_tag(r) + ".csv");
    }
    io::record_file(man, out_dir, "truth/g_true.csv");
  } else if (spec.kind == "planted_dynamic") {
    if (spec.s < 1) config_fail("generator needs at least one state");
    std::vector<double> lambdas = spec.lambdas;
    if (lambdas.empty()) lambdas.assign(static_cast<std::size_t>(spec.s), spec.lambda);
    const std::vector<synth::ScheduleBlock> schedule =
        synth::interleaved_schedule(spec.t, spec.s, spec.repeats);
    const synth::PlantedDynamic data = synth::planted_dynamic(
        spec.n, spec.k, spec.r, spec.t, spec.s, lambdas, spec.alpha, spec.sigma, schedule, seed);
    for (int r = 0; r < spec.r; ++r) {
      json mine = json::array();
      Matrix sum = Matrix::Zero(spec.n, spec.n);
      for (int t = 0; t < spec.t; ++t) {
        const BinaryMatrix& w = data.tensors.at(r, t);
        io::write_binary_csv(out_dir / layer_rel(r, t), w);
        sum += layer_to_double(w);
        mine.push_back(layer_rel(r, t));
      }
      layer_lists.push_back(std::move(mine));
      // The per-subject static network thresholds the mean edge occupancy,
      // mirroring how measured runs threshold the time-averaged correlation.
      const Matrix occupancy = sum / static_cast<double>(spec.t);
      const BinaryMatrix static_net =
          netbuild::proportional_threshold(occupancy, config.kappa, tie_policy(config));
      io::write_binary_csv(out_dir / averaged_rel(r), static_net);
      averaged_list.push_back(averaged_rel(r));
    }
    io::write_membership_csv(out_dir / "truth/g_true.csv", data.g_true);
    io::write_states_csv(out_dir / "truth/s_true.csv", data.s_true);
    for (int m = 0; m < spec.s; ++m) {
      io::write_matrix_csv(out_dir / ("truth/theta/" + pad_int("state", m + 1, 2) + ".csv"),
                           data.theta_states[static_cast<std::size_t>(m)]);
    }
    {
      // One shared noisy logit trajectory; stored under a single subject row
      // block because every subject draws from the same trajectory.
      dynstate::BetaSequences truth_betas{data.betas_true};
      std::vector<std::pair<int, int>> layout;
      for (int a = 0; a < spec.k; ++a) {
        for (int b = a; b < spec.k; ++b) layout.emplace_back(a, b);
      }
      io::write_betas_csv(out_dir / "truth/betas_true.csv", truth_betas, layout);
    }
    json schedule_json = json::array();
    for (const auto& block : schedule) {
      schedule_json.push_back(json{{"state", block.state}, {"length", block.length}});
    }
    man.data["T"] = spec.t;
    man.data["S"] = spec.s;
    man.data["schedule"] = std::move(schedule_json);
    for (int r = 0; r < spec.r; ++r) {
      for (int t = 0; t < spec.t; ++t) io::record_file(man, out_dir, layer_rel(r, t));
      io::record_file(man, out_dir, averaged_rel(r));
    }
    io::record_file(man, out_dir, "truth/g_true.csv");
    io::record_file(man, out_dir, "truth/s_true.csv");
    for (int m = 0; m < spec.s; ++m) {
      io::record_file(man, out_dir, "truth/theta/" + pad_int("state", m + 1, 2) + ".csv");
    }
    io::record_file(man, out_dir, "truth/betas_true.csv");
  } else {
    config_fail("generator kind must be 'planted_static' or 'planted_dynamic'");
  }

  man.data["N"] = spec.n;
  man.data["R"] = spec.r;
  man.data["K"] = spec.k;
  man.data["kappa"] = config.kappa;
  man.data["window_length"] = nullptr;
  man.data["step"] = nullptr;
  man.data["layers"] = std::move(layer_lists);
  man.data["averaged"] = std::move(averaged_list);
  finish_stage(man, out_dir, "manifest.json", start);
  return {out_dir, out_dir / "manifest.json", std::move(man)};
}

StageResult run_detect(const RunConfig& config) {
  const auto start = Clock::now();
  const fs::path out_dir = resolve_output_dir(config);
  const io::Manifest prior =
      require_manifest(out_dir, "manifest.json", {"build", "simulate"}, "detect");

  const std::vector<std::string> averaged =
      string_list(require_field(prior.data, "averaged", "the " + prior.stage + " manifest"));
  if (averaged.empty()) config_fail("the " + prior.stage + " manifest lists no averaged networks");
  const int r_count = static_cast<int>(averaged.size());
  std::vector<BinaryMatrix> nets(static_cast<std::size_t>(r_count));
  for (int r = 0; r < r_count; ++r) {
    consume_file(prior, out_dir, averaged[static_cast<std::size_t>(r)]);
    nets[static_cast<std::size_t>(r)] =
        io::read_binary_csv(out_dir / averaged[static_cast<std::size_t>(r)]);
  }

  const std::uint64_t seed = stage_seed(config, "detect");
  io::Manifest man = start_manifest(config, "detect");
  man.files = prior.files;  // carry the inventory forward for later stages
  man.timings_ms = prior.timings_ms;
  man.data["N"] = prior.data.value("N", 0);
  man.data["R"] = prior.data.value("R", 0);
  if (prior.data.contains("T")) man.data["T"] = prior.data["T"];
  if (prior.data.contains("K")) man.data["K"] = prior.data["K"];
  if (prior.data.contains("S")) man.data["S"] = prior.data["S"];
  man.data["layers"] = prior.data.value("layers", json::array());
  man.data["averaged"] = prior.data.value("averaged", json::array());
  if (prior.data.contains("schedule")) man.data["schedule"] = prior.data["schedule"];
  man.data["mode"] = config.mode;
  man.data["method"] = config.method;

  json membership_files = json::array();
  if (config.method == "spectral" || config.mode == "single") {
    std::vector<Membership> parts(static_cast<std::size_t>(r_count));
    parallel_for(r_count, config.workers, [&](int r) {
      const std::uint64_t sub_seed = derive_seed(seed, static_cast<std::uint64_t>(r) + 1);
      if (config.method == "spectral") {
        parts[static_cast<std::size_t>(r)] = community::spectral_clustering(
            nets[static_cast<std::size_t>(r)], config.k_override, sub_seed);
      } else {
        parts[static_cast<std::size_t>(r)] =
            community::louvain(nets[static_cast<std::size_t>(r)], sub_seed);
      }
    });
    json k_list = json::array();
    for (int r = 0; r < r_count; ++r) {
      io::write_membership_csv(out_dir / membership_rel(r), parts[static_cast<std::size_t>(r)]);
      io::record_file(man, out_dir, membership_rel(r));
      membership_files.push_back(membership_rel(r));
      k_list.push_back(parts[static_cast<std::size_t>(r)].num_communities);
    }
    const community::AssociationConsensus consensus =
        community::association_consensus(parts, config.consensus_fraction);
    io::write_association_csv(out_dir / "association.csv", consensus.counts);
    io::write_pairs_csv(out_dir / "consensus_pairs.csv", consensus.pairs);
    io::record_file(man, out_dir, "association.csv");
    io::record_file(man, out_dir, "consensus_pairs.csv");
    man.data["k_per_subject"] = std::move(k_list);
  } else {
    community::MultilayerEnsemble ens;
    ens.layers = nets;
    ens.gamma = config.gamma;
    ens.coupling = config.coupling;
    const community::MultilayerResult result = community::multilayer_louvain(ens, seed);
    io::write_membership_csv(out_dir / "membership.csv", result.consensus);
    io::record_file(man, out_dir, "membership.csv");
    membership_files.push_back("membership.csv");
    if (!result.is_consensus) {
      for (int r = 0; r < r_count; ++r) {
        const Membership layer_part = canonicalize_labels(
            result.per_layer[static_cast<std::size_t>(r)]);
        io::write_membership_csv(out_dir / membership_rel(r), layer_part);
        io::record_file(man, out_dir, membership_rel(r));
        membership_files.push_back(membership_rel(r));
      }
    }
    man.data["q"] = result.q;
    man.data["is_consensus"] = result.is_consensus;
    man.data["k"] = result.consensus.num_communities;
  }
  man.data["memberships"] = std::move(membership_files);
  finish_stage(man, out_dir, "manifest_detect.json", start);
  return {out_dir, out_dir / "manifest_detect.json", std::move(man)};
}

namespace {

struct SubjectBetas {
  std::vector<std::pair<int, int>> layout;
  Matrix rows;  // T x D
  double eps = 0.0;
};

// Estimates per-layer connectivity under one membership, persists the theta
// files, and assembles the logit observation rows.
SubjectBetas estimate_subject(const fs::path& out_dir, const std::vector<BinaryMatrix>& layers,
                              const Membership& g, int r) {
  SubjectBetas result;
  std::vector<Matrix> thetas;
  thetas.reserve(layers.size());
  for (std::size_t t = 0; t < layers.size(); ++t) {
    const blockmodel::BlockCounts counts = blockmodel::block_counts(layers[t], g);
    blockmodel::BlockConnectivity conn = blockmodel::estimate_theta(counts);
    conn.subject = r;
    conn.time = static_cast<int>(t);
    if (t == 0) {
      result.eps = blockmodel::clamp_epsilon(counts);
      result.layout = blockmodel::beta_layout(conn.theta);
    }
    io::write_matrix_csv(out_dir / theta_rel(r, static_cast<int>(t)), conn.theta);
    thetas.push_back(std::move(conn.theta));
  }
  result.rows = Matrix(static_cast<Eigen::Index>(thetas.size()),
                       static_cast<Eigen::Index>(result.layout.size()));
  for (std::size_t t = 0; t < thetas.size(); ++t) {
    result.rows.row(static_cast<Eigen::Index>(t)) =
        blockmodel::to_beta(thetas[t], result.eps).transpose();
  }
  return result;
}

}  // namespace

StageResult run_states(const RunConfig& config) {
  const auto start = Clock::now();
  const fs::path out_dir = resolve_output_dir(config);
  const io::Manifest prior =
      require_manifest(out_dir, "manifest_detect.json", {"detect"}, "states");

  const json layer_lists = require_field(prior.data, "layers", "the detect manifest");
  const int r_count = static_cast<int>(layer_lists.size());
  if (r_count == 0) config_fail("the detect manifest lists no layers");

  const std::string mode = prior.data.value("mode", "multi");
  const std::string method = prior.data.value("method", "louvain");
  const bool per_subject_partitions = (mode == "single" || method == "spectral");
  const bool per_subject_fit = config.per_subject || per_subject_partitions;
  if (per_subject_partitions && !config.per_subject) {
    config_fail(
        "detect ran per subject, so a pooled state fit would mix incompatible block spaces; "
        "pass per_subject");
  }

  // Memberships: one shared partition, or one per subject.
  std::vector<Membership> parts(static_cast<std::size_t>(r_count));
  if (per_subject_partitions) {
    for (int r = 0; r < r_count; ++r) {
      consume_file(prior, out_dir, membership_rel(r));
      parts[static_cast<std::size_t>(r)] = io::read_membership_csv(out_dir / membership_rel(r));
    }
  } else {
    consume_file(prior, out_dir, "membership.csv");
    const Membership shared = io::read_membership_csv(out_dir / "membership.csv");
    std::fill(parts.begin(), parts.end(), shared);
  }

  const std::uint64_t seed = stage_seed(config, "states");
  io::Manifest man = start_manifest(config, "states");
  man.files = prior.files;
  man.timings_ms = prior.timings_ms;
  for (const char* key :
       {"N", "R", "T", "K", "S", "layers", "averaged", "mode", "method", "memberships"}) {
    if (prior.data.contains(key)) man.data[key] = prior.data[key];
  }

  // Per-subject connectivity estimation feeding the observation rows.
  std::vector<SubjectBetas> subject_betas(static_cast<std::size_t>(r_count));
  std::vector<std::vector<BinaryMatrix>> layer_cache(static_cast<std::size_t>(r_count));
  for (int r = 0; r < r_count; ++r) {
    const std::vector<std::string> rels = string_list(layer_lists[static_cast<std::size_t>(r)]);
    for (const std::string& rel : rels) consume_file(prior, out_dir, rel);
    layer_cache[static_cast<std::size_t>(r)].resize(rels.size());
    for (std::size_t t = 0; t < rels.size(); ++t) {
      layer_cache[static_cast<std::size_t>(r)][t] = io::read_binary_csv(out_dir / rels[t]);
    }
  }
  parallel_for(r_count, config.workers, [&](int r) {
    subject_betas[static_cast<std::size_t>(r)] = estimate_subject(
        out_dir, layer_cache[static_cast<std::size_t>(r)], parts[static_cast<std::size_t>(r)], r);
  });
  for (int r = 0; r < r_count; ++r) {
    const auto t_count = static_cast<int>(layer_cache[static_cast<std::size_t>(r)].size());
    for (int t = 0; t < t_count; ++t) io::record_file(man, out_dir, theta_rel(r, t));
  }

  dynstate::StateSequence hmm_states;
  dynstate::StateSequence kmeans_states_seq;
  hmm_states.labels.resize(static_cast<std::size_t>(r_count));
  kmeans_states_seq.labels.resize(static_cast<std::size_t>(r_count));
  json fit_info = json::object();

  if (!per_subject_fit) {
    dynstate::BetaSequences betas;
    betas.reserve(static_cast<std::size_t>(r_count));
    for (const SubjectBetas& sb : subject_betas) betas.push_back(sb.rows);
    io::write_betas_csv(out_dir / "betas.csv", betas, subject_betas[0].layout);
    io::record_file(man, out_dir, "betas.csv");

    int s = config.num_states;
    if (s == 0) {
      const dynstate::StateCountScan scan =
          dynstate::select_num_states(betas, config.s_max, derive_seed(seed, 1));
      s = scan.by_silhouette;
      fit_info["selected_by"] = "silhouette";
      fit_info["by_silhouette"] = scan.by_silhouette;
      fit_info["by_davies_bouldin"] = scan.by_davies_bouldin;
    }
    const dynstate::KMeansStates km = dynstate::kmeans_states(betas, s, derive_seed(seed, 2));
    kmeans_states_seq = km.states;
    const dynstate::HmmModel model = dynstate::hmm_fit(betas, s, derive_seed(seed, 3));
    hmm_states = dynstate::viterbi(betas, model);
    io::write_model_json(out_dir / "model.json", model, parts[0].num_communities);
    io::record_file(man, out_dir, "model.json");
    fit_info["S"] = s;
    fit_info["D"] = model.dim();
    fit_info["K"] = parts[0].num_communities;
    fit_info["converged"] = model.converged;
    fit_info["log_likelihood"] = model.log_likelihood;
    fit_info["iterations"] = model.iterations;
    fit_info["eps"] = subject_betas[0].eps;
  } else {
    json per_subject_info = json::array();
    for (int r = 0; r < r_count; ++r) {
      const SubjectBetas& sb = subject_betas[static_cast<std::size_t>(r)];
      dynstate::BetaSequences mine{sb.rows};
      const std::uint64_t sub_seed = derive_seed(seed, 10 + static_cast<std::uint64_t>(r));
      int s = config.num_states;
      json info;
      if (s == 0) {
        const dynstate::StateCountScan scan =
            dynstate::select_num_states(mine, config.s_max, derive_seed(sub_seed, 1));
        s = scan.by_silhouette;
        info["by_silhouette"] = scan.by_silhouette;
        info["by_davies_bouldin"] = scan.by_davies_bouldin;
      }
      const dynstate::KMeansStates km = dynstate::kmeans_states(mine, s, derive_seed(sub_seed, 2));
      kmeans_states_seq.labels[static_cast<std::size_t>(r)] = km.states.labels[0];
      const dynstate::HmmModel model = dynstate::hmm_fit(mine, s, derive_seed(sub_seed, 3));
      const dynstate::StateSequence decoded = dynstate::viterbi(mine, model);
      hmm_states.labels[static_cast<std::size_t>(r)] = decoded.labels[0];
      const std::string model_rel = "models/" + subject_tag(r) + ".json";
      io::write_model_json(out_dir / model_rel, model,
                           parts[static_cast<std::size_t>(r)].num_communities);
      io::record_file(man, out_dir, model_rel);
      info["S"] = s;
      info["D"] = model.dim();
      info["K"] = parts[static_cast<std::size_t>(r)].num_communities;
      info["converged"] = model.converged;
      per_subject_info.push_back(std::move(info));
    }
    fit_info["per_subject"] = std::move(per_subject_info);
  }

  io::write_states_csv(out_dir / "states_hmm.csv", hmm_states);
  io::write_states_csv(out_dir / "states_kmeans.csv", kmeans_states_seq);
  io::record_file(man, out_dir, "states_hmm.csv");
  io::record_file(man, out_dir, "states_kmeans.csv");
  man.data["fit"] = std::move(fit_info);
  finish_stage(man, out_dir, "manifest_states.json", start);
  return {out_dir, out_dir / "manifest_states.json", std::move(man)};
}

namespace {

struct SummaryRow {
  std::string method;
  double x = 0.0;
  double mean = 0.0;
  double sd = 0.0;
};

void write_panel_csv(const fs::path& path, const std::string& value_name,
                     const std::vector<SummaryRow>& rows) {
  std::ofstream out(path);
  if (!out) throw Error(errc::io_error, "cannot write " + path.string());
  out << "method,x,mean_" << value_name << ",sd_" << value_name << '\n';
  for (const SummaryRow& row : rows) {
    out << row.method << ',' << io::format_double(row.x) << ',' << io::format_double(row.mean)
        << ',' << io::format_double(row.sd) << '\n';
  }
}

// One community-recovery replication: planted ensemble, three detectors,
// per-subject ARIs appended per method.
void community_replication(const GeneratorSpec& spec, double gamma, double coupling,
                           std::uint64_t rep_seed, std::vector<double>& multilayer,
                           std::vector<double>& single_louvain, std::vector<double>& spectral) {
  const synth::PlantedStatic data = synth::planted_static(
      spec.n, spec.k, spec.r, spec.alpha, spec.lambda, spec.eps_range, derive_seed(rep_seed, 0));
  const std::vector<int>& truth = data.g_true.labels;

  community::MultilayerEnsemble ens;
  ens.layers = data.ensemble;
  ens.gamma = gamma;
  ens.coupling = coupling;
  const community::MultilayerResult multi = community::multilayer_louvain(ens, derive_seed(rep_seed, 1));
  for (int r = 0; r < spec.r; ++r) {
    const std::vector<int> layer_labels(multi.per_layer[static_cast<std::size_t>(r)]);
    multilayer.push_back(metrics::adjusted_rand_index(layer_labels, truth));
  }
  for (int r = 0; r < spec.r; ++r) {
    const Membership part = community::louvain(data.ensemble[static_cast<std::size_t>(r)],
                                               derive_seed(rep_seed, 2 + static_cast<std::uint64_t>(r)));
    single_louvain.push_back(metrics::adjusted_rand_index(part.labels, truth));
  }
  for (int r = 0; r < spec.r; ++r) {
    const Membership part = community::spectral_clustering(
        data.ensemble[static_cast<std::size_t>(r)], spec.k,
        derive_seed(rep_seed, 2 + static_cast<std::uint64_t>(spec.r + r)));
    spectral.push_back(metrics::adjusted_rand_index(part.labels, truth));
  }
}

// One dynamic-states replication: planted tensor stream, per-(r,t) estimated
// connectivity under the planted partition, then HMM and K-means state
// tracking. Appends per-subject state ARIs and per-subject connectivity MSEs.
void states_replication(const GeneratorSpec& spec, std::uint64_t rep_seed,
                        std::vector<double>& hmm_ari, std::vector<double>& km_ari,
                        std::vector<double>& hmm_mse, std::vector<double>& km_mse) {
  std::vector<double> lambdas = spec.lambdas;
  if (lambdas.empty()) lambdas.assign(static_cast<std::size_t>(spec.s), spec.lambda);
  const std::vector<synth::ScheduleBlock> schedule =
      synth::interleaved_schedule(spec.t, spec.s, spec.repeats);
  const synth::PlantedDynamic data =
      synth::planted_dynamic(spec.n, spec.k, spec.r, spec.t, spec.s, lambdas, spec.alpha,
                             spec.sigma, schedule, derive_seed(rep_seed, 0));

  // Connectivity estimates under the planted partition; the community panels
  // already measure partition recovery separately.
  dynstate::BetaSequences betas(static_cast<std::size_t>(spec.r));
  double eps = 1e-6;
  std::vector<std::pair<int, int>> layout;
  for (int r = 0; r < spec.r; ++r) {
    Matrix rows;
    for (int t = 0; t < spec.t; ++t) {
      const blockmodel::BlockCounts counts = blockmodel::block_counts(data.tensors.at(r, t),
                                                                      data.g_true);
      const blockmodel::BlockConnectivity conn = blockmodel::estimate_theta(counts);
      if (r == 0 && t == 0) {
        eps = blockmodel::clamp_epsilon(counts);
        layout = blockmodel::beta_layout(conn.theta);
        }
      if (t == 0) {
        rows = Matrix(spec.t, static_cast<Eigen::Index>(layout.size()));
      }
      rows.row(t) = blockmodel::to_beta(conn.theta, eps).transpose();
    }
    betas[static_cast<std::size_t>(r)] = std::move(rows);
  }

  // Ground-truth per-window connectivity shared by all subjects.
  std::vector<Matrix> truth_theta;
  truth_theta.reserve(static_cast<std::size_t>(spec.t));
  for (int t = 0; t < spec.t; ++t) {
    truth_theta.push_back(blockmodel::from_beta(data.betas_true.row(t).transpose(), spec.k));
  }
  const std::vector<int>& s_truth = data.s_true.labels[0];

  const dynstate::HmmModel model = dynstate::hmm_fit(betas, spec.s, derive_seed(rep_seed, 1));
  const dynstate::StateSequence decoded = dynstate::viterbi(betas, model);
  const dynstate::KMeansStates km = dynstate::kmeans_states(betas, spec.s, derive_seed(rep_seed, 2));

  // Each method's time-t connectivity estimate is its assigned state's
  // profile mapped back from logit space.
  std::vector<Matrix> hmm_profiles;
  std::vector<Matrix> km_profiles;
  for (int m = 0; m < spec.s; ++m) {
    hmm_profiles.push_back(blockmodel::from_beta(model.means.row(m).transpose(), spec.k));
    km_profiles.push_back(blockmodel::from_beta(km.centroids.row(m).transpose(), spec.k));
  }
  for (int r = 0; r < spec.r; ++r) {
    const std::vector<int>& hmm_path = decoded.labels[static_cast<std::size_t>(r)];
    const std::vector<int>& km_path = km.states.labels[static_cast<std::size_t>(r)];
    hmm_ari.push_back(metrics::adjusted_rand_index(hmm_path, s_truth));
    km_ari.push_back(metrics::adjusted_rand_index(km_path, s_truth));
    std::vector<Matrix> hmm_est;
    std::vector<Matrix> km_est;
    for (int t = 0; t < spec.t; ++t) {
      hmm_est.push_back(hmm_profiles[static_cast<std::size_t>(hmm_path[static_cast<std::size_t>(t)] - 1)]);
      km_est.push_back(km_profiles[static_cast<std::size_t>(km_path[static_cast<std::size_t>(t)] - 1)]);
    }
    hmm_mse.push_back(metrics::theta_mse(hmm_est, truth_theta));
    km_mse.push_back(metrics::theta_mse(km_est, truth_theta));
  }
}

void apply_panel_x(GeneratorSpec& spec, const std::string& panel, double x) {
  if (panel == "community_nodes") {
    spec.n = static_cast<int>(std::llround(x));
  } else if (panel == "community_subjects") {
    spec.r = static_cast<int>(std::llround(x));
  } else if (panel == "community_k" || panel == "states_k") {
    spec.k = static_cast<int>(std::llround(x));
  } else if (panel == "community_sparsity") {
    spec.alpha = x;
  }
}

}  // namespace

StageResult run_evaluate(const RunConfig& config) {
  const auto start = Clock::now();
  const fs::path out_dir = resolve_output_dir(config);
  fs::create_directories(out_dir);
  const std::string run_id = effective_run_id(config, out_dir);
  io::Manifest man = start_manifest(config, "evaluate");
  json record = json::object();

  if (config.has_panel) {
    const std::uint64_t seed = stage_seed(config, "evaluate");
    const PanelSpec& panel = config.panel;
    const bool states_panel = panel.name == "states_k";

    std::vector<SummaryRow> ari_rows;
    std::vector<SummaryRow> mse_rows;
    for (std::size_t xi = 0; xi < panel.x.size(); ++xi) {
      GeneratorSpec spec = config.generator;
      if (states_panel) {
        if (spec.kind.empty()) spec.kind = "planted_dynamic";
        if (spec.kind != "planted_dynamic") {
          config_fail("panel states_k needs the planted_dynamic generator");
        }
      } else {
        if (spec.kind.empty()) spec.kind = "planted_static";
        if (spec.kind != "planted_static") {
          config_fail("community panels need the planted_static generator");
        }
      }
      apply_panel_x(spec, panel.name, panel.x[xi]);
      const std::uint64_t x_seed = derive_seed(seed, 1000 + xi);

      if (!states_panel) {
        std::vector<std::vector<double>> pools(3);
        std::vector<std::vector<std::vector<double>>> rep_pools(
            static_cast<std::size_t>(panel.replications),
            std::vector<std::vector<double>>(3));
        parallel_for(panel.replications, config.workers, [&](int rep) {
          auto& mine = rep_pools[static_cast<std::size_t>(rep)];
          community_replication(spec, config.gamma, config.coupling,
                                derive_seed(x_seed, static_cast<std::uint64_t>(rep)), mine[0],
                                mine[1], mine[2]);
        });
        for (const auto& mine : rep_pools) {
          for (int m = 0; m < 3; ++m) {
            pools[static_cast<std::size_t>(m)].insert(pools[static_cast<std::size_t>(m)].end(),
                                                      mine[static_cast<std::size_t>(m)].begin(),
                                                      mine[static_cast<std::size_t>(m)].end());
          }
        }
        const char* names[3] = {"multilayer", "louvain", "spectral"};
        for (int m = 0; m < 3; ++m) {
          const auto& pool = pools[static_cast<std::size_t>(m)];
          ari_rows.push_back({names[m], panel.x[xi], mean_of(pool), sd_of(pool)});
          record[std::string(names[m]) + "_ari_mean_x" + io::format_double(panel.x[xi])] =
              mean_of(pool);
        }
      } else {
        std::vector<std::vector<std::vector<double>>> rep_pools(
            static_cast<std::size_t>(panel.replications),
            std::vector<std::vector<double>>(4));
        parallel_for(panel.replications, config.workers, [&](int rep) {
          auto& mine = rep_pools[static_cast<std::size_t>(rep)];
          states_replication(spec, derive_seed(x_seed, static_cast<std::uint64_t>(rep)), mine[0],
                             mine[1], mine[2], mine[3]);
        });
        std::vector<std::vector<double>> pools(4);
        for (const auto& mine : rep_pools) {
          for (int m = 0; m < 4; ++m) {
            pools[static_cast<std::size_t>(m)].insert(pools[static_cast<std::size_t>(m)].end(),
                                                      mine[static_cast<std::size_t>(m)].begin(),
                                                      mine[static_cast<std::size_t>(m)].end());
          }
        }
        ari_rows.push_back({"hmm", panel.x[xi], mean_of(pools[0]), sd_of(pools[0])});
        ari_rows.push_back({"kmeans", panel.x[xi], mean_of(pools[1]), sd_of(pools[1])});
        mse_rows.push_back({"hmm", panel.x[xi], mean_of(pools[2]), sd_of(pools[2])});
        mse_rows.push_back({"kmeans", panel.x[xi], mean_of(pools[3]), sd_of(pools[3])});
        record["hmm_ari_mean_x" + io::format_double(panel.x[xi])] = mean_of(pools[0]);
        record["kmeans_ari_mean_x" + io::format_double(panel.x[xi])] = mean_of(pools[1]);
        record["hmm_mse_mean_x" + io::format_double(panel.x[xi])] = mean_of(pools[2]);
        record["kmeans_mse_mean_x" + io::format_double(panel.x[xi])] = mean_of(pools[3]);
      }
    }

    if (states_panel) {
      write_panel_csv(out_dir / "panel_states_ari.csv", "ari", ari_rows);
      write_panel_csv(out_dir / "panel_states_mse.csv", "mse", mse_rows);
      io::record_file(man, out_dir, "panel_states_ari.csv");
      io::record_file(man, out_dir, "panel_states_mse.csv");
    } else {
      const std::string rel = "panel_" + panel.name + ".csv";
      write_panel_csv(out_dir / rel, "ari", ari_rows);
      io::record_file(man, out_dir, rel);
    }
    man.data["panel"] = panel.name;
  } else {
    // Join this run directory's estimates against its planted truth.
    const io::Manifest prior = [&]() {
      for (const char* name : {"manifest_states.json", "manifest_detect.json", "manifest.json"}) {
        if (fs::exists(out_dir / name)) return io::read_manifest(out_dir / name);
      }
      config_fail(out_dir.string() + " holds no manifest; run a pipeline stage first");
    }();
    man.files = prior.files;
    man.timings_ms = prior.timings_ms;
    if (prior.files.find("truth/g_true.csv") == prior.files.end()) {
      config_fail("the run has no planted truth to evaluate against");
    }
    consume_file(prior, out_dir, "truth/g_true.csv");
    const Membership g_true = io::read_membership_csv(out_dir / "truth/g_true.csv");

    if (prior.files.count("membership.csv") != 0) {
      consume_file(prior, out_dir, "membership.csv");
      const Membership est = io::read_membership_csv(out_dir / "membership.csv");
      record["community_ari"] = metrics::adjusted_rand_index(est.labels, g_true.labels);
      record["community_rand_index"] = metrics::rand_index(est.labels, g_true.labels);
      record["community_f1"] = metrics::f1_pairwise(est.labels, g_true.labels).f1;
    }
    std::vector<double> per_subject_ari;
    for (int r = 0; prior.files.count(membership_rel(r)) != 0; ++r) {
      consume_file(prior, out_dir, membership_rel(r));
      const Membership est = io::read_membership_csv(out_dir / membership_rel(r));
      per_subject_ari.push_back(metrics::adjusted_rand_index(est.labels, g_true.labels));
    }
    if (!per_subject_ari.empty()) {
      record["community_ari_mean"] = mean_of(per_subject_ari);
      record["community_ari_sd"] = sd_of(per_subject_ari);
    }

    if (prior.files.count("truth/s_true.csv") != 0 &&
        prior.files.count("states_hmm.csv") != 0) {
      consume_file(prior, out_dir, "truth/s_true.csv");
      const dynstate::StateSequence s_true = io::read_states_csv(out_dir / "truth/s_true.csv");
      for (const auto& [rel, key] :
           std::vector<std::pair<std::string, std::string>>{{"states_hmm.csv", "hmm"},
                                                            {"states_kmeans.csv", "kmeans"}}) {
        if (prior.files.count(rel) == 0) continue;
        consume_file(prior, out_dir, rel);
        const dynstate::StateSequence est = io::read_states_csv(out_dir / rel);
        std::vector<double> aris;
        std::vector<double> ris;
        std::vector<double> f1s;
        const std::size_t r_count = std::min(est.labels.size(), s_true.labels.size());
        for (std::size_t r = 0; r < r_count; ++r) {
          aris.push_back(metrics::adjusted_rand_index(est.labels[r], s_true.labels[r]));
          ris.push_back(metrics::rand_index(est.labels[r], s_true.labels[r]));
          f1s.push_back(metrics::f1_pairwise(est.labels[r], s_true.labels[r]).f1);
        }
        record[key + "_state_ari_mean"] = mean_of(aris);
        record[key + "_state_ari_sd"] = sd_of(aris);
        record[key + "_state_rand_index_mean"] = mean_of(ris);
        record[key + "_state_f1_mean"] = mean_of(f1s);
      }
    }

    // Connectivity error against the shared noisy trajectory, when both the
    // estimates and the truth exist.
    if (prior.files.count("truth/betas_true.csv") != 0 && prior.data.contains("layers")) {
      consume_file(prior, out_dir, "truth/betas_true.csv");
      const io::BetaFile truth_file = io::read_betas_csv(out_dir / "truth/betas_true.csv");
      const int k_true = prior.data.value("K", 0);
      if (k_true >= 1 && !truth_file.betas.empty()) {
        std::vector<Matrix> truth_theta;
        const Matrix& rows = truth_file.betas[0];
        for (Eigen::Index t = 0; t < rows.rows(); ++t) {
          truth_theta.push_back(blockmodel::from_beta(rows.row(t).transpose(), k_true));
        }
        std::vector<double> mses;
        const json layer_lists = prior.data["layers"];
        for (std::size_t r = 0; r < layer_lists.size(); ++r) {
          bool complete = true;
          std::vector<Matrix> est;
          for (std::size_t t = 0; t < layer_lists[r].size(); ++t) {
            const std::string rel = theta_rel(static_cast<int>(r), static_cast<int>(t));
            if (prior.files.count(rel) == 0) {
              complete = false;
              break;
            }
            consume_file(prior, out_dir, rel);
            est.push_back(io::read_matrix_csv(out_dir / rel));
          }
          if (!complete || est.size() != truth_theta.size()) continue;
          if (est[0].rows() != truth_theta[0].rows()) continue;
          mses.push_back(metrics::theta_mse(est, truth_theta));
        }
        if (!mses.empty()) {
          record["theta_mse_mean"] = mean_of(mses);
          record["theta_mse_sd"] = sd_of(mses);
        }
      }
    }
  }

  json metrics_doc;
  metrics_doc[run_id] = record;
  {
    std::ofstream out(out_dir / "metrics.json");
    if (!out) throw Error(errc::io_error, "cannot write " + (out_dir / "metrics.json").string());
    out << metrics_doc.dump(2) << '\n';
  }
  io::record_file(man, out_dir, "metrics.json");
  finish_stage(man, out_dir, "manifest_evaluate.json", start);
  return {out_dir, out_dir / "manifest_evaluate.json", std::move(man)};
}

StageResult run_select_threshold(const RunConfig& config) {
  const auto start = Clock::now();
  const fs::path out_dir = resolve_output_dir(config);
  fs::create_directories(out_dir);
  io::Manifest man = start_manifest(config, "select_threshold");

  // The scan wants one weighted average connectivity matrix; it can come
  // from measured time series, a generator, or an already-built run.
  Matrix c_avg;
  if (!config.inputs.empty()) {
    for (const std::string& input : config.inputs) {
      if (!fs::exists(input)) config_fail(input + ": input file is missing");
    }
    for (std::size_t r = 0; r < config.inputs.size(); ++r) {
      const io::NamedPanel named = io::read_time_series_csv(config.inputs[r]);
      netbuild::TimeSeriesPanel panel;
      panel.subject = subject_tag(static_cast<int>(r));
      panel.values = named.values;
      const netbuild::CorrelationSequence seq =
          netbuild::sliding_window_correlation(panel, config.window_length, config.step);
      const Matrix averaged = netbuild::time_average(seq);
      if (r == 0) {
        c_avg = averaged;
      } else if (averaged.rows() != c_avg.rows()) {
        config_fail("subjects disagree on node count");
      } else {
        c_avg += averaged;
      }
    }
    c_avg /= static_cast<double>(config.inputs.size());
  } else if (config.has_generator) {
    const GeneratorSpec& spec = config.generator;
    const std::uint64_t seed = stage_seed(config, "simulate");
    if (spec.kind == "planted_static") {
      const synth::PlantedStatic data = synth::planted_static(
          spec.n, spec.k, spec.r, spec.alpha, spec.lambda, spec.eps_range, seed);
      c_avg = Matrix::Zero(spec.n, spec.n);
      for (const BinaryMatrix& w : data.ensemble) c_avg += layer_to_double(w);
      c_avg /= static_cast<double>(data.ensemble.size());
    } else {
      std::vector<double> lambdas = spec.lambdas;
      if (lambdas.empty()) lambdas.assign(static_cast<std::size_t>(spec.s), spec.lambda);
      const synth::PlantedDynamic data = synth::planted_dynamic(
          spec.n, spec.k, spec.r, spec.t, spec.s, lambdas, spec.alpha, spec.sigma,
          synth::interleaved_schedule(spec.t, spec.s, spec.repeats), seed);
      c_avg = Matrix::Zero(spec.n, spec.n);
      for (const BinaryMatrix& w : data.tensors.layers) c_avg += layer_to_double(w);
      c_avg /= static_cast<double>(data.tensors.layers.size());
    }
  } else {
    const io::Manifest prior =
        require_manifest(out_dir, "manifest.json", {"build", "simulate"}, "select-threshold");
    man.files = prior.files;
    const json layer_lists = require_field(prior.data, "layers", "the " + prior.stage + " manifest");
    long layer_count = 0;
    for (const auto& mine : layer_lists) {
      for (const auto& rel : mine) {
        consume_file(prior, out_dir, rel.get<std::string>());
        const BinaryMatrix w = io::read_binary_csv(out_dir / rel.get<std::string>());
        if (layer_count == 0) {
          c_avg = layer_to_double(w);
        } else {
          c_avg += layer_to_double(w);
        }
        ++layer_count;
      }
    }
    if (layer_count == 0) config_fail("the manifest lists no layers to scan");
    c_avg /= static_cast<double>(layer_count);
  }

  std::vector<double> grid = config.kappa_grid;
  if (grid.empty()) {
    for (int i = 1; i <= 19; ++i) grid.push_back(0.05 * i);
  }
  const netbuild::CostEfficiencyScan scan =
      netbuild::cost_efficiency_scan(c_avg, grid, stage_seed(config, "select_threshold"));

  {
    std::ofstream out(out_dir / "cost_efficiency.csv");
    if (!out) {
      throw Error(errc::io_error, "cannot write " + (out_dir / "cost_efficiency.csv").string());
    }
    out << "kappa,global_efficiency,modularity_remapped,cost_efficiency\n";
    for (const netbuild::CostEfficiencyRow& row : scan.table) {
      out << io::format_double(row.kappa) << ',' << io::format_double(row.global_efficiency)
          << ',' << io::format_double(row.modularity_remapped) << ','
          << io::format_double(row.cost_efficiency) << '\n';
    }
  }
  io::record_file(man, out_dir, "cost_efficiency.csv");
  man.data["kappa_star"] = scan.kappa_star;
  man.data["grid"] = grid;
  finish_stage(man, out_dir, "manifest_select_threshold.json", start);
  return {out_dir, out_dir / "manifest_select_threshold.json", std::move(man)};
}

StageResult run_select_states(const RunConfig& config) {
  const auto start = Clock::now();
  const fs::path out_dir = resolve_output_dir(config);
  fs::create_directories(out_dir);
  io::Manifest man = start_manifest(config, "select_states");
  const std::uint64_t seed = stage_seed(config, "select_states");

  dynstate::BetaSequences betas;
  if (config.has_generator) {
    const GeneratorSpec& spec = config.generator;
    if (spec.kind != "planted_dynamic") {
      config_fail("select-states needs the planted_dynamic generator");
    }
    std::vector<double> lambdas = spec.lambdas;
    if (lambdas.empty()) lambdas.assign(static_cast<std::size_t>(spec.s), spec.lambda);
    const synth::PlantedDynamic data = synth::planted_dynamic(
        spec.n, spec.k, spec.r, spec.t, spec.s, lambdas, spec.alpha, spec.sigma,
        synth::interleaved_schedule(spec.t, spec.s, spec.repeats),
        stage_seed(config, "simulate"));
    double eps = 1e-6;
    std::vector<std::pair<int, int>> layout;
    for (int r = 0; r < spec.r; ++r) {
      Matrix rows;
      for (int t = 0; t < spec.t; ++t) {
        const blockmodel::BlockCounts counts =
            blockmodel::block_counts(data.tensors.at(r, t), data.g_true);
        const blockmodel::BlockConnectivity conn = blockmodel::estimate_theta(counts);
        if (r == 0 && t == 0) {
          eps = blockmodel::clamp_epsilon(counts);
          layout = blockmodel::beta_layout(conn.theta);
        }
        if (t == 0) rows = Matrix(spec.t, static_cast<Eigen::Index>(layout.size()));
        rows.row(t) = blockmodel::to_beta(conn.theta, eps).transpose();
      }
      betas.push_back(std::move(rows));
    }
  } else {
    const io::Manifest prior =
        require_manifest(out_dir, "manifest_states.json", {"states"}, "select-states");
    man.files = prior.files;
    consume_file(prior, out_dir, "betas.csv");
    betas = io::read_betas_csv(out_dir / "betas.csv").betas;
  }

  const dynstate::StateCountScan scan = dynstate::select_num_states(betas, config.s_max, seed);
  {
    std::ofstream out(out_dir / "state_selection.csv");
    if (!out) {
      throw Error(errc::io_error, "cannot write " + (out_dir / "state_selection.csv").string());
    }
    out << "s,silhouette,davies_bouldin,inertia\n";
    for (const auto& row : scan.scores) {
      out << row.s << ',' << io::format_double(row.silhouette) << ','
          << io::format_double(row.davies_bouldin) << ',' << io::format_double(row.inertia)
          << '\n';
    }
  }
  io::record_file(man, out_dir, "state_selection.csv");
  man.data["by_silhouette"] = scan.by_silhouette;
  man.data["by_davies_bouldin"] = scan.by_davies_bouldin;
  man.data["selected_s"] = scan.by_silhouette;
  man.data["s_max"] = config.s_max;
  finish_stage(man, out_dir, "manifest_select_states.json", start);
  return {out_dir, out_dir / "manifest_select_states.json", std::move(man)};
}

}  // namespace blockdyn::pipeline
