#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "blockdyn/errors.hpp"
#include "blockdyn/io.hpp"
#include "blockdyn/metrics.hpp"
#include "blockdyn/pipeline.hpp"
#include "blockdyn/rng.hpp"
#include "doctest.h"

using namespace blockdyn;
using namespace blockdyn::pipeline;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& tag) {
  static std::atomic<int> counter{0};
  const fs::path dir = fs::temp_directory_path() /
                       ("blockdyn_test_" + tag + "_" + std::to_string(counter.fetch_add(1)));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// Gaussian panel with two latent drivers so thresholded windows carry real
// community structure.
void write_panel_csv(const fs::path& path, int t_len, int n, std::uint64_t seed) {
  Rng rng(seed);
  Matrix values(t_len, n);
  std::vector<std::string> names;
  for (int j = 0; j < n; ++j) names.push_back("x" + std::to_string(j + 1));
  for (int t = 0; t < t_len; ++t) {
    const double driver_a = rng.normal();
    const double driver_b = rng.normal();
    for (int j = 0; j < n; ++j) {
      const double shared = j < n / 2 ? driver_a : driver_b;
      values(t, j) = 0.8 * shared + 0.6 * rng.normal();
    }
  }
  io::write_time_series_csv(path, names, values);
}

RunConfig base_config(const fs::path& out_dir) {
  RunConfig config;
  config.output_dir = out_dir.string();
  config.seed = 20240816;
  return config;
}

RunConfig static_sim_config(const fs::path& out_dir) {
  RunConfig config = base_config(out_dir);
  config.has_generator = true;
  config.generator.kind = "planted_static";
  config.generator.n = 60;
  config.generator.k = 3;
  config.generator.r = 4;
  config.generator.alpha = 0.9;
  config.generator.lambda = 0.9;
  config.generator.eps_range = 0.0;
  return config;
}

json json_of(const fs::path& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  return json::parse(in);
}

}  // namespace

TEST_CASE("derive_seed and stage_seed behave as documented") {
  CHECK(derive_seed(7, 1) != derive_seed(7, 2));
  CHECK(derive_seed(7, 1) == derive_seed(7, 1));
  CHECK(derive_seed(8, 1) != derive_seed(7, 1));

  RunConfig config;
  config.seed = 99;
  const auto derived = stage_seed(config, "detect");
  CHECK(derived == stage_seed(config, "detect"));
  CHECK(derived != stage_seed(config, "build"));

  config.seeds["detect"] = 12345;
  CHECK(stage_seed(config, "detect") == 12345);
  CHECK(stage_seed(config, "build") != 12345);
}

TEST_CASE("parse_config validates field combinations") {
  json doc;
  doc["seed"] = 1;
  doc["output"] = "/tmp/x";
  CHECK_NOTHROW(parse_config(doc));

  json bad = doc;
  bad["kappa"] = 1.5;
  CHECK_THROWS_AS(parse_config(bad), Error);

  bad = doc;
  bad["mode"] = "tri";
  CHECK_THROWS_AS(parse_config(bad), Error);

  bad = doc;
  bad["tie_policy"] = "random";
  CHECK_THROWS_AS(parse_config(bad), Error);

  bad = doc;
  bad["window_length"] = 2;
  CHECK_THROWS_AS(parse_config(bad), Error);

  bad = doc;
  bad["method"] = "spectral";  // needs k
  CHECK_THROWS_AS(parse_config(bad), Error);
  bad["k"] = 4;
  CHECK_NOTHROW(parse_config(bad));

  bad = doc;
  bad["inputs"] = json::array({"a.csv"});
  bad["generator"] = {{"kind", "planted_static"}};
  CHECK_THROWS_AS(parse_config(bad), Error);

  bad = doc;
  bad["generator"] = {{"kind", "mystery"}};
  CHECK_THROWS_AS(parse_config(bad), Error);

  bad = doc;
  bad["kappa_grid"] = json::array({0.3, 0.2});
  CHECK_THROWS_AS(parse_config(bad), Error);

  bad = doc;
  bad["panel"] = {{"name", "unknown_panel"}, {"x", json::array({1.0})}};
  CHECK_THROWS_AS(parse_config(bad), Error);

  for (const auto& cause : {bad}) (void)cause;
  try {
    json broken = doc;
    broken["kappa"] = 0.0;
    parse_config(broken);
    FAIL("expected a configuration error");
  } catch (const Error& e) {
    CHECK(e.code() == errc::config_error);
  }
}

TEST_CASE("parallel_for visits every index once and propagates exceptions") {
  std::vector<std::atomic<int>> hits(97);
  for (auto& h : hits) h = 0;
  parallel_for(97, 4, [&](int i) { hits[static_cast<std::size_t>(i)].fetch_add(1); });
  for (const auto& h : hits) CHECK(h.load() == 1);

  parallel_for(3, 8, [](int) {});  // more workers than work is fine

  CHECK_THROWS_AS(parallel_for(10, 3,
                               [](int i) {
                                 if (i == 7) throw Error(errc::invalid_argument, "boom");
                               }),
                  Error);
}

TEST_CASE("run_build honors the layer counting contract") {
  const fs::path work = fresh_dir("build_count");
  const fs::path out = work / "out";
  std::vector<std::string> inputs;
  for (int r = 0; r < 2; ++r) {
    const fs::path csv = work / ("subject" + std::to_string(r) + ".csv");
    write_panel_csv(csv, 64, 10, 600 + static_cast<std::uint64_t>(r));
    inputs.push_back(csv.string());
  }
  RunConfig config = base_config(out);
  config.inputs = inputs;
  config.window_length = 30;
  config.step = 1;
  config.kappa = 0.25;

  const auto result = run_build(config);
  // 2 subjects x (64 - 30 + 1) windows, plus 2 averaged networks.
  int layer_files = 0, averaged_files = 0;
  for (const auto& [rel, meta] : result.manifest.files) {
    if (rel.rfind("layers/", 0) == 0) ++layer_files;
    if (rel.rfind("averaged/", 0) == 0) ++averaged_files;
    CHECK(fs::exists(out / rel));
  }
  CHECK(layer_files == 70);
  CHECK(averaged_files == 2);
  CHECK(fs::exists(result.manifest_path));
  CHECK(result.manifest.stage == "build");
  CHECK(result.manifest.data["num_windows"] == 35);
  CHECK(result.manifest.data["N"] == 10);
  CHECK(result.manifest.data["R"] == 2);

  // Each recorded hash matches the bytes on disk.
  for (const auto& [rel, meta] : result.manifest.files)
    CHECK(io::file_hash(out / rel) == meta["fnv1a64"].get<std::string>());
}

TEST_CASE("run_build fails cleanly on a missing input") {
  const fs::path work = fresh_dir("build_missing");
  RunConfig config = base_config(work / "out");
  config.inputs = {(work / "nope.csv").string()};
  try {
    run_build(config);
    FAIL("expected a configuration error");
  } catch (const Error& e) {
    CHECK(e.code() == errc::config_error);
    CHECK(std::string(e.what()).find("nope.csv") != std::string::npos);
  }
}

TEST_CASE("simulate then detect recovers an easy planted partition end to end") {
  const fs::path out = fresh_dir("static_e2e");
  RunConfig config = static_sim_config(out);
  const auto sim = run_simulate(config);
  CHECK(sim.manifest.stage == "simulate");
  CHECK(sim.manifest.files.count("truth/g_true.csv") == 1);

  const auto det = run_detect(config);
  CHECK(det.manifest.stage == "detect");
  CHECK(det.manifest.data["is_consensus"].get<bool>());

  const auto eval = run_evaluate(config);
  const json metrics = json_of(out / "metrics.json");
  REQUIRE(metrics.size() == 1);
  const json record = metrics.begin().value();
  CHECK(record["community_ari"].get<double>() == doctest::Approx(1.0));
  CHECK(record["community_f1"].get<double>() == doctest::Approx(1.0));
}

TEST_CASE("detect refuses to run without a manifest") {
  const fs::path out = fresh_dir("detect_bare");
  RunConfig config = base_config(out);
  try {
    run_detect(config);
    FAIL("expected a configuration error");
  } catch (const Error& e) {
    CHECK(e.code() == errc::config_error);
    CHECK(std::string(e.what()).find("build") != std::string::npos);
  }
}

TEST_CASE("detect notices a tampered input artifact") {
  const fs::path out = fresh_dir("tamper");
  RunConfig config = static_sim_config(out);
  run_simulate(config);
  {
    std::ofstream patch(out / "averaged" / "sub001.csv", std::ios::app);
    patch << "0\n";
  }
  try {
    run_detect(config);
    FAIL("expected a configuration error");
  } catch (const Error& e) {
    CHECK(e.code() == errc::config_error);
    CHECK(std::string(e.what()).find("changed since") != std::string::npos);
  }
}

TEST_CASE("reruns produce byte-identical artifacts") {
  auto inventory = [](const io::Manifest& man) {
    std::map<std::string, std::string> hashes;
    for (const auto& [rel, meta] : man.files) hashes[rel] = meta["fnv1a64"].get<std::string>();
    return hashes;
  };

  std::map<std::string, std::string> first, second;
  json first_data, second_data;
  for (int round = 0; round < 2; ++round) {
    const fs::path out = fresh_dir("determinism");
    RunConfig config = static_sim_config(out);
    config.workers = round == 0 ? 1 : 3;  // thread count must not leak into artifacts
    run_simulate(config);
    const auto det = run_detect(config);
    auto& target = round == 0 ? first : second;
    target = inventory(det.manifest);
    (round == 0 ? first_data : second_data) = det.manifest.data;
    fs::remove_all(out);
  }
  CHECK(first == second);
  CHECK(first_data == second_data);
}

TEST_CASE("single mode per-subject partitions agree with the consensus on shared data") {
  const fs::path work = fresh_dir("modes");
  // Identical recordings for every subject: both modes must land on the same
  // communities up to labeling.
  const fs::path csv = work / "shared.csv";
  write_panel_csv(csv, 120, 16, 601);
  std::vector<std::string> inputs{csv.string(), csv.string(), csv.string()};

  const fs::path out_multi = work / "multi";
  RunConfig multi = base_config(out_multi);
  multi.inputs = inputs;
  multi.kappa = 0.3;
  run_build(multi);
  run_detect(multi);
  const Membership consensus = io::read_membership_csv(out_multi / "membership.csv");

  const fs::path out_single = work / "single";
  RunConfig single = base_config(out_single);
  single.inputs = inputs;
  single.kappa = 0.3;
  single.mode = "single";
  run_build(single);
  const auto det = run_detect(single);
  CHECK(det.manifest.files.count("association.csv") == 1);
  for (int r = 0; r < 3; ++r) {
    char rel[64];
    std::snprintf(rel, sizeof rel, "memberships/sub%03d.csv", r + 1);
    const Membership per = io::read_membership_csv(out_single / rel);
    CHECK(metrics::adjusted_rand_index(per.labels, consensus.labels) == doctest::Approx(1.0));
  }
}

TEST_CASE("states stage fits and labels a planted dynamic run") {
  const fs::path out = fresh_dir("dynamic_states");
  RunConfig config = base_config(out);
  config.has_generator = true;
  config.generator.kind = "planted_dynamic";
  config.generator.n = 48;
  config.generator.k = 3;
  config.generator.r = 3;
  config.generator.t = 60;
  config.generator.s = 2;
  config.generator.lambdas = {0.9, 0.6};
  config.generator.alpha = 0.8;
  config.generator.sigma = 0.05;
  config.num_states = 2;

  run_simulate(config);
  run_detect(config);
  const auto st = run_states(config);
  CHECK(st.manifest.files.count("states_hmm.csv") == 1);
  CHECK(st.manifest.files.count("states_kmeans.csv") == 1);
  CHECK(st.manifest.files.count("betas.csv") == 1);
  CHECK(st.manifest.files.count("model.json") == 1);
  CHECK(st.manifest.data["fit"]["S"] == 2);

  const auto truth = io::read_states_csv(out / "truth/s_true.csv");
  const auto est = io::read_states_csv(out / "states_hmm.csv");
  REQUIRE(est.labels.size() == 3);
  for (std::size_t r = 0; r < est.labels.size(); ++r)
    CHECK(metrics::adjusted_rand_index(est.labels[r], truth.labels[0]) == doctest::Approx(1.0));

  run_evaluate(config);
  const json metrics = json_of(out / "metrics.json");
  const json record = metrics.begin().value();
  CHECK(record["hmm_state_ari_mean"].get<double>() == doctest::Approx(1.0));
  CHECK(record.contains("theta_mse_mean"));
}

TEST_CASE("states stage requires detect first") {
  const fs::path out = fresh_dir("states_bare");
  RunConfig config = static_sim_config(out);
  run_simulate(config);
  try {
    run_states(config);
    FAIL("expected a configuration error");
  } catch (const Error& e) {
    CHECK(e.code() == errc::config_error);
    CHECK(std::string(e.what()).find("detect") != std::string::npos);
  }
}

TEST_CASE("select_threshold emits a grid scan from generator data") {
  const fs::path out = fresh_dir("threshold");
  RunConfig config = static_sim_config(out);
  config.kappa_grid = {0.1, 0.2, 0.3, 0.4, 0.5};
  const auto result = run_select_threshold(config);
  CHECK(result.manifest.files.count("cost_efficiency.csv") == 1);
  const double kappa_star = result.manifest.data["kappa_star"].get<double>();
  CHECK(kappa_star >= 0.1);
  CHECK(kappa_star <= 0.5);

  std::ifstream table(out / "cost_efficiency.csv");
  std::string header;
  std::getline(table, header);
  CHECK(header == "kappa,global_efficiency,modularity_remapped,cost_efficiency");
  int rows = 0;
  for (std::string line; std::getline(table, line);)
    if (!line.empty()) ++rows;
  CHECK(rows == 5);
}

TEST_CASE("resolve_output_dir falls back to the environment root") {
  const fs::path root = fresh_dir("env_root");
  RunConfig config;
  config.run_id = "envrun";
  setenv("BLOCKDYN_OUTPUT_ROOT", root.string().c_str(), 1);
  const fs::path resolved = resolve_output_dir(config);
  unsetenv("BLOCKDYN_OUTPUT_ROOT");
  CHECK(resolved == root / "envrun");

  RunConfig bare;
  CHECK_THROWS_AS(resolve_output_dir(bare), Error);
}

TEST_CASE("explicit stage seeds change stochastic outputs") {
  const fs::path out_a = fresh_dir("seed_a");
  const fs::path out_b = fresh_dir("seed_b");
  RunConfig a = static_sim_config(out_a);
  RunConfig b = static_sim_config(out_b);
  b.seeds["simulate"] = 777;
  run_simulate(a);
  run_simulate(b);
  const auto wa = io::read_binary_csv(out_a / "averaged" / "sub001.csv");
  const auto wb = io::read_binary_csv(out_b / "averaged" / "sub001.csv");
  CHECK((wa.cast<int>() - wb.cast<int>()).cwiseAbs().sum() != 0);
  CHECK(json_of(out_b / "manifest.json")["seeds"]["simulate"].get<std::uint64_t>() == 777);
}
