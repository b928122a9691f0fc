#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "blockdyn/dynstate.hpp"
#include "blockdyn/types.hpp"

namespace blockdyn::io {

namespace fs = std::filesystem;
using json = nlohmann::json;

inline constexpr const char* kVersion = "0.1.0";

// Shortest representation that round-trips a double exactly; "nan" for
// absent entries.
std::string format_double(double value);

// Plain CSV matrix, no header. Real entries are written with format_double.
void write_matrix_csv(const fs::path& path, const Matrix& m);
Matrix read_matrix_csv(const fs::path& path);

// Adjacency matrices as 0/1 CSV.
void write_binary_csv(const fs::path& path, const BinaryMatrix& w);
BinaryMatrix read_binary_csv(const fs::path& path);

// Time-series panel: header row of node names, then T rows by N columns.
struct NamedPanel {
  std::vector<std::string> names;
  Matrix values;
};
NamedPanel read_time_series_csv(const fs::path& path);
void write_time_series_csv(const fs::path& path, const std::vector<std::string>& names,
                           const Matrix& values);

// Membership as (node, label) rows, both 1-based.
void write_membership_csv(const fs::path& path, const Membership& g);
Membership read_membership_csv(const fs::path& path);

// Co-assignment counts as a plain integer CSV.
void write_association_csv(const fs::path& path, const Eigen::MatrixXi& counts);

// Node-pair edge list as (i, j) rows, 1-based.
void write_pairs_csv(const fs::path& path, const std::vector<std::pair<int, int>>& pairs);
std::vector<std::pair<int, int>> read_pairs_csv(const fs::path& path);

// State sequences as (subject, time, state) rows, all 1-based.
void write_states_csv(const fs::path& path, const dynstate::StateSequence& seq);
dynstate::StateSequence read_states_csv(const fs::path& path);

// Beta observations, one row per (subject, time); data columns are labeled
// b_<k>_<l> after the 1-based block pair they carry.
void write_betas_csv(const fs::path& path, const dynstate::BetaSequences& betas,
                     const std::vector<std::pair<int, int>>& layout);
struct BetaFile {
  dynstate::BetaSequences betas;
  std::vector<std::pair<int, int>> layout;  // 0-based (k, l) per data column
};
BetaFile read_betas_csv(const fs::path& path);

// Fitted state model with the community count it was derived from.
void write_model_json(const fs::path& path, const dynstate::HmmModel& model, int k);
struct ModelFile {
  dynstate::HmmModel model;
  int k = 0;
};
ModelFile read_model_json(const fs::path& path);

// Content hashing for manifest inventories (FNV-1a, 64 bit).
std::uint64_t fnv1a64(const void* data, std::size_t size);
std::string file_hash(const fs::path& path);

// Per-stage record of what a pipeline stage consumed, produced, and assumed.
// `files` is cumulative: it carries forward every artifact listed by the
// previous stage so each stage only ever consumes files named by its
// predecessor's manifest.
struct Manifest {
  std::string stage;
  std::string version = kVersion;
  json config;                                // snapshot of the run configuration
  json data;                                  // stage facts (N, T, R, kappa, ...)
  json seeds;                                 // seed per stochastic stage
  std::map<std::string, double> timings_ms;   // stage -> wall time
  std::map<std::string, json> files;          // relative path -> {bytes, fnv1a64}
};

// Hashes root/relative and records it in the inventory.
void record_file(Manifest& man, const fs::path& root, const std::string& relative);

void write_manifest(const fs::path& path, const Manifest& man);
Manifest read_manifest(const fs::path& path);

}  // namespace blockdyn::io
