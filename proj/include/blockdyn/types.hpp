#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace blockdyn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
// Adjacency entries are 0/1; storing them as bytes keeps large multilayer
// ensembles (hundreds of subject-by-window layers) at a manageable footprint.
using BinaryMatrix = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;

// Node-to-community assignment with 1-based labels 1..num_communities.
struct Membership {
  std::vector<int> labels;
  int num_communities = 0;

  Membership() = default;
  Membership(std::vector<int> labels_in, int k);

  // Builds a membership taking K as the largest label present; validates that
  // labels are >= 1.
  static Membership from_labels(std::vector<int> labels_in);

  int size() const { return static_cast<int>(labels.size()); }
  int label(int node) const { return labels[static_cast<std::size_t>(node)]; }

  // Size of each community, indexed 0..K-1 for labels 1..K.
  std::vector<int> community_sizes() const;
};

// Renumbers arbitrary integer labels to 1..K in order of first appearance,
// so equivalent partitions compare equal regardless of label history.
Membership canonicalize_labels(const std::vector<int>& raw);

// Stack of binary layers indexed by (subject, time), stored row-major in t.
struct AdjacencyTensor {
  int num_subjects = 0;
  int num_times = 0;
  double density = 0.0;  // target edge fraction used to build the layers; 0 if n/a
  std::vector<BinaryMatrix> layers;

  AdjacencyTensor() = default;
  AdjacencyTensor(int subjects, int times) : num_subjects(subjects), num_times(times) {
    layers.resize(static_cast<std::size_t>(subjects) * static_cast<std::size_t>(times));
  }

  const BinaryMatrix& at(int r, int t) const {
    return layers[static_cast<std::size_t>(r) * static_cast<std::size_t>(num_times) +
                  static_cast<std::size_t>(t)];
  }
  BinaryMatrix& at(int r, int t) {
    return layers[static_cast<std::size_t>(r) * static_cast<std::size_t>(num_times) +
                  static_cast<std::size_t>(t)];
  }
  int num_nodes() const { return layers.empty() ? 0 : static_cast<int>(layers.front().rows()); }
};

// Number of undirected node pairs, i < j.
inline long long pair_count(long long n) { return n * (n - 1) / 2; }

}  // namespace blockdyn
