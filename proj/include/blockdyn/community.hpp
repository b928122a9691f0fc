#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "blockdyn/types.hpp"

namespace blockdyn::community {

// Newman-Girvan modularity of a partition, normalized so Q lies in [-0.5, 1]:
// Q = (1/2L) * sum_ij (w_ij - k_i k_j / 2L) * [g_i == g_j], with L the number
// of edges. Throws EmptyGraph when the graph has no edges.
double modularity(const BinaryMatrix& w, const Membership& g);

// Exact modularity change from moving `node` out of its current community
// into `target` (1-based label; may equal the current one, giving 0).
// Matches modularity(after) - modularity(before) to rounding error.
double modularity_gain(const BinaryMatrix& w, const Membership& g, int node, int target);

struct LouvainResult {
  Membership membership;
  double q = 0.0;
  std::vector<double> q_levels;  // modularity after each aggregation level; non-decreasing
};

// Greedy two-phase modularity maximization: local node moves in seeded random
// order until no positive gain remains, then aggregation of communities into
// super-nodes, repeated until modularity stops improving. Labels come out
// canonicalized (numbered by first-appearing node).
LouvainResult louvain_detailed(const BinaryMatrix& w, std::uint64_t seed);
Membership louvain(const BinaryMatrix& w, std::uint64_t seed);

// A stack of same-node binary layers with the resolution and coupling
// parameters of the multilayer objective.
struct MultilayerEnsemble {
  std::vector<BinaryMatrix> layers;
  double gamma = 1.0;     // resolution of the within-layer null model
  double coupling = 1.0;  // uniform all-to-all interlayer coupling weight
};

// Multilayer modularity with per-layer Newman-Girvan null models and uniform
// categorical coupling between copies of a node across layers:
//   Q = (1/2mu) * [ sum_r sum_ij (w^r_ij - gamma k_ir k_jr / 2L_r) d(g_ir, g_jr)
//                   + sum_j sum_{r != s} C d(g_jr, g_js) ]
// where 2mu = sum_r 2L_r + N R (R-1) C. With one layer this reduces to plain
// modularity. `parts` holds one membership per layer over a shared label space.
double multilayer_modularity(const MultilayerEnsemble& ens, const std::vector<Membership>& parts);

struct MultilayerResult {
  Membership consensus;                          // one shared partition over nodes
  std::vector<std::vector<int>> per_layer;       // labels per (layer, node), shared label space
  bool is_consensus = true;                      // all layers assigned each node identically
  double q = 0.0;                                // achieved multilayer modularity
  std::vector<double> q_levels;                  // non-decreasing across levels
};

// Louvain over the coupled multilayer objective. Node copies across layers
// usually collapse into one community per node under positive coupling; when
// layers disagree on a node the consensus takes the per-node majority label
// (lowest label on ties) and is_consensus is false.
MultilayerResult multilayer_louvain(const MultilayerEnsemble& ens, std::uint64_t seed);

// Throws NonConsensus unless every layer agreed on every node.
const Membership& require_consensus(const MultilayerResult& result);

// Spectral partition into exactly K groups: K bottom eigenvectors of the
// symmetric normalized Laplacian, rows clustered by seeded k-means.
Membership spectral_clustering(const BinaryMatrix& w, int k, std::uint64_t seed);

struct AssociationConsensus {
  Eigen::MatrixXi counts;                     // co-assignment counts over partitions
  std::vector<std::pair<int, int>> pairs;     // strongest off-diagonal pairs, count-ranked
};

// Counts how often each node pair lands in the same community across
// partitions and reports the top fraction of pairs by that count.
AssociationConsensus association_consensus(const std::vector<Membership>& parts,
                                           double top_fraction);

}  // namespace blockdyn::community
