#pragma once

#include <vector>

#include "blockdyn/types.hpp"

namespace blockdyn::metrics {

// Agreement between two partitions of the same nodes. Labels can be any
// integers; only the induced co-clustering of node pairs matters.
// Hubert-Arabie adjusted Rand index; returns 1.0 when the adjustment
// denominator vanishes (e.g. both partitions all-singletons).
double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b);

// Plain Rand index: fraction of node pairs on which the partitions agree.
double rand_index(const std::vector<int>& a, const std::vector<int>& b);

struct PairF1 {
  double f1 = 0.0;
  double precision = 0.0;
  double recall = 0.0;
};

// Precision/recall/F1 over co-clustered pairs, with `truth` defining the
// positive class. Empty denominators yield 0.
PairF1 f1_pairwise(const std::vector<int>& truth, const std::vector<int>& est);

// Mean squared Frobenius distance between matched connectivity matrices:
// (1/T) * sum_t ||est[t] - truth[t]||_F^2.
double theta_mse(const std::vector<Matrix>& est, const std::vector<Matrix>& truth);

// Mean silhouette width over rows of `data` (Euclidean distances).
// Singleton clusters score 0, as does any point with a(i)=b(i)=0.
double silhouette(const Matrix& data, const std::vector<int>& labels);

// Davies-Bouldin index (lower is better): mean over clusters of the worst
// (scatter_k + scatter_l) / centroid_distance_kl ratio.
double davies_bouldin(const Matrix& data, const std::vector<int>& labels);

}  // namespace blockdyn::metrics
