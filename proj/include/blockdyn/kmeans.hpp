#pragma once

#include <vector>

#include "blockdyn/rng.hpp"
#include "blockdyn/types.hpp"

namespace blockdyn {

struct KMeansResult {
  std::vector<int> labels;  // 0-based cluster per row
  Matrix centroids;         // k x d
  double inertia = 0.0;     // within-cluster sum of squared distances
  int iterations = 0;       // Lloyd iterations of the winning restart
};

// Lloyd's algorithm with weighted (k-means++ style) seeding, restarted
// `restarts` times; the run with the lowest inertia wins. Deterministic for a
// given rng state. Empty clusters are repaired by stealing the point farthest
// from its centroid.
KMeansResult kmeans(const Matrix& data, int k, Rng& rng, int restarts = 10, int max_iter = 300);

}  // namespace blockdyn
