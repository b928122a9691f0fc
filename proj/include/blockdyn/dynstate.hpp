#pragma once

#include <cstdint>
#include <vector>

#include "blockdyn/types.hpp"

namespace blockdyn::dynstate {

// One row per observation: subject r's ordered sequence of beta vectors,
// T_r x D. Subjects may have different lengths but must share D.
using BetaSequences = std::vector<Matrix>;

// Per-subject state labels in 1..S, aligned with the input sequences.
struct StateSequence {
  std::vector<std::vector<int>> labels;

  std::vector<int> flatten() const {
    std::vector<int> out;
    for (const auto& seq : labels) out.insert(out.end(), seq.begin(), seq.end());
    return out;
  }
};

struct KMeansStates {
  StateSequence states;
  Matrix centroids;  // S x D
  double inertia = 0.0;
};

// K-means over the pooled observations (10 seeded restarts, best
// within-cluster sum of squares kept), labels mapped back per subject.
KMeansStates kmeans_states(const BetaSequences& betas, int s, std::uint64_t seed);

// Gaussian-emission hidden Markov model with diagonal covariances.
struct HmmModel {
  int num_states = 0;
  Vector initial;      // pi0, length S
  Matrix transition;   // S x S, rows sum to 1
  Matrix means;        // S x D
  Matrix variances;    // S x D, floored at 1e-6
  bool converged = false;
  double log_likelihood = 0.0;
  int iterations = 0;
  std::vector<double> ll_history;  // total log-likelihood per EM iteration

  int dim() const { return static_cast<int>(means.cols()); }
};

// Baum-Welch fit over per-subject sequences treated as independent
// realizations of one chain (the forward recursion restarts at each subject
// with the shared initial distribution). Initialized from kmeans_states
// centroids; stops when the relative log-likelihood gain drops below 1e-6 or
// after 500 iterations (converged = false then; best-so-far returned).
// States come out ordered by descending mean within-community connectivity.
HmmModel hmm_fit(const BetaSequences& betas, int s, std::uint64_t seed);

// Most probable state path per subject via log-space dynamic programming;
// ties break toward the lower state index.
StateSequence viterbi(const BetaSequences& betas, const HmmModel& model);

// State-wise connectivity matrices: inverse logit of each state mean,
// expanded to symmetric K x K. Requires D = K(K+1)/2.
std::vector<Matrix> state_theta(const HmmModel& model);

struct StateCountScan {
  int by_silhouette = 0;
  int by_davies_bouldin = 0;
  struct Row {
    int s = 0;
    double silhouette = 0.0;
    double davies_bouldin = 0.0;
    double inertia = 0.0;
  };
  std::vector<Row> scores;  // one row per candidate S in 2..S_max
};

// Scores K-means clusterings for S in 2..S_max; silhouette is maximized and
// Davies-Bouldin minimized, both breaking ties toward the smaller S.
StateCountScan select_num_states(const BetaSequences& betas, int s_max, std::uint64_t seed);

}  // namespace blockdyn::dynstate
