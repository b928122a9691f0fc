#pragma once

#include <utility>
#include <vector>

#include "blockdyn/types.hpp"

namespace blockdyn::blockmodel {

using CountMatrix = Eigen::Matrix<long long, Eigen::Dynamic, Eigen::Dynamic>;

// Edge and pair counts between blocks, in the unordered-pair convention:
// pairs(k,k) = N_k(N_k-1)/2 and pairs(k,l) = N_k*N_l for k != l, so that
// edges(k,l)/pairs(k,l) is a proper Bernoulli rate in [0,1].
struct BlockCounts {
  CountMatrix edges;
  CountMatrix pairs;
  std::vector<int> block_sizes;
};

BlockCounts block_counts(const BinaryMatrix& w, const Membership& g);

// Block connection probabilities for one layer. A singleton block has no
// within-block pair, so its diagonal entry is NaN ("absent") rather than a
// made-up number; to_beta skips absent entries.
struct BlockConnectivity {
  Matrix theta;
  int subject = -1;
  int time = -1;

  int k() const { return static_cast<int>(theta.rows()); }
};

// Maximum-likelihood estimate theta_kl = edges_kl / pairs_kl, unclamped
// (exact 0 and 1 are legitimate estimates). Throws EmptyBlock when a block
// has no members.
BlockConnectivity estimate_theta(const BlockCounts& counts);

// Bernoulli log-likelihood of all layers under a shared partition:
// sum over layers and blocks k <= l of m*log(theta) + (n-m)*log(1-theta).
// Entries must lie strictly inside (0,1); exact 0/1 throws ThetaOnBoundary
// (clamp via to_beta/from_beta first). Absent (NaN) diagonal entries of
// singleton blocks are skipped along with their zero pair counts.
double log_likelihood(const AdjacencyTensor& w_all, const Membership& g,
                      const std::vector<BlockConnectivity>& thetas);

// Scale-aware clamp distance for the logit transform: half the smallest
// resolvable rate, floored at 1e-6.
double clamp_epsilon(const BlockCounts& counts);

// Included (k,l) coordinates (0-based, k <= l) of the vectorized upper
// triangle, in row-major order, skipping absent entries.
std::vector<std::pair<int, int>> beta_layout(const Matrix& theta);

// Upper-triangle logit vectorization; theta is clamped into
// [eps, 1-eps] first so entries stay finite.
Vector to_beta(const Matrix& theta, double eps = 1e-6);

// Inverse of to_beta for the full triangle: beta must have length K(K+1)/2
// or DimensionMismatch is thrown. Returns the symmetric K x K matrix of
// inverse-logit values.
Matrix from_beta(const Vector& beta, int k);

// Expands a beta vector with an explicit layout (as from beta_layout) into a
// symmetric K x K matrix, NaN where the layout has no entry.
Matrix from_beta_layout(const Vector& beta, int k,
                        const std::vector<std::pair<int, int>>& layout);

// Community count whose full upper triangle has dimension d; throws
// NonTriangularDimension when d is not K(K+1)/2 for any integer K.
int triangular_k(int d);

}  // namespace blockdyn::blockmodel
