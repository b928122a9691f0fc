#pragma once

#include <cstdint>
#include <vector>

#include "blockdyn/dynstate.hpp"
#include "blockdyn/rng.hpp"
#include "blockdyn/types.hpp"

namespace blockdyn::synth {

// Assortative block connectivity: alpha on the diagonal, alpha*(1-lambda)
// off it, so lambda sets the within/between contrast and alpha the overall
// density scale.
Matrix make_theta(int k, double lambda, double alpha);

// N nodes split over K contiguous communities; when K does not divide N the
// first N mod K communities take one extra node.
Membership balanced_membership(int n, int k);

// Independent Bernoulli(theta_{g_i g_j}) draw per unordered pair.
BinaryMatrix sample_network(const Matrix& theta, const Membership& g, Rng& rng);
BinaryMatrix sample_network(const Matrix& theta, const Membership& g, std::uint64_t seed);

struct PlantedStatic {
  std::vector<BinaryMatrix> ensemble;  // one network per subject
  Membership g_true;
  std::vector<Matrix> theta_true;  // per-subject connectivity after diagonal jitter
};

// Static multi-subject family: shared partition, shared base connectivity,
// per-subject diagonal jitter eps_r ~ U[-eps_range, eps_range] (clamped into
// [0,1] defensively).
PlantedStatic planted_static(int n, int k, int r, double alpha, double lambda, double eps_range,
                             std::uint64_t seed);

struct ScheduleBlock {
  int state = 0;  // 1-based state index
  int length = 0;
};

// Block design of `repeats` interleaved passes over states 1..S covering T
// steps; remainders widen the earliest blocks.
std::vector<ScheduleBlock> interleaved_schedule(int t, int s, int repeats = 2);

struct PlantedDynamic {
  AdjacencyTensor tensors;
  dynstate::StateSequence s_true;   // identical across subjects
  std::vector<Matrix> theta_states; // state connectivity matrices
  std::vector<ScheduleBlock> schedule;
  Membership g_true;
  Matrix betas_true;  // T x D noisy logit trajectory shared by subjects
};

// Dynamic state-switching family: piecewise-constant state schedule shared by
// all subjects, per-step logit-space noise eta_t ~ N(0, sigma^2 I) shared
// across subjects, independent Bernoulli edge draws per subject.
PlantedDynamic planted_dynamic(int n, int k, int r, int t, int s,
                               const std::vector<double>& lambdas, double alpha, double sigma,
                               const std::vector<ScheduleBlock>& schedule, std::uint64_t seed);

}  // namespace blockdyn::synth
