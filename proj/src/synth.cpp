#include "blockdyn/synth.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "blockdyn/blockmodel.hpp"
#include "blockdyn/errors.hpp"

namespace blockdyn::synth {

Matrix make_theta(int k, double lambda, double alpha) {
  if (k < 1) {
    throw Error(errc::invalid_argument, "community count must be positive");
  }
  if (!(lambda > 0.0 && lambda < 1.0)) {
    throw Error(errc::invalid_argument, "contrast must lie in (0, 1)");
  }
  if (!(alpha > 0.0 && alpha <= 1.0)) {
    throw Error(errc::invalid_argument, "density scale must lie in (0, 1]");
  }
  Matrix theta = Matrix::Constant(k, k, alpha * (1.0 - lambda));
  theta.diagonal().setConstant(alpha);
  return theta;
}

Membership balanced_membership(int n, int k) {
  if (k < 1 || n < k) {
    throw Error(errc::invalid_argument, "need at least one node per community");
  }
  std::vector<int> labels(static_cast<std::size_t>(n));
  const int base = n / k;
  const int extra = n % k;
  int node = 0;
  for (int c = 0; c < k; ++c) {
    const int size = base + (c < extra ? 1 : 0);
    for (int s = 0; s < size; ++s) labels[static_cast<std::size_t>(node++)] = c + 1;
  }
  return Membership(std::move(labels), k);
}

BinaryMatrix sample_network(const Matrix& theta, const Membership& g, Rng& rng) {
  const int n = g.size();
  if (theta.rows() != theta.cols() || theta.rows() < g.num_communities) {
    throw Error(errc::shape_mismatch, "connectivity matrix does not cover all communities");
  }
  for (Eigen::Index a = 0; a < theta.rows(); ++a) {
    for (Eigen::Index b = 0; b < theta.cols(); ++b) {
      if (!(theta(a, b) >= 0.0 && theta(a, b) <= 1.0)) {
        throw Error(errc::invalid_argument, "edge probabilities must lie in [0,1]");
      }
    }
  }
  BinaryMatrix w = BinaryMatrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (rng.bernoulli(theta(g.label(i) - 1, g.label(j) - 1))) {
        w(i, j) = 1;
        w(j, i) = 1;
      }
    }
  }
  return w;
}

BinaryMatrix sample_network(const Matrix& theta, const Membership& g, std::uint64_t seed) {
  Rng rng(seed);
  return sample_network(theta, g, rng);
}

PlantedStatic planted_static(int n, int k, int r, double alpha, double lambda, double eps_range,
                             std::uint64_t seed) {
  if (r < 1) {
    throw Error(errc::invalid_argument, "need at least one subject");
  }
  if (eps_range < 0.0) {
    throw Error(errc::invalid_argument, "jitter range must be non-negative");
  }
  Rng rng(seed);
  PlantedStatic out;
  out.g_true = balanced_membership(n, k);
  const Matrix base = make_theta(k, lambda, alpha);

  out.ensemble.reserve(static_cast<std::size_t>(r));
  out.theta_true.reserve(static_cast<std::size_t>(r));
  for (int subject = 0; subject < r; ++subject) {
    Rng jitter_stream = rng.substream(1, static_cast<std::uint64_t>(subject));
    const double eps = jitter_stream.uniform(-eps_range, eps_range);
    Matrix theta = base;
    theta.diagonal().array() += eps;
    theta = theta.cwiseMax(0.0).cwiseMin(1.0);

    Rng edge_stream = rng.substream(2, static_cast<std::uint64_t>(subject));
    out.ensemble.push_back(sample_network(theta, out.g_true, edge_stream));
    out.theta_true.push_back(std::move(theta));
  }
  return out;
}

std::vector<ScheduleBlock> interleaved_schedule(int t, int s, int repeats) {
  if (t < 1 || s < 1 || repeats < 1) {
    throw Error(errc::invalid_argument, "schedule needs positive length, states, and repeats");
  }
  const int blocks = s * repeats;
  if (t < blocks) {
    throw Error(errc::schedule_mismatch, std::to_string(t) + " steps cannot hold " +
                                             std::to_string(blocks) + " blocks");
  }
  std::vector<ScheduleBlock> out;
  out.reserve(static_cast<std::size_t>(blocks));
  const int base = t / blocks;
  const int extra = t % blocks;
  for (int b = 0; b < blocks; ++b) {
    out.push_back({b % s + 1, base + (b < extra ? 1 : 0)});
  }
  return out;
}

PlantedDynamic planted_dynamic(int n, int k, int r, int t, int s,
                               const std::vector<double>& lambdas, double alpha, double sigma,
                               const std::vector<ScheduleBlock>& schedule, std::uint64_t seed) {
  if (r < 1 || t < 1) {
    throw Error(errc::invalid_argument, "need at least one subject and one step");
  }
  if (s < 1 || static_cast<int>(lambdas.size()) != s) {
    throw Error(errc::invalid_argument, "need one contrast value per state");
  }
  if (sigma < 0.0) {
    throw Error(errc::invalid_argument, "noise scale must be non-negative");
  }
  int covered = 0;
  for (const auto& block : schedule) {
    if (block.state < 1 || block.state > s) {
      throw Error(errc::schedule_mismatch,
                  "schedule names state " + std::to_string(block.state) + " outside 1.." +
                      std::to_string(s));
    }
    if (block.length < 1) {
      throw Error(errc::schedule_mismatch, "schedule blocks must have positive length");
    }
    covered += block.length;
  }
  if (covered != t) {
    throw Error(errc::schedule_mismatch, "schedule covers " + std::to_string(covered) +
                                             " steps but T = " + std::to_string(t));
  }

  Rng rng(seed);
  PlantedDynamic out;
  out.schedule = schedule;
  out.g_true = balanced_membership(n, k);
  const int d = k * (k + 1) / 2;

  Matrix state_betas(s, d);
  for (int m = 0; m < s; ++m) {
    Matrix theta = make_theta(k, lambdas[static_cast<std::size_t>(m)], alpha);
    state_betas.row(m) = blockmodel::to_beta(theta).transpose();
    out.theta_states.push_back(std::move(theta));
  }

  std::vector<int> state_of_t(static_cast<std::size_t>(t));
  {
    int step = 0;
    for (const auto& block : schedule) {
      for (int b = 0; b < block.length; ++b) state_of_t[static_cast<std::size_t>(step++)] = block.state;
    }
  }

  out.betas_true = Matrix(t, d);
  out.tensors = AdjacencyTensor(r, t);
  for (int step = 0; step < t; ++step) {
    const int m = state_of_t[static_cast<std::size_t>(step)];
    Eigen::RowVectorXd beta = state_betas.row(m - 1);
    Matrix theta;
    if (sigma > 0.0) {
      Rng noise = rng.substream(1, static_cast<std::uint64_t>(step));
      for (int dim = 0; dim < d; ++dim) beta(dim) += noise.normal(0.0, sigma);
      theta = blockmodel::from_beta(beta.transpose(), k);
    } else {
      // No noise: use the state connectivity directly instead of passing it
      // through the logit round trip.
      theta = out.theta_states[static_cast<std::size_t>(m - 1)];
    }
    out.betas_true.row(step) = beta;

    for (int subject = 0; subject < r; ++subject) {
      Rng edges = rng.substream(2, static_cast<std::uint64_t>(subject) * static_cast<std::uint64_t>(t) +
                                       static_cast<std::uint64_t>(step));
      out.tensors.at(subject, step) = sample_network(theta, out.g_true, edges);
    }
  }

  out.s_true.labels.assign(static_cast<std::size_t>(r),
                           std::vector<int>(state_of_t.begin(), state_of_t.end()));
  return out;
}

}  // namespace blockdyn::synth
