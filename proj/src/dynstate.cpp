#include "blockdyn/dynstate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "blockdyn/blockmodel.hpp"
#include "blockdyn/errors.hpp"
#include "blockdyn/kmeans.hpp"
#include "blockdyn/metrics.hpp"
#include "blockdyn/rng.hpp"

namespace blockdyn::dynstate {

namespace {

constexpr double kVarianceFloor = 1e-6;
constexpr double kLog2Pi = 1.8378770664093454835606594728112;

Matrix pool_observations(const BetaSequences& betas) {
  if (betas.empty()) {
    throw Error(errc::too_few_observations, "no sequences supplied");
  }
  const Eigen::Index d = betas.front().cols();
  Eigen::Index total = 0;
  for (std::size_t r = 0; r < betas.size(); ++r) {
    if (betas[r].cols() != d) {
      throw Error(errc::dimension_mismatch, "sequence " + std::to_string(r) +
                                                " has dimension " + std::to_string(betas[r].cols()) +
                                                ", expected " + std::to_string(d));
    }
    total += betas[r].rows();
  }
  if (total == 0) {
    throw Error(errc::too_few_observations, "all sequences are empty");
  }
  Matrix pooled(total, d);
  Eigen::Index row = 0;
  for (const auto& seq : betas) {
    pooled.middleRows(row, seq.rows()) = seq;
    row += seq.rows();
  }
  return pooled;
}

// Log density of x under the state's diagonal Gaussian.
double log_emission(const HmmModel& model, int state, const Eigen::Ref<const Eigen::RowVectorXd>& x) {
  double total = 0.0;
  for (Eigen::Index d = 0; d < x.size(); ++d) {
    const double var = model.variances(state, d);
    const double diff = x(d) - model.means(state, d);
    total += kLog2Pi + std::log(var) + diff * diff / var;
  }
  return -0.5 * total;
}

struct ForwardBackward {
  Matrix gamma;             // T x S responsibilities
  Matrix xi_sum;            // S x S expected transition counts
  double log_likelihood = 0.0;
};

ForwardBackward forward_backward(const HmmModel& model, const Matrix& seq) {
  const int t_len = static_cast<int>(seq.rows());
  const int s = model.num_states;

  // Emissions are shifted by their per-step maximum before exponentiation;
  // the shift rejoins the likelihood through the scale factors.
  Matrix w(t_len, s);
  Vector shift(t_len);
  for (int t = 0; t < t_len; ++t) {
    double hi = -std::numeric_limits<double>::infinity();
    for (int m = 0; m < s; ++m) {
      w(t, m) = log_emission(model, m, seq.row(t));
      hi = std::max(hi, w(t, m));
    }
    shift(t) = hi;
    for (int m = 0; m < s; ++m) w(t, m) = std::exp(w(t, m) - hi);
  }

  Matrix alpha(t_len, s);
  Vector scale(t_len);
  ForwardBackward out;

  alpha.row(0) = model.initial.transpose().cwiseProduct(w.row(0));
  scale(0) = alpha.row(0).sum();
  if (scale(0) <= 0.0 || !std::isfinite(scale(0))) {
    throw Error(errc::degenerate_state, "forward recursion underflowed at the first step");
  }
  alpha.row(0) /= scale(0);
  out.log_likelihood = std::log(scale(0)) + shift(0);

  for (int t = 1; t < t_len; ++t) {
    alpha.row(t) = (alpha.row(t - 1) * model.transition).cwiseProduct(w.row(t));
    scale(t) = alpha.row(t).sum();
    if (scale(t) <= 0.0 || !std::isfinite(scale(t))) {
      throw Error(errc::degenerate_state,
                  "forward recursion underflowed at step " + std::to_string(t));
    }
    alpha.row(t) /= scale(t);
    out.log_likelihood += std::log(scale(t)) + shift(t);
  }

  Matrix beta = Matrix::Ones(t_len, s);
  for (int t = t_len - 2; t >= 0; --t) {
    beta.row(t) =
        (model.transition * (w.row(t + 1).cwiseProduct(beta.row(t + 1))).transpose()).transpose() /
        scale(t + 1);
  }

  out.gamma = alpha.cwiseProduct(beta);
  for (int t = 0; t < t_len; ++t) {
    const double total = out.gamma.row(t).sum();
    if (total > 0.0) out.gamma.row(t) /= total;
  }

  out.xi_sum = Matrix::Zero(s, s);
  for (int t = 0; t + 1 < t_len; ++t) {
    Matrix xi = (alpha.row(t).transpose() *
                 (w.row(t + 1).cwiseProduct(beta.row(t + 1)))).cwiseProduct(model.transition) /
                scale(t + 1);
    const double total = xi.sum();
    if (total > 0.0) xi /= total;
    out.xi_sum += xi;
  }
  return out;
}

// Orders states by descending mean within-community connectivity when the
// dimension is triangular, and by descending mean connectivity otherwise, so
// state 1 is comparable across runs.
void canonicalize_states(HmmModel& model) {
  const int s = model.num_states;
  Vector score(s);
  int k = 0;
  try {
    k = blockmodel::triangular_k(model.dim());
  } catch (const Error&) {
    k = 0;
  }
  for (int m = 0; m < s; ++m) {
    if (k > 0) {
      const Matrix theta = blockmodel::from_beta(model.means.row(m).transpose(), k);
      score(m) = theta.diagonal().mean();
    } else {
      double total = 0.0;
      for (Eigen::Index d = 0; d < model.means.cols(); ++d) {
        total += 1.0 / (1.0 + std::exp(-model.means(m, d)));
      }
      score(m) = total / static_cast<double>(model.means.cols());
    }
  }
  std::vector<int> order(static_cast<std::size_t>(s));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return score(a) > score(b); });

  HmmModel sorted = model;
  for (int m = 0; m < s; ++m) {
    const int src = order[static_cast<std::size_t>(m)];
    sorted.initial(m) = model.initial(src);
    sorted.means.row(m) = model.means.row(src);
    sorted.variances.row(m) = model.variances.row(src);
    for (int l = 0; l < s; ++l) {
      sorted.transition(m, l) = model.transition(src, order[static_cast<std::size_t>(l)]);
    }
  }
  model = sorted;
}

}  // namespace

KMeansStates kmeans_states(const BetaSequences& betas, int s, std::uint64_t seed) {
  if (s < 1) {
    throw Error(errc::invalid_argument, "state count must be positive");
  }
  const Matrix pooled = pool_observations(betas);
  if (pooled.rows() < s) {
    throw Error(errc::too_few_observations, std::to_string(pooled.rows()) +
                                                " observations cannot support " +
                                                std::to_string(s) + " states");
  }
  Rng rng(seed);
  const KMeansResult fit = kmeans(pooled, s, rng);

  KMeansStates out;
  out.centroids = fit.centroids;
  out.inertia = fit.inertia;
  std::size_t cursor = 0;
  for (const auto& seq : betas) {
    std::vector<int> labels(static_cast<std::size_t>(seq.rows()));
    for (auto& label : labels) label = fit.labels[cursor++] + 1;
    out.states.labels.push_back(std::move(labels));
  }
  return out;
}

HmmModel hmm_fit(const BetaSequences& betas, int s, std::uint64_t seed) {
  if (s < 1) {
    throw Error(errc::invalid_argument, "state count must be positive");
  }
  const Matrix pooled = pool_observations(betas);
  for (std::size_t r = 0; r < betas.size(); ++r) {
    if (betas[r].rows() < 2) {
      throw Error(errc::too_few_observations,
                  "sequence " + std::to_string(r) + " is shorter than 2 steps");
    }
  }
  const auto d = pooled.cols();
  if (pooled.rows() < static_cast<Eigen::Index>(s) * (d + 2)) {
    throw Error(errc::too_few_observations,
                "need at least S*(D+2) = " + std::to_string(s * (d + 2)) + " observations, got " +
                    std::to_string(pooled.rows()));
  }

  Rng rng(seed);
  const KMeansStates init = kmeans_states(betas, s, rng.substream(0).seed());

  const Eigen::RowVectorXd global_mean = pooled.colwise().mean();
  Eigen::RowVectorXd global_var =
      (pooled.rowwise() - global_mean).array().square().colwise().mean();
  global_var = global_var.cwiseMax(kVarianceFloor);

  HmmModel model;
  model.num_states = s;
  model.initial = Vector::Constant(s, 1.0 / s);
  model.transition = Matrix::Constant(s, s, s > 1 ? 0.1 / (s - 1) : 1.0);
  for (int m = 0; m < s; ++m) {
    if (s > 1) model.transition(m, m) = 0.9;
  }
  model.means = init.centroids;
  model.variances = Matrix::Zero(s, d);
  {
    // Per-cluster diagonal variances around the k-means centroids.
    const std::vector<int> flat = init.states.flatten();
    Vector counts = Vector::Zero(s);
    for (Eigen::Index i = 0; i < pooled.rows(); ++i) {
      const int m = flat[static_cast<std::size_t>(i)] - 1;
      model.variances.row(m) +=
          (pooled.row(i) - model.means.row(m)).array().square().matrix();
      counts(m) += 1.0;
    }
    for (int m = 0; m < s; ++m) {
      if (counts(m) > 0.0) model.variances.row(m) /= counts(m);
      model.variances.row(m) = model.variances.row(m).cwiseMax(kVarianceFloor);
    }
  }

  constexpr int kMaxIter = 500;
  constexpr double kRelTol = 1e-6;
  double ll_prev = -std::numeric_limits<double>::infinity();
  bool reseeded_once = false;

  for (int iter = 0; iter < kMaxIter; ++iter) {
    double ll = 0.0;
    Vector pi0_acc = Vector::Zero(s);
    Matrix xi_acc = Matrix::Zero(s, s);
    Vector occupancy = Vector::Zero(s);
    Vector trans_occ = Vector::Zero(s);
    Matrix mean_acc = Matrix::Zero(s, d);

    std::vector<Matrix> gammas;
    gammas.reserve(betas.size());
    for (const auto& seq : betas) {
      ForwardBackward fb = forward_backward(model, seq);
      ll += fb.log_likelihood;
      pi0_acc += fb.gamma.row(0).transpose();
      xi_acc += fb.xi_sum;
      for (Eigen::Index t = 0; t < seq.rows(); ++t) {
        occupancy += fb.gamma.row(t).transpose();
        if (t + 1 < seq.rows()) trans_occ += fb.gamma.row(t).transpose();
        mean_acc += fb.gamma.row(t).transpose() * seq.row(t);
      }
      gammas.push_back(std::move(fb.gamma));
    }

    model.ll_history.push_back(ll);
    model.log_likelihood = ll;
    model.iterations = iter + 1;
    if (ll - ll_prev < kRelTol * std::max(1.0, std::abs(ll_prev))) {
      model.converged = true;
      break;
    }
    ll_prev = ll;

    // A state whose responsibility mass vanished gets one fresh start at a
    // random observation; a second collapse is an error.
    bool degenerate = false;
    for (int m = 0; m < s; ++m) {
      if (occupancy(m) < 1e-8) {
        if (reseeded_once) {
          throw Error(errc::degenerate_state,
                      "state " + std::to_string(m + 1) + " lost all responsibility mass twice");
        }
        const auto pick = static_cast<Eigen::Index>(
            rng.uniform_int(static_cast<std::uint64_t>(pooled.rows())));
        model.means.row(m) = pooled.row(pick);
        model.variances.row(m) = global_var;
        reseeded_once = true;
        degenerate = true;
      }
    }
    if (degenerate) continue;  // redo the E step with the reseeded state

    model.initial = pi0_acc / pi0_acc.sum();
    for (int l = 0; l < s; ++l) {
      if (trans_occ(l) > 0.0) {
        model.transition.row(l) = xi_acc.row(l) / trans_occ(l);
      }
      const double row_sum = model.transition.row(l).sum();
      if (row_sum > 0.0) model.transition.row(l) /= row_sum;
    }
    for (int m = 0; m < s; ++m) {
      model.means.row(m) = mean_acc.row(m) / occupancy(m);
    }
    model.variances.setZero();
    {
      std::size_t r = 0;
      for (const auto& seq : betas) {
        const Matrix& gamma = gammas[r++];
        for (Eigen::Index t = 0; t < seq.rows(); ++t) {
          for (int m = 0; m < s; ++m) {
            model.variances.row(m) +=
                gamma(t, m) * (seq.row(t) - model.means.row(m)).array().square().matrix();
          }
        }
      }
    }
    for (int m = 0; m < s; ++m) {
      model.variances.row(m) = (model.variances.row(m) / occupancy(m)).cwiseMax(kVarianceFloor);
    }
  }

  canonicalize_states(model);
  return model;
}

StateSequence viterbi(const BetaSequences& betas, const HmmModel& model) {
  if (betas.empty()) {
    throw Error(errc::too_few_observations, "no sequences supplied");
  }
  const int s = model.num_states;
  StateSequence out;

  Matrix log_trans(s, s);
  for (int l = 0; l < s; ++l) {
    for (int m = 0; m < s; ++m) log_trans(l, m) = std::log(model.transition(l, m));
  }

  for (std::size_t r = 0; r < betas.size(); ++r) {
    const Matrix& seq = betas[r];
    if (seq.cols() != model.means.cols()) {
      throw Error(errc::dimension_mismatch, "sequence " + std::to_string(r) + " has dimension " +
                                                std::to_string(seq.cols()) + " but the model has " +
                                                std::to_string(model.means.cols()));
    }
    const int t_len = static_cast<int>(seq.rows());
    Matrix delta(t_len, s);
    Eigen::MatrixXi argmax(t_len, s);

    for (int m = 0; m < s; ++m) {
      delta(0, m) = std::log(model.initial(m)) + log_emission(model, m, seq.row(0));
    }
    for (int t = 1; t < t_len; ++t) {
      for (int m = 0; m < s; ++m) {
        int best_l = 0;
        double best = delta(t - 1, 0) + log_trans(0, m);
        for (int l = 1; l < s; ++l) {
          const double cand = delta(t - 1, l) + log_trans(l, m);
          if (cand > best) {  // strict: ties stay on the lower index
            best = cand;
            best_l = l;
          }
        }
        delta(t, m) = best + log_emission(model, m, seq.row(t));
        argmax(t, m) = best_l;
      }
    }

    std::vector<int> path(static_cast<std::size_t>(t_len));
    int state = 0;
    for (int m = 1; m < s; ++m) {
      if (delta(t_len - 1, m) > delta(t_len - 1, state)) state = m;
    }
    for (int t = t_len - 1; t >= 0; --t) {
      path[static_cast<std::size_t>(t)] = state + 1;
      if (t > 0) state = argmax(t, state);
    }
    out.labels.push_back(std::move(path));
  }
  return out;
}

std::vector<Matrix> state_theta(const HmmModel& model) {
  const int k = blockmodel::triangular_k(model.dim());
  std::vector<Matrix> out;
  out.reserve(static_cast<std::size_t>(model.num_states));
  for (int m = 0; m < model.num_states; ++m) {
    out.push_back(blockmodel::from_beta(model.means.row(m).transpose(), k));
  }
  return out;
}

StateCountScan select_num_states(const BetaSequences& betas, int s_max, std::uint64_t seed) {
  if (s_max < 2) {
    throw Error(errc::invalid_argument, "candidate state count must reach at least 2");
  }
  const Matrix pooled = pool_observations(betas);
  if (pooled.rows() < s_max) {
    throw Error(errc::too_few_observations, std::to_string(pooled.rows()) +
                                                " observations cannot support " +
                                                std::to_string(s_max) + " states");
  }

  Rng rng(seed);
  StateCountScan scan;
  for (int s = 2; s <= s_max; ++s) {
    const KMeansStates fit = kmeans_states(betas, s, rng.substream(static_cast<std::uint64_t>(s)).seed());
    const std::vector<int> labels = fit.states.flatten();
    StateCountScan::Row row;
    row.s = s;
    row.silhouette = metrics::silhouette(pooled, labels);
    row.davies_bouldin = metrics::davies_bouldin(pooled, labels);
    row.inertia = fit.inertia;
    scan.scores.push_back(row);
  }

  scan.by_silhouette = scan.scores.front().s;
  scan.by_davies_bouldin = scan.scores.front().s;
  for (const auto& row : scan.scores) {
    if (row.silhouette >
        scan.scores[static_cast<std::size_t>(scan.by_silhouette - 2)].silhouette) {
      scan.by_silhouette = row.s;
    }
    if (row.davies_bouldin <
        scan.scores[static_cast<std::size_t>(scan.by_davies_bouldin - 2)].davies_bouldin) {
      scan.by_davies_bouldin = row.s;
    }
  }
  return scan;
}

}  // namespace blockdyn::dynstate
