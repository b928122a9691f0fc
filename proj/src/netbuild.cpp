#include "blockdyn/netbuild.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <string>
#include <tuple>

#include "blockdyn/community.hpp"
#include "blockdyn/errors.hpp"
#include "blockdyn/rng.hpp"

namespace blockdyn::netbuild {

namespace {

void check_symmetric(const Matrix& m, const char* what) {
  if (m.rows() != m.cols()) {
    throw Error(errc::invalid_argument, std::string(what) + " must be square");
  }
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < m.cols(); ++j) {
      if (std::abs(m(i, j) - m(j, i)) > 1e-12) {
        throw Error(errc::invalid_argument, std::string(what) + " must be symmetric");
      }
    }
  }
}

}  // namespace

CorrelationSequence sliding_window_correlation(const TimeSeriesPanel& panel, int window_length,
                                               int step) {
  const int t_total = static_cast<int>(panel.values.rows());
  const int n = static_cast<int>(panel.values.cols());
  if (n < 2) {
    throw Error(errc::invalid_argument, "need at least two nodes, got " + std::to_string(n));
  }
  if (window_length < 2) {
    throw Error(errc::invalid_argument, "window length must be at least 2");
  }
  if (step < 1) {
    throw Error(errc::invalid_argument, "step must be positive");
  }
  if (window_length > t_total) {
    throw Error(errc::window_too_long, "window of " + std::to_string(window_length) +
                                           " scans exceeds series length " +
                                           std::to_string(t_total));
  }

  CorrelationSequence out;
  out.window_length = window_length;
  out.step = step;
  const int num_windows = (t_total - window_length) / step + 1;
  out.matrices.reserve(static_cast<std::size_t>(num_windows));

  Matrix centered(window_length, n);
  for (int w = 0; w < num_windows; ++w) {
    const int start = w * step;
    const auto block = panel.values.block(start, 0, window_length, n);
    for (int j = 0; j < n; ++j) {
      const double lo = block.col(j).minCoeff();
      const double hi = block.col(j).maxCoeff();
      if (lo == hi) {
        throw Error(errc::zero_variance_column,
                    "column " + std::to_string(j) + " is constant in window starting at scan " +
                        std::to_string(start));
      }
      centered.col(j) = block.col(j).array() - block.col(j).mean();
    }
    Matrix corr(n, n);
    Vector sq = centered.colwise().squaredNorm();
    for (int i = 0; i < n; ++i) {
      corr(i, i) = 1.0;
      for (int j = i + 1; j < n; ++j) {
        double r = centered.col(i).dot(centered.col(j)) / std::sqrt(sq(i) * sq(j));
        r = std::clamp(r, -1.0, 1.0);
        corr(i, j) = r;
        corr(j, i) = r;
      }
    }
    out.matrices.push_back(std::move(corr));
  }
  return out;
}

BinaryMatrix proportional_threshold(const Matrix& corr, double kappa, TiePolicy policy) {
  check_symmetric(corr, "correlation matrix");
  const int n = static_cast<int>(corr.rows());
  if (n < 2) {
    throw Error(errc::invalid_argument, "need at least two nodes");
  }
  if (!(kappa > 0.0 && kappa <= 1.0)) {
    throw Error(errc::invalid_argument, "density must lie in (0, 1], got " + std::to_string(kappa));
  }

  const long long total = pair_count(n);
  const auto keep = static_cast<long long>(std::ceil(kappa * static_cast<double>(total)));

  std::vector<std::tuple<double, int, int>> ranked;
  ranked.reserve(static_cast<std::size_t>(total));
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      ranked.emplace_back(std::abs(corr(i, j)), i, j);
    }
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) > std::get<0>(b);
    if (std::get<1>(a) != std::get<1>(b)) return std::get<1>(a) < std::get<1>(b);
    return std::get<2>(a) < std::get<2>(b);
  });

  if (policy == TiePolicy::strict && keep < total &&
      std::get<0>(ranked[static_cast<std::size_t>(keep) - 1]) ==
          std::get<0>(ranked[static_cast<std::size_t>(keep)])) {
    const double tied = std::get<0>(ranked[static_cast<std::size_t>(keep)]);
    long long count = 0;
    for (const auto& [v, i, j] : ranked) count += v == tied ? 1 : 0;
    throw Error(errc::degenerate_ties, std::to_string(count) + " pairs tied at |C| = " +
                                           std::to_string(tied) + " straddle the cutoff");
  }

  BinaryMatrix w = BinaryMatrix::Zero(n, n);
  for (long long e = 0; e < keep; ++e) {
    const auto& [v, i, j] = ranked[static_cast<std::size_t>(e)];
    w(i, j) = 1;
    w(j, i) = 1;
  }
  return w;
}

Matrix time_average(const CorrelationSequence& seq) {
  if (seq.matrices.empty()) {
    throw Error(errc::empty_sequence, "no correlation windows to average");
  }
  Matrix avg = seq.matrices.front();
  for (std::size_t t = 1; t < seq.matrices.size(); ++t) avg += seq.matrices[t];
  return avg / static_cast<double>(seq.matrices.size());
}

double global_efficiency(const BinaryMatrix& w) {
  const int n = static_cast<int>(w.rows());
  if (w.cols() != n) {
    throw Error(errc::invalid_argument, "adjacency matrix must be square");
  }
  if (n < 2) return 0.0;

  std::vector<std::vector<int>> adj(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (w(i, j) != w(j, i)) {
        throw Error(errc::invalid_argument, "adjacency matrix must be symmetric");
      }
      if (w(i, j) != 0) {
        adj[static_cast<std::size_t>(i)].push_back(j);
        adj[static_cast<std::size_t>(j)].push_back(i);
      }
    }
  }

  double total = 0.0;
  std::vector<int> dist(static_cast<std::size_t>(n));
  std::deque<int> queue;
  for (int src = 0; src < n; ++src) {
    std::fill(dist.begin(), dist.end(), -1);
    dist[static_cast<std::size_t>(src)] = 0;
    queue.clear();
    queue.push_back(src);
    while (!queue.empty()) {
      const int u = queue.front();
      queue.pop_front();
      for (const int v : adj[static_cast<std::size_t>(u)]) {
        if (dist[static_cast<std::size_t>(v)] < 0) {
          dist[static_cast<std::size_t>(v)] = dist[static_cast<std::size_t>(u)] + 1;
          queue.push_back(v);
        }
      }
    }
    for (int j = 0; j < n; ++j) {
      if (j != src && dist[static_cast<std::size_t>(j)] > 0) {
        total += 1.0 / static_cast<double>(dist[static_cast<std::size_t>(j)]);
      }
    }
  }
  return total / (static_cast<double>(n) * static_cast<double>(n - 1));
}

CostEfficiencyScan cost_efficiency_scan(const Matrix& corr, const std::vector<double>& kappa_grid,
                                        std::uint64_t seed) {
  if (kappa_grid.empty()) {
    throw Error(errc::empty_grid, "density grid is empty");
  }
  Rng rng(seed);

  CostEfficiencyScan scan;
  scan.table.reserve(kappa_grid.size());
  std::size_t best = 0;
  for (std::size_t g = 0; g < kappa_grid.size(); ++g) {
    const double kappa = kappa_grid[g];
    const BinaryMatrix w = proportional_threshold(corr, kappa);
    CostEfficiencyRow row;
    row.kappa = kappa;
    row.global_efficiency = global_efficiency(w);
    const Membership part = community::louvain(w, rng.substream(g).seed());
    const double q = community::modularity(w, part);
    row.modularity_remapped = (q + 0.5) / 1.5;
    row.cost_efficiency = row.global_efficiency - kappa;
    scan.table.push_back(row);
    if (row.cost_efficiency > scan.table[best].cost_efficiency) best = g;
  }
  scan.kappa_star = scan.table[best].kappa;
  return scan;
}

}  // namespace blockdyn::netbuild
