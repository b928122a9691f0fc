#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "blockdyn/types.hpp"

namespace blockdyn::netbuild {

// One subject's recording: T scans (rows) by N nodes (columns).
struct TimeSeriesPanel {
  std::string subject;
  Matrix values;
};

// Windowed correlation matrices in temporal order.
struct CorrelationSequence {
  std::vector<Matrix> matrices;
  int window_length = 0;
  int step = 1;
  int size() const { return static_cast<int>(matrices.size()); }
};

// Pearson correlation over sliding windows of `window_length` scans advanced
// by `step`. A panel with T scans yields floor((T - L) / step) + 1 windows.
// Throws WindowTooLong when L exceeds T and ZeroVarianceColumn when a node is
// constant within some window (the message names the window and column).
CorrelationSequence sliding_window_correlation(const TimeSeriesPanel& panel, int window_length,
                                               int step);

enum class TiePolicy {
  lexicographic,  // break |C| ties by lowest (i, j); always yields the exact edge count
  strict,         // refuse to threshold when ties straddle the cutoff
};

// Keeps the ceil(kappa * N(N-1)/2) strongest connections by |C| as an
// unweighted graph; everything else (including the diagonal) is dropped.
BinaryMatrix proportional_threshold(const Matrix& corr, double kappa,
                                    TiePolicy policy = TiePolicy::lexicographic);

// Elementwise mean of a correlation sequence.
Matrix time_average(const CorrelationSequence& seq);

// Mean inverse shortest-path length over ordered node pairs; unreachable
// pairs contribute 0. Equals 1 on the complete graph and 0 on the empty one.
double global_efficiency(const BinaryMatrix& w);

struct CostEfficiencyRow {
  double kappa = 0.0;
  double global_efficiency = 0.0;
  double modularity_remapped = 0.0;  // Newman-Girvan Q mapped from [-0.5, 1] onto [0, 1]
  double cost_efficiency = 0.0;      // efficiency minus cost, E - kappa
};

struct CostEfficiencyScan {
  double kappa_star = 0.0;  // grid value maximizing cost efficiency (first on ties)
  std::vector<CostEfficiencyRow> table;
};

// Thresholds `corr` at every grid density, scoring each graph by global
// efficiency minus cost; community structure is summarized alongside via a
// seeded modularity search per graph.
CostEfficiencyScan cost_efficiency_scan(const Matrix& corr, const std::vector<double>& kappa_grid,
                                        std::uint64_t seed);

}  // namespace blockdyn::netbuild
