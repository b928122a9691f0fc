#include "blockdyn/blockmodel.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "blockdyn/errors.hpp"

namespace blockdyn::blockmodel {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

double logit(double p) { return std::log(p) - std::log1p(-p); }

double inv_logit(double b) {
  // Evaluate through exp(-|b|) only, so neither tail overflows.
  if (b >= 0.0) {
    return 1.0 / (1.0 + std::exp(-b));
  }
  const double e = std::exp(b);
  return e / (1.0 + e);
}

}  // namespace

BlockCounts block_counts(const BinaryMatrix& w, const Membership& g) {
  const int n = static_cast<int>(w.rows());
  if (w.cols() != n) {
    throw Error(errc::invalid_argument, "adjacency matrix must be square");
  }
  if (g.size() != n) {
    throw Error(errc::length_mismatch, "membership covers " + std::to_string(g.size()) +
                                           " nodes but the graph has " + std::to_string(n));
  }
  const int k = g.num_communities;

  BlockCounts out;
  out.edges = CountMatrix::Zero(k, k);
  out.pairs = CountMatrix::Zero(k, k);
  out.block_sizes = g.community_sizes();

  for (int i = 0; i < n; ++i) {
    const int ki = g.label(i) - 1;
    for (int j = i + 1; j < n; ++j) {
      if (w(i, j) != w(j, i)) {
        throw Error(errc::invalid_argument, "adjacency matrix must be symmetric");
      }
      if (w(i, j) != 0) {
        const int kj = g.label(j) - 1;
        out.edges(ki, kj) += 1;
        if (ki != kj) out.edges(kj, ki) += 1;
      }
    }
  }
  for (int a = 0; a < k; ++a) {
    const long long na = out.block_sizes[static_cast<std::size_t>(a)];
    out.pairs(a, a) = na * (na - 1) / 2;
    for (int b = a + 1; b < k; ++b) {
      const long long nb = out.block_sizes[static_cast<std::size_t>(b)];
      out.pairs(a, b) = na * nb;
      out.pairs(b, a) = na * nb;
    }
  }
  return out;
}

BlockConnectivity estimate_theta(const BlockCounts& counts) {
  const int k = static_cast<int>(counts.edges.rows());
  if (counts.pairs.rows() != k || counts.pairs.cols() != k || counts.edges.cols() != k) {
    throw Error(errc::shape_mismatch, "edge and pair count matrices disagree");
  }
  BlockConnectivity out;
  out.theta = Matrix::Zero(k, k);
  for (int a = 0; a < k; ++a) {
    if (counts.block_sizes[static_cast<std::size_t>(a)] == 0) {
      throw Error(errc::empty_block, "block " + std::to_string(a + 1) + " has no members");
    }
    for (int b = a; b < k; ++b) {
      double value;
      if (counts.pairs(a, b) > 0) {
        value = static_cast<double>(counts.edges(a, b)) / static_cast<double>(counts.pairs(a, b));
      } else {
        value = kNan;  // singleton block: no within-block pair exists
      }
      out.theta(a, b) = value;
      out.theta(b, a) = value;
    }
  }
  return out;
}

double log_likelihood(const AdjacencyTensor& w_all, const Membership& g,
                      const std::vector<BlockConnectivity>& thetas) {
  if (w_all.layers.empty()) {
    throw Error(errc::invalid_argument, "no layers supplied");
  }
  if (thetas.size() != w_all.layers.size()) {
    throw Error(errc::shape_mismatch, "got " + std::to_string(thetas.size()) +
                                          " connectivity matrices for " +
                                          std::to_string(w_all.layers.size()) + " layers");
  }
  const int k = g.num_communities;

  double total = 0.0;
  for (std::size_t layer = 0; layer < w_all.layers.size(); ++layer) {
    const BlockCounts counts = block_counts(w_all.layers[layer], g);
    const Matrix& theta = thetas[layer].theta;
    if (theta.rows() != k || theta.cols() != k) {
      throw Error(errc::shape_mismatch,
                  "connectivity matrix " + std::to_string(layer) + " is not K x K");
    }
    for (int a = 0; a < k; ++a) {
      for (int b = a; b < k; ++b) {
        const auto pairs = counts.pairs(a, b);
        if (pairs == 0) continue;  // singleton diagonal carries no observation
        const double th = theta(a, b);
        if (std::isnan(th)) {
          throw Error(errc::invalid_argument, "absent theta entry for a non-empty block pair");
        }
        if (th <= 0.0 || th >= 1.0) {
          throw Error(errc::theta_on_boundary,
                      "theta(" + std::to_string(a + 1) + "," + std::to_string(b + 1) + ") = " +
                          std::to_string(th) + " must lie strictly inside (0,1); clamp first");
        }
        const double m = static_cast<double>(counts.edges(a, b));
        total += m * std::log(th) + (static_cast<double>(pairs) - m) * std::log1p(-th);
      }
    }
  }
  return total;
}

double clamp_epsilon(const BlockCounts& counts) {
  long long max_pairs = 0;
  for (Eigen::Index a = 0; a < counts.pairs.rows(); ++a) {
    for (Eigen::Index b = a; b < counts.pairs.cols(); ++b) {
      max_pairs = std::max(max_pairs, counts.pairs(a, b));
    }
  }
  if (max_pairs == 0) return 1e-6;
  return std::max(1.0 / (2.0 * static_cast<double>(max_pairs)), 1e-6);
}

std::vector<std::pair<int, int>> beta_layout(const Matrix& theta) {
  if (theta.rows() != theta.cols()) {
    throw Error(errc::invalid_argument, "connectivity matrix must be square");
  }
  std::vector<std::pair<int, int>> layout;
  for (int a = 0; a < static_cast<int>(theta.rows()); ++a) {
    for (int b = a; b < static_cast<int>(theta.cols()); ++b) {
      if (!std::isnan(theta(a, b))) layout.emplace_back(a, b);
    }
  }
  return layout;
}

Vector to_beta(const Matrix& theta, double eps) {
  if (!(eps > 0.0 && eps < 0.5)) {
    throw Error(errc::invalid_argument, "clamp distance must lie in (0, 0.5)");
  }
  const auto layout = beta_layout(theta);
  Vector beta(static_cast<Eigen::Index>(layout.size()));
  Eigen::Index d = 0;
  for (const auto& [a, b] : layout) {
    const double th = theta(a, b);
    if (th < 0.0 || th > 1.0) {
      throw Error(errc::invalid_argument, "theta entries must lie in [0,1]");
    }
    beta(d++) = logit(std::clamp(th, eps, 1.0 - eps));
  }
  return beta;
}

Matrix from_beta(const Vector& beta, int k) {
  if (k < 1) {
    throw Error(errc::invalid_argument, "community count must be positive");
  }
  const Eigen::Index expected = static_cast<Eigen::Index>(k) * (k + 1) / 2;
  if (beta.size() != expected) {
    throw Error(errc::dimension_mismatch, "beta has length " + std::to_string(beta.size()) +
                                              " but K = " + std::to_string(k) + " needs " +
                                              std::to_string(expected));
  }
  Matrix theta(k, k);
  Eigen::Index d = 0;
  for (int a = 0; a < k; ++a) {
    for (int b = a; b < k; ++b) {
      const double value = inv_logit(beta(d++));
      theta(a, b) = value;
      theta(b, a) = value;
    }
  }
  return theta;
}

Matrix from_beta_layout(const Vector& beta, int k,
                        const std::vector<std::pair<int, int>>& layout) {
  if (beta.size() != static_cast<Eigen::Index>(layout.size())) {
    throw Error(errc::dimension_mismatch, "beta length does not match the layout");
  }
  Matrix theta = Matrix::Constant(k, k, kNan);
  for (std::size_t d = 0; d < layout.size(); ++d) {
    const auto [a, b] = layout[d];
    if (a < 0 || b < a || b >= k) {
      throw Error(errc::invalid_argument, "layout coordinate out of range");
    }
    const double value = inv_logit(beta(static_cast<Eigen::Index>(d)));
    theta(a, b) = value;
    theta(b, a) = value;
  }
  return theta;
}

int triangular_k(int d) {
  if (d >= 1) {
    const auto root = static_cast<int>(std::llround((std::sqrt(8.0 * d + 1.0) - 1.0) / 2.0));
    for (int k = std::max(1, root - 1); k <= root + 1; ++k) {
      if (k * (k + 1) / 2 == d) return k;
    }
  }
  throw Error(errc::non_triangular_dimension,
              std::to_string(d) + " is not K(K+1)/2 for any community count K");
}

}  // namespace blockdyn::blockmodel
