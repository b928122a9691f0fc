#include "blockdyn/metrics.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <unordered_map>

#include "blockdyn/errors.hpp"

namespace blockdyn::metrics {

namespace {

double comb2(double n) { return n * (n - 1.0) / 2.0; }

// Compresses arbitrary labels to 0..K-1.
std::vector<int> dense_labels(const std::vector<int>& labels, int& k_out) {
  std::unordered_map<int, int> remap;
  std::vector<int> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto [it, inserted] = remap.emplace(labels[i], static_cast<int>(remap.size()));
    (void)inserted;
    out[i] = it->second;
  }
  k_out = static_cast<int>(remap.size());
  return out;
}

struct PairCounts {
  double same_both = 0.0;   // pairs co-clustered in a and in b
  double same_a = 0.0;      // pairs co-clustered in a
  double same_b = 0.0;      // pairs co-clustered in b
  double total = 0.0;       // all pairs
};

PairCounts contingency_pairs(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) {
    throw Error(errc::length_mismatch, "label vectors have sizes " + std::to_string(a.size()) +
                                           " and " + std::to_string(b.size()));
  }
  if (a.empty()) {
    throw Error(errc::length_mismatch, "label vectors are empty");
  }
  int ka = 0, kb = 0;
  const std::vector<int> da = dense_labels(a, ka);
  const std::vector<int> db = dense_labels(b, kb);

  std::vector<double> table(static_cast<std::size_t>(ka) * static_cast<std::size_t>(kb), 0.0);
  std::vector<double> rows(static_cast<std::size_t>(ka), 0.0);
  std::vector<double> cols(static_cast<std::size_t>(kb), 0.0);
  for (std::size_t i = 0; i < da.size(); ++i) {
    table[static_cast<std::size_t>(da[i]) * static_cast<std::size_t>(kb) +
          static_cast<std::size_t>(db[i])] += 1.0;
    rows[static_cast<std::size_t>(da[i])] += 1.0;
    cols[static_cast<std::size_t>(db[i])] += 1.0;
  }

  PairCounts out;
  for (const double n : table) out.same_both += comb2(n);
  for (const double n : rows) out.same_a += comb2(n);
  for (const double n : cols) out.same_b += comb2(n);
  out.total = comb2(static_cast<double>(a.size()));
  return out;
}

}  // namespace

double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
  const PairCounts pc = contingency_pairs(a, b);
  if (pc.total == 0.0) return 1.0;
  const double expected = pc.same_a * pc.same_b / pc.total;
  const double max_index = 0.5 * (pc.same_a + pc.same_b);
  const double denom = max_index - expected;
  if (denom == 0.0) return 1.0;
  return (pc.same_both - expected) / denom;
}

double rand_index(const std::vector<int>& a, const std::vector<int>& b) {
  const PairCounts pc = contingency_pairs(a, b);
  if (pc.total == 0.0) return 1.0;
  const double agreements = pc.total + 2.0 * pc.same_both - pc.same_a - pc.same_b;
  return agreements / pc.total;
}

PairF1 f1_pairwise(const std::vector<int>& truth, const std::vector<int>& est) {
  const PairCounts pc = contingency_pairs(truth, est);
  PairF1 out;
  const double tp = pc.same_both;
  out.precision = pc.same_b > 0.0 ? tp / pc.same_b : 0.0;
  out.recall = pc.same_a > 0.0 ? tp / pc.same_a : 0.0;
  const double pr = out.precision + out.recall;
  out.f1 = pr > 0.0 ? 2.0 * out.precision * out.recall / pr : 0.0;
  return out;
}

double theta_mse(const std::vector<Matrix>& est, const std::vector<Matrix>& truth) {
  if (est.size() != truth.size()) {
    throw Error(errc::shape_mismatch, "estimate and truth sequences have different lengths");
  }
  if (est.empty()) {
    throw Error(errc::shape_mismatch, "empty matrix sequences");
  }
  double total = 0.0;
  for (std::size_t t = 0; t < est.size(); ++t) {
    if (est[t].rows() != truth[t].rows() || est[t].cols() != truth[t].cols()) {
      throw Error(errc::shape_mismatch, "matrix shapes differ at position " + std::to_string(t));
    }
    total += (est[t] - truth[t]).squaredNorm();
  }
  return total / static_cast<double>(est.size());
}

namespace {

void check_clustered_data(const Matrix& data, const std::vector<int>& labels, int& k_out,
                          std::vector<int>& dense_out) {
  if (static_cast<std::size_t>(data.rows()) != labels.size()) {
    throw Error(errc::length_mismatch, "data has " + std::to_string(data.rows()) +
                                           " rows but labels has " + std::to_string(labels.size()));
  }
  dense_out = dense_labels(labels, k_out);
  if (k_out < 2) {
    throw Error(errc::single_cluster, "need at least two clusters, got " + std::to_string(k_out));
  }
}

}  // namespace

double silhouette(const Matrix& data, const std::vector<int>& labels) {
  int k = 0;
  std::vector<int> dense;
  check_clustered_data(data, labels, k, dense);
  const int n = static_cast<int>(data.rows());

  std::vector<int> sizes(static_cast<std::size_t>(k), 0);
  for (const int l : dense) ++sizes[static_cast<std::size_t>(l)];

  double total = 0.0;
  std::vector<double> mean_dist(static_cast<std::size_t>(k));
  for (int i = 0; i < n; ++i) {
    const int ci = dense[static_cast<std::size_t>(i)];
    if (sizes[static_cast<std::size_t>(ci)] == 1) continue;  // singleton scores 0

    std::fill(mean_dist.begin(), mean_dist.end(), 0.0);
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      const double d = (data.row(i) - data.row(j)).norm();
      mean_dist[static_cast<std::size_t>(dense[static_cast<std::size_t>(j)])] += d;
    }
    const double a = mean_dist[static_cast<std::size_t>(ci)] /
                     static_cast<double>(sizes[static_cast<std::size_t>(ci)] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (int c = 0; c < k; ++c) {
      if (c == ci || sizes[static_cast<std::size_t>(c)] == 0) continue;
      b = std::min(b, mean_dist[static_cast<std::size_t>(c)] /
                          static_cast<double>(sizes[static_cast<std::size_t>(c)]));
    }
    const double denom = std::max(a, b);
    total += denom > 0.0 ? (b - a) / denom : 0.0;
  }
  return total / static_cast<double>(n);
}

double davies_bouldin(const Matrix& data, const std::vector<int>& labels) {
  int k = 0;
  std::vector<int> dense;
  check_clustered_data(data, labels, k, dense);
  const int n = static_cast<int>(data.rows());
  const auto d = data.cols();

  Matrix centroids = Matrix::Zero(k, d);
  std::vector<double> sizes(static_cast<std::size_t>(k), 0.0);
  for (int i = 0; i < n; ++i) {
    centroids.row(dense[static_cast<std::size_t>(i)]) += data.row(i);
    sizes[static_cast<std::size_t>(dense[static_cast<std::size_t>(i)])] += 1.0;
  }
  for (int c = 0; c < k; ++c) centroids.row(c) /= sizes[static_cast<std::size_t>(c)];

  std::vector<double> scatter(static_cast<std::size_t>(k), 0.0);
  for (int i = 0; i < n; ++i) {
    const int c = dense[static_cast<std::size_t>(i)];
    scatter[static_cast<std::size_t>(c)] += (data.row(i) - centroids.row(c)).norm();
  }
  for (int c = 0; c < k; ++c) scatter[static_cast<std::size_t>(c)] /= sizes[static_cast<std::size_t>(c)];

  double total = 0.0;
  for (int c = 0; c < k; ++c) {
    double worst = 0.0;
    for (int l = 0; l < k; ++l) {
      if (l == c) continue;
      const double sep = (centroids.row(c) - centroids.row(l)).norm();
      const double spread = scatter[static_cast<std::size_t>(c)] + scatter[static_cast<std::size_t>(l)];
      double ratio;
      if (sep > 0.0) {
        ratio = spread / sep;
      } else {
        ratio = spread > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
      }
      worst = std::max(worst, ratio);
    }
    total += worst;
  }
  return total / static_cast<double>(k);
}

}  // namespace blockdyn::metrics
