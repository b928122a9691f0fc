#include <cmath>
#include <vector>

#include "blockdyn/errors.hpp"
#include "blockdyn/metrics.hpp"
#include "blockdyn/rng.hpp"
#include "doctest.h"

using namespace blockdyn;
using namespace blockdyn::metrics;

namespace {

// Pair-count contingency computed the slow way: walk every unordered pair and
// tally agreement categories directly.
struct PairTally {
  long long both_same = 0;    // same cluster in a and in b
  long long both_diff = 0;    // different in a and in b
  long long a_same_only = 0;  // same in a, different in b
  long long b_same_only = 0;  // different in a, same in b
};

PairTally tally_pairs(const std::vector<int>& a, const std::vector<int>& b) {
  PairTally t;
  const int n = static_cast<int>(a.size());
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const bool sa = a[static_cast<std::size_t>(i)] == a[static_cast<std::size_t>(j)];
      const bool sb = b[static_cast<std::size_t>(i)] == b[static_cast<std::size_t>(j)];
      if (sa && sb)
        ++t.both_same;
      else if (!sa && !sb)
        ++t.both_diff;
      else if (sa)
        ++t.a_same_only;
      else
        ++t.b_same_only;
    }
  }
  return t;
}

double ari_by_definition(const std::vector<int>& a, const std::vector<int>& b) {
  const PairTally t = tally_pairs(a, b);
  const double n11 = static_cast<double>(t.both_same);
  const double n10 = static_cast<double>(t.a_same_only);
  const double n01 = static_cast<double>(t.b_same_only);
  const double total = static_cast<double>(pair_count(static_cast<long long>(a.size())));
  const double expected = (n11 + n10) * (n11 + n01) / total;
  const double maximum = 0.5 * ((n11 + n10) + (n11 + n01));
  if (std::abs(maximum - expected) < 1e-15) return 1.0;
  return (n11 - expected) / (maximum - expected);
}

std::vector<int> random_labels(Rng& rng, int n, int max_k) {
  std::vector<int> labels(static_cast<std::size_t>(n));
  for (auto& l : labels) l = 1 + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(max_k)));
  return labels;
}

}  // namespace

TEST_CASE("adjusted_rand_index is 1 for identical partitions") {
  std::vector<int> a{1, 1, 2, 2, 3, 3, 3};
  CHECK(adjusted_rand_index(a, a) == doctest::Approx(1.0).epsilon(1e-12));
  // Label names are irrelevant; only co-membership matters.
  std::vector<int> relabeled{7, 7, 2, 2, 5, 5, 5};
  CHECK(adjusted_rand_index(a, relabeled) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("adjusted_rand_index is 0 for singletons vs one cluster") {
  std::vector<int> singletons{1, 2, 3, 4, 5, 6};
  std::vector<int> lump{1, 1, 1, 1, 1, 1};
  CHECK(adjusted_rand_index(singletons, lump) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("adjusted_rand_index matches a pair-count evaluation on random partitions") {
  Rng rng(411);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 3 + static_cast<int>(rng.uniform_int(18));
    const int ka = 1 + static_cast<int>(rng.uniform_int(5));
    const int kb = 1 + static_cast<int>(rng.uniform_int(5));
    const auto a = random_labels(rng, n, ka);
    const auto b = random_labels(rng, n, kb);
    CHECK(adjusted_rand_index(a, b) == doctest::Approx(ari_by_definition(a, b)).epsilon(1e-12));
  }
}

TEST_CASE("adjusted_rand_index rejects length mismatch") {
  std::vector<int> a{1, 2, 3};
  std::vector<int> b{1, 2};
  CHECK_THROWS_AS(adjusted_rand_index(a, b), Error);
}

TEST_CASE("rand_index basic values") {
  std::vector<int> a{1, 1, 2, 2};
  CHECK(rand_index(a, a) == doctest::Approx(1.0).epsilon(1e-12));
  // One pair, and the partitions disagree on it completely.
  std::vector<int> split{1, 2};
  std::vector<int> joined{1, 1};
  CHECK(rand_index(split, joined) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("rand_index matches agreeing-pair fraction on random partitions") {
  Rng rng(412);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + static_cast<int>(rng.uniform_int(19));
    const auto a = random_labels(rng, n, 4);
    const auto b = random_labels(rng, n, 4);
    const PairTally t = tally_pairs(a, b);
    const double expected = static_cast<double>(t.both_same + t.both_diff) /
                            static_cast<double>(pair_count(n));
    CHECK(rand_index(a, b) == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("f1_pairwise perfect and degenerate cases") {
  std::vector<int> truth{1, 1, 2, 2, 3};
  const PairF1 perfect = f1_pairwise(truth, truth);
  CHECK(perfect.precision == doctest::Approx(1.0));
  CHECK(perfect.recall == doctest::Approx(1.0));
  CHECK(perfect.f1 == doctest::Approx(1.0));

  // An all-singleton estimate proposes no pairs at all.
  std::vector<int> singletons{1, 2, 3, 4, 5};
  const PairF1 none = f1_pairwise(truth, singletons);
  CHECK(none.precision == doctest::Approx(0.0));
  CHECK(none.recall == doctest::Approx(0.0));
  CHECK(none.f1 == doctest::Approx(0.0));
}

TEST_CASE("f1_pairwise worked example") {
  // Truth pools {1,2,3} and {4,5,6}: six positive pairs. The estimate keeps
  // (1,2) and (5,6) and invents (3,4): precision 2/3, recall 2/6.
  std::vector<int> truth{1, 1, 1, 2, 2, 2};
  std::vector<int> est{1, 1, 2, 2, 3, 3};
  const PairF1 r = f1_pairwise(truth, est);
  CHECK(r.precision == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(r.recall == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(r.f1 == doctest::Approx(4.0 / 9.0).epsilon(1e-12));
}

TEST_CASE("f1_pairwise matches direct pair counting on random partitions") {
  Rng rng(413);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 4 + static_cast<int>(rng.uniform_int(12));
    const auto truth = random_labels(rng, n, 3);
    const auto est = random_labels(rng, n, 3);
    const PairTally t = tally_pairs(truth, est);
    const double tp = static_cast<double>(t.both_same);
    const double est_pos = tp + static_cast<double>(t.b_same_only);
    const double true_pos = tp + static_cast<double>(t.a_same_only);
    const PairF1 r = f1_pairwise(truth, est);
    const double precision = est_pos > 0 ? tp / est_pos : 0.0;
    const double recall = true_pos > 0 ? tp / true_pos : 0.0;
    CHECK(r.precision == doctest::Approx(precision).epsilon(1e-12));
    CHECK(r.recall == doctest::Approx(recall).epsilon(1e-12));
    const double f1 = (precision + recall) > 0 ? 2 * precision * recall / (precision + recall) : 0.0;
    CHECK(r.f1 == doctest::Approx(f1).epsilon(1e-12));
  }
}

TEST_CASE("theta_mse exact values") {
  std::vector<Matrix> truth;
  for (int t = 0; t < 5; ++t) {
    Matrix m = Matrix::Constant(4, 4, 0.3 + 0.05 * t);
    truth.push_back(m);
  }
  CHECK(theta_mse(truth, truth) == doctest::Approx(0.0).epsilon(1e-15));

  // A constant offset c on a K-by-K matrix has squared Frobenius norm c^2 K^2.
  const double c = 0.07;
  std::vector<Matrix> shifted;
  for (const auto& m : truth) shifted.push_back(m.array() + c);
  CHECK(theta_mse(shifted, truth) == doctest::Approx(c * c * 16.0).epsilon(1e-12));
}

TEST_CASE("theta_mse matches elementwise evaluation on random matrices") {
  Rng rng(414);
  std::vector<Matrix> est, truth;
  const int T = 7, K = 5;
  double expected = 0.0;
  for (int t = 0; t < T; ++t) {
    Matrix a(K, K), b(K, K);
    for (int i = 0; i < K; ++i)
      for (int j = 0; j < K; ++j) {
        a(i, j) = rng.uniform();
        b(i, j) = rng.uniform();
      }
    expected += (a - b).squaredNorm();
    est.push_back(a);
    truth.push_back(b);
  }
  expected /= T;
  CHECK(theta_mse(est, truth) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("theta_mse rejects mismatched shapes") {
  std::vector<Matrix> a{Matrix::Zero(3, 3)};
  std::vector<Matrix> b{Matrix::Zero(4, 4)};
  CHECK_THROWS_AS(theta_mse(a, b), Error);
  std::vector<Matrix> longer{Matrix::Zero(3, 3), Matrix::Zero(3, 3)};
  CHECK_THROWS_AS(theta_mse(a, longer), Error);
}

TEST_CASE("silhouette near 1 for well separated clusters, 0 for identical points") {
  Matrix data(6, 2);
  data << 0.0, 0.0, 0.1, 0.0, 0.0, 0.1, 10.0, 10.0, 10.1, 10.0, 10.0, 10.1;
  std::vector<int> labels{1, 1, 1, 2, 2, 2};
  CHECK(silhouette(data, labels) > 0.95);

  Matrix flat = Matrix::Zero(4, 2);
  std::vector<int> two{1, 1, 2, 2};
  CHECK(silhouette(flat, two) == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("silhouette matches its definition on a 12-point configuration") {
  Rng rng(415);
  const int n = 12, d = 3;
  Matrix data(n, d);
  std::vector<int> labels(n);
  for (int i = 0; i < n; ++i) {
    labels[static_cast<std::size_t>(i)] = 1 + i % 3;
    for (int j = 0; j < d; ++j) data(i, j) = rng.normal(2.0 * (i % 3), 1.0);
  }

  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    double a_sum = 0.0;
    int a_count = 0;
    double b_best = std::numeric_limits<double>::infinity();
    for (int k = 1; k <= 3; ++k) {
      if (k == labels[static_cast<std::size_t>(i)]) continue;
      double sum = 0.0;
      int count = 0;
      for (int j = 0; j < n; ++j) {
        if (labels[static_cast<std::size_t>(j)] != k) continue;
        sum += (data.row(i) - data.row(j)).norm();
        ++count;
      }
      b_best = std::min(b_best, sum / count);
    }
    for (int j = 0; j < n; ++j) {
      if (j == i || labels[static_cast<std::size_t>(j)] != labels[static_cast<std::size_t>(i)])
        continue;
      a_sum += (data.row(i) - data.row(j)).norm();
      ++a_count;
    }
    const double a = a_sum / a_count;
    const double denom = std::max(a, b_best);
    total += denom > 0 ? (b_best - a) / denom : 0.0;
  }
  CHECK(silhouette(data, labels) == doctest::Approx(total / n).epsilon(1e-10));
}

TEST_CASE("silhouette requires at least two clusters") {
  Matrix data = Matrix::Random(5, 2);
  std::vector<int> labels{1, 1, 1, 1, 1};
  CHECK_THROWS_AS(silhouette(data, labels), Error);
  try {
    silhouette(data, labels);
  } catch (const Error& e) {
    CHECK(e.code() == errc::single_cluster);
  }
}

TEST_CASE("davies_bouldin worked 1-d example") {
  // Clusters {0,2} and {10,12}: centroids 1 and 11, mean scatter 1 each,
  // centroid distance 10, so both ratios are (1+1)/10.
  Matrix data(4, 1);
  data << 0.0, 2.0, 10.0, 12.0;
  std::vector<int> labels{1, 1, 2, 2};
  CHECK(davies_bouldin(data, labels) == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("davies_bouldin prefers the better separated labeling") {
  Rng rng(416);
  const int n = 30;
  Matrix data(n, 2);
  std::vector<int> good(n), bad(n);
  for (int i = 0; i < n; ++i) {
    const int c = i % 3;
    good[static_cast<std::size_t>(i)] = 1 + c;
    bad[static_cast<std::size_t>(i)] = 1 + (i / 10 + i) % 3;
    data(i, 0) = rng.normal(6.0 * c, 0.5);
    data(i, 1) = rng.normal(-3.0 * c, 0.5);
  }
  CHECK(davies_bouldin(data, good) < davies_bouldin(data, bad));
}
