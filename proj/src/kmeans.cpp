#include "blockdyn/kmeans.hpp"

#include <limits>
#include <string>

#include "blockdyn/errors.hpp"

namespace blockdyn {

namespace {

Matrix seed_centroids(const Matrix& data, int k, Rng& rng) {
  const int n = static_cast<int>(data.rows());
  Matrix centroids(k, data.cols());
  centroids.row(0) = data.row(static_cast<Eigen::Index>(rng.uniform_int(static_cast<std::uint64_t>(n))));

  Vector dist2 = (data.rowwise() - centroids.row(0)).rowwise().squaredNorm();
  for (int c = 1; c < k; ++c) {
    const double total = dist2.sum();
    Eigen::Index pick = 0;
    if (total > 0.0) {
      // Sample proportionally to squared distance from the nearest chosen center.
      double target = rng.uniform() * total;
      for (Eigen::Index i = 0; i < dist2.size(); ++i) {
        target -= dist2(i);
        if (target <= 0.0) {
          pick = i;
          break;
        }
        pick = i;
      }
    } else {
      pick = static_cast<Eigen::Index>(rng.uniform_int(static_cast<std::uint64_t>(n)));
    }
    centroids.row(c) = data.row(pick);
    dist2 = dist2.cwiseMin((data.rowwise() - centroids.row(c)).rowwise().squaredNorm());
  }
  return centroids;
}

}  // namespace

KMeansResult kmeans(const Matrix& data, int k, Rng& rng, int restarts, int max_iter) {
  const int n = static_cast<int>(data.rows());
  if (k < 1) {
    throw Error(errc::invalid_argument, "cluster count must be positive");
  }
  if (n < k) {
    throw Error(errc::too_few_observations,
                std::to_string(n) + " rows cannot form " + std::to_string(k) + " clusters");
  }
  if (restarts < 1) {
    throw Error(errc::invalid_argument, "need at least one restart");
  }

  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();

  std::vector<int> labels(static_cast<std::size_t>(n));
  std::vector<double> counts(static_cast<std::size_t>(k));
  for (int attempt = 0; attempt < restarts; ++attempt) {
    Matrix centroids = seed_centroids(data, k, rng);
    std::fill(labels.begin(), labels.end(), -1);

    int iter = 0;
    for (; iter < max_iter; ++iter) {
      bool changed = false;
      for (int i = 0; i < n; ++i) {
        int arg = 0;
        double lo = (data.row(i) - centroids.row(0)).squaredNorm();
        for (int c = 1; c < k; ++c) {
          const double d = (data.row(i) - centroids.row(c)).squaredNorm();
          if (d < lo) {
            lo = d;
            arg = c;
          }
        }
        if (labels[static_cast<std::size_t>(i)] != arg) {
          labels[static_cast<std::size_t>(i)] = arg;
          changed = true;
        }
      }
      if (!changed) break;

      centroids.setZero();
      std::fill(counts.begin(), counts.end(), 0.0);
      for (int i = 0; i < n; ++i) {
        centroids.row(labels[static_cast<std::size_t>(i)]) += data.row(i);
        counts[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)])] += 1.0;
      }
      for (int c = 0; c < k; ++c) {
        if (counts[static_cast<std::size_t>(c)] > 0.0) {
          centroids.row(c) /= counts[static_cast<std::size_t>(c)];
        } else {
          // Repopulate an emptied cluster with the point farthest from its
          // current centroid so every cluster stays non-empty.
          int far = 0;
          double far_d = -1.0;
          for (int i = 0; i < n; ++i) {
            const double d =
                (data.row(i) - centroids.row(labels[static_cast<std::size_t>(i)])).squaredNorm();
            if (d > far_d) {
              far_d = d;
              far = i;
            }
          }
          centroids.row(c) = data.row(far);
          labels[static_cast<std::size_t>(far)] = c;
        }
      }
    }

    double inertia = 0.0;
    for (int i = 0; i < n; ++i) {
      inertia += (data.row(i) - centroids.row(labels[static_cast<std::size_t>(i)])).squaredNorm();
    }
    if (inertia < best.inertia) {
      best.inertia = inertia;
      best.labels = labels;
      best.centroids = centroids;
      best.iterations = iter;
    }
  }
  return best;
}

}  // namespace blockdyn
