#include "blockdyn/community.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <tuple>

#include "blockdyn/errors.hpp"
#include "blockdyn/kmeans.hpp"
#include "blockdyn/rng.hpp"

namespace blockdyn::community {

namespace {

void check_adjacency(const BinaryMatrix& w) {
  const auto n = w.rows();
  if (w.cols() != n || n < 1) {
    throw Error(errc::invalid_argument, "adjacency matrix must be square and non-empty");
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (w(i, i) != 0) {
      throw Error(errc::invalid_argument, "adjacency matrix must have a zero diagonal");
    }
    for (Eigen::Index j = i + 1; j < n; ++j) {
      if (w(i, j) != w(j, i)) {
        throw Error(errc::invalid_argument, "adjacency matrix must be symmetric");
      }
      if (w(i, j) > 1) {
        throw Error(errc::invalid_argument, "adjacency entries must be 0 or 1");
      }
    }
  }
}

long long edge_count(const BinaryMatrix& w) {
  long long edges = 0;
  for (Eigen::Index i = 0; i < w.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < w.cols(); ++j) edges += w(i, j);
  }
  return edges;
}

// Weighted undirected graph in the form the aggregation phase produces:
// explicit adjacency lists plus an ordered self weight per node (the internal
// weight of the community a super-node stands for).
struct WGraph {
  int n = 0;
  std::vector<std::vector<std::pair<int, double>>> adj;
  std::vector<double> self_w;
  std::vector<double> strength;
  double two_m = 0.0;
};

WGraph graph_from_binary(const BinaryMatrix& w) {
  WGraph g;
  g.n = static_cast<int>(w.rows());
  g.adj.resize(static_cast<std::size_t>(g.n));
  g.self_w.assign(static_cast<std::size_t>(g.n), 0.0);
  g.strength.assign(static_cast<std::size_t>(g.n), 0.0);
  for (int i = 0; i < g.n; ++i) {
    for (int j = i + 1; j < g.n; ++j) {
      if (w(i, j) != 0) {
        g.adj[static_cast<std::size_t>(i)].emplace_back(j, 1.0);
        g.adj[static_cast<std::size_t>(j)].emplace_back(i, 1.0);
        g.strength[static_cast<std::size_t>(i)] += 1.0;
        g.strength[static_cast<std::size_t>(j)] += 1.0;
      }
    }
  }
  for (const double s : g.strength) g.two_m += s;
  return g;
}

double partition_modularity(const WGraph& g, const std::vector<int>& comm, int m) {
  std::vector<double> sig_in(static_cast<std::size_t>(m), 0.0);
  std::vector<double> sig_tot(static_cast<std::size_t>(m), 0.0);
  for (int u = 0; u < g.n; ++u) {
    const int c = comm[static_cast<std::size_t>(u)];
    sig_in[static_cast<std::size_t>(c)] += g.self_w[static_cast<std::size_t>(u)];
    sig_tot[static_cast<std::size_t>(c)] += g.strength[static_cast<std::size_t>(u)];
    for (const auto& [v, weight] : g.adj[static_cast<std::size_t>(u)]) {
      if (comm[static_cast<std::size_t>(v)] == c) sig_in[static_cast<std::size_t>(c)] += weight;
    }
  }
  double q = 0.0;
  for (int c = 0; c < m; ++c) {
    const double tot = sig_tot[static_cast<std::size_t>(c)] / g.two_m;
    q += sig_in[static_cast<std::size_t>(c)] / g.two_m - tot * tot;
  }
  return q;
}

// One level of local moves. comm comes out compressed to 0..m-1 in order of
// first appearance; returns whether any node moved.
bool louvain_level(const WGraph& g, Rng& rng, std::vector<int>& comm, int& m_out) {
  const int n = g.n;
  comm.resize(static_cast<std::size_t>(n));
  std::vector<double> sig_tot(static_cast<std::size_t>(n));
  for (int u = 0; u < n; ++u) {
    comm[static_cast<std::size_t>(u)] = u;
    sig_tot[static_cast<std::size_t>(u)] = g.strength[static_cast<std::size_t>(u)];
  }

  std::vector<double> acc(static_cast<std::size_t>(n), 0.0);
  std::vector<int> stamp(static_cast<std::size_t>(n), -1);
  std::vector<int> touched;
  int epoch = 0;

  bool any_move = false;
  bool moved = true;
  int pass = 0;
  while (moved && pass < 1000) {
    moved = false;
    ++pass;
    for (const int u : rng.permutation(n)) {
      const int a = comm[static_cast<std::size_t>(u)];
      ++epoch;
      touched.clear();
      for (const auto& [v, weight] : g.adj[static_cast<std::size_t>(u)]) {
        const int c = comm[static_cast<std::size_t>(v)];
        if (stamp[static_cast<std::size_t>(c)] != epoch) {
          stamp[static_cast<std::size_t>(c)] = epoch;
          acc[static_cast<std::size_t>(c)] = 0.0;
          touched.push_back(c);
        }
        acc[static_cast<std::size_t>(c)] += weight;
      }
      if (stamp[static_cast<std::size_t>(a)] != epoch) {
        stamp[static_cast<std::size_t>(a)] = epoch;
        acc[static_cast<std::size_t>(a)] = 0.0;
        touched.push_back(a);
      }
      std::sort(touched.begin(), touched.end());

      // Gains are kept at the scale 2m^2/2 * dQ so that on integer-weight
      // graphs they are exact integers and the zero test is noise-free.
      const double s_u = g.strength[static_cast<std::size_t>(u)];
      const double base = acc[static_cast<std::size_t>(a)];
      const double tol = 1e-9 * std::max(1.0, g.two_m);
      int best = a;
      double best_gain = 0.0;
      for (const int c : touched) {
        if (c == a) continue;
        const double gain =
            g.two_m * (acc[static_cast<std::size_t>(c)] - base) -
            s_u * (sig_tot[static_cast<std::size_t>(c)] - sig_tot[static_cast<std::size_t>(a)] + s_u);
        if (gain > best_gain + tol) {
          best_gain = gain;
          best = c;
        }
      }
      if (best != a) {
        comm[static_cast<std::size_t>(u)] = best;
        sig_tot[static_cast<std::size_t>(a)] -= s_u;
        sig_tot[static_cast<std::size_t>(best)] += s_u;
        moved = true;
        any_move = true;
      }
    }
  }

  // Compress community ids.
  std::vector<int> remap(static_cast<std::size_t>(n), -1);
  int next = 0;
  for (int u = 0; u < n; ++u) {
    int& id = remap[static_cast<std::size_t>(comm[static_cast<std::size_t>(u)])];
    if (id < 0) id = next++;
    comm[static_cast<std::size_t>(u)] = id;
  }
  m_out = next;
  return any_move;
}

WGraph aggregate(const WGraph& g, const std::vector<int>& comm, int m) {
  WGraph out;
  out.n = m;
  out.adj.resize(static_cast<std::size_t>(m));
  out.self_w.assign(static_cast<std::size_t>(m), 0.0);
  out.strength.assign(static_cast<std::size_t>(m), 0.0);
  out.two_m = g.two_m;

  std::vector<std::vector<std::pair<int, double>>> cross(static_cast<std::size_t>(m));

  for (int u = 0; u < g.n; ++u) {
    const int cu = comm[static_cast<std::size_t>(u)];
    out.self_w[static_cast<std::size_t>(cu)] += g.self_w[static_cast<std::size_t>(u)];
    out.strength[static_cast<std::size_t>(cu)] += g.strength[static_cast<std::size_t>(u)];
    for (const auto& [v, weight] : g.adj[static_cast<std::size_t>(u)]) {
      const int cv = comm[static_cast<std::size_t>(v)];
      if (cv == cu) {
        // Each internal edge is seen from both ends, giving the ordered sum.
        out.self_w[static_cast<std::size_t>(cu)] += weight;
      } else {
        cross[static_cast<std::size_t>(cu)].emplace_back(cv, weight);
      }
    }
  }
  for (int c = 0; c < m; ++c) {
    auto& entries = cross[static_cast<std::size_t>(c)];
    std::sort(entries.begin(), entries.end());
    std::size_t write = 0;
    for (std::size_t read = 0; read < entries.size();) {
      const int d = entries[read].first;
      double total = 0.0;
      while (read < entries.size() && entries[read].first == d) total += entries[read++].second;
      entries[write++] = {d, total};
    }
    entries.resize(write);
    out.adj[static_cast<std::size_t>(c)] = entries;
  }
  return out;
}

}  // namespace

double modularity(const BinaryMatrix& w, const Membership& g) {
  check_adjacency(w);
  const int n = static_cast<int>(w.rows());
  if (g.size() != n) {
    throw Error(errc::length_mismatch, "membership covers " + std::to_string(g.size()) +
                                           " nodes but the graph has " + std::to_string(n));
  }
  const long long edges = edge_count(w);
  if (edges == 0) {
    throw Error(errc::empty_graph, "modularity is undefined on a graph with no edges");
  }
  const double two_l = 2.0 * static_cast<double>(edges);

  std::vector<double> sig_in(static_cast<std::size_t>(g.num_communities), 0.0);
  std::vector<double> sig_tot(static_cast<std::size_t>(g.num_communities), 0.0);
  for (int i = 0; i < n; ++i) {
    const int c = g.label(i) - 1;
    double degree = 0.0;
    for (int j = 0; j < n; ++j) {
      if (w(i, j) != 0) {
        degree += 1.0;
        if (g.label(j) == c + 1) sig_in[static_cast<std::size_t>(c)] += 1.0;
      }
    }
    sig_tot[static_cast<std::size_t>(c)] += degree;
  }
  double q = 0.0;
  for (int c = 0; c < g.num_communities; ++c) {
    const double tot = sig_tot[static_cast<std::size_t>(c)] / two_l;
    q += sig_in[static_cast<std::size_t>(c)] / two_l - tot * tot;
  }
  return q;
}

double modularity_gain(const BinaryMatrix& w, const Membership& g, int node, int target) {
  check_adjacency(w);
  const int n = static_cast<int>(w.rows());
  if (g.size() != n) {
    throw Error(errc::length_mismatch, "membership size does not match the graph");
  }
  if (node < 0 || node >= n) {
    throw Error(errc::invalid_argument, "node index out of range");
  }
  // target == K+1 models a move into a fresh empty community.
  if (target < 1 || target > g.num_communities + 1) {
    throw Error(errc::invalid_argument, "target community out of range");
  }
  const long long edges = edge_count(w);
  if (edges == 0) {
    throw Error(errc::empty_graph, "modularity is undefined on a graph with no edges");
  }
  const double l = static_cast<double>(edges);

  const int a = g.label(node);
  double k_i = 0.0, k_to_a = 0.0, k_to_b = 0.0, tot_a = 0.0, tot_b = 0.0;
  for (int j = 0; j < n; ++j) {
    double degree_j = 0.0;
    for (int v = 0; v < n; ++v) degree_j += w(j, v) != 0 ? 1.0 : 0.0;
    if (j == node) {
      k_i = degree_j;
      continue;
    }
    if (g.label(j) == a) {
      tot_a += degree_j;
      if (w(node, j) != 0) k_to_a += 1.0;
    }
    if (g.label(j) == target) {
      tot_b += degree_j;
      if (w(node, j) != 0) k_to_b += 1.0;
    }
  }
  tot_a += k_i;  // node currently sits in a

  if (target == a) return 0.0;
  // Removal from a then insertion into b, written as one expression.
  return (k_to_b - k_to_a) / l - k_i * (tot_b - (tot_a - k_i)) / (2.0 * l * l);
}

LouvainResult louvain_detailed(const BinaryMatrix& w, std::uint64_t seed) {
  check_adjacency(w);
  if (edge_count(w) == 0) {
    throw Error(errc::empty_graph, "community detection needs at least one edge");
  }
  const int n = static_cast<int>(w.rows());

  Rng rng(seed);
  WGraph g = graph_from_binary(w);
  std::vector<int> assignment(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) assignment[static_cast<std::size_t>(i)] = i;

  LouvainResult result;
  double q_prev = -std::numeric_limits<double>::infinity();
  std::vector<int> comm;
  for (int level = 0; level < 100; ++level) {
    int m = 0;
    const bool moved = louvain_level(g, rng, comm, m);
    const double q = partition_modularity(g, comm, m);
    for (auto& node_comm : assignment) node_comm = comm[static_cast<std::size_t>(node_comm)];
    result.q_levels.push_back(q);
    if (!moved || q - q_prev < 1e-10) break;
    q_prev = q;
    if (m == g.n) break;
    g = aggregate(g, comm, m);
  }
  result.q = result.q_levels.back();

  for (auto& node_comm : assignment) ++node_comm;  // to 1-based raw labels
  result.membership = canonicalize_labels(assignment);
  return result;
}

Membership louvain(const BinaryMatrix& w, std::uint64_t seed) {
  return louvain_detailed(w, seed).membership;
}

namespace {

struct EnsembleView {
  int n = 0;
  int r = 0;
  std::vector<Vector> degrees;  // per layer
  std::vector<double> two_l;    // per layer
  double two_mu = 0.0;
};

EnsembleView check_ensemble(const MultilayerEnsemble& ens) {
  if (ens.layers.empty()) {
    throw Error(errc::invalid_argument, "ensemble has no layers");
  }
  if (!(ens.gamma > 0.0) || !std::isfinite(ens.gamma)) {
    throw Error(errc::invalid_argument, "resolution must be positive");
  }
  if (ens.coupling < 0.0 || !std::isfinite(ens.coupling)) {
    throw Error(errc::invalid_argument, "coupling must be non-negative");
  }
  EnsembleView view;
  view.r = static_cast<int>(ens.layers.size());
  view.n = static_cast<int>(ens.layers.front().rows());
  view.degrees.reserve(ens.layers.size());
  view.two_l.reserve(ens.layers.size());
  for (std::size_t r = 0; r < ens.layers.size(); ++r) {
    const auto& w = ens.layers[r];
    check_adjacency(w);
    if (static_cast<int>(w.rows()) != view.n) {
      throw Error(errc::layer_mismatch, "layer " + std::to_string(r) + " has " +
                                            std::to_string(w.rows()) + " nodes, expected " +
                                            std::to_string(view.n));
    }
    const long long edges = edge_count(w);
    if (edges == 0) {
      throw Error(errc::empty_layer, "layer " + std::to_string(r) + " has no edges");
    }
    Vector deg = Vector::Zero(view.n);
    for (int i = 0; i < view.n; ++i) {
      for (int j = 0; j < view.n; ++j) deg(i) += w(i, j) != 0 ? 1.0 : 0.0;
    }
    view.degrees.push_back(std::move(deg));
    view.two_l.push_back(2.0 * static_cast<double>(edges));
    view.two_mu += 2.0 * static_cast<double>(edges);
  }
  view.two_mu += static_cast<double>(view.n) * static_cast<double>(view.r) *
                 static_cast<double>(view.r - 1) * ens.coupling;
  return view;
}

// Shared evaluator over raw per-layer labels (any integers).
double multilayer_q(const MultilayerEnsemble& ens, const EnsembleView& view,
                    const std::vector<std::vector<int>>& labels) {
  double total = 0.0;
  for (int r = 0; r < view.r; ++r) {
    const auto& w = ens.layers[static_cast<std::size_t>(r)];
    const auto& deg = view.degrees[static_cast<std::size_t>(r)];
    const double coef = ens.gamma / view.two_l[static_cast<std::size_t>(r)];
    const auto& lab = labels[static_cast<std::size_t>(r)];
    for (int i = 0; i < view.n; ++i) {
      for (int j = 0; j < view.n; ++j) {
        if (lab[static_cast<std::size_t>(i)] == lab[static_cast<std::size_t>(j)]) {
          total += (w(i, j) != 0 ? 1.0 : 0.0) - coef * deg(i) * deg(j);
        }
      }
    }
  }
  if (ens.coupling > 0.0) {
    for (int i = 0; i < view.n; ++i) {
      for (int r = 0; r < view.r; ++r) {
        for (int s = 0; s < view.r; ++s) {
          if (r != s && labels[static_cast<std::size_t>(r)][static_cast<std::size_t>(i)] ==
                            labels[static_cast<std::size_t>(s)][static_cast<std::size_t>(i)]) {
            total += ens.coupling;
          }
        }
      }
    }
  }
  return total / view.two_mu;
}

// Local moves over the supra modularity matrix without materializing it:
// within-layer terms are read from the layer and its degree sequence, and the
// uniform coupling contributes C to each other copy of the same node.
bool supra_level(const MultilayerEnsemble& ens, const EnsembleView& view, Rng& rng,
                 std::vector<int>& comm, int& m_out) {
  const int n = view.n;
  const int nr = n * view.r;
  comm.resize(static_cast<std::size_t>(nr));
  for (int u = 0; u < nr; ++u) comm[static_cast<std::size_t>(u)] = u;

  std::vector<double> acc(static_cast<std::size_t>(nr), 0.0);
  std::vector<int> stamp(static_cast<std::size_t>(nr), -1);
  std::vector<int> touched;
  int epoch = 0;

  bool any_move = false;
  bool moved = true;
  int pass = 0;
  while (moved && pass < 1000) {
    moved = false;
    ++pass;
    for (const int u : rng.permutation(nr)) {
      const int r = u / n;
      const int i = u % n;
      const auto& w = ens.layers[static_cast<std::size_t>(r)];
      const auto& deg = view.degrees[static_cast<std::size_t>(r)];
      const double coef = ens.gamma * deg(i) / view.two_l[static_cast<std::size_t>(r)];
      const int a = comm[static_cast<std::size_t>(u)];

      ++epoch;
      touched.clear();
      auto bump = [&](int c, double value) {
        if (stamp[static_cast<std::size_t>(c)] != epoch) {
          stamp[static_cast<std::size_t>(c)] = epoch;
          acc[static_cast<std::size_t>(c)] = 0.0;
          touched.push_back(c);
        }
        acc[static_cast<std::size_t>(c)] += value;
      };

      const int base_u = r * n;
      for (int j = 0; j < n; ++j) {
        if (j == i) continue;
        bump(comm[static_cast<std::size_t>(base_u + j)],
             (w(i, j) != 0 ? 1.0 : 0.0) - coef * deg(j));
      }
      if (ens.coupling > 0.0) {
        for (int s = 0; s < view.r; ++s) {
          if (s != r) bump(comm[static_cast<std::size_t>(s * n + i)], ens.coupling);
        }
      }
      if (stamp[static_cast<std::size_t>(a)] != epoch) bump(a, 0.0);
      std::sort(touched.begin(), touched.end());

      const double base = acc[static_cast<std::size_t>(a)];
      int best = a;
      double best_gain = 0.0;
      for (const int c : touched) {
        if (c == a) continue;
        const double gain = acc[static_cast<std::size_t>(c)] - base;
        if (gain > best_gain + 1e-9) {
          best_gain = gain;
          best = c;
        }
      }
      if (best != a) {
        comm[static_cast<std::size_t>(u)] = best;
        moved = true;
        any_move = true;
      }
    }
  }

  std::vector<int> remap(static_cast<std::size_t>(nr), -1);
  int next = 0;
  for (int u = 0; u < nr; ++u) {
    int& id = remap[static_cast<std::size_t>(comm[static_cast<std::size_t>(u)])];
    if (id < 0) id = next++;
    comm[static_cast<std::size_t>(u)] = id;
  }
  m_out = next;
  return any_move;
}

// Aggregates the supra matrix under `comm` into an explicit dense matrix over
// communities; later levels operate on that directly.
Matrix aggregate_supra(const MultilayerEnsemble& ens, const EnsembleView& view,
                       const std::vector<int>& comm, int m) {
  Matrix b = Matrix::Zero(m, m);
  const int n = view.n;
  for (int r = 0; r < view.r; ++r) {
    const auto& w = ens.layers[static_cast<std::size_t>(r)];
    const auto& deg = view.degrees[static_cast<std::size_t>(r)];
    const double inv = ens.gamma / view.two_l[static_cast<std::size_t>(r)];
    for (int i = 0; i < n; ++i) {
      const int ci = comm[static_cast<std::size_t>(r * n + i)];
      for (int j = 0; j < n; ++j) {
        const int cj = comm[static_cast<std::size_t>(r * n + j)];
        b(ci, cj) += (w(i, j) != 0 ? 1.0 : 0.0) - inv * deg(i) * deg(j);
      }
    }
  }
  if (ens.coupling > 0.0) {
    for (int i = 0; i < n; ++i) {
      for (int r = 0; r < view.r; ++r) {
        const int cr = comm[static_cast<std::size_t>(r * n + i)];
        for (int s = 0; s < view.r; ++s) {
          if (s != r) b(cr, comm[static_cast<std::size_t>(s * n + i)]) += ens.coupling;
        }
      }
    }
  }
  return b;
}

bool dense_level(const Matrix& b, Rng& rng, std::vector<int>& comm, int& m_out) {
  const int n = static_cast<int>(b.rows());
  comm.resize(static_cast<std::size_t>(n));
  for (int u = 0; u < n; ++u) comm[static_cast<std::size_t>(u)] = u;

  std::vector<double> acc(static_cast<std::size_t>(n), 0.0);
  std::vector<int> stamp(static_cast<std::size_t>(n), -1);
  std::vector<int> touched;
  int epoch = 0;

  bool any_move = false;
  bool moved = true;
  int pass = 0;
  while (moved && pass < 1000) {
    moved = false;
    ++pass;
    for (const int u : rng.permutation(n)) {
      const int a = comm[static_cast<std::size_t>(u)];
      ++epoch;
      touched.clear();
      for (int v = 0; v < n; ++v) {
        if (v == u) continue;
        const int c = comm[static_cast<std::size_t>(v)];
        if (stamp[static_cast<std::size_t>(c)] != epoch) {
          stamp[static_cast<std::size_t>(c)] = epoch;
          acc[static_cast<std::size_t>(c)] = 0.0;
          touched.push_back(c);
        }
        acc[static_cast<std::size_t>(c)] += b(u, v);
      }
      if (stamp[static_cast<std::size_t>(a)] != epoch) {
        stamp[static_cast<std::size_t>(a)] = epoch;
        acc[static_cast<std::size_t>(a)] = 0.0;
        touched.push_back(a);
      }
      std::sort(touched.begin(), touched.end());

      const double base = acc[static_cast<std::size_t>(a)];
      int best = a;
      double best_gain = 0.0;
      for (const int c : touched) {
        if (c == a) continue;
        const double gain = acc[static_cast<std::size_t>(c)] - base;
        if (gain > best_gain + 1e-9) {
          best_gain = gain;
          best = c;
        }
      }
      if (best != a) {
        comm[static_cast<std::size_t>(u)] = best;
        moved = true;
        any_move = true;
      }
    }
  }

  std::vector<int> remap(static_cast<std::size_t>(n), -1);
  int next = 0;
  for (int u = 0; u < n; ++u) {
    int& id = remap[static_cast<std::size_t>(comm[static_cast<std::size_t>(u)])];
    if (id < 0) id = next++;
    comm[static_cast<std::size_t>(u)] = id;
  }
  m_out = next;
  return any_move;
}

Matrix aggregate_dense(const Matrix& b, const std::vector<int>& comm, int m) {
  Matrix out = Matrix::Zero(m, m);
  for (int u = 0; u < static_cast<int>(b.rows()); ++u) {
    const int cu = comm[static_cast<std::size_t>(u)];
    for (int v = 0; v < static_cast<int>(b.cols()); ++v) {
      out(cu, comm[static_cast<std::size_t>(v)]) += b(u, v);
    }
  }
  return out;
}

}  // namespace

double multilayer_modularity(const MultilayerEnsemble& ens, const std::vector<Membership>& parts) {
  const EnsembleView view = check_ensemble(ens);
  if (parts.size() != ens.layers.size()) {
    throw Error(errc::layer_mismatch, "got " + std::to_string(parts.size()) +
                                          " memberships for " + std::to_string(ens.layers.size()) +
                                          " layers");
  }
  std::vector<std::vector<int>> labels;
  labels.reserve(parts.size());
  for (std::size_t r = 0; r < parts.size(); ++r) {
    if (parts[r].size() != view.n) {
      throw Error(errc::layer_mismatch, "membership " + std::to_string(r) +
                                            " does not cover all " + std::to_string(view.n) +
                                            " nodes");
    }
    labels.push_back(parts[r].labels);
  }
  return multilayer_q(ens, view, labels);
}

MultilayerResult multilayer_louvain(const MultilayerEnsemble& ens, std::uint64_t seed) {
  const EnsembleView view = check_ensemble(ens);
  const int n = view.n;
  const int nr = n * view.r;
  Rng rng(seed);

  // Level 0 works on the implicit supra matrix; afterwards communities are
  // few enough to aggregate into a dense matrix.
  std::vector<int> assignment(static_cast<std::size_t>(nr));
  std::vector<int> comm;
  int m = 0;
  supra_level(ens, view, rng, comm, m);
  assignment = comm;

  auto labels_now = [&]() {
    std::vector<std::vector<int>> labels(static_cast<std::size_t>(view.r),
                                         std::vector<int>(static_cast<std::size_t>(n)));
    for (int r = 0; r < view.r; ++r) {
      for (int i = 0; i < n; ++i) {
        labels[static_cast<std::size_t>(r)][static_cast<std::size_t>(i)] =
            assignment[static_cast<std::size_t>(r * n + i)];
      }
    }
    return labels;
  };

  MultilayerResult result;
  result.q_levels.push_back(multilayer_q(ens, view, labels_now()));

  Matrix b = aggregate_supra(ens, view, assignment, m);
  double q_prev = result.q_levels.back();
  for (int level = 0; level < 100; ++level) {
    const bool moved = dense_level(b, rng, comm, m);
    if (!moved) break;
    for (auto& node_comm : assignment) node_comm = comm[static_cast<std::size_t>(node_comm)];
    const double q = multilayer_q(ens, view, labels_now());
    result.q_levels.push_back(q);
    if (q - q_prev < 1e-10) break;
    q_prev = q;
    b = aggregate_dense(b, comm, m);
  }
  result.q = result.q_levels.back();

  // Canonical numbering over (layer, node) scan order, so in the usual
  // all-layers-agree case the per-layer labels coincide with the consensus.
  std::vector<int> canon(static_cast<std::size_t>(nr), 0);
  {
    std::vector<int> remap(static_cast<std::size_t>(nr), -1);
    int next = 1;
    for (int u = 0; u < nr; ++u) {
      int& id = remap[static_cast<std::size_t>(assignment[static_cast<std::size_t>(u)])];
      if (id < 0) id = next++;
      canon[static_cast<std::size_t>(u)] = id;
    }
  }

  result.per_layer.assign(static_cast<std::size_t>(view.r),
                          std::vector<int>(static_cast<std::size_t>(n)));
  for (int r = 0; r < view.r; ++r) {
    for (int i = 0; i < n; ++i) {
      result.per_layer[static_cast<std::size_t>(r)][static_cast<std::size_t>(i)] =
          canon[static_cast<std::size_t>(r * n + i)];
    }
  }

  std::vector<int> majority(static_cast<std::size_t>(n));
  result.is_consensus = true;
  std::vector<int> votes;
  for (int i = 0; i < n; ++i) {
    votes.clear();
    for (int r = 0; r < view.r; ++r) {
      votes.push_back(result.per_layer[static_cast<std::size_t>(r)][static_cast<std::size_t>(i)]);
    }
    std::sort(votes.begin(), votes.end());
    if (votes.front() != votes.back()) result.is_consensus = false;
    int best_label = votes.front();
    int best_count = 0;
    for (std::size_t v = 0; v < votes.size();) {
      std::size_t w = v;
      while (w < votes.size() && votes[w] == votes[v]) ++w;
      if (static_cast<int>(w - v) > best_count) {
        best_count = static_cast<int>(w - v);
        best_label = votes[v];
      }
      v = w;
    }
    majority[static_cast<std::size_t>(i)] = best_label;
  }
  result.consensus = canonicalize_labels(majority);
  return result;
}

const Membership& require_consensus(const MultilayerResult& result) {
  if (!result.is_consensus) {
    throw Error(errc::non_consensus, "layers disagree on at least one node's community");
  }
  return result.consensus;
}

Membership spectral_clustering(const BinaryMatrix& w, int k, std::uint64_t seed) {
  check_adjacency(w);
  const int n = static_cast<int>(w.rows());
  if (k < 1) {
    throw Error(errc::invalid_argument, "cluster count must be positive");
  }
  if (k > n) {
    throw Error(errc::k_too_large,
                std::to_string(k) + " clusters requested for " + std::to_string(n) + " nodes");
  }
  if (edge_count(w) == 0) {
    throw Error(errc::empty_graph, "spectral clustering needs at least one edge");
  }
  if (k == 1) {
    return Membership(std::vector<int>(static_cast<std::size_t>(n), 1), 1);
  }

  Vector inv_sqrt_deg = Vector::Zero(n);
  for (int i = 0; i < n; ++i) {
    double d = 0.0;
    for (int j = 0; j < n; ++j) d += w(i, j) != 0 ? 1.0 : 0.0;
    inv_sqrt_deg(i) = d > 0.0 ? 1.0 / std::sqrt(d) : 0.0;  // isolated nodes stay zero rows
  }
  Matrix lap = Matrix::Identity(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (w(i, j) != 0) lap(i, j) -= inv_sqrt_deg(i) * inv_sqrt_deg(j);
    }
  }

  Eigen::SelfAdjointEigenSolver<Matrix> solver(lap);
  if (solver.info() != Eigen::Success) {
    throw Error(errc::invalid_argument, "eigendecomposition of the Laplacian failed");
  }
  const Matrix embedding = solver.eigenvectors().leftCols(k);

  Rng rng(seed);
  const KMeansResult clusters = kmeans(embedding, k, rng);
  std::vector<int> labels(clusters.labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = clusters.labels[i] + 1;
  return canonicalize_labels(labels);
}

AssociationConsensus association_consensus(const std::vector<Membership>& parts,
                                           double top_fraction) {
  if (parts.empty()) {
    throw Error(errc::invalid_argument, "need at least one partition");
  }
  if (!(top_fraction > 0.0 && top_fraction <= 1.0)) {
    throw Error(errc::invalid_argument, "top fraction must lie in (0, 1]");
  }
  const int n = parts.front().size();
  if (n < 2) {
    throw Error(errc::invalid_argument, "need at least two nodes");
  }
  for (std::size_t p = 1; p < parts.size(); ++p) {
    if (parts[p].size() != n) {
      throw Error(errc::length_mismatch, "partition " + std::to_string(p) +
                                             " covers a different node set");
    }
  }

  AssociationConsensus out;
  out.counts = Eigen::MatrixXi::Zero(n, n);
  for (const auto& part : parts) {
    for (int i = 0; i < n; ++i) {
      out.counts(i, i) += 1;
      for (int j = i + 1; j < n; ++j) {
        if (part.label(i) == part.label(j)) {
          out.counts(i, j) += 1;
          out.counts(j, i) += 1;
        }
      }
    }
  }

  std::vector<std::tuple<int, int, int>> ranked;  // count, i, j
  ranked.reserve(static_cast<std::size_t>(pair_count(n)));
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) ranked.emplace_back(out.counts(i, j), i, j);
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) > std::get<0>(b);
    if (std::get<1>(a) != std::get<1>(b)) return std::get<1>(a) < std::get<1>(b);
    return std::get<2>(a) < std::get<2>(b);
  });
  const auto keep = static_cast<std::size_t>(
      std::ceil(top_fraction * static_cast<double>(pair_count(n))));
  out.pairs.reserve(keep);
  for (std::size_t e = 0; e < keep && e < ranked.size(); ++e) {
    out.pairs.emplace_back(std::get<1>(ranked[e]), std::get<2>(ranked[e]));
  }
  return out;
}

}  // namespace blockdyn::community
