#pragma once

// Synthetic dataset generation: random connected topologies (uniform
// spanning tree plus extra edges), i.i.d. uniform weights resampled until
// the optimal path is unique, structure-level splits, and removal
// perturbations. Every random draw derives from (seed, structure, variant)
// alone, so generation order and parallelism cannot change the output.

#include <array>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <optional>
#include <queue>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "pathgnn/graph.hpp"
#include "pathgnn/io.hpp"
#include "pathgnn/oracle.hpp"
#include "pathgnn/parallel.hpp"
#include "pathgnn/rng.hpp"

namespace pathgnn {

/// Connected edge skeleton without weights.
struct Topology {
  int n_nodes = 0;
  std::vector<std::pair<int, int>> edges;  // canonical u < v
};

namespace detail {

/// Uniform random labeled tree: a random length-(n-2) sequence over node ids
/// decodes bijectively to a tree, so every tree is equally likely.
inline std::vector<std::pair<int, int>> uniform_spanning_tree(Rng& rng, int n) {
  std::vector<std::pair<int, int>> edges;
  if (n == 2) {
    edges.emplace_back(0, 1);
    return edges;
  }
  std::vector<int> seq(static_cast<std::size_t>(n - 2));
  for (int& a : seq) a = static_cast<int>(rng.uniform_int(0, n - 1));
  std::vector<int> deg(static_cast<std::size_t>(n), 1);
  for (int a : seq) ++deg[static_cast<std::size_t>(a)];
  std::priority_queue<int, std::vector<int>, std::greater<int>> leaves;
  for (int i = 0; i < n; ++i)
    if (deg[static_cast<std::size_t>(i)] == 1) leaves.push(i);
  for (int a : seq) {
    const int leaf = leaves.top();
    leaves.pop();
    edges.emplace_back(std::min(leaf, a), std::max(leaf, a));
    if (--deg[static_cast<std::size_t>(a)] == 1) leaves.push(a);
  }
  const int u = leaves.top();
  leaves.pop();
  const int v = leaves.top();
  edges.emplace_back(std::min(u, v), std::max(u, v));
  return edges;
}

}  // namespace detail

/// Connected topology: uniform spanning tree plus ⌊factor·n⌋ distinct extra
/// non-tree edges chosen uniformly. Requests beyond the complete graph are
/// clamped with a warning.
inline Topology gen_structure(Rng& rng, int n, double extra_edge_factor) {
  if (n < 2) throw std::invalid_argument("gen_structure: need n >= 2");
  if (extra_edge_factor < 0.0) throw std::invalid_argument("gen_structure: negative extra_edge_factor");
  Topology t;
  t.n_nodes = n;
  t.edges = detail::uniform_spanning_tree(rng, n);

  const long long max_extra =
      static_cast<long long>(n) * (n - 1) / 2 - static_cast<long long>(n - 1);
  long long extra = static_cast<long long>(std::floor(extra_edge_factor * n));
  if (extra > max_extra) {
    std::cerr << "gen_structure: clamping " << extra << " extra edges to " << max_extra
              << " (n=" << n << " complete graph limit)\n";
    extra = max_extra;
  }
  if (extra > 0) {
    std::vector<char> present(static_cast<std::size_t>(n) * static_cast<std::size_t>(n), 0);
    for (const auto& [u, v] : t.edges)
      present[static_cast<std::size_t>(u) * static_cast<std::size_t>(n) + static_cast<std::size_t>(v)] = 1;
    std::vector<std::pair<int, int>> candidates;
    for (int u = 0; u < n; ++u)
      for (int v = u + 1; v < n; ++v)
        if (!present[static_cast<std::size_t>(u) * static_cast<std::size_t>(n) + static_cast<std::size_t>(v)])
          candidates.emplace_back(u, v);
    rng.shuffle(candidates);
    t.edges.insert(t.edges.end(), candidates.begin(), candidates.begin() + extra);
  }
  return t;
}

/// One labeled training example. structure_id / variant_id identify the
/// generating streams; they are bookkeeping, not part of the file format.
struct Sample {
  Graph graph;
  PathLabels labels;
  int structure_id = -1;
  int variant_id = -1;
  int weight_resamples = 0;
};

/// Draws i.i.d. uniform weights for the topology and labels the optimal
/// path, resampling the weights until it is unique (cap 100, then empty).
inline std::optional<Sample> assign_weights(Rng& rng, const Topology& topo, double weight_lo,
                                            double weight_hi, int source, int destination) {
  constexpr int kMaxAttempts = 100;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    std::vector<Edge> edges;
    edges.reserve(topo.edges.size());
    for (const auto& [u, v] : topo.edges) edges.push_back({u, v, rng.uniform_real(weight_lo, weight_hi)});
    Graph g = build_graph(topo.n_nodes, edges, source, destination);
    const PathResult r = dijkstra(g);
    if (r.reachable && r.unique) {
      Sample s;
      s.graph = std::move(g);
      s.labels = labels_from_path(s.graph, r);
      s.weight_resamples = attempt;
      return s;
    }
  }
  return std::nullopt;
}

enum class SplitLevel { structure, sample };

struct DatasetConfig {
  int n_structures = 0;
  int weight_samplings = 1;
  int node_min = 3;
  int node_max = 3;
  double extra_edge_factor = 1.0;
  double weight_lo = 1.0;
  double weight_hi = 10.0;
  double split_train = 0.7;
  double split_val = 0.15;
  double split_test = 0.15;
  SplitLevel split_level = SplitLevel::structure;
  std::uint64_t seed = 0;

  void validate() const {
    auto fail = [](const std::string& m) { throw std::invalid_argument("DatasetConfig: " + m); };
    if (n_structures < 1) fail("n_structures must be >= 1");
    if (weight_samplings < 1) fail("weight_samplings must be >= 1");
    if (node_min < 3) fail("node_min must be >= 3");
    if (node_max < node_min) fail("node_max < node_min");
    if (extra_edge_factor < 0.0) fail("extra_edge_factor must be >= 0");
    if (!(weight_lo > 0.0)) fail("weight_lo must be > 0");
    if (weight_hi <= weight_lo) fail("weight_hi must exceed weight_lo");
    if (split_train < 0.0 || split_val < 0.0 || split_test < 0.0) fail("negative split fraction");
    if (std::abs(split_train + split_val + split_test - 1.0) > 1e-12)
      fail("split fractions must sum to 1");
  }
};

/// Largest-remainder apportionment of `total` into three integer counts.
/// Remainder ties go to the later split, so (10, .7/.15/.15) -> (7, 1, 2).
inline std::array<int, 3> split_counts(int total, double f_train, double f_val, double f_test) {
  const std::array<double, 3> quota{f_train * total, f_val * total, f_test * total};
  std::array<int, 3> out{};
  int assigned = 0;
  for (int i = 0; i < 3; ++i) {
    out[static_cast<std::size_t>(i)] = static_cast<int>(std::floor(quota[static_cast<std::size_t>(i)]));
    assigned += out[static_cast<std::size_t>(i)];
  }
  std::array<double, 3> rem;
  for (int i = 0; i < 3; ++i)
    rem[static_cast<std::size_t>(i)] = quota[static_cast<std::size_t>(i)] - out[static_cast<std::size_t>(i)];
  for (int left = total - assigned; left > 0; --left) {
    int best = 0;
    for (int i = 1; i < 3; ++i)
      if (rem[static_cast<std::size_t>(i)] >= rem[static_cast<std::size_t>(best)]) best = i;
    ++out[static_cast<std::size_t>(best)];
    rem[static_cast<std::size_t>(best)] = -1.0;
  }
  return out;
}

struct Dataset {
  std::vector<Sample> train;
  std::vector<Sample> val;
  std::vector<Sample> test;
  int discarded_structures = 0;

  std::size_t size() const { return train.size() + val.size() + test.size(); }
};

/// Generates the full dataset. Structure s draws everything from streams
/// keyed by (seed, s, ·): stream (s, 0) gives node count and topology,
/// stream (s, k+1) gives endpoints and weights of variant k. Splits are
/// assigned by index before generation, so discards never shift assignment.
inline Dataset gen_dataset(const DatasetConfig& cfg, int n_threads = 1) {
  cfg.validate();
  Dataset out;
  const int S = cfg.n_structures;
  const int K = cfg.weight_samplings;

  // 0 train, 1 val, 2 test
  auto split_of = [&](int s, int k) -> int {
    if (cfg.split_level == SplitLevel::structure) {
      const std::array<int, 3> c = split_counts(S, cfg.split_train, cfg.split_val, cfg.split_test);
      if (s < c[0]) return 0;
      if (s < c[0] + c[1]) return 1;
      return 2;
    }
    const std::array<int, 3> c =
        split_counts(S * K, cfg.split_train, cfg.split_val, cfg.split_test);
    const int idx = s * K + k;
    if (idx < c[0]) return 0;
    if (idx < c[0] + c[1]) return 1;
    return 2;
  };

  std::vector<std::vector<std::optional<Sample>>> made(static_cast<std::size_t>(S));
  std::vector<char> discarded(static_cast<std::size_t>(S), 0);
  parallel_for(static_cast<std::size_t>(S), n_threads, [&](std::size_t si) {
    const int s = static_cast<int>(si);
    Rng rs(mix_seed(cfg.seed, static_cast<std::uint64_t>(s), 0));
    const int n = static_cast<int>(rs.uniform_int(cfg.node_min, cfg.node_max));
    const Topology topo = gen_structure(rs, n, cfg.extra_edge_factor);
    auto& slot = made[si];
    slot.resize(static_cast<std::size_t>(K));
    for (int k = 0; k < K; ++k) {
      Rng rv(mix_seed(cfg.seed, static_cast<std::uint64_t>(s), static_cast<std::uint64_t>(k) + 1));
      const int src = static_cast<int>(rv.uniform_int(0, n - 1));
      int dst = src;
      while (dst == src) dst = static_cast<int>(rv.uniform_int(0, n - 1));
      std::optional<Sample> sample = assign_weights(rv, topo, cfg.weight_lo, cfg.weight_hi, src, dst);
      if (!sample) {
        discarded[si] = 1;
        break;
      }
      sample->structure_id = s;
      sample->variant_id = k;
      slot[static_cast<std::size_t>(k)] = std::move(sample);
    }
  });

  for (int s = 0; s < S; ++s) {
    if (discarded[static_cast<std::size_t>(s)]) {
      std::cerr << "gen_dataset: structure " << s
                << " discarded (no unique optimal path after 100 weight resamples)\n";
      ++out.discarded_structures;
      continue;
    }
    for (int k = 0; k < K; ++k) {
      Sample& sample = *made[static_cast<std::size_t>(s)][static_cast<std::size_t>(k)];
      switch (split_of(s, k)) {
        case 0: out.train.push_back(std::move(sample)); break;
        case 1: out.val.push_back(std::move(sample)); break;
        default: out.test.push_back(std::move(sample)); break;
      }
    }
  }
  return out;
}

/// Flat labeled sample stream for evaluations and property tests: one
/// variant per structure, same stream discipline as gen_dataset.
inline std::vector<Sample> gen_samples(std::uint64_t seed, int count, int node_min, int node_max,
                                       double extra_edge_factor = 1.0, double weight_lo = 1.0,
                                       double weight_hi = 10.0) {
  if (node_min < 2 || node_max < node_min) throw std::invalid_argument("gen_samples: bad node range");
  std::vector<Sample> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    Rng rs(mix_seed(seed, static_cast<std::uint64_t>(i), 0));
    const int n = static_cast<int>(rs.uniform_int(node_min, node_max));
    const Topology topo = gen_structure(rs, n, extra_edge_factor);
    Rng rv(mix_seed(seed, static_cast<std::uint64_t>(i), 1));
    const int src = static_cast<int>(rv.uniform_int(0, n - 1));
    int dst = src;
    while (dst == src) dst = static_cast<int>(rv.uniform_int(0, n - 1));
    std::optional<Sample> s = assign_weights(rv, topo, weight_lo, weight_hi, src, dst);
    if (!s) continue;  // vanishingly rare with continuous weights
    s->structure_id = i;
    s->variant_id = 0;
    out.push_back(std::move(*s));
  }
  return out;
}

enum class PerturbMode { remove_optimal_edge, remove_random_edge, remove_random_node };

inline const char* to_string(PerturbMode m) {
  switch (m) {
    case PerturbMode::remove_optimal_edge: return "remove-optimal-edge";
    case PerturbMode::remove_random_edge: return "remove-random-edge";
    default: return "remove-random-nonterminal-node";
  }
}

inline std::optional<PerturbMode> parse_perturb_mode(const std::string& s) {
  if (s == "remove-optimal-edge") return PerturbMode::remove_optimal_edge;
  if (s == "remove-random-edge") return PerturbMode::remove_random_edge;
  if (s == "remove-random-nonterminal-node") return PerturbMode::remove_random_node;
  return std::nullopt;
}

/// Applies one removal and relabels by the oracle. Retries up to 20 times
/// for a removal that keeps the destination reachable with a unique optimal
/// path; returns empty when none is found (caller skips the sample).
inline std::optional<Sample> perturb(const Sample& sample, PerturbMode mode, Rng& rng) {
  constexpr int kAttempts = 20;
  const Graph& g = sample.graph;
  for (int attempt = 0; attempt < kAttempts; ++attempt) {
    Graph candidate;
    bool reachable = false;
    if (mode == PerturbMode::remove_random_node) {
      std::vector<int> nonterminal;
      for (int i = 0; i < g.n_nodes; ++i)
        if (i != g.source && i != g.destination) nonterminal.push_back(i);
      if (nonterminal.empty()) return std::nullopt;
      const int x = nonterminal[static_cast<std::size_t>(
          rng.uniform_int(0, static_cast<std::int64_t>(nonterminal.size()) - 1))];
      NodeRemoval r = remove_node(g, x);
      reachable = r.destination_reachable;
      candidate = std::move(r.graph);
    } else {
      int edge_idx;
      if (mode == PerturbMode::remove_optimal_edge) {
        std::vector<int> on_path;
        for (std::size_t e = 0; e < sample.labels.edges.size(); ++e)
          if (sample.labels.edges[e] == 1) on_path.push_back(static_cast<int>(e));
        if (on_path.empty()) return std::nullopt;
        edge_idx = on_path[static_cast<std::size_t>(
            rng.uniform_int(0, static_cast<std::int64_t>(on_path.size()) - 1))];
      } else {
        if (g.edges.empty()) return std::nullopt;
        edge_idx = static_cast<int>(rng.uniform_int(0, static_cast<std::int64_t>(g.edges.size()) - 1));
      }
      const Edge& e = g.edges[static_cast<std::size_t>(edge_idx)];
      EdgeRemoval r = remove_edge(g, e.u, e.v);
      reachable = r.destination_reachable;
      candidate = std::move(r.graph);
    }
    if (!reachable) continue;
    const PathResult pr = dijkstra(candidate);
    if (!pr.reachable || !pr.unique) continue;
    Sample out;
    out.labels = labels_from_path(candidate, pr);
    out.graph = std::move(candidate);
    out.structure_id = sample.structure_id;
    out.variant_id = sample.variant_id;
    return out;
  }
  return std::nullopt;
}

inline std::vector<GraphRecord> to_records(const std::vector<Sample>& samples) {
  std::vector<GraphRecord> recs;
  recs.reserve(samples.size());
  for (const Sample& s : samples) recs.push_back({s.graph, s.labels});
  return recs;
}

inline std::vector<Sample> from_records(const std::vector<GraphRecord>& recs,
                                        bool require_labels = true) {
  std::vector<Sample> out;
  out.reserve(recs.size());
  for (std::size_t i = 0; i < recs.size(); ++i) {
    const GraphRecord& r = recs[i];
    Sample s;
    s.graph = r.graph;
    if (r.labels) {
      s.labels = *r.labels;
    } else if (require_labels) {
      throw std::runtime_error("record " + std::to_string(i) + " has no labels");
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace pathgnn
