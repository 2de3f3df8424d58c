#pragma once

// Measurement harness over trained parameters: all-or-nothing Path Accuracy
// with node-count and hop-count breakdowns, off-size sweeps, rerouting under
// removals, the inference-time benchmark, and path decoding from raw
// per-node/per-edge probabilities.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "pathgnn/datagen.hpp"
#include "pathgnn/model.hpp"
#include "pathgnn/oracle.hpp"
#include "pathgnn/parallel.hpp"
#include "pathgnn/trainer.hpp"

namespace pathgnn {

struct BucketStat {
  int key = 0;  // node count or hop count
  std::size_t total = 0;
  std::size_t correct = 0;
  double accuracy = 0.0;
};

struct EvalReport {
  std::size_t total = 0;
  std::size_t correct = 0;
  double path_accuracy = 0.0;
  std::vector<BucketStat> by_node_count;
  std::vector<BucketStat> by_hop_count;
};

inline int hop_count(const PathLabels& labels) {
  int h = 0;
  for (int e : labels.edges) h += e;
  return h;
}

/// All-or-nothing Path Accuracy of `params` over a labeled split, with
/// per-node-count and per-hop-count breakdowns. `mode` scopes the check to
/// the labels a single-head ablation actually predicts.
inline EvalReport evaluate(const std::vector<Sample>& samples, const ModelParams& params,
                           const ModelConfig& cfg, LossMode mode = LossMode::both,
                           int n_threads = 1) {
  if (samples.empty()) throw std::invalid_argument("evaluate: empty split");
  std::vector<char> ok(samples.size(), 0);
  parallel_for(samples.size(), n_threads, [&](std::size_t i) {
    ok[i] = prediction_correct(predict(samples[i].graph, params, cfg), samples[i].labels, mode) ? 1 : 0;
  });

  EvalReport rep;
  rep.total = samples.size();
  std::map<int, BucketStat> by_n, by_h;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const bool c = ok[i] != 0;
    rep.correct += c ? 1 : 0;
    BucketStat& bn = by_n[samples[i].graph.n_nodes];
    bn.total += 1;
    bn.correct += c ? 1 : 0;
    BucketStat& bh = by_h[hop_count(samples[i].labels)];
    bh.total += 1;
    bh.correct += c ? 1 : 0;
  }
  rep.path_accuracy = static_cast<double>(rep.correct) / static_cast<double>(rep.total);
  for (auto* m : {&by_n, &by_h}) {
    auto& out = m == &by_n ? rep.by_node_count : rep.by_hop_count;
    for (auto& [key, b] : *m) {
      b.key = key;
      b.accuracy = static_cast<double>(b.correct) / static_cast<double>(b.total);
      out.push_back(b);
    }
  }
  return rep;
}

/// Accuracy per node count on freshly generated graphs, one bucket per
/// entry of `node_counts`. Spans sizes beyond the training range to measure
/// generalization.
inline std::vector<BucketStat> node_count_sweep(const ModelParams& params, const ModelConfig& cfg,
                                                const std::vector<int>& node_counts,
                                                int samples_per_size, std::uint64_t seed,
                                                double extra_edge_factor = 1.0,
                                                double weight_lo = 1.0, double weight_hi = 10.0,
                                                int n_threads = 1) {
  if (node_counts.empty()) throw std::invalid_argument("node_count_sweep: no sizes listed");
  if (samples_per_size < 1) throw std::invalid_argument("node_count_sweep: need samples_per_size >= 1");
  std::vector<BucketStat> out;
  for (std::size_t k = 0; k < node_counts.size(); ++k) {
    const int n = node_counts[k];
    const std::vector<Sample> samples =
        gen_samples(mix_seed(seed, 0xc0daul, static_cast<std::uint64_t>(n)), samples_per_size, n, n,
                    extra_edge_factor, weight_lo, weight_hi);
    const EvalReport rep = evaluate(samples, params, cfg, LossMode::both, n_threads);
    out.push_back({n, rep.total, rep.correct, rep.path_accuracy});
  }
  return out;
}

struct ReroutingReport {
  EvalReport report;          // accuracy on the perturbed graphs
  std::size_t attempted = 0;  // input samples
  std::size_t perturbed = 0;  // samples where a valid removal existed
  std::vector<Sample> samples;
};

/// Applies one removal per sample (skipping samples where no removal keeps
/// a unique optimal path), relabels by the oracle, and scores the model on
/// the perturbed graphs.
inline ReroutingReport rerouting_eval(const std::vector<Sample>& samples, const ModelParams& params,
                                      const ModelConfig& cfg, PerturbMode mode, std::uint64_t seed,
                                      int n_threads = 1) {
  ReroutingReport rr;
  rr.attempted = samples.size();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    Rng rng(mix_seed(seed, 0x9e77ul, static_cast<std::uint64_t>(i)));
    if (std::optional<Sample> p = perturb(samples[i], mode, rng)) rr.samples.push_back(std::move(*p));
  }
  rr.perturbed = rr.samples.size();
  if (rr.perturbed == 0) throw std::runtime_error("rerouting_eval: no sample admitted a valid removal");
  rr.report = evaluate(rr.samples, params, cfg, LossMode::both, n_threads);
  return rr;
}

struct TimingBucket {
  int hops = 0;
  std::size_t n_graphs = 0;
  double model_seconds = 0.0;   // mean over graphs of per-graph median
  double oracle_seconds = 0.0;
  double model_relative = 0.0;  // normalized by the 1-hop bucket
  double oracle_relative = 0.0;
};

struct TimingReport {
  std::vector<TimingBucket> buckets;
  double model_max_over_min = 0.0;
  int repetitions = 0;
};

/// Graphs at a fixed node count grouped by oracle hop count, for the timing
/// benchmark. Draws random graphs until every requested bucket holds
/// `per_bucket` entries; rejects when the draw budget runs out (a hop count
/// may be unreachable at the chosen size).
inline std::vector<std::vector<Graph>> collect_hop_buckets(int node_count,
                                                           const std::vector<int>& hops,
                                                           std::size_t per_bucket,
                                                           std::uint64_t seed,
                                                           double extra_edge_factor = 1.0,
                                                           double weight_lo = 1.0,
                                                           double weight_hi = 10.0,
                                                           std::size_t max_draws = 500000) {
  if (hops.empty() || per_bucket == 0) throw std::invalid_argument("collect_hop_buckets: empty request");
  std::vector<std::vector<Graph>> buckets(hops.size());
  Rng rng(mix_seed(seed, 0x7177ul, static_cast<std::uint64_t>(node_count)));
  std::size_t filled = 0;
  for (std::size_t draw = 0; draw < max_draws && filled < hops.size(); ++draw) {
    const Topology topo = gen_structure(rng, node_count, extra_edge_factor);
    std::vector<Edge> edges;
    edges.reserve(topo.edges.size());
    for (const auto& [u, v] : topo.edges) edges.push_back({u, v, rng.uniform_real(weight_lo, weight_hi)});
    const int s = static_cast<int>(rng.uniform_int(0, node_count - 1));
    int d = s;
    while (d == s) d = static_cast<int>(rng.uniform_int(0, node_count - 1));
    Graph g = build_graph(node_count, edges, s, d);
    const PathResult pr = dijkstra(g, /*check_unique=*/false);
    if (!pr.reachable) continue;
    for (std::size_t b = 0; b < hops.size(); ++b) {
      if (pr.hops() == hops[b] && buckets[b].size() < per_bucket) {
        buckets[b].push_back(std::move(g));
        if (buckets[b].size() == per_bucket) ++filled;
        break;
      }
    }
  }
  for (std::size_t b = 0; b < hops.size(); ++b)
    if (buckets[b].size() < per_bucket)
      throw std::runtime_error("collect_hop_buckets: only " + std::to_string(buckets[b].size()) +
                               " of " + std::to_string(per_bucket) + " graphs with " +
                               std::to_string(hops[b]) + " hops at n=" + std::to_string(node_count));
  return buckets;
}

/// Wall-clock comparison of model inference and the Dijkstra oracle across
/// hop buckets at fixed node count. Per graph: one untimed warmup, then the
/// median of `reps` timed runs; per bucket: the mean of those medians; both
/// series normalized by their own 1-hop bucket. The measured region runs on
/// this thread only.
inline TimingReport timing_benchmark(const ModelParams& params, const ModelConfig& cfg,
                                     const std::vector<int>& hops,
                                     const std::vector<std::vector<Graph>>& buckets, int reps = 10) {
  if (hops.size() != buckets.size())
    throw std::invalid_argument("timing_benchmark: bucket/hop list mismatch");
  if (std::find(hops.begin(), hops.end(), 1) == hops.end())
    throw std::invalid_argument("timing_benchmark: need a 1-hop bucket to normalize against");
  if (reps < 10) throw std::invalid_argument("timing_benchmark: need >= 10 repetitions");
  for (std::size_t b = 0; b < buckets.size(); ++b)
    if (buckets[b].size() < 50)
      throw std::invalid_argument("timing_benchmark: bucket " + std::to_string(hops[b]) +
                                  " holds " + std::to_string(buckets[b].size()) +
                                  " graphs, need >= 50");

  using clock = std::chrono::steady_clock;
  auto timed_median = [&](auto&& fn) {
    std::vector<double> times(static_cast<std::size_t>(reps));
    fn();  // warmup, excluded
    for (int r = 0; r < reps; ++r) {
      const auto t0 = clock::now();
      fn();
      times[static_cast<std::size_t>(r)] = std::chrono::duration<double>(clock::now() - t0).count();
    }
    std::nth_element(times.begin(), times.begin() + reps / 2, times.end());
    return times[static_cast<std::size_t>(reps / 2)];
  };

  TimingReport rep;
  rep.repetitions = reps;
  for (std::size_t b = 0; b < buckets.size(); ++b) {
    TimingBucket tb;
    tb.hops = hops[b];
    tb.n_graphs = buckets[b].size();
    double model_sum = 0.0, oracle_sum = 0.0;
    for (const Graph& g : buckets[b]) {
      model_sum += timed_median([&] { (void)predict(g, params, cfg); });
      oracle_sum += timed_median([&] { (void)dijkstra(g, /*check_unique=*/false); });
    }
    tb.model_seconds = model_sum / static_cast<double>(buckets[b].size());
    tb.oracle_seconds = oracle_sum / static_cast<double>(buckets[b].size());
    rep.buckets.push_back(tb);
  }

  double model_1hop = 0.0, oracle_1hop = 0.0;
  for (const TimingBucket& tb : rep.buckets)
    if (tb.hops == 1) {
      model_1hop = tb.model_seconds;
      oracle_1hop = tb.oracle_seconds;
    }
  double mx = 0.0, mn = std::numeric_limits<double>::infinity();
  for (TimingBucket& tb : rep.buckets) {
    tb.model_relative = tb.model_seconds / model_1hop;
    tb.oracle_relative = tb.oracle_seconds / oracle_1hop;
    mx = std::max(mx, tb.model_relative);
    mn = std::min(mn, tb.model_relative);
  }
  rep.model_max_over_min = mx / mn;
  return rep;
}

enum class DecodeFailure { none, disconnected, branching, node_edge_mismatch };

inline const char* to_string(DecodeFailure f) {
  switch (f) {
    case DecodeFailure::none: return "none";
    case DecodeFailure::disconnected: return "disconnected";
    case DecodeFailure::branching: return "branching";
    default: return "node-edge-mismatch";
  }
}

struct DecodedPath {
  bool ok = false;
  DecodeFailure failure = DecodeFailure::none;
  std::vector<int> nodes;         // source..destination when ok
  std::vector<int> edge_indices;  // parallel to the hops of `nodes`
  std::string detail;
};

/// Reads a concrete path out of raw predictions: edges at or above the
/// threshold must form exactly one simple source→destination path whose
/// node set equals the nodes at or above the threshold. Anything else is a
/// structured failure, not an exception.
inline DecodedPath decode_path(const Predictions& pred, const Graph& g) {
  if (pred.node_probs.size() != static_cast<std::size_t>(g.n_nodes) ||
      pred.edge_probs.size() != g.edges.size())
    throw std::invalid_argument("decode_path: predictions do not match the graph");
  DecodedPath out;

  std::vector<int> sel_edges;
  for (std::size_t e = 0; e < pred.edge_probs.size(); ++e)
    if (classify(pred.edge_probs[e]) == 1) sel_edges.push_back(static_cast<int>(e));
  std::vector<char> sel_nodes(static_cast<std::size_t>(g.n_nodes), 0);
  for (int i = 0; i < g.n_nodes; ++i)
    if (classify(pred.node_probs[static_cast<std::size_t>(i)]) == 1)
      sel_nodes[static_cast<std::size_t>(i)] = 1;

  // adjacency restricted to selected edges
  std::vector<std::vector<std::pair<int, int>>> adj(static_cast<std::size_t>(g.n_nodes));
  for (int e : sel_edges) {
    const Edge& ed = g.edges[static_cast<std::size_t>(e)];
    adj[static_cast<std::size_t>(ed.u)].push_back({ed.v, e});
    adj[static_cast<std::size_t>(ed.v)].push_back({ed.u, e});
  }

  auto fail = [&](DecodeFailure f, std::string detail) {
    out.failure = f;
    out.detail = std::move(detail);
    return out;
  };

  for (int i = 0; i < g.n_nodes; ++i) {
    const std::size_t deg = adj[static_cast<std::size_t>(i)].size();
    if (deg > 2)
      return fail(DecodeFailure::branching,
                  "node " + std::to_string(i) + " has " + std::to_string(deg) + " selected edges");
  }
  if (adj[static_cast<std::size_t>(g.source)].size() != 1)
    return fail(adj[static_cast<std::size_t>(g.source)].empty() ? DecodeFailure::disconnected
                                                                : DecodeFailure::branching,
                "source has " + std::to_string(adj[static_cast<std::size_t>(g.source)].size()) +
                    " selected edges, needs exactly 1");
  if (adj[static_cast<std::size_t>(g.destination)].size() != 1)
    return fail(adj[static_cast<std::size_t>(g.destination)].empty()
                    ? DecodeFailure::disconnected
                    : DecodeFailure::branching,
                "destination has " +
                    std::to_string(adj[static_cast<std::size_t>(g.destination)].size()) +
                    " selected edges, needs exactly 1");

  // walk from the source; degrees <= 2 make the continuation unique
  std::vector<int> nodes{g.source};
  std::vector<int> edge_indices;
  int prev_edge = -1;
  int at = g.source;
  while (at != g.destination) {
    int next = -1, via = -1;
    for (const auto& [n, e] : adj[static_cast<std::size_t>(at)])
      if (e != prev_edge) {
        next = n;
        via = e;
      }
    if (next < 0)
      return fail(DecodeFailure::disconnected,
                  "selected edges dead-end at node " + std::to_string(at));
    nodes.push_back(next);
    edge_indices.push_back(via);
    prev_edge = via;
    at = next;
    if (nodes.size() > static_cast<std::size_t>(g.n_nodes))
      return fail(DecodeFailure::branching, "selected edges loop back on themselves");
  }
  if (edge_indices.size() != sel_edges.size())
    return fail(DecodeFailure::disconnected,
                "selected edges include " + std::to_string(sel_edges.size() - edge_indices.size()) +
                    " not on the source-destination walk");

  std::vector<char> on_path(static_cast<std::size_t>(g.n_nodes), 0);
  for (int i : nodes) on_path[static_cast<std::size_t>(i)] = 1;
  for (int i = 0; i < g.n_nodes; ++i)
    if (on_path[static_cast<std::size_t>(i)] != sel_nodes[static_cast<std::size_t>(i)])
      return fail(DecodeFailure::node_edge_mismatch,
                  "node " + std::to_string(i) +
                      (on_path[static_cast<std::size_t>(i)] ? " lies on the decoded path but is not selected"
                                                            : " is selected but not on the decoded path"));

  out.ok = true;
  out.nodes = std::move(nodes);
  out.edge_indices = std::move(edge_indices);
  return out;
}

}  // namespace pathgnn
