#pragma once

// Exact shortest-path ground truth. dijkstra() is the production oracle;
// brute_force_shortest() exists purely to cross-check it on small graphs.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <queue>
#include <stdexcept>
#include <vector>

#include "pathgnn/graph.hpp"

namespace pathgnn {

/// Two path costs within this absolute tolerance count as a tie. Weights are
/// O(1..10) doubles and paths are short, so 1e-9 is far above accumulated
/// rounding yet far below any real cost gap the generator produces.
inline constexpr double kCostTieTolerance = 1e-9;

struct PathResult {
  bool reachable = false;
  double cost = std::numeric_limits<double>::infinity();
  /// Node sequence source..destination; empty when unreachable.
  std::vector<int> nodes;
  /// Indices into g.edges for each hop of the path.
  std::vector<int> edge_indices;
  /// Number of distinct optimal paths (saturates at uint64 max). Only
  /// populated when uniqueness counting is requested; otherwise 1 if
  /// reachable. unique == (num_shortest_paths == 1).
  std::uint64_t num_shortest_paths = 0;
  bool unique = false;

  int hops() const { return static_cast<int>(edge_indices.size()); }
};

namespace detail {

/// Counts distinct minimum-cost source->x paths over the tight-edge DAG
/// restricted to settled nodes, in settle order. Every tight predecessor of
/// a settled node settles strictly earlier (weights are positive), so the
/// restriction is exact for all settled nodes.
inline std::uint64_t count_tight_paths(const Graph& g, const std::vector<double>& dist,
                                       const std::vector<int>& settle_order, int target) {
  constexpr std::uint64_t kMax = std::numeric_limits<std::uint64_t>::max();
  std::vector<int> pos(static_cast<std::size_t>(g.n_nodes), -1);
  for (std::size_t i = 0; i < settle_order.size(); ++i)
    pos[static_cast<std::size_t>(settle_order[i])] = static_cast<int>(i);
  std::vector<std::uint64_t> ways(static_cast<std::size_t>(g.n_nodes), 0);
  ways[static_cast<std::size_t>(g.source)] = 1;
  for (int u : settle_order) {
    if (u == g.source) continue;
    std::uint64_t total = 0;
    for (const auto& [v, e] : g.adjacency[static_cast<std::size_t>(u)]) {
      // A tight predecessor always settles strictly earlier; skipping the
      // rest guards against frontier nodes whose tentative distance happens
      // to look tight under the tolerance.
      if (pos[static_cast<std::size_t>(v)] < 0 ||
          pos[static_cast<std::size_t>(v)] >= pos[static_cast<std::size_t>(u)])
        continue;
      if (std::abs(dist[static_cast<std::size_t>(v)] + g.edges[static_cast<std::size_t>(e)].w -
                   dist[static_cast<std::size_t>(u)]) <= kCostTieTolerance) {
        const std::uint64_t add = ways[static_cast<std::size_t>(v)];
        total = (total > kMax - add) ? kMax : total + add;
      }
    }
    ways[static_cast<std::size_t>(u)] = total;
    if (u == target) break;
  }
  return ways[static_cast<std::size_t>(target)];
}

}  // namespace detail

/// Dijkstra from g.source, stopping as soon as g.destination is settled.
/// With check_unique the result also reports how many optimal paths exist,
/// treating costs within kCostTieTolerance as equal. The path returned is
/// the heap's deterministic choice: ties broken by smaller node id first.
inline PathResult dijkstra(const Graph& g, bool check_unique = true) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(static_cast<std::size_t>(g.n_nodes), kInf);
  std::vector<int> prev_node(static_cast<std::size_t>(g.n_nodes), -1);
  std::vector<int> prev_edge(static_cast<std::size_t>(g.n_nodes), -1);
  std::vector<char> settled(static_cast<std::size_t>(g.n_nodes), 0);
  std::vector<int> settle_order;
  settle_order.reserve(static_cast<std::size_t>(g.n_nodes));

  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<Item>> heap;
  dist[static_cast<std::size_t>(g.source)] = 0.0;
  heap.emplace(0.0, g.source);

  PathResult out;
  while (!heap.empty()) {
    const auto [d, u] = heap.top();
    heap.pop();
    if (settled[static_cast<std::size_t>(u)]) continue;  // lazy deletion
    settled[static_cast<std::size_t>(u)] = 1;
    settle_order.push_back(u);
    if (u == g.destination) break;
    for (const auto& [v, e] : g.adjacency[static_cast<std::size_t>(u)]) {
      if (settled[static_cast<std::size_t>(v)]) continue;
      const double nd = d + g.edges[static_cast<std::size_t>(e)].w;
      if (nd < dist[static_cast<std::size_t>(v)]) {
        dist[static_cast<std::size_t>(v)] = nd;
        prev_node[static_cast<std::size_t>(v)] = u;
        prev_edge[static_cast<std::size_t>(v)] = e;
        heap.emplace(nd, v);
      }
    }
  }

  if (!settled[static_cast<std::size_t>(g.destination)]) return out;

  out.reachable = true;
  out.cost = dist[static_cast<std::size_t>(g.destination)];
  for (int x = g.destination; x != g.source; x = prev_node[static_cast<std::size_t>(x)]) {
    out.nodes.push_back(x);
    out.edge_indices.push_back(prev_edge[static_cast<std::size_t>(x)]);
  }
  out.nodes.push_back(g.source);
  std::reverse(out.nodes.begin(), out.nodes.end());
  std::reverse(out.edge_indices.begin(), out.edge_indices.end());

  if (check_unique) {
    out.num_shortest_paths = detail::count_tight_paths(g, dist, settle_order, g.destination);
    out.unique = (out.num_shortest_paths == 1);
  } else {
    out.num_shortest_paths = 1;
    out.unique = true;
  }
  return out;
}

/// Exhaustive simple-path enumeration. Exponential; refuses n > 12. Returns
/// the minimum-cost path with num_shortest_paths counting cost ties under
/// kCostTieTolerance. Tie-broken by first enumeration order, which visits
/// neighbors by adjacency order; tests compare cost and uniqueness, not the
/// particular optimal path chosen.
inline PathResult brute_force_shortest(const Graph& g) {
  if (g.n_nodes > 12)
    throw std::invalid_argument("brute_force_shortest: refusing n > 12 (exponential)");
  PathResult best;
  std::vector<char> used(static_cast<std::size_t>(g.n_nodes), 0);
  std::vector<int> nodes{g.source};
  std::vector<int> edge_idx;
  used[static_cast<std::size_t>(g.source)] = 1;

  auto dfs = [&](auto&& self, int u, double cost) -> void {
    if (u == g.destination) {
      if (!best.reachable || cost < best.cost - kCostTieTolerance) {
        best.reachable = true;
        best.cost = cost;
        best.nodes = nodes;
        best.edge_indices = edge_idx;
        best.num_shortest_paths = 1;
      } else if (std::abs(cost - best.cost) <= kCostTieTolerance) {
        if (best.num_shortest_paths != std::numeric_limits<std::uint64_t>::max())
          ++best.num_shortest_paths;
        if (cost < best.cost) best.cost = cost;  // keep the true minimum of the tie group
      }
      return;
    }
    for (const auto& [v, e] : g.adjacency[static_cast<std::size_t>(u)]) {
      if (used[static_cast<std::size_t>(v)]) continue;
      const double nc = cost + g.edges[static_cast<std::size_t>(e)].w;
      if (best.reachable && nc > best.cost + kCostTieTolerance) continue;  // prune
      used[static_cast<std::size_t>(v)] = 1;
      nodes.push_back(v);
      edge_idx.push_back(e);
      self(self, v, nc);
      nodes.pop_back();
      edge_idx.pop_back();
      used[static_cast<std::size_t>(v)] = 0;
    }
  };
  dfs(dfs, g.source, 0.0);
  best.unique = best.reachable && best.num_shortest_paths == 1;
  return best;
}

/// Binary ground-truth labels: 1 for nodes/edges on the optimal path.
struct PathLabels {
  std::vector<int> nodes;
  std::vector<int> edges;
};

inline PathLabels labels_from_path(const Graph& g, const PathResult& p) {
  if (!p.reachable) throw std::invalid_argument("labels_from_path: path unreachable");
  PathLabels lab;
  lab.nodes.assign(static_cast<std::size_t>(g.n_nodes), 0);
  lab.edges.assign(g.edges.size(), 0);
  for (int x : p.nodes) lab.nodes[static_cast<std::size_t>(x)] = 1;
  for (int e : p.edge_indices) lab.edges[static_cast<std::size_t>(e)] = 1;
  return lab;
}

}  // namespace pathgnn
