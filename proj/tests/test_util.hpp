#pragma once

// Fixtures shared across test binaries. The random generator here is kept
// deliberately independent of the dataset generator (different tree
// construction) so tests of that module are not circular.

#include <queue>
#include <vector>

#include "pathgnn/graph.hpp"
#include "pathgnn/rng.hpp"

namespace pathgnn::testutil {

/// 6-node graph where source 2 and destination 4 share a direct cheap edge;
/// removing it forces a long detour of cost 7 that skips the expensive
/// (3,4) edge even though both its endpoints lie on the detour.
inline Graph fig_reroute_graph() {
  std::vector<Edge> edges{
      {0, 1, 1.0}, {0, 2, 1.0}, {1, 3, 2.0}, {3, 5, 2.0},
      {4, 5, 1.0}, {2, 4, 1.0}, {3, 4, 8.0},
  };
  return build_graph(6, edges, 2, 4);
}

/// Smallest interesting case: 0-1-2 (cost 2) beats the direct 0-2 (cost 3).
inline Graph triangle_graph() {
  return build_graph(3, {{0, 1, 1.0}, {1, 2, 1.0}, {0, 2, 3.0}}, 0, 2);
}

/// Two equal-cost routes 0-1-3 and 0-2-3.
inline Graph tied_square_graph() {
  return build_graph(4, {{0, 1, 1.0}, {1, 3, 1.0}, {0, 2, 1.0}, {2, 3, 1.0}}, 0, 3);
}

/// Random connected graph: random-attachment spanning tree plus extra edges.
/// integer_weights draws w from {1,2,3,4} to make cost ties common.
inline Graph random_connected_graph(Rng& rng, int n, double extra_factor = 1.0,
                                    bool integer_weights = false) {
  std::vector<Edge> edges;
  for (int i = 1; i < n; ++i) {
    const int p = static_cast<int>(rng.uniform_int(0, i - 1));
    edges.push_back({p, i, 0.0});
  }
  std::vector<std::pair<int, int>> candidates;
  for (int u = 0; u < n; ++u)
    for (int v = u + 1; v < n; ++v) {
      bool in_tree = false;
      for (const Edge& e : edges)
        if (std::min(e.u, e.v) == u && std::max(e.u, e.v) == v) in_tree = true;
      if (!in_tree) candidates.emplace_back(u, v);
    }
  rng.shuffle(candidates);
  const int extra = std::min(static_cast<int>(extra_factor * n), static_cast<int>(candidates.size()));
  for (int k = 0; k < extra; ++k) edges.push_back({candidates[static_cast<std::size_t>(k)].first,
                                                   candidates[static_cast<std::size_t>(k)].second, 0.0});
  for (Edge& e : edges)
    e.w = integer_weights ? static_cast<double>(rng.uniform_int(1, 4)) : rng.uniform_real(1.0, 10.0);
  const int s = static_cast<int>(rng.uniform_int(0, n - 1));
  int d = s;
  while (d == s) d = static_cast<int>(rng.uniform_int(0, n - 1));
  return build_graph(n, edges, s, d);
}

/// Unweighted hop distance from `from` to every node (-1 if unreachable).
inline std::vector<int> bfs_hops(const Graph& g, int from) {
  std::vector<int> hops(static_cast<std::size_t>(g.n_nodes), -1);
  std::queue<int> q;
  hops[static_cast<std::size_t>(from)] = 0;
  q.push(from);
  while (!q.empty()) {
    const int u = q.front();
    q.pop();
    for (const auto& [v, e] : g.adjacency[static_cast<std::size_t>(u)]) {
      (void)e;
      if (hops[static_cast<std::size_t>(v)] < 0) {
        hops[static_cast<std::size_t>(v)] = hops[static_cast<std::size_t>(u)] + 1;
        q.push(v);
      }
    }
  }
  return hops;
}

}  // namespace pathgnn::testutil
