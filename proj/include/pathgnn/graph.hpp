#pragma once

// Canonical weighted undirected graph shared by every other component.
// Graphs are immutable after construction; mutating operations return new
// values, so instances can be shared read-only across threads.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace pathgnn {

/// One undirected edge, stored once with canonical orientation u < v.
struct Edge {
  int u = 0;
  int v = 0;
  double w = 0.0;
};

enum class NodeRole { source, destination, other };

/// 3-dimensional one-hot encoding of a node role, the model's input feature.
inline std::array<double, 3> role_one_hot(NodeRole r) {
  switch (r) {
    case NodeRole::source:
      return {1.0, 0.0, 0.0};
    case NodeRole::destination:
      return {0.0, 1.0, 0.0};
    default:
      return {0.0, 0.0, 1.0};
  }
}

struct Graph {
  int n_nodes = 0;
  /// Canonical edges in construction order. Mutation and permutation keep
  /// this order stable so per-edge labels and predictions stay aligned.
  std::vector<Edge> edges;
  /// adjacency[i] lists (neighbor, edge index) pairs, mirroring both
  /// directions of each stored edge.
  std::vector<std::vector<std::pair<int, int>>> adjacency;
  int source = 0;
  int destination = 0;
  /// True when every node is reachable from the source. Enforced by the
  /// dataset generator; mutations may break it and report instead.
  bool connected = false;

  NodeRole role(int i) const {
    if (i == source) return NodeRole::source;
    if (i == destination) return NodeRole::destination;
    return NodeRole::other;
  }

  int degree(int i) const { return static_cast<int>(adjacency[i].size()); }

  double max_edge_weight() const {
    double m = 0.0;
    for (const Edge& e : edges) m = std::max(m, e.w);
    return m;
  }
};

/// Index of edge {u,v} in g.edges, or -1 when absent.
inline int find_edge(const Graph& g, int u, int v) {
  if (u > v) std::swap(u, v);
  for (std::size_t i = 0; i < g.edges.size(); ++i)
    if (g.edges[i].u == u && g.edges[i].v == v) return static_cast<int>(i);
  return -1;
}

namespace detail {

inline std::vector<char> reachable_from(int n, const std::vector<std::vector<std::pair<int, int>>>& adj,
                                        int start) {
  std::vector<char> seen(static_cast<std::size_t>(n), 0);
  std::vector<int> stack{start};
  seen[static_cast<std::size_t>(start)] = 1;
  while (!stack.empty()) {
    const int u = stack.back();
    stack.pop_back();
    for (const auto& [v, e] : adj[static_cast<std::size_t>(u)]) {
      (void)e;
      if (!seen[static_cast<std::size_t>(v)]) {
        seen[static_cast<std::size_t>(v)] = 1;
        stack.push_back(v);
      }
    }
  }
  return seen;
}

}  // namespace detail

/// Validates and indexes a graph. Throws std::invalid_argument on any
/// violated precondition: out-of-range ids, non-positive or non-finite
/// weights, self-loops, duplicate edges, or source == destination.
inline Graph build_graph(int n_nodes, const std::vector<Edge>& edges, int source, int destination) {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("build_graph: " + msg); };
  if (n_nodes < 2) fail("need at least 2 nodes, got " + std::to_string(n_nodes));
  auto check_node = [&](int x, const char* what) {
    if (x < 0 || x >= n_nodes) {
      std::ostringstream os;
      os << what << " id " << x << " out of range [0," << n_nodes << ")";
      fail(os.str());
    }
  };
  check_node(source, "source");
  check_node(destination, "destination");
  if (source == destination) fail("source == destination (" + std::to_string(source) + ")");

  Graph g;
  g.n_nodes = n_nodes;
  g.source = source;
  g.destination = destination;
  g.edges.reserve(edges.size());
  g.adjacency.assign(static_cast<std::size_t>(n_nodes), {});

  std::vector<std::uint64_t> seen_keys;
  seen_keys.reserve(edges.size());
  for (const Edge& e : edges) {
    check_node(e.u, "edge endpoint");
    check_node(e.v, "edge endpoint");
    if (e.u == e.v) fail("self-loop at node " + std::to_string(e.u));
    if (!(e.w > 0.0) || !std::isfinite(e.w)) {
      std::ostringstream os;
      os << "edge (" << e.u << "," << e.v << ") has non-positive or non-finite weight " << e.w;
      fail(os.str());
    }
    const int a = std::min(e.u, e.v);
    const int b = std::max(e.u, e.v);
    const std::uint64_t key = (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b);
    if (std::find(seen_keys.begin(), seen_keys.end(), key) != seen_keys.end()) {
      std::ostringstream os;
      os << "duplicate edge (" << a << "," << b << ")";
      fail(os.str());
    }
    seen_keys.push_back(key);
    const int idx = static_cast<int>(g.edges.size());
    g.edges.push_back({a, b, e.w});
    g.adjacency[static_cast<std::size_t>(a)].emplace_back(b, idx);
    g.adjacency[static_cast<std::size_t>(b)].emplace_back(a, idx);
  }

  const auto seen = detail::reachable_from(n_nodes, g.adjacency, source);
  g.connected = std::all_of(seen.begin(), seen.end(), [](char c) { return c != 0; });
  return g;
}

inline bool destination_reachable(const Graph& g) {
  return detail::reachable_from(g.n_nodes, g.adjacency, g.source)[static_cast<std::size_t>(g.destination)] != 0;
}

struct EdgeRemoval {
  Graph graph;
  bool destination_reachable = false;
};

/// Removes edge {u,v}; throws std::invalid_argument when it does not exist.
inline EdgeRemoval remove_edge(const Graph& g, int u, int v) {
  const int idx = find_edge(g, u, v);
  if (idx < 0) {
    std::ostringstream os;
    os << "remove_edge: edge (" << u << "," << v << ") not present";
    throw std::invalid_argument(os.str());
  }
  std::vector<Edge> rest;
  rest.reserve(g.edges.size() - 1);
  for (std::size_t i = 0; i < g.edges.size(); ++i)
    if (static_cast<int>(i) != idx) rest.push_back(g.edges[i]);
  EdgeRemoval out{build_graph(g.n_nodes, rest, g.source, g.destination), false};
  out.destination_reachable = destination_reachable(out.graph);
  return out;
}

struct NodeRemoval {
  Graph graph;
  /// id_map[old] = new compacted id, or -1 for the removed node.
  std::vector<int> id_map;
  bool destination_reachable = false;
};

/// Removes node x and its incident edges; remaining ids compact to 0..n-2.
/// Removing the source or destination is rejected.
inline NodeRemoval remove_node(const Graph& g, int x) {
  if (x < 0 || x >= g.n_nodes)
    throw std::invalid_argument("remove_node: node id " + std::to_string(x) + " out of range");
  if (x == g.source || x == g.destination)
    throw std::invalid_argument("remove_node: refusing to remove the " +
                                std::string(x == g.source ? "source" : "destination"));
  NodeRemoval out;
  out.id_map.assign(static_cast<std::size_t>(g.n_nodes), -1);
  int next = 0;
  for (int i = 0; i < g.n_nodes; ++i)
    if (i != x) out.id_map[static_cast<std::size_t>(i)] = next++;
  std::vector<Edge> rest;
  rest.reserve(g.edges.size());
  for (const Edge& e : g.edges) {
    if (e.u == x || e.v == x) continue;
    rest.push_back({out.id_map[static_cast<std::size_t>(e.u)], out.id_map[static_cast<std::size_t>(e.v)], e.w});
  }
  out.graph = build_graph(g.n_nodes - 1, rest, out.id_map[static_cast<std::size_t>(g.source)],
                          out.id_map[static_cast<std::size_t>(g.destination)]);
  out.destination_reachable = destination_reachable(out.graph);
  return out;
}

/// Relabels nodes by perm (perm[old] = new). The edge order is preserved so
/// edge k of the result corresponds to edge k of the input.
inline Graph permute(const Graph& g, const std::vector<int>& perm) {
  if (static_cast<int>(perm.size()) != g.n_nodes)
    throw std::invalid_argument("permute: permutation size does not match node count");
  std::vector<char> hit(static_cast<std::size_t>(g.n_nodes), 0);
  for (int p : perm) {
    if (p < 0 || p >= g.n_nodes || hit[static_cast<std::size_t>(p)])
      throw std::invalid_argument("permute: not a bijection on 0..n-1");
    hit[static_cast<std::size_t>(p)] = 1;
  }
  std::vector<Edge> mapped;
  mapped.reserve(g.edges.size());
  for (const Edge& e : g.edges)
    mapped.push_back({perm[static_cast<std::size_t>(e.u)], perm[static_cast<std::size_t>(e.v)], e.w});
  return build_graph(g.n_nodes, mapped, perm[static_cast<std::size_t>(g.source)],
                     perm[static_cast<std::size_t>(g.destination)]);
}

inline std::vector<int> inverse_permutation(const std::vector<int>& perm) {
  std::vector<int> inv(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) inv[static_cast<std::size_t>(perm[i])] = static_cast<int>(i);
  return inv;
}

/// Structural equality after canonical edge ordering. Weights compare exactly.
inline bool operator==(const Graph& a, const Graph& b) {
  if (a.n_nodes != b.n_nodes || a.source != b.source || a.destination != b.destination ||
      a.edges.size() != b.edges.size())
    return false;
  auto sorted = [](const Graph& g) {
    std::vector<Edge> es = g.edges;
    std::sort(es.begin(), es.end(), [](const Edge& x, const Edge& y) {
      return std::tie(x.u, x.v) < std::tie(y.u, y.v);
    });
    return es;
  };
  const auto ea = sorted(a);
  const auto eb = sorted(b);
  for (std::size_t i = 0; i < ea.size(); ++i)
    if (ea[i].u != eb[i].u || ea[i].v != eb[i].v || ea[i].w != eb[i].w) return false;
  return true;
}

}  // namespace pathgnn
