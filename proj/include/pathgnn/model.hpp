#pragma once

// The predictor: L stacked edge-aware attention layers followed by two
// small classifier heads that score every node and every edge as on or off
// the optimal path.
//
// Layer l, for each node i over j ∈ N(i) ∪ {i}:
//   score_ij = aᵀ · LeakyReLU([W z_i ‖ W z_j ‖ Wᵉ e'_ij])
//   α_i·     = softmax over the neighborhood (self included, e'_ii = 0)
//   ẑ_i      = Σ_j α_ij (W z_j)
//   z_i      = Dropout(LeakyReLU(ẑ_i))
// The nonlinearity inside the score applies elementwise to the concatenated
// vector before the dot with a. Edge costs enter normalized per graph by the
// maximum cost; raw costs are never consumed by the model.
//
// Heads: p̂ = sigmoid(W₂ · LeakyReLU(W₁ x + b₁) + b₂), where x is z_i for
// nodes and z_u + z_v for edge {u,v}.

#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "pathgnn/autodiff.hpp"
#include "pathgnn/graph.hpp"
#include "pathgnn/rng.hpp"

namespace pathgnn {

inline constexpr int kInputWidth = 3;  // one-hot node role

struct ModelConfig {
  int n_layers = 8;
  std::vector<int> widths;  // d_1..d_L; empty means 64 everywhere
  int head_hidden = 32;
  double dropout_rate = 0.1;
  double leaky_slope = 0.2;

  static ModelConfig defaults() {
    ModelConfig c;
    c.widths.assign(8, 64);
    return c;
  }

  int width(int layer) const { return widths[static_cast<std::size_t>(layer)]; }
  int input_width(int layer) const { return layer == 0 ? kInputWidth : width(layer - 1); }
  int output_width() const { return widths.back(); }

  void validate() const {
    auto fail = [](const std::string& m) { throw std::invalid_argument("ModelConfig: " + m); };
    if (n_layers < 1) fail("need at least one layer");
    if (static_cast<int>(widths.size()) != n_layers) fail("widths must list one width per layer");
    for (int w : widths)
      if (w < 1) fail("layer widths must be >= 1");
    if (head_hidden < 1) fail("head_hidden must be >= 1");
    if (dropout_rate < 0.0 || dropout_rate >= 1.0) fail("dropout_rate must be in [0,1)");
    if (leaky_slope <= 0.0 || leaky_slope >= 1.0) fail("leaky_slope must be in (0,1)");
  }
};

inline bool operator==(const ModelConfig& a, const ModelConfig& b) {
  return a.n_layers == b.n_layers && a.widths == b.widths && a.head_hidden == b.head_hidden &&
         a.dropout_rate == b.dropout_rate && a.leaky_slope == b.leaky_slope;
}

/// Flat parameter store in canonical order: per layer (W, a, We), then the
/// node head (W1, b1, W2, b2), then the edge head (W1, b1, W2, b2).
/// Everything that iterates parameters (optimizer, checkpoints, gradient
/// checks) relies on this single ordering.
struct ModelParams {
  std::vector<Tensor> tensors;

  static int layer_w(int l) { return 3 * l; }
  static int layer_a(int l) { return 3 * l + 1; }
  static int layer_we(int l) { return 3 * l + 2; }
  static int node_head_base(const ModelConfig& cfg) { return 3 * cfg.n_layers; }
  static int edge_head_base(const ModelConfig& cfg) { return 3 * cfg.n_layers + 4; }
  static int tensor_count(const ModelConfig& cfg) { return 3 * cfg.n_layers + 8; }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const Tensor& t : tensors) n += t.size();
    return n;
  }
};

inline std::vector<std::string> param_names(const ModelConfig& cfg) {
  std::vector<std::string> names;
  for (int l = 0; l < cfg.n_layers; ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    names.push_back(p + "W");
    names.push_back(p + "a");
    names.push_back(p + "We");
  }
  for (const char* head : {"node_head.", "edge_head."})
    for (const char* t : {"W1", "b1", "W2", "b2"}) names.push_back(std::string(head) + t);
  return names;
}

/// (rows, cols) of every tensor in canonical order.
inline std::vector<std::pair<int, int>> param_shapes(const ModelConfig& cfg) {
  std::vector<std::pair<int, int>> shapes;
  for (int l = 0; l < cfg.n_layers; ++l) {
    const int d = cfg.width(l);
    shapes.emplace_back(d, cfg.input_width(l));  // W
    shapes.emplace_back(3 * d, 1);               // a
    shapes.emplace_back(d, 1);                   // We
  }
  const int dL = cfg.output_width();
  const int m = cfg.head_hidden;
  for (int h = 0; h < 2; ++h) {
    shapes.emplace_back(m, dL);  // W1
    shapes.emplace_back(1, m);   // b1
    shapes.emplace_back(1, m);   // W2
    shapes.emplace_back(1, 1);   // b2
  }
  return shapes;
}

inline void check_params_match(const ModelParams& params, const ModelConfig& cfg) {
  const auto shapes = param_shapes(cfg);
  if (params.tensors.size() != shapes.size())
    throw std::invalid_argument("parameters hold " + std::to_string(params.tensors.size()) +
                                " tensors but the config expects " + std::to_string(shapes.size()));
  const auto names = param_names(cfg);
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    const Tensor& t = params.tensors[i];
    if (t.rows != shapes[i].first || t.cols != shapes[i].second)
      throw std::invalid_argument(names[i] + " has shape " + shape_str(t) + ", expected (" +
                                  std::to_string(shapes[i].first) + "x" +
                                  std::to_string(shapes[i].second) + ")");
  }
}

/// Weights uniform in ±√(6/(fan_in+fan_out)), biases exactly zero. The fan
/// pair: W maps d_{l−1}→d_l; a maps 3d_l→1; We maps 1→d_l; head W1 maps
/// d_L→m and W2 maps m→1. Fill order is canonical, so one seed fixes every
/// weight.
inline ModelParams init_params(const ModelConfig& cfg, Rng& rng) {
  cfg.validate();
  ModelParams p;
  const auto shapes = param_shapes(cfg);
  const auto names = param_names(cfg);
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    Tensor t(shapes[i].first, shapes[i].second);
    const bool is_bias = names[i].find(".b") != std::string::npos;
    if (!is_bias) {
      int fan_in, fan_out;
      if (names[i].back() == 'W' && names[i].find("head") == std::string::npos) {
        fan_in = t.cols;
        fan_out = t.rows;
      } else if (names[i].back() == 'a') {
        fan_in = t.rows;
        fan_out = 1;
      } else if (names[i].find("We") != std::string::npos) {
        fan_in = 1;
        fan_out = t.rows;
      } else if (names[i].find("W1") != std::string::npos) {
        fan_in = t.cols;
        fan_out = t.rows;
      } else {  // W2, stored 1×m
        fan_in = t.cols;
        fan_out = 1;
      }
      const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
      for (double& x : t.v) x = rng.uniform_real(-bound, bound);
    }
    p.tensors.push_back(std::move(t));
  }
  return p;
}

/// Per-graph constant index for the attention layers: the directed pair
/// list (self pair first, then neighbors in adjacency order), its group
/// boundaries per owner node, normalized edge costs per pair, and the edge
/// endpoint lists for the edge head. Built once per graph, shared by all
/// layers and reused across forward passes.
struct PairIndex {
  std::shared_ptr<const std::vector<int>> rows_i;
  std::shared_ptr<const std::vector<int>> rows_j;
  std::shared_ptr<const std::vector<int>> starts;   // n+1 entries
  std::shared_ptr<const std::vector<int>> edge_us;  // |E|
  std::shared_ptr<const std::vector<int>> edge_vs;  // |E|
  Tensor ecosts;                                    // P×1, e'_ii = 0
  int n_pairs = 0;
};

inline PairIndex build_pair_index(const Graph& g) {
  auto rows_i = std::make_shared<std::vector<int>>();
  auto rows_j = std::make_shared<std::vector<int>>();
  auto starts = std::make_shared<std::vector<int>>();
  auto edge_us = std::make_shared<std::vector<int>>();
  auto edge_vs = std::make_shared<std::vector<int>>();
  const double max_w = g.max_edge_weight();
  const double denom = max_w > 0.0 ? max_w : 1.0;
  std::vector<double> costs;
  starts->push_back(0);
  for (int i = 0; i < g.n_nodes; ++i) {
    rows_i->push_back(i);
    rows_j->push_back(i);
    costs.push_back(0.0);  // self pair carries no edge cost
    for (const auto& [j, e] : g.adjacency[static_cast<std::size_t>(i)]) {
      rows_i->push_back(i);
      rows_j->push_back(j);
      costs.push_back(g.edges[static_cast<std::size_t>(e)].w / denom);
    }
    starts->push_back(static_cast<int>(rows_i->size()));
  }
  for (const Edge& e : g.edges) {
    edge_us->push_back(e.u);
    edge_vs->push_back(e.v);
  }
  PairIndex pi;
  pi.n_pairs = static_cast<int>(rows_i->size());
  pi.ecosts = Tensor::row_major(pi.n_pairs, 1, std::move(costs));
  pi.rows_i = std::move(rows_i);
  pi.rows_j = std::move(rows_j);
  pi.starts = std::move(starts);
  pi.edge_us = std::move(edge_us);
  pi.edge_vs = std::move(edge_vs);
  return pi;
}

/// z^(0): one-hot roles, one row per node.
inline Tensor role_features(const Graph& g) {
  Tensor z(g.n_nodes, kInputWidth);
  for (int i = 0; i < g.n_nodes; ++i) {
    const std::array<double, 3> oh = role_one_hot(g.role(i));
    for (int j = 0; j < kInputWidth; ++j) z.at(i, j) = oh[static_cast<std::size_t>(j)];
  }
  return z;
}

/// Parameters entered on a tape, canonical order preserved.
inline std::vector<Var> params_to_tape(Tape& t, const ModelParams& params, bool requires_grad) {
  std::vector<Var> vars;
  vars.reserve(params.tensors.size());
  for (const Tensor& p : params.tensors) vars.push_back(t.leaf(p, requires_grad));
  return vars;
}

/// Attention coefficients of one layer. proj is W·z for every node (n×d),
/// ecosts the normalized per-pair costs.
inline Var attention(Tape& t, const PairIndex& pi, Var proj, Var ecosts, Var a_vec, Var we,
                     double leaky_slope) {
  Var xi = gather_rows(t, proj, pi.rows_i);
  Var xj = gather_rows(t, proj, pi.rows_j);
  Var ecol = outer(t, ecosts, we);
  Var cat = concat_cols(t, xi, xj, ecol);
  Var scores = matvec(t, leaky_relu(t, cat, leaky_slope), a_vec);
  return neighbor_softmax(t, scores, pi.starts);
}

struct LayerOut {
  Var z;
  Var alpha;
};

/// One full layer: attention, weighted aggregation of projected neighbors,
/// nonlinearity, dropout.
inline LayerOut layer_forward(Tape& t, const PairIndex& pi, Var z_prev, Var ecosts, Var w, Var a_vec,
                              Var we, const ModelConfig& cfg, bool train, Rng* dropout_rng) {
  Var proj = matmul_nt(t, z_prev, w);
  Var alpha = attention(t, pi, proj, ecosts, a_vec, we, cfg.leaky_slope);
  Var xj = gather_rows(t, proj, pi.rows_j);
  Var mixed = mul_rows(t, xj, alpha);
  Var zhat = scatter_sum(t, mixed, pi.starts);
  Var z = leaky_relu(t, zhat, cfg.leaky_slope);
  if (train && cfg.dropout_rate > 0.0) {
    if (!dropout_rng) throw std::invalid_argument("layer_forward: training needs a dropout stream");
    z = dropout(t, z, cfg.dropout_rate, true, *dropout_rng);
  }
  return {z, alpha};
}

/// u_ij = z_i + z_j per stored edge.
inline Var edge_embed(Tape& t, const PairIndex& pi, Var z_final) {
  return add(t, gather_rows(t, z_final, pi.edge_us), gather_rows(t, z_final, pi.edge_vs));
}

struct ForwardResult {
  Var node_probs;           // n×1
  Var edge_probs;           // |E|×1 (undefined handle when the graph has no edges)
  Var z_final;              // n×d_L
  std::vector<Var> alphas;  // one per layer
  bool has_edges = false;
};

/// Whole-model forward on an existing tape. `pv` are the parameter vars in
/// canonical order (params_to_tape). Dropout runs only when train is set.
inline ForwardResult model_forward(Tape& t, const Graph& g, const PairIndex& pi,
                                   const std::vector<Var>& pv, const ModelConfig& cfg, bool train,
                                   Rng* dropout_rng) {
  if (static_cast<int>(pv.size()) != ModelParams::tensor_count(cfg))
    throw std::invalid_argument("model_forward: parameter count does not match config");
  ForwardResult fr;
  Var z = t.leaf(role_features(g), false);
  Var ecosts = t.leaf(pi.ecosts, false);
  for (int l = 0; l < cfg.n_layers; ++l) {
    const LayerOut lo =
        layer_forward(t, pi, z, ecosts, pv[static_cast<std::size_t>(ModelParams::layer_w(l))],
                      pv[static_cast<std::size_t>(ModelParams::layer_a(l))],
                      pv[static_cast<std::size_t>(ModelParams::layer_we(l))], cfg, train, dropout_rng);
    z = lo.z;
    fr.alphas.push_back(lo.alpha);
  }
  fr.z_final = z;

  auto head = [&](int base, Var x) {
    Var h1 = leaky_relu(
        t, add_rowvec(t, matmul_nt(t, x, pv[static_cast<std::size_t>(base)]), pv[static_cast<std::size_t>(base) + 1]),
        cfg.leaky_slope);
    Var logits =
        add_rowvec(t, matmul_nt(t, h1, pv[static_cast<std::size_t>(base) + 2]), pv[static_cast<std::size_t>(base) + 3]);
    return sigmoid(t, logits);
  };
  fr.node_probs = head(ModelParams::node_head_base(cfg), z);
  if (!g.edges.empty()) {
    fr.edge_probs = head(ModelParams::edge_head_base(cfg), edge_embed(t, pi, z));
    fr.has_edges = true;
  }
  return fr;
}

struct Predictions {
  std::vector<double> node_probs;
  std::vector<double> edge_probs;
};

struct PredictDetail {
  Predictions preds;
  std::vector<Tensor> alphas;
  Tensor z_final;
};

/// Inference with per-layer attention coefficients exposed.
inline PredictDetail predict_detail(const Graph& g, const ModelParams& params, const ModelConfig& cfg) {
  check_params_match(params, cfg);
  Tape t;
  const PairIndex pi = build_pair_index(g);
  const std::vector<Var> pv = params_to_tape(t, params, /*requires_grad=*/false);
  const ForwardResult fr = model_forward(t, g, pi, pv, cfg, /*train=*/false, nullptr);
  PredictDetail out;
  out.preds.node_probs = t.value(fr.node_probs).v;
  if (fr.has_edges) out.preds.edge_probs = t.value(fr.edge_probs).v;
  for (Var a : fr.alphas) out.alphas.push_back(t.value(a));
  out.z_final = t.value(fr.z_final);
  return out;
}

/// Inference: per-node and per-edge on-path probabilities, dropout off.
inline Predictions predict(const Graph& g, const ModelParams& params, const ModelConfig& cfg) {
  return predict_detail(g, params, cfg).preds;
}

}  // namespace pathgnn
