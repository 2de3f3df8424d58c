#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <vector>

#include <nlohmann/json.hpp>

#include "pathgnn/checkpoint.hpp"
#include "pathgnn/model.hpp"
#include "pathgnn/rng.hpp"
#include "test_util.hpp"

using namespace pathgnn;

namespace {

ModelConfig small_config(int n_layers, std::vector<int> widths, int head_hidden) {
  ModelConfig cfg;
  cfg.n_layers = n_layers;
  cfg.widths = std::move(widths);
  cfg.head_hidden = head_hidden;
  return cfg;
}

double lrelu(double x, double s) { return x > 0.0 ? x : s * x; }
double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// Plain scalar-loop reevaluation of the whole model, written directly from
/// the layer definitions rather than the tape ops. Groups follow the same
/// order as build_pair_index: the self pair first, then neighbors in
/// adjacency order.
struct RefOut {
  std::vector<double> node_probs;
  std::vector<double> edge_probs;
  std::vector<std::vector<double>> alphas;  // per layer, flat in pair order
};

RefOut reference_forward(const Graph& g, const ModelParams& P, const ModelConfig& cfg) {
  const int n = g.n_nodes;
  const double max_w = g.max_edge_weight();
  const double denom = max_w > 0.0 ? max_w : 1.0;

  std::vector<std::vector<double>> z(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const auto oh = role_one_hot(g.role(i));
    z[static_cast<std::size_t>(i)] = {oh[0], oh[1], oh[2]};
  }

  RefOut out;
  for (int l = 0; l < cfg.n_layers; ++l) {
    const Tensor& W = P.tensors[static_cast<std::size_t>(ModelParams::layer_w(l))];
    const Tensor& a = P.tensors[static_cast<std::size_t>(ModelParams::layer_a(l))];
    const Tensor& We = P.tensors[static_cast<std::size_t>(ModelParams::layer_we(l))];
    const int d = W.rows;

    std::vector<std::vector<double>> proj(static_cast<std::size_t>(n),
                                          std::vector<double>(static_cast<std::size_t>(d), 0.0));
    for (int i = 0; i < n; ++i)
      for (int r = 0; r < d; ++r) {
        double acc = 0.0;
        for (int c = 0; c < W.cols; ++c) acc += W.at(r, c) * z[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)];
        proj[static_cast<std::size_t>(i)][static_cast<std::size_t>(r)] = acc;
      }

    std::vector<std::vector<double>> z_next(static_cast<std::size_t>(n),
                                            std::vector<double>(static_cast<std::size_t>(d), 0.0));
    std::vector<double> alpha_flat;
    for (int i = 0; i < n; ++i) {
      std::vector<int> js{i};
      std::vector<double> costs{0.0};
      for (const auto& [j, e] : g.adjacency[static_cast<std::size_t>(i)]) {
        js.push_back(j);
        costs.push_back(g.edges[static_cast<std::size_t>(e)].w / denom);
      }
      std::vector<double> scores;
      for (std::size_t k = 0; k < js.size(); ++k) {
        double s = 0.0;
        for (int r = 0; r < d; ++r)
          s += a.at(r, 0) * lrelu(proj[static_cast<std::size_t>(i)][static_cast<std::size_t>(r)], cfg.leaky_slope);
        for (int r = 0; r < d; ++r)
          s += a.at(d + r, 0) *
               lrelu(proj[static_cast<std::size_t>(js[k])][static_cast<std::size_t>(r)], cfg.leaky_slope);
        for (int r = 0; r < d; ++r)
          s += a.at(2 * d + r, 0) * lrelu(costs[k] * We.at(r, 0), cfg.leaky_slope);
        scores.push_back(s);
      }
      const double mx = *std::max_element(scores.begin(), scores.end());
      double tot = 0.0;
      for (double& s : scores) {
        s = std::exp(s - mx);
        tot += s;
      }
      for (std::size_t k = 0; k < js.size(); ++k) {
        const double alpha = scores[k] / tot;
        alpha_flat.push_back(alpha);
        for (int r = 0; r < d; ++r)
          z_next[static_cast<std::size_t>(i)][static_cast<std::size_t>(r)] +=
              alpha * proj[static_cast<std::size_t>(js[k])][static_cast<std::size_t>(r)];
      }
    }
    for (auto& row : z_next)
      for (double& x : row) x = lrelu(x, cfg.leaky_slope);
    z = std::move(z_next);
    out.alphas.push_back(std::move(alpha_flat));
  }

  auto head = [&](int base, const std::vector<double>& x) {
    const Tensor& W1 = P.tensors[static_cast<std::size_t>(base)];
    const Tensor& b1 = P.tensors[static_cast<std::size_t>(base) + 1];
    const Tensor& W2 = P.tensors[static_cast<std::size_t>(base) + 2];
    const Tensor& b2 = P.tensors[static_cast<std::size_t>(base) + 3];
    double logit = b2.at(0, 0);
    for (int k = 0; k < W1.rows; ++k) {
      double h = b1.at(0, k);
      for (int c = 0; c < W1.cols; ++c) h += W1.at(k, c) * x[static_cast<std::size_t>(c)];
      logit += W2.at(0, k) * lrelu(h, cfg.leaky_slope);
    }
    return sig(logit);
  };
  for (int i = 0; i < n; ++i)
    out.node_probs.push_back(head(ModelParams::node_head_base(cfg), z[static_cast<std::size_t>(i)]));
  for (const Edge& e : g.edges) {
    std::vector<double> u(z[static_cast<std::size_t>(e.u)]);
    for (std::size_t r = 0; r < u.size(); ++r) u[r] += z[static_cast<std::size_t>(e.v)][r];
    out.edge_probs.push_back(head(ModelParams::edge_head_base(cfg), u));
  }
  return out;
}

}  // namespace

TEST_CASE("parameter layout") {
  const ModelConfig def = ModelConfig::defaults();
  def.validate();
  CHECK(def.n_layers == 8);
  CHECK(def.widths == std::vector<int>(8, 64));
  CHECK(def.head_hidden == 32);
  CHECK(def.dropout_rate == 0.1);
  CHECK(def.leaky_slope == 0.2);
  CHECK(ModelParams::tensor_count(def) == 32);

  const auto shapes = param_shapes(def);
  const auto names = param_names(def);
  REQUIRE(shapes.size() == 32);
  REQUIRE(names.size() == 32);
  CHECK(shapes[0] == std::pair<int, int>(64, 3));    // layer0.W consumes the role one-hot
  CHECK(shapes[1] == std::pair<int, int>(192, 1));   // layer0.a spans the 3d concat
  CHECK(shapes[2] == std::pair<int, int>(64, 1));    // layer0.We
  CHECK(shapes[3] == std::pair<int, int>(64, 64));   // layer1.W
  CHECK(names[0] == "layer0.W");
  CHECK(names[23] == "layer7.We");
  const int nb = ModelParams::node_head_base(def);
  CHECK(names[static_cast<std::size_t>(nb)] == "node_head.W1");
  CHECK(shapes[static_cast<std::size_t>(nb)] == std::pair<int, int>(32, 64));
  CHECK(shapes[static_cast<std::size_t>(nb) + 1] == std::pair<int, int>(1, 32));
  CHECK(shapes[static_cast<std::size_t>(nb) + 2] == std::pair<int, int>(1, 32));
  CHECK(shapes[static_cast<std::size_t>(nb) + 3] == std::pair<int, int>(1, 1));
  CHECK(names[static_cast<std::size_t>(ModelParams::edge_head_base(def))] == "edge_head.W1");

  const ModelConfig small = small_config(2, {4, 5}, 3);
  Rng rng(7);
  const ModelParams p = init_params(small, rng);
  CHECK(p.scalar_count() == 112);  // 12+12+4 + 20+15+5 + 2*(15+3+3+1)

  SECTION("config validation") {
    ModelConfig bad = small;
    bad.widths.pop_back();
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = small;
    bad.dropout_rate = 1.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = small;
    bad.leaky_slope = 0.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = small;
    bad.n_layers = 0;
    bad.widths.clear();
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  }
}

TEST_CASE("initialization draws") {
  const ModelConfig def = ModelConfig::defaults();
  Rng r1(11), r2(11), r3(12);
  const ModelParams a = init_params(def, r1);
  const ModelParams b = init_params(def, r2);
  const ModelParams c = init_params(def, r3);
  check_params_match(a, def);

  const auto names = param_names(def);
  bool any_diff_seed = false;
  for (std::size_t i = 0; i < a.tensors.size(); ++i) {
    REQUIRE(a.tensors[i].v == b.tensors[i].v);  // same seed, same weights
    if (a.tensors[i].v != c.tensors[i].v) any_diff_seed = true;
    if (names[i].find(".b") != std::string::npos)
      for (double x : a.tensors[i].v) CHECK(x == 0.0);
  }
  CHECK(any_diff_seed);

  // layer0.W fans 3 -> 64.
  const double bound = std::sqrt(6.0 / (3 + 64));
  double mx = 0.0;
  for (double x : a.tensors[0].v) {
    CHECK(std::abs(x) <= bound);
    mx = std::max(mx, std::abs(x));
  }
  CHECK(mx > 0.8 * bound);  // 192 uniform draws essentially surely reach this

  // node_head.W2 fans 32 -> 1.
  const double bound_w2 = std::sqrt(6.0 / 33);
  for (double x : a.tensors[static_cast<std::size_t>(ModelParams::node_head_base(def)) + 2].v)
    CHECK(std::abs(x) <= bound_w2);

  SECTION("shape mismatch is rejected") {
    ModelParams broken = a;
    broken.tensors[0] = Tensor(2, 2);
    CHECK_THROWS_AS(check_params_match(broken, def), std::invalid_argument);
    broken = a;
    broken.tensors.pop_back();
    CHECK_THROWS_AS(check_params_match(broken, def), std::invalid_argument);
  }
}

TEST_CASE("pair index layout") {
  const Graph g = testutil::triangle_graph();  // edges (0,1,1),(1,2,1),(0,2,3)
  const PairIndex pi = build_pair_index(g);
  REQUIRE(pi.n_pairs == 9);
  CHECK(*pi.starts == std::vector<int>{0, 3, 6, 9});
  CHECK(*pi.rows_i == std::vector<int>{0, 0, 0, 1, 1, 1, 2, 2, 2});
  CHECK(*pi.rows_j == std::vector<int>{0, 1, 2, 1, 0, 2, 2, 1, 0});
  const std::vector<double> want{0.0, 1.0 / 3.0, 1.0, 0.0, 1.0 / 3.0, 1.0 / 3.0, 0.0, 1.0 / 3.0, 1.0};
  REQUIRE(pi.ecosts.size() == 9);
  for (std::size_t k = 0; k < want.size(); ++k)
    CHECK(pi.ecosts.v[k] == Catch::Approx(want[k]).margin(1e-15));
  CHECK(*pi.edge_us == std::vector<int>{0, 1, 0});
  CHECK(*pi.edge_vs == std::vector<int>{1, 2, 2});
}

TEST_CASE("forward pass matches a direct reevaluation") {
  const ModelConfig cfg = small_config(3, {5, 4, 6}, 3);
  Rng prng(101);
  const ModelParams params = init_params(cfg, prng);

  std::vector<Graph> graphs{testutil::triangle_graph(), testutil::fig_reroute_graph(),
                            testutil::tied_square_graph()};
  Rng grng(202);
  for (int k = 0; k < 5; ++k)
    graphs.push_back(testutil::random_connected_graph(grng, 3 + static_cast<int>(grng.uniform_int(0, 6))));

  for (const Graph& g : graphs) {
    const PredictDetail got = predict_detail(g, params, cfg);
    const RefOut want = reference_forward(g, params, cfg);

    REQUIRE(got.preds.node_probs.size() == static_cast<std::size_t>(g.n_nodes));
    REQUIRE(got.preds.edge_probs.size() == g.edges.size());
    for (std::size_t i = 0; i < want.node_probs.size(); ++i)
      CHECK(got.preds.node_probs[i] == Catch::Approx(want.node_probs[i]).margin(1e-12));
    for (std::size_t e = 0; e < want.edge_probs.size(); ++e)
      CHECK(got.preds.edge_probs[e] == Catch::Approx(want.edge_probs[e]).margin(1e-12));
    REQUIRE(got.alphas.size() == static_cast<std::size_t>(cfg.n_layers));
    for (int l = 0; l < cfg.n_layers; ++l) {
      REQUIRE(got.alphas[static_cast<std::size_t>(l)].size() == want.alphas[static_cast<std::size_t>(l)].size());
      for (std::size_t k = 0; k < want.alphas[static_cast<std::size_t>(l)].size(); ++k)
        CHECK(got.alphas[static_cast<std::size_t>(l)].v[k] ==
              Catch::Approx(want.alphas[static_cast<std::size_t>(l)][k]).margin(1e-12));
    }
  }
}

TEST_CASE("attention rows sum to one on every layer") {
  const ModelConfig cfg = ModelConfig::defaults();
  Rng prng(303);
  const ModelParams params = init_params(cfg, prng);
  Rng grng(404);
  for (int k = 0; k < 10; ++k) {
    const Graph g = testutil::random_connected_graph(grng, 3 + static_cast<int>(grng.uniform_int(0, 7)));
    const PairIndex pi = build_pair_index(g);
    const PredictDetail pd = predict_detail(g, params, cfg);
    for (const Tensor& alpha : pd.alphas)
      for (int i = 0; i < g.n_nodes; ++i) {
        double sum = 0.0;
        for (int p = (*pi.starts)[static_cast<std::size_t>(i)]; p < (*pi.starts)[static_cast<std::size_t>(i) + 1]; ++p)
          sum += alpha.v[static_cast<std::size_t>(p)];
        CHECK(std::abs(sum - 1.0) < 1e-12);
      }
  }
}

TEST_CASE("relabeling nodes relabels predictions") {
  const ModelConfig cfg = small_config(4, {8, 8, 8, 8}, 6);
  Rng prng(505);
  const ModelParams params = init_params(cfg, prng);
  Rng grng(606);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 4 + static_cast<int>(grng.uniform_int(0, 6));
    const Graph g = testutil::random_connected_graph(grng, n);
    std::vector<int> perm(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
    grng.shuffle(perm);
    const Graph gp = permute(g, perm);

    const Predictions a = predict(g, params, cfg);
    const Predictions b = predict(gp, params, cfg);
    for (int i = 0; i < n; ++i)
      CHECK(std::abs(a.node_probs[static_cast<std::size_t>(i)] -
                     b.node_probs[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])]) < 1e-9);
    // permute keeps edge construction order, so edge k maps to edge k.
    REQUIRE(a.edge_probs.size() == b.edge_probs.size());
    for (std::size_t e = 0; e < a.edge_probs.size(); ++e)
      CHECK(std::abs(a.edge_probs[e] - b.edge_probs[e]) < 1e-9);
  }
}

TEST_CASE("an isolated extra node leaves the rest untouched") {
  const ModelConfig cfg = small_config(3, {6, 6, 6}, 4);
  Rng prng(707);
  const ModelParams params = init_params(cfg, prng);
  const std::vector<Edge> edges{{0, 1, 1.0}, {1, 2, 1.0}, {0, 2, 3.0}};
  const Graph g = build_graph(3, edges, 0, 2);
  const Graph g_iso = build_graph(4, edges, 0, 2);
  CHECK_FALSE(g_iso.connected);

  const Predictions a = predict(g, params, cfg);
  const Predictions b = predict(g_iso, params, cfg);
  REQUIRE(b.node_probs.size() == 4);
  for (std::size_t i = 0; i < 3; ++i)
    CHECK(std::abs(a.node_probs[i] - b.node_probs[i]) < 1e-9);
  for (std::size_t e = 0; e < a.edge_probs.size(); ++e)
    CHECK(std::abs(a.edge_probs[e] - b.edge_probs[e]) < 1e-9);
}

TEST_CASE("zero parameters are maximally uncertain") {
  const ModelConfig cfg = small_config(2, {5, 5}, 3);
  ModelParams zero;
  for (const auto& [r, c] : param_shapes(cfg)) zero.tensors.emplace_back(r, c);
  const Graph g = testutil::fig_reroute_graph();
  const PredictDetail pd = predict_detail(g, zero, cfg);
  for (double x : pd.z_final.v) CHECK(x == 0.0);
  for (double p : pd.preds.node_probs) CHECK(p == 0.5);
  for (double p : pd.preds.edge_probs) CHECK(p == 0.5);
  // zero scores still make a valid (uniform) attention row
  for (int i = 0; i < g.n_nodes; ++i) {
    const PairIndex pi = build_pair_index(g);
    const int lo = (*pi.starts)[static_cast<std::size_t>(i)];
    const int hi = (*pi.starts)[static_cast<std::size_t>(i) + 1];
    for (int p = lo; p < hi; ++p)
      CHECK(pd.alphas[0].v[static_cast<std::size_t>(p)] == Catch::Approx(1.0 / (hi - lo)).margin(1e-15));
  }
}

TEST_CASE("inference is deterministic; training applies dropout") {
  const ModelConfig cfg = ModelConfig::defaults();
  Rng prng(808);
  const ModelParams params = init_params(cfg, prng);
  const Graph g = testutil::triangle_graph();

  const Predictions a = predict(g, params, cfg);
  const Predictions b = predict(g, params, cfg);
  CHECK(a.node_probs == b.node_probs);
  CHECK(a.edge_probs == b.edge_probs);

  Tape t;
  const PairIndex pi = build_pair_index(g);
  const auto pv = params_to_tape(t, params, false);
  Rng drng(909);
  const ForwardResult fr = model_forward(t, g, pi, pv, cfg, /*train=*/true, &drng);
  const std::vector<double> trained = t.value(fr.node_probs).v;
  bool differs = false;
  for (std::size_t i = 0; i < trained.size(); ++i)
    if (trained[i] != a.node_probs[i]) differs = true;
  CHECK(differs);  // 8 layers x 3 nodes x 64 units at rate 0.1: some unit drops

  Tape t2;
  const auto pv2 = params_to_tape(t2, params, false);
  CHECK_THROWS_AS(model_forward(t2, g, pi, pv2, cfg, true, nullptr), std::invalid_argument);
}

TEST_CASE("whole-model gradient agrees with finite differences") {
  const ModelConfig cfg = small_config(2, {6, 5}, 4);
  cfg.validate();
  Rng grng(1111);
  int checked = 0;
  for (int trial = 0; trial < 3; ++trial) {
    const Graph g = testutil::random_connected_graph(grng, 4 + trial);
    Rng prng(2222 + static_cast<std::uint64_t>(trial));
    const ModelParams params = init_params(cfg, prng);
    const PairIndex pi = build_pair_index(g);

    auto loss_of = [&](const std::vector<Tensor>& ts) {
      Tape t;
      std::vector<Var> pv;
      for (const Tensor& x : ts) pv.push_back(t.leaf(x, false));
      const ForwardResult fr = model_forward(t, g, pi, pv, cfg, false, nullptr);
      const Var loss = add(t, mean_all(t, fr.node_probs), mean_all(t, fr.edge_probs));
      return t.value(loss).at(0, 0);
    };

    Tape t;
    const std::vector<Var> pv = params_to_tape(t, params, true);
    const ForwardResult fr = model_forward(t, g, pi, pv, cfg, false, nullptr);
    const Var loss = add(t, mean_all(t, fr.node_probs), mean_all(t, fr.edge_probs));
    t.backward(loss);
    std::vector<Tensor> analytic;
    for (Var p : pv) analytic.push_back(t.grad(p));

    const double err = finite_difference_check(loss_of, params.tensors, analytic, 1e-6);
    INFO("trial " << trial << " max rel err " << err);
    CHECK(err < 1e-4);
    ++checked;
  }
  CHECK(checked == 3);
}

TEST_CASE("checkpoint round trip is bitwise exact") {
  const ModelConfig cfg = small_config(3, {7, 6, 5}, 4);
  Rng prng(31337);
  ModelParams params = init_params(cfg, prng);
  // exercise non-trivial bit patterns
  params.tensors[0].at(0, 0) = 0x1.fffffffffffffp-3;
  params.tensors[1].at(5, 0) = -0.0;

  const auto dir = std::filesystem::temp_directory_path() / "pathgnn_ckpt_test";
  std::filesystem::create_directories(dir);
  const auto path = dir / "model.ckpt";
  save_checkpoint(params, cfg, path);

  const Checkpoint ck = load_checkpoint(path);
  CHECK(ck.cfg == cfg);
  REQUIRE(ck.params.tensors.size() == params.tensors.size());
  for (std::size_t i = 0; i < params.tensors.size(); ++i) {
    REQUIRE(ck.params.tensors[i].rows == params.tensors[i].rows);
    REQUIRE(ck.params.tensors[i].cols == params.tensors[i].cols);
    REQUIRE(std::memcmp(ck.params.tensors[i].v.data(), params.tensors[i].v.data(),
                        params.tensors[i].size() * sizeof(double)) == 0);
  }

  SECTION("file layout starts with magic and a JSON header") {
    std::ifstream in(path, std::ios::binary);
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    REQUIRE(bytes.size() > 12);
    CHECK(std::memcmp(bytes.data(), "PGNNCKV1", 8) == 0);
    std::uint32_t hlen = 0;
    std::memcpy(&hlen, bytes.data() + 8, 4);
    const auto header = nlohmann::json::parse(bytes.begin() + 12, bytes.begin() + 12 + hlen);
    CHECK(header.contains("config"));
    CHECK(header.at("tensors").size() == params.tensors.size());
    CHECK(header.at("tensors")[0].at("name") == "layer0.W");
  }
}

TEST_CASE("damaged checkpoints are refused") {
  const ModelConfig cfg = small_config(2, {4, 4}, 3);
  Rng prng(555);
  const ModelParams params = init_params(cfg, prng);
  const auto dir = std::filesystem::temp_directory_path() / "pathgnn_ckpt_test";
  std::filesystem::create_directories(dir);
  const auto path = dir / "tamper.ckpt";
  save_checkpoint(params, cfg, path);

  std::vector<char> bytes;
  {
    std::ifstream in(path, std::ios::binary);
    bytes.assign((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  }
  auto rewrite = [&](const std::vector<char>& b, const std::filesystem::path& p) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out.write(b.data(), static_cast<std::streamsize>(b.size()));
  };

  SECTION("missing file") { CHECK_THROWS_WITH(load_checkpoint(dir / "nope.ckpt"), Catch::Matchers::ContainsSubstring("cannot open")); }

  SECTION("bad magic") {
    auto b = bytes;
    b[7] = '2';  // future version tag
    rewrite(b, dir / "bad_magic.ckpt");
    CHECK_THROWS_WITH(load_checkpoint(dir / "bad_magic.ckpt"),
                      Catch::Matchers::ContainsSubstring("bad magic"));
  }

  SECTION("truncated payload") {
    auto b = bytes;
    b.resize(b.size() - 8);
    rewrite(b, dir / "short.ckpt");
    CHECK_THROWS_WITH(load_checkpoint(dir / "short.ckpt"),
                      Catch::Matchers::ContainsSubstring("truncated"));
  }

  SECTION("trailing garbage") {
    auto b = bytes;
    b.push_back('\0');
    rewrite(b, dir / "long.ckpt");
    CHECK_THROWS_WITH(load_checkpoint(dir / "long.ckpt"),
                      Catch::Matchers::ContainsSubstring("trailing"));
  }

  SECTION("header shape disagrees with config") {
    std::uint32_t hlen = 0;
    std::memcpy(&hlen, bytes.data() + 8, 4);
    auto header = nlohmann::json::parse(bytes.begin() + 12, bytes.begin() + 12 + hlen);
    header["tensors"][0]["rows"] = header["tensors"][0]["rows"].get<int>() + 1;
    const std::string hs = header.dump();
    std::vector<char> b(bytes.begin(), bytes.begin() + 8);
    const std::uint32_t nl = static_cast<std::uint32_t>(hs.size());
    b.resize(12);
    std::memcpy(b.data() + 8, &nl, 4);
    b.insert(b.end(), hs.begin(), hs.end());
    b.insert(b.end(), bytes.begin() + 12 + hlen, bytes.end());
    rewrite(b, dir / "shape.ckpt");
    CHECK_THROWS_WITH(load_checkpoint(dir / "shape.ckpt"),
                      Catch::Matchers::ContainsSubstring("config requires"));
  }

  SECTION("non-finite payload") {
    ModelParams nan_params = params;
    nan_params.tensors[0].at(0, 0) = std::numeric_limits<double>::quiet_NaN();
    save_checkpoint(nan_params, cfg, dir / "nan.ckpt");
    CHECK_THROWS_WITH(load_checkpoint(dir / "nan.ckpt"),
                      Catch::Matchers::ContainsSubstring("non-finite"));
  }
}

TEST_CASE("model config JSON round trip") {
  ModelConfig cfg = small_config(2, {9, 3}, 5);
  cfg.dropout_rate = 0.25;
  cfg.leaky_slope = 0.1;
  CHECK(model_config_from_json(model_config_json(cfg)) == cfg);
  CHECK_THROWS_WITH(model_config_from_json(nlohmann::json{{"n_layers", 2}}),
                    Catch::Matchers::ContainsSubstring("model config"));
  nlohmann::json bad = model_config_json(cfg);
  bad["widths"] = std::vector<int>{9};
  CHECK_THROWS_AS(model_config_from_json(bad), std::invalid_argument);
}
