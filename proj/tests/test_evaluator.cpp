#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdint>
#include <vector>

#include "pathgnn/evaluator.hpp"
#include "pathgnn/oracle.hpp"
#include "test_util.hpp"

using namespace pathgnn;

namespace {

Sample make_sample(const Graph& g) {
  Sample s;
  s.graph = g;
  s.labels = labels_from_path(g, dijkstra(g));
  return s;
}

/// The oracle fed back as a predictor: probabilities are the labels.
Predictions label_predictions(const Sample& s) {
  Predictions p;
  for (int y : s.labels.nodes) p.node_probs.push_back(static_cast<double>(y));
  for (int y : s.labels.edges) p.edge_probs.push_back(static_cast<double>(y));
  return p;
}

ModelConfig tiny_model() {
  ModelConfig m;
  m.n_layers = 2;
  m.widths = {8, 8};
  m.head_hidden = 4;
  return m;
}

std::vector<Sample> unique_path_samples(std::uint64_t seed, int count, int n_lo, int n_hi) {
  std::vector<Sample> out;
  Rng rng(seed);
  while (static_cast<int>(out.size()) < count) {
    Graph g = testutil::random_connected_graph(
        rng, n_lo + static_cast<int>(rng.uniform_int(0, n_hi - n_lo)));
    if (dijkstra(g).unique) out.push_back(make_sample(g));
  }
  return out;
}

}  // namespace

TEST_CASE("evaluation report bookkeeping") {
  const ModelConfig cfg = tiny_model();
  Rng prng(5);
  const ModelParams params = init_params(cfg, prng);
  const std::vector<Sample> samples = unique_path_samples(900, 30, 4, 8);

  const EvalReport rep = evaluate(samples, params, cfg);
  CHECK(rep.total == samples.size());
  CHECK(rep.correct <= rep.total);
  CHECK(rep.path_accuracy >= 0.0);
  CHECK(rep.path_accuracy <= 1.0);

  std::size_t n_sum = 0, h_sum = 0;
  for (const BucketStat& b : rep.by_node_count) {
    n_sum += b.total;
    CHECK(b.accuracy == static_cast<double>(b.correct) / static_cast<double>(b.total));
  }
  for (const BucketStat& b : rep.by_hop_count) h_sum += b.total;
  CHECK(n_sum == rep.total);
  CHECK(h_sum == rep.total);

  const EvalReport threaded = evaluate(samples, params, cfg, LossMode::both, 3);
  CHECK(threaded.path_accuracy == rep.path_accuracy);
  CHECK(threaded.correct == rep.correct);

  CHECK_THROWS_AS(evaluate({}, params, cfg), std::invalid_argument);
}

TEST_CASE("hop counts come from the labels") {
  const Sample tri = make_sample(testutil::triangle_graph());
  CHECK(hop_count(tri.labels) == 2);  // 0-1-2 beats the direct edge
  const Sample fig = make_sample(testutil::fig_reroute_graph());
  CHECK(hop_count(fig.labels) == 1);  // direct (2,4) edge of cost 1
}

TEST_CASE("oracle fed back as predictor scores perfectly and decodes") {
  const std::vector<Sample> samples = unique_path_samples(901, 20, 4, 9);
  for (const Sample& s : samples) {
    const Predictions p = label_predictions(s);
    REQUIRE(prediction_correct(p, s.labels, LossMode::both));
    const DecodedPath dp = decode_path(p, s.graph);
    REQUIRE(dp.ok);
    CHECK(dp.failure == DecodeFailure::none);
    const PathResult pr = dijkstra(s.graph);
    CHECK(dp.nodes == pr.nodes);
    CHECK(dp.edge_indices == pr.edge_indices);
  }
}

TEST_CASE("node count sweep generates one bucket per size") {
  const ModelConfig cfg = tiny_model();
  Rng prng(6);
  const ModelParams params = init_params(cfg, prng);
  const std::vector<int> sizes{5, 7, 9};
  const auto rows = node_count_sweep(params, cfg, sizes, 6, 42);
  REQUIRE(rows.size() == 3);
  for (std::size_t k = 0; k < sizes.size(); ++k) {
    CHECK(rows[k].key == sizes[k]);
    CHECK(rows[k].total == 6);
  }
  const auto rerun = node_count_sweep(params, cfg, sizes, 6, 42);
  for (std::size_t k = 0; k < rows.size(); ++k) CHECK(rerun[k].correct == rows[k].correct);
  CHECK_THROWS_AS(node_count_sweep(params, cfg, {}, 6, 42), std::invalid_argument);
}

TEST_CASE("rerouting evaluation relabels perturbed graphs") {
  const ModelConfig cfg = tiny_model();
  Rng prng(7);
  const ModelParams params = init_params(cfg, prng);
  const std::vector<Sample> samples = unique_path_samples(902, 15, 5, 8);

  const ReroutingReport rr =
      rerouting_eval(samples, params, cfg, PerturbMode::remove_optimal_edge, 11);
  CHECK(rr.attempted == samples.size());
  CHECK(rr.perturbed == rr.samples.size());
  CHECK(rr.perturbed > 0);
  CHECK(rr.report.total == rr.perturbed);
  for (const Sample& s : rr.samples) {
    const PathResult pr = dijkstra(s.graph);
    REQUIRE(pr.unique);
    CHECK(labels_from_path(s.graph, pr).nodes == s.labels.nodes);
    CHECK(labels_from_path(s.graph, pr).edges == s.labels.edges);
  }
}

TEST_CASE("timing benchmark shapes and normalization") {
  const ModelConfig cfg = tiny_model();
  Rng prng(8);
  const ModelParams params = init_params(cfg, prng);

  const std::vector<int> hops{1, 2};
  const auto buckets = collect_hop_buckets(8, hops, 50, 77);
  REQUIRE(buckets.size() == 2);
  for (std::size_t b = 0; b < buckets.size(); ++b) {
    REQUIRE(buckets[b].size() == 50);
    for (const Graph& g : buckets[b]) {
      REQUIRE(g.n_nodes == 8);
      CHECK(dijkstra(g, false).hops() == hops[b]);
    }
  }

  const TimingReport rep = timing_benchmark(params, cfg, hops, buckets, 11);
  REQUIRE(rep.buckets.size() == 2);
  CHECK(rep.repetitions == 11);
  for (const TimingBucket& tb : rep.buckets) {
    CHECK(tb.n_graphs == 50);
    CHECK(tb.model_seconds > 0.0);
    CHECK(tb.oracle_seconds > 0.0);
    if (tb.hops == 1) {
      CHECK(tb.model_relative == 1.0);
      CHECK(tb.oracle_relative == 1.0);
    }
  }
  CHECK(rep.model_max_over_min >= 1.0);

  SECTION("rejections") {
    auto short_bucket = buckets;
    short_bucket[0].resize(49);
    CHECK_THROWS_WITH(timing_benchmark(params, cfg, hops, short_bucket, 10),
                      Catch::Matchers::ContainsSubstring("need >= 50"));
    CHECK_THROWS_WITH(timing_benchmark(params, cfg, {2, 3}, buckets, 10),
                      Catch::Matchers::ContainsSubstring("1-hop"));
    CHECK_THROWS_AS(timing_benchmark(params, cfg, hops, buckets, 5), std::invalid_argument);
    CHECK_THROWS_WITH(collect_hop_buckets(4, {30}, 5, 1, 1.0, 1.0, 10.0, 2000),
                      Catch::Matchers::ContainsSubstring("hops"));
  }
}

TEST_CASE("path decoding") {
  const Graph tri = testutil::triangle_graph();

  SECTION("perfect predictions decode to the optimal path") {
    Predictions p;
    p.node_probs = {1.0, 1.0, 1.0};
    p.edge_probs = {1.0, 1.0, 0.0};  // (0,1) and (1,2) on, direct (0,2) off
    const DecodedPath dp = decode_path(p, tri);
    REQUIRE(dp.ok);
    CHECK(dp.nodes == std::vector<int>{0, 1, 2});
    CHECK(dp.edge_indices == std::vector<int>{0, 1});
  }

  SECTION("no selected edges is disconnected") {
    Predictions p;
    p.node_probs = {0.4, 0.4, 0.4};
    p.edge_probs = {0.2, 0.3, 0.1};
    const DecodedPath dp = decode_path(p, tri);
    REQUIRE_FALSE(dp.ok);
    CHECK(dp.failure == DecodeFailure::disconnected);
  }

  SECTION("a full cycle branches at the source") {
    Predictions p;
    p.node_probs = {1.0, 1.0, 1.0};
    p.edge_probs = {0.9, 0.9, 0.9};
    const DecodedPath dp = decode_path(p, tri);
    REQUIRE_FALSE(dp.ok);
    CHECK(dp.failure == DecodeFailure::branching);
  }

  const Graph fig = testutil::fig_reroute_graph();  // source 2, destination 4
  // edges: 0:(0,1) 1:(0,2) 2:(1,3) 3:(3,5) 4:(4,5) 5:(2,4) 6:(3,4)

  SECTION("three selected edges at one node branch") {
    Predictions p;
    p.node_probs = std::vector<double>(6, 1.0);
    p.edge_probs = {0.0, 0.0, 0.9, 0.9, 0.0, 0.9, 0.9};  // node 3 gets (1,3),(3,5),(3,4)
    const DecodedPath dp = decode_path(p, fig);
    REQUIRE_FALSE(dp.ok);
    CHECK(dp.failure == DecodeFailure::branching);
    CHECK(dp.detail.find("node 3") != std::string::npos);
  }

  SECTION("dead end away from the destination is disconnected") {
    Predictions p;
    p.node_probs = {1.0, 1.0, 1.0, 0.0, 1.0, 1.0};
    p.edge_probs = {0.9, 0.9, 0.0, 0.0, 0.9, 0.0, 0.0};  // 2-0-1 stops; (4,5) dangles
    const DecodedPath dp = decode_path(p, fig);
    REQUIRE_FALSE(dp.ok);
    CHECK(dp.failure == DecodeFailure::disconnected);
    CHECK(dp.detail.find("dead-end") != std::string::npos);
  }

  SECTION("destination without a selected edge is disconnected") {
    Predictions p;
    p.node_probs = {1.0, 1.0, 1.0, 0.0, 1.0, 0.0};
    p.edge_probs = {0.9, 0.9, 0.0, 0.0, 0.0, 0.0, 0.0};
    const DecodedPath dp = decode_path(p, fig);
    REQUIRE_FALSE(dp.ok);
    CHECK(dp.failure == DecodeFailure::disconnected);
    CHECK(dp.detail.find("destination") != std::string::npos);
  }

  SECTION("edges off the walk are disconnected") {
    Predictions p;
    p.node_probs = {0.0, 0.0, 1.0, 0.0, 1.0, 0.0};
    p.edge_probs = {0.9, 0.0, 0.0, 0.0, 0.0, 0.9, 0.0};  // (2,4) plus stray (0,1)
    const DecodedPath dp = decode_path(p, fig);
    REQUIRE_FALSE(dp.ok);
    CHECK(dp.failure == DecodeFailure::disconnected);
  }

  SECTION("node set must match the walked path") {
    Predictions p;
    p.node_probs = {0.0, 0.0, 1.0, 0.0, 1.0, 0.9};  // node 5 marked but unused
    p.edge_probs = {0.0, 0.0, 0.0, 0.0, 0.0, 0.9, 0.0};
    const DecodedPath dp = decode_path(p, fig);
    REQUIRE_FALSE(dp.ok);
    CHECK(dp.failure == DecodeFailure::node_edge_mismatch);
    CHECK(dp.detail.find("node 5") != std::string::npos);

    Predictions q;
    q.node_probs = {0.0, 0.0, 1.0, 0.0, 0.4, 0.0};  // destination unmarked
    q.edge_probs = {0.0, 0.0, 0.0, 0.0, 0.0, 0.9, 0.0};
    const DecodedPath dq = decode_path(q, fig);
    REQUIRE_FALSE(dq.ok);
    CHECK(dq.failure == DecodeFailure::node_edge_mismatch);
  }

  SECTION("prediction sizes must match the graph") {
    Predictions p;
    p.node_probs = {1.0, 1.0};
    p.edge_probs = {1.0, 1.0, 0.0};
    CHECK_THROWS_AS(decode_path(p, tri), std::invalid_argument);
  }
}
