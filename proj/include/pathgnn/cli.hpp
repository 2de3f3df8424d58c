#pragma once

/// Command line front end: seven subcommands (gen, train, eval, perturb,
/// bench, predict, oracle) wiring the library into reproducible runs. Every
/// run that writes files also writes a manifest holding its full resolved
/// configuration next to the outputs, so any artifact can be regenerated
/// from the manifest alone. Exit codes: 0 success, 1 runtime failure,
/// 2 usage error.

#include <CLI11.hpp>

#include <array>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>
#include <pathgnn/checkpoint.hpp>
#include <pathgnn/datagen.hpp>
#include <pathgnn/evaluator.hpp>
#include <pathgnn/graph.hpp>
#include <pathgnn/io.hpp>
#include <pathgnn/model.hpp>
#include <pathgnn/oracle.hpp>
#include <pathgnn/trainer.hpp>

namespace pathgnn::cli {

/// Malformed flag value. Reported as a usage error (exit 2), unlike module
/// failures which exit 1.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::string fnv1a_hex(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

/// Hash of the resolved config JSON; keys are serialized sorted, so the hash
/// is stable across runs and identifies the configuration in file names.
inline std::string config_hash(const nlohmann::json& config) { return fnv1a_hex(config.dump()); }

inline std::string fmt_g(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

/// Round-trip exact formatting for CSV payloads.
inline std::string fmt_exact(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline long long parse_ll(std::string_view t, const char* flag) {
  long long v = 0;
  const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || p != t.data() + t.size())
    throw UsageError(std::string(flag) + ": '" + std::string(t) + "' is not an integer");
  return v;
}

inline double parse_real(std::string_view t, const char* flag) {
  double v = 0;
  const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || p != t.data() + t.size())
    throw UsageError(std::string(flag) + ": '" + std::string(t) + "' is not a number");
  return v;
}

inline std::vector<std::string_view> split_fields(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

/// "LO:HI" or a single value meaning LO == HI.
inline std::pair<int, int> parse_int_range(const std::string& s, const char* flag) {
  const auto f = split_fields(s, ':');
  if (f.size() == 1) {
    const int v = static_cast<int>(parse_ll(f[0], flag));
    return {v, v};
  }
  if (f.size() != 2) throw UsageError(std::string(flag) + " expects LO:HI, got '" + s + "'");
  return {static_cast<int>(parse_ll(f[0], flag)), static_cast<int>(parse_ll(f[1], flag))};
}

inline std::pair<double, double> parse_real_range(const std::string& s, const char* flag) {
  const auto f = split_fields(s, ':');
  if (f.size() == 1) {
    const double v = parse_real(f[0], flag);
    return {v, v};
  }
  if (f.size() != 2) throw UsageError(std::string(flag) + " expects LO:HI, got '" + s + "'");
  return {parse_real(f[0], flag), parse_real(f[1], flag)};
}

/// "T:V:E" fractions.
inline std::array<double, 3> parse_split3(const std::string& s, const char* flag) {
  const auto f = split_fields(s, ':');
  if (f.size() != 3)
    throw UsageError(std::string(flag) + " expects TRAIN:VAL:TEST fractions, got '" + s + "'");
  return {parse_real(f[0], flag), parse_real(f[1], flag), parse_real(f[2], flag)};
}

inline std::vector<int> parse_int_list(const std::string& s, const char* flag) {
  std::vector<int> out;
  for (const auto t : split_fields(s, ',')) out.push_back(static_cast<int>(parse_ll(t, flag)));
  return out;
}

inline const char* split_level_name(SplitLevel l) {
  return l == SplitLevel::structure ? "structure" : "sample";
}

inline SplitLevel parse_split_level(const std::string& s) {
  if (s == "structure") return SplitLevel::structure;
  if (s == "sample") return SplitLevel::sample;
  throw UsageError("--split-level must be 'structure' or 'sample', got '" + s + "'");
}

inline LossMode parse_loss_mode_flag(const std::string& s) {
  try {
    return parse_loss_mode(s);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
}

inline std::string join_ints(const std::vector<int>& v, const char* sep = ",") {
  std::ostringstream os;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) os << sep;
    os << v[i];
  }
  return os.str();
}

/// Manifest placed next to a single output file: x.jsonl -> x.manifest.json.
inline std::filesystem::path sibling_manifest(const std::filesystem::path& output) {
  std::filesystem::path m = output;
  m.replace_extension(".manifest.json");
  return m;
}

inline void write_manifest_file(const std::filesystem::path& file, const nlohmann::json& m) {
  write_text_file(file, m.dump(2) + "\n");
}

inline nlohmann::json manifest_skeleton(const char* command, nlohmann::json config) {
  return nlohmann::json{{"tool", "pathgnn"},
                        {"format", kGraphFormatVersion},
                        {"command", command},
                        {"config", std::move(config)}};
}

}  // namespace detail

// ---------------------------------------------------------------------------
// gen

struct GenArgs {
  int structures = 0;
  std::string nodes = "3:3";
  int samplings = 1;
  double extra_edge_factor = 1.0;
  std::string weights = "1:10";
  std::string split = "0.7:0.15:0.15";
  std::string split_level = "structure";
  std::uint64_t seed = 0;
  int threads = 1;
  std::string out;
};

inline int cmd_gen(const GenArgs& a, std::ostream& out) {
  namespace fs = std::filesystem;
  const auto [nlo, nhi] = detail::parse_int_range(a.nodes, "--nodes");
  const auto [wlo, whi] = detail::parse_real_range(a.weights, "--weights");
  const auto sp = detail::parse_split3(a.split, "--split");

  DatasetConfig cfg;
  cfg.n_structures = a.structures;
  cfg.weight_samplings = a.samplings;
  cfg.node_min = nlo;
  cfg.node_max = nhi;
  cfg.extra_edge_factor = a.extra_edge_factor;
  cfg.weight_lo = wlo;
  cfg.weight_hi = whi;
  cfg.split_train = sp[0];
  cfg.split_val = sp[1];
  cfg.split_test = sp[2];
  cfg.split_level = detail::parse_split_level(a.split_level);
  cfg.seed = a.seed;

  const Dataset ds = gen_dataset(cfg, a.threads);

  const fs::path dir(a.out);
  fs::create_directories(dir);
  write_jsonl(dir / "train.jsonl", to_records(ds.train));
  write_jsonl(dir / "val.jsonl", to_records(ds.val));
  write_jsonl(dir / "test.jsonl", to_records(ds.test));

  nlohmann::json config{{"structures", a.structures},
                        {"node_min", nlo},
                        {"node_max", nhi},
                        {"samplings", a.samplings},
                        {"extra_edge_factor", a.extra_edge_factor},
                        {"weight_lo", wlo},
                        {"weight_hi", whi},
                        {"split", {sp[0], sp[1], sp[2]}},
                        {"split_level", detail::split_level_name(cfg.split_level)},
                        {"seed", a.seed},
                        {"threads", a.threads}};
  nlohmann::json manifest = detail::manifest_skeleton("gen", config);
  manifest["outputs"] = {{"train.jsonl", ds.train.size()},
                         {"val.jsonl", ds.val.size()},
                         {"test.jsonl", ds.test.size()},
                         {"discarded_structures", ds.discarded_structures}};
  write_manifest(dir, manifest);

  out << "gen: " << ds.train.size() << " train / " << ds.val.size() << " val / " << ds.test.size()
      << " test samples -> " << dir.string() << " (discarded " << ds.discarded_structures
      << " structures)\n";
  return 0;
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
  std::string data;
  std::string out;
  int layers = 8;
  int width = 64;
  int head_hidden = 32;
  double dropout = 0.1;
  double leaky_slope = 0.2;
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int batch = 32;
  int epochs = 200;
  int patience = 10;
  std::string loss_mode = "both";
  std::uint64_t seed = 0;
  int threads = 1;
  bool quiet = false;
};

inline int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  namespace fs = std::filesystem;
  const fs::path data(a.data);

  Dataset d;
  d.train = from_records(read_jsonl(data / "train.jsonl"));
  d.val = from_records(read_jsonl(data / "val.jsonl"));
  if (fs::exists(data / "test.jsonl")) d.test = from_records(read_jsonl(data / "test.jsonl"));

  ModelConfig mcfg;
  mcfg.n_layers = a.layers;
  mcfg.widths.assign(static_cast<std::size_t>(std::max(a.layers, 0)), a.width);
  mcfg.head_hidden = a.head_hidden;
  mcfg.dropout_rate = a.dropout;
  mcfg.leaky_slope = a.leaky_slope;

  TrainConfig tcfg;
  tcfg.learning_rate = a.lr;
  tcfg.beta1 = a.beta1;
  tcfg.beta2 = a.beta2;
  tcfg.eps = a.eps;
  tcfg.batch_size = a.batch;
  tcfg.max_epochs = a.epochs;
  tcfg.patience = a.patience;
  tcfg.loss_mode = detail::parse_loss_mode_flag(a.loss_mode);
  tcfg.seed = a.seed;

  const fs::path dir(a.out);
  fs::create_directories(dir);

  TrainOptions topt;
  topt.metrics_csv = dir / "metrics.csv";
  topt.n_threads = a.threads;
  topt.log = a.quiet ? nullptr : &err;

  const TrainResult r = train(d, mcfg, tcfg, topt);
  save_checkpoint(r.params, r.model_config, dir / "model.ckpt");

  double test_pa = -1.0;
  if (!d.test.empty())
    test_pa = path_accuracy_over(d.test, r.params, r.model_config, tcfg.loss_mode, a.threads);

  nlohmann::json config{{"data", a.data},
                        {"model", model_config_json(r.model_config)},
                        {"train",
                         {{"lr", a.lr},
                          {"beta1", a.beta1},
                          {"beta2", a.beta2},
                          {"eps", a.eps},
                          {"batch", a.batch},
                          {"epochs", a.epochs},
                          {"patience", a.patience},
                          {"loss_mode", a.loss_mode},
                          {"seed", a.seed},
                          {"threads", a.threads}}}};
  nlohmann::json results{{"epochs_run", r.history.epochs.size()},
                         {"best_epoch", r.history.best_epoch},
                         {"best_val_path_accuracy", r.history.best_val_path_accuracy},
                         {"diverged", r.history.diverged}};
  if (!r.history.note.empty()) results["note"] = r.history.note;
  if (test_pa >= 0.0) results["test_path_accuracy"] = test_pa;

  nlohmann::json manifest = detail::manifest_skeleton("train", config);
  manifest["outputs"] = {{"model", "model.ckpt"}, {"metrics", "metrics.csv"}};
  manifest["results"] = results;
  write_manifest(dir, manifest);

  out << "train: best epoch " << r.history.best_epoch << ", val path accuracy "
      << detail::fmt_g(r.history.best_val_path_accuracy) << ", model -> "
      << (dir / "model.ckpt").string() << "\n";
  if (r.history.diverged) out << "train: diverged (" << r.history.note << ")\n";
  if (test_pa >= 0.0) out << "train: test path accuracy " << detail::fmt_g(test_pa) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
  std::string model;
  std::string data;
  std::string split = "test";
  std::string loss_mode = "both";
  int threads = 1;
  std::string out;
};

inline int cmd_eval(const EvalArgs& a, std::ostream& out) {
  namespace fs = std::filesystem;
  const Checkpoint ck = load_checkpoint(a.model);

  const fs::path dp(a.data);
  const fs::path file = fs::is_directory(dp) ? dp / (a.split + ".jsonl") : dp;
  const auto samples = from_records(read_jsonl(file));
  const LossMode mode = detail::parse_loss_mode_flag(a.loss_mode);

  const EvalReport rep = evaluate(samples, ck.params, ck.cfg, mode, a.threads);

  std::ostringstream text;
  text << "path accuracy " << detail::fmt_g(rep.path_accuracy) << " (" << rep.correct << "/"
       << rep.total << "), mode " << a.loss_mode << "\n";
  text << "by node count:\n";
  for (const auto& b : rep.by_node_count)
    text << "  " << b.key << ": " << detail::fmt_g(b.accuracy) << " (" << b.correct << "/"
         << b.total << ")\n";
  text << "by hop count:\n";
  for (const auto& b : rep.by_hop_count)
    text << "  " << b.key << ": " << detail::fmt_g(b.accuracy) << " (" << b.correct << "/"
         << b.total << ")\n";
  out << "eval: " << text.str();

  if (!a.out.empty()) {
    nlohmann::json config{{"model", a.model},  {"data", file.string()},
                          {"split", a.split},  {"loss_mode", a.loss_mode},
                          {"threads", a.threads}};
    const std::string base = "eval_" + detail::config_hash(config);
    const fs::path dir(a.out);
    fs::create_directories(dir);

    std::string csv = "section,key,total,correct,accuracy\n";
    csv += "overall,all," + std::to_string(rep.total) + "," + std::to_string(rep.correct) + "," +
           detail::fmt_exact(rep.path_accuracy) + "\n";
    for (const auto& b : rep.by_node_count)
      csv += "node_count," + std::to_string(b.key) + "," + std::to_string(b.total) + "," +
             std::to_string(b.correct) + "," + detail::fmt_exact(b.accuracy) + "\n";
    for (const auto& b : rep.by_hop_count)
      csv += "hop_count," + std::to_string(b.key) + "," + std::to_string(b.total) + "," +
             std::to_string(b.correct) + "," + detail::fmt_exact(b.accuracy) + "\n";
    write_text_file(dir / (base + ".csv"), csv);
    write_text_file(dir / (base + ".txt"), text.str());

    nlohmann::json manifest = detail::manifest_skeleton("eval", config);
    manifest["outputs"] = {{"csv", base + ".csv"}, {"summary", base + ".txt"}};
    manifest["results"] = {{"total", rep.total},
                           {"correct", rep.correct},
                           {"path_accuracy", rep.path_accuracy}};
    detail::write_manifest_file(dir / (base + ".manifest.json"), manifest);
    out << "eval: report -> " << (dir / (base + ".csv")).string() << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------
// perturb

struct PerturbArgs {
  std::string in;
  std::string mode = "remove-optimal-edge";
  std::uint64_t seed = 0;
  std::string out;
};

inline int cmd_perturb(const PerturbArgs& a, std::ostream& out) {
  const auto m = parse_perturb_mode(a.mode);
  if (!m)
    throw UsageError("unknown perturb mode '" + a.mode +
                     "' (remove-optimal-edge|remove-random-edge|remove-random-nonterminal-node)");

  const auto samples = from_records(read_jsonl(a.in));
  std::vector<Sample> kept;
  kept.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    Rng rng(mix_seed(a.seed, 0x9e77, static_cast<std::uint64_t>(i)));
    if (auto p = perturb(samples[i], *m, rng)) kept.push_back(std::move(*p));
  }
  if (kept.empty()) throw std::runtime_error("perturbation produced no usable samples");

  const std::filesystem::path of(a.out);
  if (of.has_parent_path()) std::filesystem::create_directories(of.parent_path());
  write_jsonl(of, to_records(kept));

  nlohmann::json config{{"in", a.in}, {"mode", a.mode}, {"seed", a.seed}};
  nlohmann::json manifest = detail::manifest_skeleton("perturb", config);
  manifest["outputs"] = {{"file", of.filename().string()},
                         {"samples_in", samples.size()},
                         {"samples_out", kept.size()},
                         {"dropped", samples.size() - kept.size()}};
  detail::write_manifest_file(detail::sibling_manifest(of), manifest);

  out << "perturb: kept " << kept.size() << "/" << samples.size() << " -> " << of.string()
      << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// bench

struct BenchArgs {
  std::string model;
  int nodes = 15;
  std::string hops = "1,2,3";
  int per_bucket = 50;
  int reps = 10;
  double extra_edge_factor = 1.0;
  std::string weights = "1:10";
  std::uint64_t seed = 0;
  std::string out;
};

inline int cmd_bench(const BenchArgs& a, std::ostream& out) {
  namespace fs = std::filesystem;
  const Checkpoint ck = load_checkpoint(a.model);
  const std::vector<int> hop_list = detail::parse_int_list(a.hops, "--hops");
  const auto [wlo, whi] = detail::parse_real_range(a.weights, "--weights");
  if (a.per_bucket < 1) throw UsageError("--per-bucket must be >= 1");

  const auto buckets =
      collect_hop_buckets(a.nodes, hop_list, static_cast<std::size_t>(a.per_bucket), a.seed,
                          a.extra_edge_factor, wlo, whi);
  const TimingReport tr = timing_benchmark(ck.params, ck.cfg, hop_list, buckets, a.reps);

  out << "bench: node count " << a.nodes << ", " << tr.repetitions
      << " repetitions (median per graph)\n";
  for (const auto& b : tr.buckets)
    out << "  hops " << b.hops << ": model " << detail::fmt_g(b.model_seconds) << "s (rel "
        << detail::fmt_g(b.model_relative) << "), oracle " << detail::fmt_g(b.oracle_seconds)
        << "s (rel " << detail::fmt_g(b.oracle_relative) << "), graphs " << b.n_graphs << "\n";
  out << "bench: model max/min ratio " << detail::fmt_g(tr.model_max_over_min) << "\n";

  if (!a.out.empty()) {
    nlohmann::json config{{"model", a.model},
                          {"nodes", a.nodes},
                          {"hops", hop_list},
                          {"per_bucket", a.per_bucket},
                          {"reps", a.reps},
                          {"extra_edge_factor", a.extra_edge_factor},
                          {"weight_lo", wlo},
                          {"weight_hi", whi},
                          {"seed", a.seed}};
    const std::string base =
        "bench_" + detail::config_hash(config) + "_s" + std::to_string(a.seed);
    const fs::path dir(a.out);
    fs::create_directories(dir);

    std::string csv = "hops,n_graphs,model_seconds,oracle_seconds,model_relative,oracle_relative\n";
    for (const auto& b : tr.buckets)
      csv += std::to_string(b.hops) + "," + std::to_string(b.n_graphs) + "," +
             detail::fmt_exact(b.model_seconds) + "," + detail::fmt_exact(b.oracle_seconds) +
             "," + detail::fmt_exact(b.model_relative) + "," +
             detail::fmt_exact(b.oracle_relative) + "\n";
    write_text_file(dir / (base + ".csv"), csv);

    nlohmann::json manifest = detail::manifest_skeleton("bench", config);
    manifest["outputs"] = {{"csv", base + ".csv"}};
    manifest["results"] = {{"model_max_over_min", tr.model_max_over_min},
                           {"repetitions", tr.repetitions}};
    detail::write_manifest_file(dir / (base + ".manifest.json"), manifest);
    out << "bench: report -> " << (dir / (base + ".csv")).string() << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------
// predict

struct PredictArgs {
  std::string model;
  std::string in;
  std::string out;
};

inline int cmd_predict(const PredictArgs& a, std::ostream& out) {
  const Checkpoint ck = load_checkpoint(a.model);
  const GraphRecord rec = read_graph_file(a.in);
  const Graph& g = rec.graph;

  const Predictions p = predict(g, ck.params, ck.cfg);
  const DecodedPath dp = decode_path(p, g);

  if (dp.ok) {
    double cost = 0.0;
    for (const int e : dp.edge_indices) cost += g.edges[static_cast<std::size_t>(e)].w;
    out << "predict: path [" << detail::join_ints(dp.nodes) << "], cost " << detail::fmt_g(cost)
        << "\n";
  } else {
    out << "predict: no clean path (" << to_string(dp.failure) << ": " << dp.detail << ")\n";
  }
  for (std::size_t i = 0; i < p.node_probs.size(); ++i)
    out << "  node " << i << ": " << detail::fmt_g(p.node_probs[i])
        << (classify(p.node_probs[i]) ? " on" : " off") << "\n";
  for (std::size_t e = 0; e < p.edge_probs.size(); ++e)
    out << "  edge " << e << " (" << g.edges[e].u << "," << g.edges[e].v
        << "): " << detail::fmt_g(p.edge_probs[e]) << (classify(p.edge_probs[e]) ? " on" : " off")
        << "\n";

  if (!a.out.empty()) {
    nlohmann::json decode;
    if (dp.ok) {
      decode = {{"ok", true}, {"nodes", dp.nodes}, {"edge_indices", dp.edge_indices}};
    } else {
      decode = {{"ok", false}, {"failure", to_string(dp.failure)}, {"detail", dp.detail}};
    }
    nlohmann::json artifact{{"format", kGraphFormatVersion},
                            {"node_probs", p.node_probs},
                            {"edge_probs", p.edge_probs},
                            {"decode", decode}};
    const std::filesystem::path of(a.out);
    if (of.has_parent_path()) std::filesystem::create_directories(of.parent_path());
    write_text_file(of, artifact.dump(2) + "\n");

    nlohmann::json config{{"model", a.model}, {"in", a.in}};
    nlohmann::json manifest = detail::manifest_skeleton("predict", config);
    manifest["outputs"] = {{"file", of.filename().string()}};
    detail::write_manifest_file(detail::sibling_manifest(of), manifest);
    out << "predict: probabilities -> " << of.string() << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------
// oracle

struct OracleArgs {
  std::string in;
  std::string out;
};

inline int cmd_oracle(const OracleArgs& a, std::ostream& out) {
  const GraphRecord rec = read_graph_file(a.in);
  const Graph& g = rec.graph;
  const PathResult r = dijkstra(g);

  if (!r.reachable) {
    if (!a.out.empty())
      throw std::runtime_error("cannot label '" + a.in + "': destination unreachable");
    out << "oracle: no path from " << g.source << " to " << g.destination << "\n";
    return 0;
  }

  out << "oracle: path [" << detail::join_ints(r.nodes) << "], cost " << detail::fmt_g(r.cost)
      << ", hops " << r.edge_indices.size() << ", unique " << (r.unique ? "yes" : "no") << "\n";

  if (!a.out.empty()) {
    const PathLabels labels = labels_from_path(g, r);
    const std::filesystem::path of(a.out);
    if (of.has_parent_path()) std::filesystem::create_directories(of.parent_path());
    write_graph_file(of, g, &labels);

    nlohmann::json config{{"in", a.in}};
    nlohmann::json manifest = detail::manifest_skeleton("oracle", config);
    manifest["outputs"] = {{"file", of.filename().string()}};
    manifest["results"] = {{"cost", r.cost},
                           {"hops", r.edge_indices.size()},
                           {"unique", r.unique}};
    detail::write_manifest_file(detail::sibling_manifest(of), manifest);
    out << "oracle: labeled graph -> " << of.string() << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------
// driver

/// Parses `args` (without the program name) and dispatches. Writes user
/// output to `out` and diagnostics to `err` so tests can capture both.
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"one-shot neural shortest path toolkit"};
  app.name("pathgnn");
  app.require_subcommand(1);

  GenArgs ga;
  TrainArgs ta;
  EvalArgs ea;
  PerturbArgs pa;
  BenchArgs ba;
  PredictArgs pra;
  OracleArgs oa;

  CLI::App* cg = app.add_subcommand("gen", "generate a labeled dataset with splits");
  cg->add_option("--structures", ga.structures, "number of graph structures")->required();
  cg->add_option("--nodes", ga.nodes, "node count range LO:HI")->capture_default_str();
  cg->add_option("--samplings", ga.samplings, "weight samplings per structure")
      ->capture_default_str();
  cg->add_option("--extra-edge-factor", ga.extra_edge_factor,
                 "extra edges per node beyond the spanning tree")
      ->capture_default_str();
  cg->add_option("--weights", ga.weights, "edge weight range LO:HI")->capture_default_str();
  cg->add_option("--split", ga.split, "TRAIN:VAL:TEST fractions")->capture_default_str();
  cg->add_option("--split-level", ga.split_level, "structure|sample")->capture_default_str();
  cg->add_option("--seed", ga.seed, "generation seed")->capture_default_str();
  cg->add_option("--threads", ga.threads, "worker threads")->capture_default_str();
  cg->add_option("--out", ga.out, "output directory")->required();

  CLI::App* ct = app.add_subcommand("train", "train a model on a generated dataset");
  ct->add_option("--data", ta.data, "dataset directory (train.jsonl, val.jsonl)")->required();
  ct->add_option("--out", ta.out, "output directory (model.ckpt, metrics.csv)")->required();
  ct->add_option("--layers", ta.layers, "attention layers")->capture_default_str();
  ct->add_option("--width", ta.width, "embedding width per layer")->capture_default_str();
  ct->add_option("--head-hidden", ta.head_hidden, "classifier hidden width")
      ->capture_default_str();
  ct->add_option("--dropout", ta.dropout, "dropout rate")->capture_default_str();
  ct->add_option("--leaky-slope", ta.leaky_slope, "LeakyReLU negative slope")
      ->capture_default_str();
  ct->add_option("--lr", ta.lr, "Adam learning rate")->capture_default_str();
  ct->add_option("--beta1", ta.beta1, "Adam beta1")->capture_default_str();
  ct->add_option("--beta2", ta.beta2, "Adam beta2")->capture_default_str();
  ct->add_option("--eps", ta.eps, "Adam epsilon")->capture_default_str();
  ct->add_option("--batch", ta.batch, "batch size")->capture_default_str();
  ct->add_option("--epochs", ta.epochs, "maximum epochs")->capture_default_str();
  ct->add_option("--patience", ta.patience, "early stop patience (0 disables)")
      ->capture_default_str();
  ct->add_option("--loss-mode", ta.loss_mode, "both|nodes_only|edges_only")
      ->capture_default_str();
  ct->add_option("--seed", ta.seed, "training seed")->capture_default_str();
  ct->add_option("--threads", ta.threads, "worker threads")->capture_default_str();
  ct->add_flag("--quiet", ta.quiet, "suppress per-epoch progress");

  CLI::App* ce = app.add_subcommand("eval", "evaluate a checkpoint on labeled data");
  ce->add_option("--model", ea.model, "checkpoint file")->required();
  ce->add_option("--data", ea.data, "dataset directory or a single .jsonl file")->required();
  ce->add_option("--split", ea.split, "split name when --data is a directory")
      ->capture_default_str();
  ce->add_option("--loss-mode", ea.loss_mode, "both|nodes_only|edges_only")
      ->capture_default_str();
  ce->add_option("--threads", ea.threads, "worker threads")->capture_default_str();
  ce->add_option("--out", ea.out, "report directory (optional)");

  CLI::App* cp = app.add_subcommand("perturb", "remove an edge or node and relabel");
  cp->add_option("--in", pa.in, "labeled .jsonl input")->required();
  cp->add_option("--mode", pa.mode,
                 "remove-optimal-edge|remove-random-edge|remove-random-nonterminal-node")
      ->capture_default_str();
  cp->add_option("--seed", pa.seed, "perturbation seed")->capture_default_str();
  cp->add_option("--out", pa.out, "perturbed .jsonl output")->required();

  CLI::App* cb = app.add_subcommand("bench", "time model inference against the oracle");
  cb->add_option("--model", ba.model, "checkpoint file")->required();
  cb->add_option("--nodes", ba.nodes, "fixed node count")->capture_default_str();
  cb->add_option("--hops", ba.hops, "comma-separated hop buckets (must include 1)")
      ->capture_default_str();
  cb->add_option("--per-bucket", ba.per_bucket, "graphs per bucket (>= 50)")
      ->capture_default_str();
  cb->add_option("--reps", ba.reps, "timing repetitions per graph (>= 10)")
      ->capture_default_str();
  cb->add_option("--extra-edge-factor", ba.extra_edge_factor,
                 "extra edges per node beyond the spanning tree")
      ->capture_default_str();
  cb->add_option("--weights", ba.weights, "edge weight range LO:HI")->capture_default_str();
  cb->add_option("--seed", ba.seed, "graph draw seed")->capture_default_str();
  cb->add_option("--out", ba.out, "report directory (optional)");

  CLI::App* cpr = app.add_subcommand("predict", "run one graph file through a checkpoint");
  cpr->add_option("--model", pra.model, "checkpoint file")->required();
  cpr->add_option("--in", pra.in, "graph .json input")->required();
  cpr->add_option("--out", pra.out, "probabilities .json output (optional)");

  CLI::App* co = app.add_subcommand("oracle", "label a graph file with its optimal path");
  co->add_option("--in", oa.in, "graph .json input")->required();
  co->add_option("--out", oa.out, "labeled graph .json output (optional)");

  try {
    std::vector<const char*> argv;
    argv.reserve(args.size() + 1);
    argv.push_back("pathgnn");
    for (const std::string& s : args) argv.push_back(s.c_str());
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& ex) {
    const int code = app.exit(ex, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (app.got_subcommand(cg)) return cmd_gen(ga, out);
    if (app.got_subcommand(ct)) return cmd_train(ta, out, err);
    if (app.got_subcommand(ce)) return cmd_eval(ea, out);
    if (app.got_subcommand(cp)) return cmd_perturb(pa, out);
    if (app.got_subcommand(cb)) return cmd_bench(ba, out);
    if (app.got_subcommand(cpr)) return cmd_predict(pra, out);
    if (app.got_subcommand(co)) return cmd_oracle(oa, out);
    throw std::logic_error("unreachable: subcommand required");
  } catch (const UsageError& ex) {
    err << "pathgnn: usage error: " << ex.what() << "\n";
    return 2;
  } catch (const std::exception& ex) {
    err << "pathgnn: error: " << ex.what() << "\n";
    return 1;
  }
}

inline int run(const std::vector<std::string>& args) { return run(args, std::cout, std::cerr); }

}  // namespace pathgnn::cli
