#pragma once

// Optimization loop: combined node+edge binary cross-entropy, Adam updates,
// validation-based model selection, and the single-head ablation modes.
//
// Determinism contract: given the same dataset, configs, and seed, training
// produces bitwise-identical parameters and history regardless of thread
// count. Every random draw has its own stream (init / per-epoch shuffle /
// per-sample dropout keyed by epoch and sample index), and batch gradients
// reduce in sample order.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "pathgnn/autodiff.hpp"
#include "pathgnn/datagen.hpp"
#include "pathgnn/model.hpp"
#include "pathgnn/parallel.hpp"
#include "pathgnn/rng.hpp"

namespace pathgnn {

enum class LossMode { both, nodes_only, edges_only };

inline std::string to_string(LossMode m) {
  switch (m) {
    case LossMode::both: return "both";
    case LossMode::nodes_only: return "nodes_only";
    case LossMode::edges_only: return "edges_only";
  }
  throw std::logic_error("unreachable loss mode");
}

inline LossMode parse_loss_mode(const std::string& s) {
  if (s == "both") return LossMode::both;
  if (s == "nodes_only") return LossMode::nodes_only;
  if (s == "edges_only") return LossMode::edges_only;
  throw std::invalid_argument("unknown loss mode '" + s + "' (both|nodes_only|edges_only)");
}

inline constexpr double kProbClamp = 1e-12;

namespace detail {

/// −mean(y·log p + (1−y)·log(1−p)) on the tape, probabilities clamped.
inline Var bce_term(Tape& t, Var probs, const std::vector<int>& labels) {
  const Tensor& P = t.value(probs);
  if (P.cols != 1 || P.rows != static_cast<int>(labels.size()))
    throw std::invalid_argument("bce: " + std::to_string(labels.size()) + " labels for " +
                                shape_str(P) + " probabilities");
  Tensor y(P.rows, 1);
  Tensor ynot(P.rows, 1);
  for (int i = 0; i < P.rows; ++i) {
    y.at(i, 0) = static_cast<double>(labels[static_cast<std::size_t>(i)]);
    ynot.at(i, 0) = 1.0 - y.at(i, 0);
  }
  Var p = clamp_elem(t, probs, kProbClamp, 1.0 - kProbClamp);
  Var pos = hadamard(t, t.leaf(std::move(y), false), log_elem(t, p));
  Var neg = hadamard(t, t.leaf(std::move(ynot), false), log_elem(t, affine(t, p, -1.0, 1.0)));
  return affine(t, mean_all(t, add(t, pos, neg)), -1.0, 0.0);
}

}  // namespace detail

/// Training loss of one graph on the tape: node term plus edge term, each a
/// mean over its own entries, included per mode.
inline Var sample_loss(Tape& t, const ForwardResult& fr, const PathLabels& labels, LossMode mode) {
  if (mode != LossMode::nodes_only && !fr.has_edges)
    throw std::invalid_argument("edge loss requested on a graph with no edges");
  std::optional<Var> loss;
  if (mode != LossMode::edges_only) loss = detail::bce_term(t, fr.node_probs, labels.nodes);
  if (mode != LossMode::nodes_only) {
    const Var e = detail::bce_term(t, fr.edge_probs, labels.edges);
    loss = loss ? add(t, *loss, e) : e;
  }
  return *loss;
}

/// Plain-number BCE for reporting; same clamping and mode handling as the
/// tape version.
inline double bce_loss(const Predictions& pred, const PathLabels& labels, LossMode mode) {
  auto term = [](const std::vector<double>& p, const std::vector<int>& y) {
    if (p.size() != y.size())
      throw std::invalid_argument("bce: " + std::to_string(y.size()) + " labels for " +
                                  std::to_string(p.size()) + " probabilities");
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double pc = std::min(std::max(p[i], kProbClamp), 1.0 - kProbClamp);
      acc += y[i] ? std::log(pc) : std::log(1.0 - pc);
    }
    return -acc / static_cast<double>(p.size());
  };
  if (mode != LossMode::nodes_only && pred.edge_probs.empty() && !labels.edges.empty())
    throw std::invalid_argument("edge loss requested without edge predictions");
  double loss = 0.0;
  if (mode != LossMode::edges_only) loss += term(pred.node_probs, labels.nodes);
  if (mode != LossMode::nodes_only) loss += term(pred.edge_probs, labels.edges);
  return loss;
}

inline constexpr double kDecisionThreshold = 0.5;

/// Binary decision shared by the accuracy metric and path decoding:
/// probabilities at or above the threshold read as on-path.
inline int classify(double p) { return p >= kDecisionThreshold ? 1 : 0; }

/// All-or-nothing correctness at the decision threshold, scoped to the
/// labels the given mode trains on.
inline bool prediction_correct(const Predictions& pred, const PathLabels& labels, LossMode mode) {
  auto all_match = [](const std::vector<double>& p, const std::vector<int>& y) {
    if (p.size() != y.size()) throw std::invalid_argument("prediction/label length mismatch");
    for (std::size_t i = 0; i < p.size(); ++i)
      if (classify(p[i]) != y[i]) return false;
    return true;
  };
  if (mode != LossMode::edges_only && !all_match(pred.node_probs, labels.nodes)) return false;
  if (mode != LossMode::nodes_only && !all_match(pred.edge_probs, labels.edges)) return false;
  return true;
}

/// Fraction of samples fully correct under `mode`.
inline double path_accuracy_over(const std::vector<Sample>& samples, const ModelParams& params,
                                 const ModelConfig& cfg, LossMode mode = LossMode::both,
                                 int n_threads = 1) {
  if (samples.empty()) throw std::invalid_argument("path accuracy over an empty split");
  std::vector<char> ok(samples.size(), 0);
  parallel_for(samples.size(), n_threads, [&](std::size_t i) {
    ok[i] = prediction_correct(predict(samples[i].graph, params, cfg), samples[i].labels, mode) ? 1 : 0;
  });
  std::size_t correct = 0;
  for (char c : ok) correct += static_cast<std::size_t>(c);
  return static_cast<double>(correct) / static_cast<double>(samples.size());
}

struct TrainConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int batch_size = 32;
  int max_epochs = 200;
  int patience = 10;  // <= 0 disables early stopping
  LossMode loss_mode = LossMode::both;
  std::uint64_t seed = 0;

  void validate() const {
    auto fail = [](const std::string& m) { throw std::invalid_argument("TrainConfig: " + m); };
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) fail("learning_rate must be > 0");
    if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0) fail("betas must be in [0,1)");
    if (!(eps > 0.0)) fail("eps must be > 0");
    if (batch_size < 1) fail("batch_size must be >= 1");
    if (max_epochs < 1) fail("max_epochs must be >= 1");
  }
};

struct AdamState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  long step = 0;
};

/// One bias-corrected Adam update. State tensors are allocated on first use.
inline void adam_step(ModelParams& params, const std::vector<Tensor>& grads, AdamState& st,
                      const TrainConfig& cfg) {
  if (grads.size() != params.tensors.size())
    throw std::invalid_argument("adam_step: gradient count does not match parameters");
  if (st.step == 0) {
    st.m.clear();
    st.v.clear();
    for (const Tensor& p : params.tensors) {
      st.m.emplace_back(p.rows, p.cols);
      st.v.emplace_back(p.rows, p.cols);
    }
  }
  ++st.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(st.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(st.step));
  for (std::size_t i = 0; i < params.tensors.size(); ++i) {
    Tensor& p = params.tensors[i];
    const Tensor& g = grads[i];
    if (!same_shape(p, g)) detail::shape_error("adam_step", p, g);
    Tensor& m = st.m[i];
    Tensor& v = st.v[i];
    for (std::size_t k = 0; k < p.v.size(); ++k) {
      m.v[k] = cfg.beta1 * m.v[k] + (1.0 - cfg.beta1) * g.v[k];
      v.v[k] = cfg.beta2 * v.v[k] + (1.0 - cfg.beta2) * g.v[k] * g.v[k];
      p.v[k] -= cfg.learning_rate * (m.v[k] / bc1) / (std::sqrt(v.v[k] / bc2) + cfg.eps);
    }
  }
}

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_path_accuracy = 0.0;
  double seconds = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;  // 0 until the first validation pass
  double best_val_path_accuracy = -1.0;
  bool diverged = false;
  std::string note;
};

struct TrainResult {
  ModelParams params;  // argmax-validation checkpoint
  ModelConfig model_config;
  TrainHistory history;
};

struct TrainOptions {
  std::ostream* log = nullptr;            // per-epoch progress lines
  std::filesystem::path metrics_csv;      // empty disables the stream
  int n_threads = 1;
};

namespace detail {

/// Forward+backward of one sample; returns its loss and adds its gradients
/// into `acc` (caller guarantees exclusive access to `acc`).
inline double accumulate_sample_grads(const Sample& s, const ModelParams& params,
                                      const ModelConfig& mcfg, LossMode mode, Rng dropout_rng,
                                      std::vector<Tensor>& acc) {
  Tape t;
  const PairIndex pi = build_pair_index(s.graph);
  const std::vector<Var> pv = params_to_tape(t, params, /*requires_grad=*/true);
  const ForwardResult fr =
      model_forward(t, s.graph, pi, pv, mcfg, /*train=*/true, &dropout_rng);
  const Var loss = sample_loss(t, fr, s.labels, mode);
  const double loss_value = t.value(loss).at(0, 0);
  if (!std::isfinite(loss_value)) return loss_value;  // caller handles divergence
  t.backward(loss);
  for (std::size_t i = 0; i < pv.size(); ++i) {
    const Tensor& g = t.grad(pv[i]);  // zeros when the mode never touched it
    for (std::size_t k = 0; k < g.v.size(); ++k) acc[i].v[k] += g.v[k];
  }
  return loss_value;
}

inline std::vector<Tensor> zero_like(const ModelParams& params) {
  std::vector<Tensor> z;
  z.reserve(params.tensors.size());
  for (const Tensor& p : params.tensors) z.emplace_back(p.rows, p.cols);
  return z;
}

}  // namespace detail

/// Full optimization run. Returns the checkpoint with the best validation
/// Path Accuracy (scored under the training loss mode). On divergence (a
/// non-finite training loss) the run aborts, flags the history, and still
/// returns the best checkpoint seen.
inline TrainResult train(const Dataset& data, const ModelConfig& mcfg, const TrainConfig& tcfg,
                         const TrainOptions& opts = {}) {
  mcfg.validate();
  tcfg.validate();
  if (data.train.empty()) throw std::invalid_argument("train: empty training split");
  if (data.val.empty()) throw std::invalid_argument("train: empty validation split");

  Rng init_rng(mix_seed(tcfg.seed, 0x1e17u, 0));
  ModelParams params = init_params(mcfg, init_rng);
  ModelParams best = params;
  TrainHistory hist;
  AdamState adam;

  std::ofstream csv;
  if (!opts.metrics_csv.empty()) {
    if (opts.metrics_csv.has_parent_path())
      std::filesystem::create_directories(opts.metrics_csv.parent_path());
    csv.open(opts.metrics_csv, std::ios::trunc);
    if (!csv) throw std::runtime_error("cannot write " + opts.metrics_csv.string());
    csv << "epoch,train_loss,val_path_accuracy,seconds\n" << std::flush;
  }

  std::vector<std::size_t> order(data.train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  const auto run_start = std::chrono::steady_clock::now();
  for (int epoch = 1; epoch <= tcfg.max_epochs; ++epoch) {
    const auto epoch_start = std::chrono::steady_clock::now();
    Rng shuffle_rng(mix_seed(tcfg.seed, 0x54f1eu, static_cast<std::uint64_t>(epoch)));
    shuffle_rng.shuffle(order);

    double loss_sum = 0.0;
    bool finite = true;
    for (std::size_t base = 0; base < order.size() && finite;
         base += static_cast<std::size_t>(tcfg.batch_size)) {
      const std::size_t batch_n =
          std::min(static_cast<std::size_t>(tcfg.batch_size), order.size() - base);
      std::vector<std::vector<Tensor>> grads(batch_n);
      std::vector<double> losses(batch_n);
      parallel_for(batch_n, opts.n_threads, [&](std::size_t k) {
        const std::size_t sample_idx = order[base + k];
        grads[k] = detail::zero_like(params);
        Rng dropout_rng(mix_seed(tcfg.seed ^ 0xd509u, static_cast<std::uint64_t>(epoch),
                                 static_cast<std::uint64_t>(sample_idx)));
        losses[k] = detail::accumulate_sample_grads(data.train[sample_idx], params, mcfg,
                                                    tcfg.loss_mode, dropout_rng, grads[k]);
      });
      std::vector<Tensor> mean_grads = detail::zero_like(params);
      for (std::size_t k = 0; k < batch_n; ++k) {
        if (!std::isfinite(losses[k])) {
          finite = false;
          break;
        }
        loss_sum += losses[k];
        for (std::size_t i = 0; i < mean_grads.size(); ++i)
          for (std::size_t c = 0; c < mean_grads[i].v.size(); ++c)
            mean_grads[i].v[c] += grads[k][i].v[c];
      }
      if (!finite) break;
      const double inv = 1.0 / static_cast<double>(batch_n);
      for (Tensor& g : mean_grads)
        for (double& x : g.v) x *= inv;
      adam_step(params, mean_grads, adam, tcfg);
    }

    if (!finite) {
      hist.diverged = true;
      hist.note = "training loss became non-finite in epoch " + std::to_string(epoch) +
                  "; returning the best checkpoint from epoch " + std::to_string(hist.best_epoch);
      if (opts.log) *opts.log << "diverged: " << hist.note << '\n';
      break;
    }

    const double train_loss = loss_sum / static_cast<double>(order.size());
    const double val_pa =
        path_accuracy_over(data.val, params, mcfg, tcfg.loss_mode, opts.n_threads);
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - epoch_start).count();
    hist.epochs.push_back({epoch, train_loss, val_pa, seconds});

    if (csv.is_open()) {
      char line[128];
      std::snprintf(line, sizeof(line), "%d,%.17g,%.17g,%.3f\n", epoch, train_loss, val_pa, seconds);
      csv << line << std::flush;
    }
    if (opts.log) {
      *opts.log << "epoch " << epoch << "  loss " << train_loss << "  val_pa " << val_pa << "  ("
                << seconds << "s, total "
                << std::chrono::duration<double>(std::chrono::steady_clock::now() - run_start).count()
                << "s)\n";
    }

    if (val_pa > hist.best_val_path_accuracy) {
      hist.best_val_path_accuracy = val_pa;
      hist.best_epoch = epoch;
      best = params;
    } else if (tcfg.patience > 0 && epoch - hist.best_epoch >= tcfg.patience) {
      if (opts.log)
        *opts.log << "early stop: no validation improvement in " << tcfg.patience << " epochs\n";
      break;
    }
  }

  return {std::move(best), mcfg, std::move(hist)};
}

}  // namespace pathgnn
