#pragma once

// Dense double-precision tensors and a define-by-run reverse-mode tape.
// Exactly the primitives the attention model needs, nothing more: products,
// gathers, concatenation, elementwise nonlinearities, grouped softmax and
// summation, dropout, and scalar reductions.
//
// The tape is rebuilt every forward pass (graphs vary in size). Backward
// closures capture node ids and receive the tape as an argument, so the
// node vector may grow and relocate freely while recording.

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "pathgnn/rng.hpp"

namespace pathgnn {

struct Tensor {
  int rows = 0;
  int cols = 0;
  std::vector<double> v;

  Tensor() = default;
  Tensor(int r, int c) : rows(r), cols(c), v(static_cast<std::size_t>(r) * static_cast<std::size_t>(c), 0.0) {}

  static Tensor row_major(int r, int c, std::vector<double> data) {
    Tensor t;
    t.rows = r;
    t.cols = c;
    if (data.size() != static_cast<std::size_t>(r) * static_cast<std::size_t>(c))
      throw std::invalid_argument("Tensor::row_major: data size does not match shape");
    t.v = std::move(data);
    return t;
  }

  std::size_t size() const { return v.size(); }
  double& at(int r, int c) { return v[static_cast<std::size_t>(r) * cols + static_cast<std::size_t>(c)]; }
  double at(int r, int c) const { return v[static_cast<std::size_t>(r) * cols + static_cast<std::size_t>(c)]; }
  double* row(int r) { return v.data() + static_cast<std::size_t>(r) * cols; }
  const double* row(int r) const { return v.data() + static_cast<std::size_t>(r) * cols; }
};

inline std::string shape_str(const Tensor& t) {
  return "(" + std::to_string(t.rows) + "x" + std::to_string(t.cols) + ")";
}

inline bool same_shape(const Tensor& a, const Tensor& b) { return a.rows == b.rows && a.cols == b.cols; }

/// Handle to a tape node. Only meaningful with the tape that produced it.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

class Tape {
 public:
  /// New leaf holding a copy of `value`. Parameters pass requires_grad=true;
  /// graph constants (features, costs, labels) pass false so backward skips
  /// everything they feed exclusively.
  Var leaf(Tensor value, bool requires_grad) {
    return push(std::move(value), requires_grad, "leaf");
  }

  const Tensor& value(Var x) const { return node(x).value; }

  bool requires_grad(Var x) const { return node(x).requires_grad; }

  /// Adjoint of x, allocated zero on first touch. Valid after backward().
  Tensor& grad(Var x) {
    Node& n = node(x);
    if (!n.grad_live) {
      n.grad = Tensor(n.value.rows, n.value.cols);
      n.grad_live = true;
    }
    return n.grad;
  }

  bool grad_live(Var x) const { return node(x).grad_live; }

  /// Reverse sweep from a scalar loss. Seeds d loss/d loss = 1 and runs
  /// recorded ops in reverse, accumulating adjoints additively at fan-out.
  void backward(Var loss) {
    if (!loss.valid() || loss.id >= static_cast<int>(nodes_.size()))
      throw std::logic_error("Tape::backward: loss was not recorded on this tape");
    const Node& ln = nodes_[static_cast<std::size_t>(loss.id)];
    if (ln.value.rows != 1 || ln.value.cols != 1)
      throw std::invalid_argument("Tape::backward: loss must be scalar, got " + shape_str(ln.value));
    grad(loss).v[0] = 1.0;
    for (int id = loss.id; id >= 0; --id) {
      Node& n = nodes_[static_cast<std::size_t>(id)];
      if (n.requires_grad && n.grad_live && n.bwd) n.bwd(*this);
    }
  }

  std::size_t node_count() const { return nodes_.size(); }

  void clear() { nodes_.clear(); }

  // --- op-author interface ---

  Var push(Tensor value, bool requires_grad, const char* op_name) {
#ifndef NDEBUG
    for (double x : value.v)
      if (!std::isfinite(x))
        throw std::runtime_error(std::string("non-finite value produced by op '") + op_name + "'");
#else
    (void)op_name;
#endif
    nodes_.push_back(Node{std::move(value), Tensor{}, requires_grad, false, nullptr});
    return Var{static_cast<int>(nodes_.size()) - 1};
  }

  void set_backward(Var x, std::function<void(Tape&)> fn) { node(x).bwd = std::move(fn); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    bool grad_live = false;
    std::function<void(Tape&)> bwd;
  };

  Node& node(Var x) {
    if (!x.valid() || x.id >= static_cast<int>(nodes_.size()))
      throw std::logic_error("Tape: invalid node handle");
    return nodes_[static_cast<std::size_t>(x.id)];
  }
  const Node& node(Var x) const {
    if (!x.valid() || x.id >= static_cast<int>(nodes_.size()))
      throw std::logic_error("Tape: invalid node handle");
    return nodes_[static_cast<std::size_t>(x.id)];
  }

  std::vector<Node> nodes_;
};

namespace detail {

[[noreturn]] inline void shape_error(const char* op, const Tensor& a, const Tensor& b) {
  throw std::invalid_argument(std::string(op) + ": incompatible shapes " + shape_str(a) + " and " +
                              shape_str(b));
}

}  // namespace detail

/// C = A · Bᵀ. A: r×k, B: m×k → C: r×m. Serves matrix-matrix products
/// against row-major weight matrices without materializing transposes.
inline Var matmul_nt(Tape& t, Var a, Var b) {
  const Tensor& A = t.value(a);
  const Tensor& B = t.value(b);
  if (A.cols != B.cols) detail::shape_error("matmul_nt", A, B);
  const int r = A.rows, m = B.rows, k = A.cols;
  Tensor C(r, m);
  for (int i = 0; i < r; ++i) {
    const double* ai = A.row(i);
    double* ci = C.row(i);
    for (int j = 0; j < m; ++j) {
      const double* bj = B.row(j);
      double acc = 0.0;
      for (int x = 0; x < k; ++x) acc += ai[x] * bj[x];
      ci[j] = acc;
    }
  }
  const bool rg = t.requires_grad(a) || t.requires_grad(b);
  Var out = t.push(std::move(C), rg, "matmul_nt");
  if (rg) {
    t.set_backward(out, [a, b, out, r, m, k](Tape& tp) {
      const Tensor& G = tp.grad(out);
      if (tp.requires_grad(a)) {
        Tensor& dA = tp.grad(a);
        const Tensor& B2 = tp.value(b);
        for (int i = 0; i < r; ++i) {
          double* dai = dA.row(i);
          const double* gi = G.row(i);
          for (int j = 0; j < m; ++j) {
            const double g = gi[j];
            if (g == 0.0) continue;
            const double* bj = B2.row(j);
            for (int x = 0; x < k; ++x) dai[x] += g * bj[x];
          }
        }
      }
      if (tp.requires_grad(b)) {
        Tensor& dB = tp.grad(b);
        const Tensor& A2 = tp.value(a);
        for (int i = 0; i < r; ++i) {
          const double* ai = A2.row(i);
          const double* gi = G.row(i);
          for (int j = 0; j < m; ++j) {
            const double g = gi[j];
            if (g == 0.0) continue;
            double* dbj = dB.row(j);
            for (int x = 0; x < k; ++x) dbj[x] += g * ai[x];
          }
        }
      }
    });
  }
  return out;
}

/// y = A · x. A: r×c, x: c×1 → y: r×1.
inline Var matvec(Tape& t, Var a, Var x) {
  const Tensor& A = t.value(a);
  const Tensor& X = t.value(x);
  if (X.cols != 1 || A.cols != X.rows) detail::shape_error("matvec", A, X);
  const int r = A.rows, c = A.cols;
  Tensor Y(r, 1);
  for (int i = 0; i < r; ++i) {
    const double* ai = A.row(i);
    double acc = 0.0;
    for (int j = 0; j < c; ++j) acc += ai[j] * X.v[static_cast<std::size_t>(j)];
    Y.v[static_cast<std::size_t>(i)] = acc;
  }
  const bool rg = t.requires_grad(a) || t.requires_grad(x);
  Var out = t.push(std::move(Y), rg, "matvec");
  if (rg) {
    t.set_backward(out, [a, x, out, r, c](Tape& tp) {
      const Tensor& G = tp.grad(out);
      if (tp.requires_grad(a)) {
        Tensor& dA = tp.grad(a);
        const Tensor& X2 = tp.value(x);
        for (int i = 0; i < r; ++i) {
          const double g = G.v[static_cast<std::size_t>(i)];
          if (g == 0.0) continue;
          double* dai = dA.row(i);
          for (int j = 0; j < c; ++j) dai[j] += g * X2.v[static_cast<std::size_t>(j)];
        }
      }
      if (tp.requires_grad(x)) {
        Tensor& dX = tp.grad(x);
        const Tensor& A2 = tp.value(a);
        for (int i = 0; i < r; ++i) {
          const double g = G.v[static_cast<std::size_t>(i)];
          if (g == 0.0) continue;
          const double* ai = A2.row(i);
          for (int j = 0; j < c; ++j) dX.v[static_cast<std::size_t>(j)] += g * ai[j];
        }
      }
    });
  }
  return out;
}

/// B with B.row(p) = A.row(idx[p]). Backward scatter-adds into A's rows.
inline Var gather_rows(Tape& t, Var a, std::shared_ptr<const std::vector<int>> idx) {
  const Tensor& A = t.value(a);
  const int p = static_cast<int>(idx->size()), c = A.cols;
  Tensor B(p, c);
  for (int i = 0; i < p; ++i) {
    const int src = (*idx)[static_cast<std::size_t>(i)];
    if (src < 0 || src >= A.rows)
      throw std::invalid_argument("gather_rows: index " + std::to_string(src) + " out of range for " +
                                  shape_str(A));
    const double* s = A.row(src);
    double* d = B.row(i);
    for (int j = 0; j < c; ++j) d[j] = s[j];
  }
  const bool rg = t.requires_grad(a);
  Var out = t.push(std::move(B), rg, "gather_rows");
  if (rg) {
    t.set_backward(out, [a, out, idx, p, c](Tape& tp) {
      const Tensor& G = tp.grad(out);
      Tensor& dA = tp.grad(a);
      for (int i = 0; i < p; ++i) {
        double* d = dA.row((*idx)[static_cast<std::size_t>(i)]);
        const double* g = G.row(i);
        for (int j = 0; j < c; ++j) d[j] += g[j];
      }
    });
  }
  return out;
}

/// Column-wise concatenation of three equal-height blocks.
inline Var concat_cols(Tape& t, Var a, Var b, Var c) {
  const Tensor& A = t.value(a);
  const Tensor& B = t.value(b);
  const Tensor& C = t.value(c);
  if (A.rows != B.rows) detail::shape_error("concat_cols", A, B);
  if (A.rows != C.rows) detail::shape_error("concat_cols", A, C);
  const int r = A.rows;
  Tensor D(r, A.cols + B.cols + C.cols);
  for (int i = 0; i < r; ++i) {
    double* d = D.row(i);
    const double* pa = A.row(i);
    const double* pb = B.row(i);
    const double* pc = C.row(i);
    int j = 0;
    for (int x = 0; x < A.cols; ++x) d[j++] = pa[x];
    for (int x = 0; x < B.cols; ++x) d[j++] = pb[x];
    for (int x = 0; x < C.cols; ++x) d[j++] = pc[x];
  }
  // dimensions are captured before push: the node vector may reallocate,
  // invalidating A/B/C references
  const int ca = A.cols, cb = B.cols, cc = C.cols;
  const bool rg = t.requires_grad(a) || t.requires_grad(b) || t.requires_grad(c);
  Var out = t.push(std::move(D), rg, "concat_cols");
  if (rg) {
    t.set_backward(out, [a, b, c, out, r, ca, cb, cc](Tape& tp) {
      const Tensor& G = tp.grad(out);
      auto slice_into = [&](Var dst, int offset, int width) {
        if (!tp.requires_grad(dst)) return;
        Tensor& d = tp.grad(dst);
        for (int i = 0; i < r; ++i) {
          const double* g = G.row(i) + offset;
          double* di = d.row(i);
          for (int x = 0; x < width; ++x) di[x] += g[x];
        }
      };
      slice_into(a, 0, ca);
      slice_into(b, ca, cb);
      slice_into(c, ca + cb, cc);
    });
  }
  return out;
}

/// C = u · vᵀ. u: r×1, v: c×1 → C: r×c.
inline Var outer(Tape& t, Var u, Var v) {
  const Tensor& U = t.value(u);
  const Tensor& V = t.value(v);
  if (U.cols != 1 || V.cols != 1) detail::shape_error("outer", U, V);
  const int r = U.rows, c = V.rows;
  Tensor C(r, c);
  for (int i = 0; i < r; ++i) {
    const double ui = U.v[static_cast<std::size_t>(i)];
    double* ci = C.row(i);
    for (int j = 0; j < c; ++j) ci[j] = ui * V.v[static_cast<std::size_t>(j)];
  }
  const bool rg = t.requires_grad(u) || t.requires_grad(v);
  Var out = t.push(std::move(C), rg, "outer");
  if (rg) {
    t.set_backward(out, [u, v, out, r, c](Tape& tp) {
      const Tensor& G = tp.grad(out);
      if (tp.requires_grad(u)) {
        Tensor& dU = tp.grad(u);
        const Tensor& V2 = tp.value(v);
        for (int i = 0; i < r; ++i) {
          const double* gi = G.row(i);
          double acc = 0.0;
          for (int j = 0; j < c; ++j) acc += gi[j] * V2.v[static_cast<std::size_t>(j)];
          dU.v[static_cast<std::size_t>(i)] += acc;
        }
      }
      if (tp.requires_grad(v)) {
        Tensor& dV = tp.grad(v);
        const Tensor& U2 = tp.value(u);
        for (int i = 0; i < r; ++i) {
          const double ui = U2.v[static_cast<std::size_t>(i)];
          if (ui == 0.0) continue;
          const double* gi = G.row(i);
          for (int j = 0; j < c; ++j) dV.v[static_cast<std::size_t>(j)] += ui * gi[j];
        }
      }
    });
  }
  return out;
}

inline Var add(Tape& t, Var a, Var b) {
  const Tensor& A = t.value(a);
  const Tensor& B = t.value(b);
  if (!same_shape(A, B)) detail::shape_error("add", A, B);
  Tensor C = A;
  for (std::size_t i = 0; i < C.size(); ++i) C.v[i] += B.v[i];
  const bool rg = t.requires_grad(a) || t.requires_grad(b);
  Var out = t.push(std::move(C), rg, "add");
  if (rg) {
    t.set_backward(out, [a, b, out](Tape& tp) {
      const Tensor& G = tp.grad(out);
      for (Var in : {a, b}) {
        if (!tp.requires_grad(in)) continue;
        Tensor& d = tp.grad(in);
        for (std::size_t i = 0; i < G.size(); ++i) d.v[i] += G.v[i];
      }
    });
  }
  return out;
}

/// A + broadcast row vector b (1×cols), the bias pattern.
inline Var add_rowvec(Tape& t, Var a, Var b) {
  const Tensor& A = t.value(a);
  const Tensor& B = t.value(b);
  if (B.rows != 1 || B.cols != A.cols) detail::shape_error("add_rowvec", A, B);
  Tensor C = A;
  for (int i = 0; i < A.rows; ++i) {
    double* ci = C.row(i);
    for (int j = 0; j < A.cols; ++j) ci[j] += B.v[static_cast<std::size_t>(j)];
  }
  const int r = A.rows, c = A.cols;  // before push: node vector may reallocate
  const bool rg = t.requires_grad(a) || t.requires_grad(b);
  Var out = t.push(std::move(C), rg, "add_rowvec");
  if (rg) {
    t.set_backward(out, [a, b, out, r, c](Tape& tp) {
      const Tensor& G = tp.grad(out);
      if (tp.requires_grad(a)) {
        Tensor& dA = tp.grad(a);
        for (std::size_t i = 0; i < G.size(); ++i) dA.v[i] += G.v[i];
      }
      if (tp.requires_grad(b)) {
        Tensor& dB = tp.grad(b);
        for (int i = 0; i < r; ++i) {
          const double* gi = G.row(i);
          for (int j = 0; j < c; ++j) dB.v[static_cast<std::size_t>(j)] += gi[j];
        }
      }
    });
  }
  return out;
}

inline Var hadamard(Tape& t, Var a, Var b) {
  const Tensor& A = t.value(a);
  const Tensor& B = t.value(b);
  if (!same_shape(A, B)) detail::shape_error("hadamard", A, B);
  Tensor C = A;
  for (std::size_t i = 0; i < C.size(); ++i) C.v[i] *= B.v[i];
  const bool rg = t.requires_grad(a) || t.requires_grad(b);
  Var out = t.push(std::move(C), rg, "hadamard");
  if (rg) {
    t.set_backward(out, [a, b, out](Tape& tp) {
      const Tensor& G = tp.grad(out);
      if (tp.requires_grad(a)) {
        Tensor& dA = tp.grad(a);
        const Tensor& B2 = tp.value(b);
        for (std::size_t i = 0; i < G.size(); ++i) dA.v[i] += G.v[i] * B2.v[i];
      }
      if (tp.requires_grad(b)) {
        Tensor& dB = tp.grad(b);
        const Tensor& A2 = tp.value(a);
        for (std::size_t i = 0; i < G.size(); ++i) dB.v[i] += G.v[i] * A2.v[i];
      }
    });
  }
  return out;
}

/// Elementwise mul·A + add.
inline Var affine(Tape& t, Var a, double mul, double addc) {
  const Tensor& A = t.value(a);
  Tensor C = A;
  for (double& x : C.v) x = mul * x + addc;
  const bool rg = t.requires_grad(a);
  Var out = t.push(std::move(C), rg, "affine");
  if (rg) {
    t.set_backward(out, [a, out, mul](Tape& tp) {
      const Tensor& G = tp.grad(out);
      Tensor& dA = tp.grad(a);
      for (std::size_t i = 0; i < G.size(); ++i) dA.v[i] += mul * G.v[i];
    });
  }
  return out;
}

/// Row p of A scaled by s_p. A: r×c, s: r×1.
inline Var mul_rows(Tape& t, Var a, Var s) {
  const Tensor& A = t.value(a);
  const Tensor& S = t.value(s);
  if (S.cols != 1 || S.rows != A.rows) detail::shape_error("mul_rows", A, S);
  Tensor C = A;
  for (int i = 0; i < A.rows; ++i) {
    const double si = S.v[static_cast<std::size_t>(i)];
    double* ci = C.row(i);
    for (int j = 0; j < A.cols; ++j) ci[j] *= si;
  }
  const int r = A.rows, c = A.cols;  // before push: node vector may reallocate
  const bool rg = t.requires_grad(a) || t.requires_grad(s);
  Var out = t.push(std::move(C), rg, "mul_rows");
  if (rg) {
    t.set_backward(out, [a, s, out, r, c](Tape& tp) {
      const Tensor& G = tp.grad(out);
      if (tp.requires_grad(a)) {
        Tensor& dA = tp.grad(a);
        const Tensor& S2 = tp.value(s);
        for (int i = 0; i < r; ++i) {
          const double si = S2.v[static_cast<std::size_t>(i)];
          const double* gi = G.row(i);
          double* di = dA.row(i);
          for (int j = 0; j < c; ++j) di[j] += gi[j] * si;
        }
      }
      if (tp.requires_grad(s)) {
        Tensor& dS = tp.grad(s);
        const Tensor& A2 = tp.value(a);
        for (int i = 0; i < r; ++i) {
          const double* gi = G.row(i);
          const double* ai = A2.row(i);
          double acc = 0.0;
          for (int j = 0; j < c; ++j) acc += gi[j] * ai[j];
          dS.v[static_cast<std::size_t>(i)] += acc;
        }
      }
    });
  }
  return out;
}

/// Sums contiguous row groups: output row g = sum of A rows
/// [starts[g], starts[g+1]). starts.size() == out_rows + 1,
/// starts.back() == A.rows.
inline Var scatter_sum(Tape& t, Var a, std::shared_ptr<const std::vector<int>> starts) {
  const Tensor& A = t.value(a);
  const int groups = static_cast<int>(starts->size()) - 1;
  if (groups < 0 || (*starts)[0] != 0 || starts->back() != A.rows)
    throw std::invalid_argument("scatter_sum: group starts must cover all " +
                                std::to_string(A.rows) + " rows");
  const int c = A.cols;
  Tensor C(groups, c);
  for (int g = 0; g < groups; ++g) {
    double* cg = C.row(g);
    for (int p = (*starts)[static_cast<std::size_t>(g)]; p < (*starts)[static_cast<std::size_t>(g) + 1]; ++p) {
      const double* ap = A.row(p);
      for (int j = 0; j < c; ++j) cg[j] += ap[j];
    }
  }
  const bool rg = t.requires_grad(a);
  Var out = t.push(std::move(C), rg, "scatter_sum");
  if (rg) {
    t.set_backward(out, [a, out, starts, groups, c](Tape& tp) {
      const Tensor& G = tp.grad(out);
      Tensor& dA = tp.grad(a);
      for (int g = 0; g < groups; ++g) {
        const double* gg = G.row(g);
        for (int p = (*starts)[static_cast<std::size_t>(g)]; p < (*starts)[static_cast<std::size_t>(g) + 1];
             ++p) {
          double* dp = dA.row(p);
          for (int j = 0; j < c; ++j) dp[j] += gg[j];
        }
      }
    });
  }
  return out;
}

inline Var leaky_relu(Tape& t, Var a, double slope) {
  const Tensor& A = t.value(a);
  Tensor C = A;
  for (double& x : C.v)
    if (x < 0.0) x *= slope;
  const bool rg = t.requires_grad(a);
  Var out = t.push(std::move(C), rg, "leaky_relu");
  if (rg) {
    t.set_backward(out, [a, out, slope](Tape& tp) {
      const Tensor& G = tp.grad(out);
      const Tensor& A2 = tp.value(a);
      Tensor& dA = tp.grad(a);
      for (std::size_t i = 0; i < G.size(); ++i)
        dA.v[i] += G.v[i] * (A2.v[i] > 0.0 ? 1.0 : slope);
    });
  }
  return out;
}

inline Var sigmoid(Tape& t, Var a) {
  const Tensor& A = t.value(a);
  Tensor C = A;
  for (double& x : C.v) x = 1.0 / (1.0 + std::exp(-x));
  const bool rg = t.requires_grad(a);
  Var out = t.push(std::move(C), rg, "sigmoid");
  if (rg) {
    t.set_backward(out, [a, out](Tape& tp) {
      const Tensor& G = tp.grad(out);
      const Tensor& Y = tp.value(out);
      Tensor& dA = tp.grad(a);
      for (std::size_t i = 0; i < G.size(); ++i) dA.v[i] += G.v[i] * Y.v[i] * (1.0 - Y.v[i]);
    });
  }
  return out;
}

inline Var exp_elem(Tape& t, Var a) {
  const Tensor& A = t.value(a);
  Tensor C = A;
  for (double& x : C.v) x = std::exp(x);
  const bool rg = t.requires_grad(a);
  Var out = t.push(std::move(C), rg, "exp");
  if (rg) {
    t.set_backward(out, [a, out](Tape& tp) {
      const Tensor& G = tp.grad(out);
      const Tensor& Y = tp.value(out);
      Tensor& dA = tp.grad(a);
      for (std::size_t i = 0; i < G.size(); ++i) dA.v[i] += G.v[i] * Y.v[i];
    });
  }
  return out;
}

/// Natural log. Caller guarantees positive inputs (clamp first).
inline Var log_elem(Tape& t, Var a) {
  const Tensor& A = t.value(a);
  Tensor C = A;
  for (double& x : C.v) x = std::log(x);
  const bool rg = t.requires_grad(a);
  Var out = t.push(std::move(C), rg, "log");
  if (rg) {
    t.set_backward(out, [a, out](Tape& tp) {
      const Tensor& G = tp.grad(out);
      const Tensor& A2 = tp.value(a);
      Tensor& dA = tp.grad(a);
      for (std::size_t i = 0; i < G.size(); ++i) dA.v[i] += G.v[i] / A2.v[i];
    });
  }
  return out;
}

/// Clamp to [lo, hi]. Gradient passes through strictly inside the range and
/// is zero at saturated entries.
inline Var clamp_elem(Tape& t, Var a, double lo, double hi) {
  const Tensor& A = t.value(a);
  Tensor C = A;
  for (double& x : C.v) x = x < lo ? lo : (x > hi ? hi : x);
  const bool rg = t.requires_grad(a);
  Var out = t.push(std::move(C), rg, "clamp");
  if (rg) {
    t.set_backward(out, [a, out, lo, hi](Tape& tp) {
      const Tensor& G = tp.grad(out);
      const Tensor& A2 = tp.value(a);
      Tensor& dA = tp.grad(a);
      for (std::size_t i = 0; i < G.size(); ++i)
        if (A2.v[i] > lo && A2.v[i] < hi) dA.v[i] += G.v[i];
    });
  }
  return out;
}

/// Softmax within each contiguous group of score rows. scores: P×1,
/// starts as in scatter_sum. Stable: subtracts the group max first.
inline Var neighbor_softmax(Tape& t, Var scores, std::shared_ptr<const std::vector<int>> starts) {
  const Tensor& S = t.value(scores);
  if (S.cols != 1)
    throw std::invalid_argument("neighbor_softmax: scores must be a column, got " + shape_str(S));
  const int groups = static_cast<int>(starts->size()) - 1;
  if (groups < 0 || (*starts)[0] != 0 || starts->back() != S.rows)
    throw std::invalid_argument("neighbor_softmax: group starts must cover all " +
                                std::to_string(S.rows) + " scores");
  Tensor A(S.rows, 1);
  for (int g = 0; g < groups; ++g) {
    const int lo = (*starts)[static_cast<std::size_t>(g)];
    const int hi = (*starts)[static_cast<std::size_t>(g) + 1];
    if (hi <= lo) throw std::invalid_argument("neighbor_softmax: empty group");
    double mx = S.v[static_cast<std::size_t>(lo)];
    for (int p = lo + 1; p < hi; ++p) mx = std::max(mx, S.v[static_cast<std::size_t>(p)]);
    double sum = 0.0;
    for (int p = lo; p < hi; ++p) {
      const double e = std::exp(S.v[static_cast<std::size_t>(p)] - mx);
      A.v[static_cast<std::size_t>(p)] = e;
      sum += e;
    }
    for (int p = lo; p < hi; ++p) A.v[static_cast<std::size_t>(p)] /= sum;
  }
  const bool rg = t.requires_grad(scores);
  Var out = t.push(std::move(A), rg, "neighbor_softmax");
  if (rg) {
    t.set_backward(out, [scores, out, starts, groups](Tape& tp) {
      const Tensor& G = tp.grad(out);
      const Tensor& Y = tp.value(out);
      Tensor& dS = tp.grad(scores);
      for (int g = 0; g < groups; ++g) {
        const int lo = (*starts)[static_cast<std::size_t>(g)];
        const int hi = (*starts)[static_cast<std::size_t>(g) + 1];
        double dot = 0.0;
        for (int p = lo; p < hi; ++p)
          dot += Y.v[static_cast<std::size_t>(p)] * G.v[static_cast<std::size_t>(p)];
        for (int p = lo; p < hi; ++p)
          dS.v[static_cast<std::size_t>(p)] +=
              Y.v[static_cast<std::size_t>(p)] * (G.v[static_cast<std::size_t>(p)] - dot);
      }
    });
  }
  return out;
}

/// Inverted dropout: zeroes entries with probability `rate` and scales
/// survivors by 1/(1−rate). rate 0 or train=false is the identity (returns
/// the input node unchanged). Backward reuses the forward mask.
inline Var dropout(Tape& t, Var a, double rate, bool train, Rng& rng) {
  if (!train || rate == 0.0) return a;
  if (rate < 0.0 || rate >= 1.0)
    throw std::invalid_argument("dropout: rate must be in [0,1), got " + std::to_string(rate));
  const Tensor& A = t.value(a);
  const double keep = 1.0 - rate;
  auto mask = std::make_shared<std::vector<double>>(A.size());
  Tensor C = A;
  for (std::size_t i = 0; i < C.size(); ++i) {
    const double m = rng.bernoulli(keep) ? 1.0 / keep : 0.0;
    (*mask)[i] = m;
    C.v[i] *= m;
  }
  const bool rg = t.requires_grad(a);
  Var out = t.push(std::move(C), rg, "dropout");
  if (rg) {
    t.set_backward(out, [a, out, mask](Tape& tp) {
      const Tensor& G = tp.grad(out);
      Tensor& dA = tp.grad(a);
      for (std::size_t i = 0; i < G.size(); ++i) dA.v[i] += G.v[i] * (*mask)[i];
    });
  }
  return out;
}

inline Var sum_all(Tape& t, Var a) {
  const Tensor& A = t.value(a);
  double s = 0.0;
  for (double x : A.v) s += x;
  Tensor C(1, 1);
  C.v[0] = s;
  const bool rg = t.requires_grad(a);
  Var out = t.push(std::move(C), rg, "sum_all");
  if (rg) {
    t.set_backward(out, [a, out](Tape& tp) {
      const double g = tp.grad(out).v[0];
      Tensor& dA = tp.grad(a);
      for (double& x : dA.v) x += g;
    });
  }
  return out;
}

inline Var mean_all(Tape& t, Var a) {
  const Tensor& A = t.value(a);
  if (A.size() == 0) throw std::invalid_argument("mean_all: empty tensor");
  double s = 0.0;
  for (double x : A.v) s += x;
  Tensor C(1, 1);
  C.v[0] = s / static_cast<double>(A.size());
  const double inv = 1.0 / static_cast<double>(A.size());  // before push: A may dangle
  const bool rg = t.requires_grad(a);
  Var out = t.push(std::move(C), rg, "mean_all");
  if (rg) {
    t.set_backward(out, [a, out, inv](Tape& tp) {
      const double g = tp.grad(out).v[0] * inv;
      Tensor& dA = tp.grad(a);
      for (double& x : dA.v) x += g;
    });
  }
  return out;
}

/// Max over parameters of ‖analytic − numeric‖ / max(‖analytic‖, ‖numeric‖,
/// floor), with the numeric gradient from central differences of `f` at
/// `params`. Comparison is per parameter tensor, not per coordinate: a
/// coordinate whose true gradient is structurally zero (softmax shift
/// invariance makes whole blocks of the attention vector such) measures
/// only one-ulp rounding noise of `f` under central differences, which is
/// ~1e-10 at step 1e-6 and would swamp any fixed per-coordinate floor.
///
/// The floor is noise-aware: central differences cannot resolve a gradient
/// below ε·|f|/(2·step) per coordinate no matter how correct it is, so a
/// tensor whose true gradient norm is near that resolution would report
/// noise/norm ≈ O(1) under a plain relative error. The denominator is
/// therefore floored at (per-coordinate noise)·√k·safety/`tolerance`, which
/// keeps the check sharp for any tensor whose gradient central differences
/// can actually measure at `tolerance` and vacuous only below the method's
/// own resolution. `f` must be deterministic (dropout disabled).
inline double finite_difference_check(const std::function<double(const std::vector<Tensor>&)>& f,
                                      const std::vector<Tensor>& params,
                                      const std::vector<Tensor>& analytic_grads, double step,
                                      double tolerance = 1e-4) {
  if (params.size() != analytic_grads.size())
    throw std::invalid_argument("finite_difference_check: gradient count mismatch");
  std::vector<Tensor> work = params;
  const double f0 = std::abs(f(work));
  // Measured cancellation noise of up − down runs a small multiple of one
  // ulp of f; 4 gives margin without masking real errors.
  const double coord_noise = 4.0 * std::numeric_limits<double>::epsilon() * f0 / (2.0 * step);
  double worst = 0.0;
  for (std::size_t p = 0; p < params.size(); ++p) {
    if (!same_shape(params[p], analytic_grads[p]))
      detail::shape_error("finite_difference_check", params[p], analytic_grads[p]);
    double nn2 = 0.0, na2 = 0.0, diff2 = 0.0;
    for (std::size_t i = 0; i < params[p].size(); ++i) {
      const double orig = work[p].v[i];
      work[p].v[i] = orig + step;
      const double up = f(work);
      work[p].v[i] = orig - step;
      const double down = f(work);
      work[p].v[i] = orig;
      const double numeric = (up - down) / (2.0 * step);
      const double analytic = analytic_grads[p].v[i];
      na2 += analytic * analytic;
      nn2 += numeric * numeric;
      diff2 += (analytic - numeric) * (analytic - numeric);
    }
    const double noise_norm = coord_noise * std::sqrt(static_cast<double>(params[p].size()));
    const double denom = std::max({std::sqrt(na2), std::sqrt(nn2), noise_norm / tolerance, 1e-8});
    worst = std::max(worst, std::sqrt(diff2) / denom);
  }
  return worst;
}

}  // namespace pathgnn
