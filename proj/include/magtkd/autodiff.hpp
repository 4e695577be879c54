#pragma once
// Reverse-mode automatic differentiation over Matrix. Forward values are
// computed eagerly as each node is appended; backward() replays the tape in
// reverse. Nodes are appended in topological order by construction, so the
// reverse sweep needs no explicit sort. Gradients are allocated lazily and a
// node with no incoming gradient is skipped.

#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "magtkd/errors.hpp"
#include "magtkd/matrix.hpp"

namespace magtkd {

class Tape;

struct Var {
  int idx = -1;
  bool valid() const { return idx >= 0; }
};

class Tape {
public:
  // Leaf whose gradient is tracked (model parameters, checked inputs).
  Var leaf(Matrix value) { return push(std::move(value), nullptr, true); }

  // Leaf that never accumulates gradient (data batches, masks, tables of
  // constants). Saves the allocation and the wasted scatter work.
  Var constant(Matrix value) { return push(std::move(value), nullptr, false); }

  const Matrix& val(Var v) const { return nodes_[check(v)].value; }

  // Gradient of a node after backward(); empty matrix if none flowed into it.
  const Matrix& grad(Var v) const {
    const Node& n = nodes_[check(v)];
    if (n.grad.empty()) {
      static const Matrix kEmpty;
      return kEmpty;
    }
    return n.grad;
  }

  Matrix grad_or_zero(Var v) const {
    const Node& n = nodes_[check(v)];
    if (n.grad.empty()) return Matrix(n.value.rows(), n.value.cols());
    return n.grad;
  }

  void accumulate(Var v, const Matrix& g) {
    Node& n = nodes_[check(v)];
    if (!n.track) return;
    if (n.grad.empty())
      n.grad = g;
    else
      n.grad += g;
  }

  // Seeds d(root)/d(root) = 1 and sweeps the tape. root must be 1x1.
  void backward(Var root) {
    Node& r = nodes_[check(root)];
    if (r.value.rows() != 1 || r.value.cols() != 1)
      throw InputError("backward: root must be a 1x1 scalar node");
    r.track = true;
    accumulate(root, Matrix(1, 1, 1.0));
    for (int i = root.idx; i >= 0; --i) {
      Node& n = nodes_[static_cast<std::size_t>(i)];
      if (n.back && !n.grad.empty()) n.back(*this);
    }
  }

  std::size_t size() const { return nodes_.size(); }

  Var push(Matrix value, std::function<void(Tape&)> back, bool track = true) {
    nodes_.push_back(Node{std::move(value), Matrix(), std::move(back), track});
    return Var{static_cast<int>(nodes_.size()) - 1};
  }

private:
  struct Node {
    Matrix value;
    Matrix grad;
    std::function<void(Tape&)> back;
    bool track;
  };

  std::size_t check(Var v) const {
    if (!v.valid() || static_cast<std::size_t>(v.idx) >= nodes_.size())
      throw InputError("invalid Var handle");
    return static_cast<std::size_t>(v.idx);
  }

  std::vector<Node> nodes_;
};

// ---------------------------------------------------------------------------
// Primitive operations. Each computes its value eagerly and records a pull-
// style backward closure.

inline Var add(Tape& t, Var a, Var b) {
  Matrix v = t.val(a) + t.val(b);
  return t.push(std::move(v), [a, b, self = static_cast<int>(t.size())](Tape& tp) {
    const Matrix& g = tp.grad(Var{self});
    tp.accumulate(a, g);
    tp.accumulate(b, g);
  });
}

inline Var sub(Tape& t, Var a, Var b) {
  Matrix v = t.val(a) - t.val(b);
  return t.push(std::move(v), [a, b, self = static_cast<int>(t.size())](Tape& tp) {
    const Matrix& g = tp.grad(Var{self});
    tp.accumulate(a, g);
    Matrix neg = g;
    neg *= -1.0;
    tp.accumulate(b, neg);
  });
}

inline Var hadamard(Tape& t, Var a, Var b) {
  Matrix v = hadamard(t.val(a), t.val(b));
  return t.push(std::move(v), [a, b, self = static_cast<int>(t.size())](Tape& tp) {
    const Matrix& g = tp.grad(Var{self});
    tp.accumulate(a, hadamard(g, tp.val(b)));
    tp.accumulate(b, hadamard(g, tp.val(a)));
  });
}

inline Var div_elem(Tape& t, Var a, Var b) {
  const Matrix& av = t.val(a);
  const Matrix& bv = t.val(b);
  if (!av.same_shape(bv)) throw InputError("div_elem: shape mismatch");
  Matrix v(av.rows(), av.cols());
  for (int i = 0; i < av.rows(); ++i)
    for (int j = 0; j < av.cols(); ++j) v(i, j) = av(i, j) / bv(i, j);
  return t.push(std::move(v), [a, b, self = static_cast<int>(t.size())](Tape& tp) {
    const Matrix& g = tp.grad(Var{self});
    const Matrix& bv = tp.val(b);
    const Matrix& out = tp.val(Var{self});
    Matrix da(g.rows(), g.cols());
    Matrix db(g.rows(), g.cols());
    for (int i = 0; i < g.rows(); ++i)
      for (int j = 0; j < g.cols(); ++j) {
        da(i, j) = g(i, j) / bv(i, j);
        db(i, j) = -g(i, j) * out(i, j) / bv(i, j);
      }
    tp.accumulate(a, da);
    tp.accumulate(b, db);
  });
}

inline Var scale(Tape& t, Var a, double s) {
  Matrix v = t.val(a);
  v *= s;
  return t.push(std::move(v), [a, s, self = static_cast<int>(t.size())](Tape& tp) {
    Matrix g = tp.grad(Var{self});
    g *= s;
    tp.accumulate(a, g);
  });
}

// value = a + k * s(0,0) broadcast over every entry; s must be 1x1.
inline Var add_scalar_mul(Tape& t, Var a, Var s, double k) {
  const Matrix& sv = t.val(s);
  if (sv.rows() != 1 || sv.cols() != 1) throw InputError("add_scalar_mul: s must be 1x1");
  Matrix v = t.val(a);
  const double shift = k * sv(0, 0);
  for (int i = 0; i < v.rows(); ++i)
    for (int j = 0; j < v.cols(); ++j) v(i, j) += shift;
  return t.push(std::move(v), [a, s, k, self = static_cast<int>(t.size())](Tape& tp) {
    const Matrix& g = tp.grad(Var{self});
    tp.accumulate(a, g);
    tp.accumulate(s, Matrix(1, 1, k * sum_all(g)));
  });
}

inline Var matmul(Tape& t, Var a, Var b, bool trans_a = false, bool trans_b = false) {
  Matrix v = matmul(t.val(a), t.val(b), trans_a, trans_b);
  return t.push(std::move(v),
                [a, b, trans_a, trans_b, self = static_cast<int>(t.size())](Tape& tp) {
                  const Matrix& g = tp.grad(Var{self});
                  const Matrix& av = tp.val(a);
                  const Matrix& bv = tp.val(b);
                  if (!trans_a && !trans_b) {
                    tp.accumulate(a, matmul(g, bv, false, true));
                    tp.accumulate(b, matmul(av, g, true, false));
                  } else if (!trans_a && trans_b) {
                    tp.accumulate(a, matmul(g, bv, false, false));
                    tp.accumulate(b, matmul(g, av, true, false));
                  } else if (trans_a && !trans_b) {
                    tp.accumulate(a, matmul(bv, g, false, true));
                    tp.accumulate(b, matmul(av, g, false, false));
                  } else {
                    tp.accumulate(a, matmul(bv, g, true, true));
                    tp.accumulate(b, matmul(g, av, true, true));
                  }
                });
}

inline Var transpose(Tape& t, Var a) {
  Matrix v = transpose(t.val(a));
  return t.push(std::move(v), [a, self = static_cast<int>(t.size())](Tape& tp) {
    tp.accumulate(a, transpose(tp.grad(Var{self})));
  });
}

inline Var gather_rows(Tape& t, Var a, std::vector<int> idx) {
  Matrix v = gather_rows(t.val(a), idx);
  return t.push(std::move(v),
                [a, idx = std::move(idx), self = static_cast<int>(t.size())](Tape& tp) {
                  const Matrix& g = tp.grad(Var{self});
                  const Matrix& av = tp.val(a);
                  Matrix da(av.rows(), av.cols());
                  for (std::size_t r = 0; r < idx.size(); ++r)
                    for (int j = 0; j < g.cols(); ++j)
                      da(idx[r], j) += g(static_cast<int>(r), j);
                  tp.accumulate(a, da);
                });
}

inline Var slice_cols(Tape& t, Var a, int first, int count) {
  Matrix v = slice_cols(t.val(a), first, count);
  return t.push(std::move(v), [a, first, count, self = static_cast<int>(t.size())](Tape& tp) {
    const Matrix& g = tp.grad(Var{self});
    const Matrix& av = tp.val(a);
    Matrix da(av.rows(), av.cols());
    for (int i = 0; i < g.rows(); ++i)
      for (int j = 0; j < count; ++j) da(i, first + j) = g(i, j);
    tp.accumulate(a, da);
  });
}

inline Var concat_cols(Tape& t, const std::vector<Var>& parts) {
  std::vector<Matrix> vals;
  vals.reserve(parts.size());
  for (Var p : parts) vals.push_back(t.val(p));
  Matrix v = concat_cols(vals);
  return t.push(std::move(v), [parts, self = static_cast<int>(t.size())](Tape& tp) {
    const Matrix& g = tp.grad(Var{self});
    int off = 0;
    for (Var p : parts) {
      const int c = tp.val(p).cols();
      tp.accumulate(p, slice_cols(g, off, c));
      off += c;
    }
  });
}

inline Var concat_rows(Tape& t, const std::vector<Var>& parts) {
  std::vector<Matrix> vals;
  vals.reserve(parts.size());
  for (Var p : parts) vals.push_back(t.val(p));
  Matrix v = concat_rows(vals);
  return t.push(std::move(v), [parts, self = static_cast<int>(t.size())](Tape& tp) {
    const Matrix& g = tp.grad(Var{self});
    int off = 0;
    for (Var p : parts) {
      const int r = tp.val(p).rows();
      Matrix part(r, g.cols());
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < g.cols(); ++j) part(i, j) = g(off + i, j);
      tp.accumulate(p, part);
      off += r;
    }
  });
}

// a (r x c) + v (1 x c) broadcast over rows.
inline Var add_rowvec(Tape& t, Var a, Var v) {
  const Matrix& av = t.val(a);
  const Matrix& vv = t.val(v);
  if (vv.rows() != 1 || vv.cols() != av.cols())
    throw InputError("add_rowvec: vector must be 1 x cols");
  Matrix out = av;
  for (int i = 0; i < out.rows(); ++i)
    for (int j = 0; j < out.cols(); ++j) out(i, j) += vv(0, j);
  return t.push(std::move(out), [a, v, self = static_cast<int>(t.size())](Tape& tp) {
    const Matrix& g = tp.grad(Var{self});
    tp.accumulate(a, g);
    tp.accumulate(v, col_sums(g));
  });
}

inline Var row_softmax(Tape& t, Var a, double tau = 1.0) {
  Matrix v = row_softmax(t.val(a), tau);
  return t.push(std::move(v), [a, tau, self = static_cast<int>(t.size())](Tape& tp) {
    const Matrix& g = tp.grad(Var{self});
    const Matrix& s = tp.val(Var{self});
    Matrix da(g.rows(), g.cols());
    for (int i = 0; i < g.rows(); ++i) {
      double dot = 0.0;
      for (int j = 0; j < g.cols(); ++j) dot += g(i, j) * s(i, j);
      for (int j = 0; j < g.cols(); ++j) da(i, j) = s(i, j) * (g(i, j) - dot) / tau;
    }
    tp.accumulate(a, da);
  });
}

inline Var sigmoid(Tape& t, Var a) {
  const Matrix& av = t.val(a);
  Matrix v(av.rows(), av.cols());
  for (int i = 0; i < av.rows(); ++i)
    for (int j = 0; j < av.cols(); ++j) v(i, j) = 1.0 / (1.0 + std::exp(-av(i, j)));
  return t.push(std::move(v), [a, self = static_cast<int>(t.size())](Tape& tp) {
    const Matrix& g = tp.grad(Var{self});
    const Matrix& y = tp.val(Var{self});
    Matrix da(g.rows(), g.cols());
    for (int i = 0; i < g.rows(); ++i)
      for (int j = 0; j < g.cols(); ++j) da(i, j) = g(i, j) * y(i, j) * (1.0 - y(i, j));
    tp.accumulate(a, da);
  });
}

inline Var tanh_op(Tape& t, Var a) {
  const Matrix& av = t.val(a);
  Matrix v(av.rows(), av.cols());
  for (int i = 0; i < av.rows(); ++i)
    for (int j = 0; j < av.cols(); ++j) v(i, j) = std::tanh(av(i, j));
  return t.push(std::move(v), [a, self = static_cast<int>(t.size())](Tape& tp) {
    const Matrix& g = tp.grad(Var{self});
    const Matrix& y = tp.val(Var{self});
    Matrix da(g.rows(), g.cols());
    for (int i = 0; i < g.rows(); ++i)
      for (int j = 0; j < g.cols(); ++j) da(i, j) = g(i, j) * (1.0 - y(i, j) * y(i, j));
    tp.accumulate(a, da);
  });
}

inline Var relu(Tape& t, Var a) {
  const Matrix& av = t.val(a);
  Matrix v(av.rows(), av.cols());
  for (int i = 0; i < av.rows(); ++i)
    for (int j = 0; j < av.cols(); ++j) v(i, j) = av(i, j) > 0.0 ? av(i, j) : 0.0;
  return t.push(std::move(v), [a, self = static_cast<int>(t.size())](Tape& tp) {
    const Matrix& g = tp.grad(Var{self});
    const Matrix& av = tp.val(a);
    Matrix da(g.rows(), g.cols());
    for (int i = 0; i < g.rows(); ++i)
      for (int j = 0; j < g.cols(); ++j) da(i, j) = av(i, j) > 0.0 ? g(i, j) : 0.0;
    tp.accumulate(a, da);
  });
}

// log(max(x, eps)); gradient is zero where the guard is active.
inline Var guarded_log(Tape& t, Var a, double eps = 1e-12) {
  const Matrix& av = t.val(a);
  Matrix v(av.rows(), av.cols());
  for (int i = 0; i < av.rows(); ++i)
    for (int j = 0; j < av.cols(); ++j) v(i, j) = std::log(std::max(av(i, j), eps));
  return t.push(std::move(v), [a, eps, self = static_cast<int>(t.size())](Tape& tp) {
    const Matrix& g = tp.grad(Var{self});
    const Matrix& av = tp.val(a);
    Matrix da(g.rows(), g.cols());
    for (int i = 0; i < g.rows(); ++i)
      for (int j = 0; j < g.cols(); ++j)
        da(i, j) = av(i, j) > eps ? g(i, j) / av(i, j) : 0.0;
    tp.accumulate(a, da);
  });
}

inline Var sqrt_op(Tape& t, Var a) {
  const Matrix& av = t.val(a);
  Matrix v(av.rows(), av.cols());
  for (int i = 0; i < av.rows(); ++i)
    for (int j = 0; j < av.cols(); ++j) v(i, j) = std::sqrt(av(i, j));
  return t.push(std::move(v), [a, self = static_cast<int>(t.size())](Tape& tp) {
    const Matrix& g = tp.grad(Var{self});
    const Matrix& y = tp.val(Var{self});
    Matrix da(g.rows(), g.cols());
    for (int i = 0; i < g.rows(); ++i)
      for (int j = 0; j < g.cols(); ++j) da(i, j) = g(i, j) / (2.0 * y(i, j));
    tp.accumulate(a, da);
  });
}

// Clamp to [lo, hi]; gradient passes through strictly inside the interval.
inline Var clamp(Tape& t, Var a, double lo, double hi) {
  const Matrix& av = t.val(a);
  Matrix v(av.rows(), av.cols());
  for (int i = 0; i < av.rows(); ++i)
    for (int j = 0; j < av.cols(); ++j) v(i, j) = std::min(std::max(av(i, j), lo), hi);
  return t.push(std::move(v), [a, lo, hi, self = static_cast<int>(t.size())](Tape& tp) {
    const Matrix& g = tp.grad(Var{self});
    const Matrix& av = tp.val(a);
    Matrix da(g.rows(), g.cols());
    for (int i = 0; i < g.rows(); ++i)
      for (int j = 0; j < g.cols(); ++j)
        da(i, j) = (av(i, j) > lo && av(i, j) < hi) ? g(i, j) : 0.0;
    tp.accumulate(a, da);
  });
}

inline Var sum_all(Tape& t, Var a) {
  Matrix v(1, 1, sum_all(t.val(a)));
  return t.push(std::move(v), [a, self = static_cast<int>(t.size())](Tape& tp) {
    const double g = tp.grad(Var{self})(0, 0);
    const Matrix& av = tp.val(a);
    tp.accumulate(a, Matrix(av.rows(), av.cols(), g));
  });
}

inline Var mean_all(Tape& t, Var a) {
  const Matrix& av = t.val(a);
  const double n = static_cast<double>(av.size());
  Matrix v(1, 1, sum_all(av) / n);
  return t.push(std::move(v), [a, n, self = static_cast<int>(t.size())](Tape& tp) {
    const double g = tp.grad(Var{self})(0, 0) / n;
    const Matrix& av = tp.val(a);
    tp.accumulate(a, Matrix(av.rows(), av.cols(), g));
  });
}

// Row-wise layer normalization with learned gain/bias (1 x d each).
inline Var layer_norm_rows(Tape& t, Var a, Var gain, Var bias, double eps = 1e-5) {
  const Matrix& x = t.val(a);
  const Matrix& gv = t.val(gain);
  const Matrix& bv = t.val(bias);
  const int d = x.cols();
  if (gv.rows() != 1 || gv.cols() != d || bv.rows() != 1 || bv.cols() != d)
    throw InputError("layer_norm_rows: gain/bias must be 1 x d");
  Matrix xhat(x.rows(), d);
  Matrix inv_std(x.rows(), 1);
  Matrix out(x.rows(), d);
  for (int i = 0; i < x.rows(); ++i) {
    double mu = 0.0;
    for (int j = 0; j < d; ++j) mu += x(i, j);
    mu /= d;
    double var = 0.0;
    for (int j = 0; j < d; ++j) {
      const double c = x(i, j) - mu;
      var += c * c;
    }
    var /= d;
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std(i, 0) = is;
    for (int j = 0; j < d; ++j) {
      xhat(i, j) = (x(i, j) - mu) * is;
      out(i, j) = gv(0, j) * xhat(i, j) + bv(0, j);
    }
  }
  return t.push(std::move(out),
                [a, gain, bias, xhat = std::move(xhat), inv_std = std::move(inv_std),
                 self = static_cast<int>(t.size())](Tape& tp) {
                  const Matrix& g = tp.grad(Var{self});
                  const Matrix& gv = tp.val(gain);
                  const int d = g.cols();
                  Matrix dgain(1, d);
                  Matrix dbias(1, d);
                  Matrix da(g.rows(), d);
                  for (int i = 0; i < g.rows(); ++i) {
                    double m1 = 0.0;  // mean of gain .* g
                    double m2 = 0.0;  // mean of gain .* g .* xhat
                    for (int j = 0; j < d; ++j) {
                      const double gh = gv(0, j) * g(i, j);
                      m1 += gh;
                      m2 += gh * xhat(i, j);
                      dgain(0, j) += g(i, j) * xhat(i, j);
                      dbias(0, j) += g(i, j);
                    }
                    m1 /= d;
                    m2 /= d;
                    for (int j = 0; j < d; ++j) {
                      const double gh = gv(0, j) * g(i, j);
                      da(i, j) = (gh - m1 - xhat(i, j) * m2) * inv_std(i, 0);
                    }
                  }
                  tp.accumulate(a, da);
                  tp.accumulate(gain, dgain);
                  tp.accumulate(bias, dbias);
                });
}

// Mean softmax cross-entropy over rows against integer class labels.
inline Var cross_entropy_mean(Tape& t, Var logits, std::vector<int> labels) {
  const Matrix& z = t.val(logits);
  const int b = z.rows();
  const int c = z.cols();
  if (static_cast<int>(labels.size()) != b)
    throw InputError("cross_entropy_mean: label count must match rows");
  for (int y : labels)
    if (y < 0 || y >= c) throw InputError("cross_entropy_mean: label out of range");
  if (!z.all_finite()) throw InputError("cross_entropy_mean: non-finite logits");
  Matrix probs = row_softmax(z, 1.0);
  double loss = 0.0;
  for (int i = 0; i < b; ++i) loss -= std::log(std::max(probs(i, labels[i]), 1e-300));
  loss /= b;
  return t.push(Matrix(1, 1, loss),
                [logits, labels = std::move(labels), probs = std::move(probs),
                 self = static_cast<int>(t.size())](Tape& tp) {
                  const double g = tp.grad(Var{self})(0, 0);
                  const int b = probs.rows();
                  Matrix dz = probs;
                  for (int i = 0; i < b; ++i) dz(i, labels[i]) -= 1.0;
                  dz *= g / b;
                  tp.accumulate(logits, dz);
                });
}

// ---------------------------------------------------------------------------
// Trainable parameter plumbing.

struct Parameter {
  std::string name;
  Matrix value;
};

struct ParamBind {
  Parameter* param = nullptr;
  Var var;
};

// Puts a parameter's current value on the tape and remembers the binding so
// the optimizer can read the gradient back after backward().
inline Var bind(Tape& t, Parameter& p, std::vector<ParamBind>& binds) {
  Var v = t.leaf(p.value);
  binds.push_back(ParamBind{&p, v});
  return v;
}

}  // namespace magtkd
