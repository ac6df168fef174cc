#pragma once

// Minimal reverse-mode differentiation over dense Eigen matrices.
//
// A Tape records every intermediate value of one forward pass in creation
// order; backward() walks it in reverse. Parameters live outside the tape and
// receive accumulated gradients when a pass that used them is differentiated.
// All values are row-major in the sense of "one row per node / instance".

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <string>
#include <utility>
#include <vector>

#include "cmggib/errors.hpp"

namespace cmggib::ag {

using Mat = Eigen::MatrixXd;
using RowVec = Eigen::RowVectorXd;

struct Parameter {
  std::string name;
  Mat value;
  Mat grad;

  Parameter() = default;
  Parameter(std::string n, Mat v) : name(std::move(n)), value(std::move(v)), grad(Mat::Zero(value.rows(), value.cols())) {}

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
  Eigen::Index size() const { return value.size(); }
};

class Tape;

class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  const Mat& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const { return value()(0, 0); }
  bool valid() const { return tape_ != nullptr; }

  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  // Receives the upstream gradient of the node being processed.
  using Backward = std::function<void(Tape&, const Mat&)>;

  Tape() { nodes_.reserve(256); }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Mat v) {
    nodes_.push_back(Node{std::move(v), Mat(), nullptr, nullptr, false});
    return Var(this, nodes_.size() - 1);
  }

  Var param(Parameter& p) {
    nodes_.push_back(Node{p.value, Mat(), nullptr, &p, true});
    return Var(this, nodes_.size() - 1);
  }

  Var record(Mat v, std::initializer_list<Var> parents, Backward back) {
    bool needs = false;
    for (const auto& p : parents) needs = needs || nodes_[p.id()].needs_grad;
    nodes_.push_back(Node{std::move(v), Mat(), needs ? std::move(back) : nullptr, nullptr, needs});
    return Var(this, nodes_.size() - 1);
  }

  Var record(Mat v, const std::vector<Var>& parents, Backward back) {
    bool needs = false;
    for (const auto& p : parents) needs = needs || nodes_[p.id()].needs_grad;
    nodes_.push_back(Node{std::move(v), Mat(), needs ? std::move(back) : nullptr, nullptr, needs});
    return Var(this, nodes_.size() - 1);
  }

  const Mat& value(std::size_t id) const { return nodes_[id].value; }
  bool needs_grad(const Var& v) const { return nodes_[v.id()].needs_grad; }

  template <typename Derived>
  void accumulate(const Var& v, const Eigen::MatrixBase<Derived>& g) {
    Node& n = nodes_[v.id()];
    if (!n.needs_grad) return;
    if (n.grad.size() == 0) {
      n.grad = g;
    } else {
      n.grad += g;
    }
  }

  // Seeds d(root)/d(root) = 1 and propagates; parameter leaves add into Parameter::grad.
  void backward(const Var& root) {
    if (root.rows() != 1 || root.cols() != 1) throw ContractViolation("backward() needs a scalar root");
    if (!nodes_[root.id()].needs_grad) return;
    nodes_[root.id()].grad = Mat::Ones(1, 1);
    for (std::size_t i = root.id() + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.needs_grad || n.grad.size() == 0) continue;
      if (n.param != nullptr) {
        n.param->grad += n.grad;
      } else if (n.back) {
        Mat g = std::move(n.grad);
        n.back(*this, g);
        n.grad = Mat();
      }
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Mat value;
    Mat grad;
    Backward back;
    Parameter* param;
    bool needs_grad;
  };
  std::vector<Node> nodes_;
};

inline const Mat& Var::value() const { return tape_->value(id_); }

// ---------------------------------------------------------------------------
// Linear algebra

inline Var matmul(const Var& a, const Var& b) {
  Tape& t = *a.tape();
  return t.record(a.value() * b.value(), {a, b}, [a, b](Tape& tp, const Mat& g) {
    tp.accumulate(a, g * b.value().transpose());
    tp.accumulate(b, a.value().transpose() * g);
  });
}

// x Wᵀ (+ b): x is n×in, W is out×in, b is 1×out.
inline Var affine(const Var& x, const Var& w) {
  Tape& t = *x.tape();
  return t.record(x.value() * w.value().transpose(), {x, w}, [x, w](Tape& tp, const Mat& g) {
    tp.accumulate(x, g * w.value());
    tp.accumulate(w, g.transpose() * x.value());
  });
}

inline Var affine(const Var& x, const Var& w, const Var& b) {
  Tape& t = *x.tape();
  Mat y = x.value() * w.value().transpose();
  y.rowwise() += b.value().row(0);
  return t.record(std::move(y), {x, w, b}, [x, w, b](Tape& tp, const Mat& g) {
    tp.accumulate(x, g * w.value());
    tp.accumulate(w, g.transpose() * x.value());
    tp.accumulate(b, g.colwise().sum());
  });
}

inline Var transpose(const Var& a) {
  Tape& t = *a.tape();
  return t.record(a.value().transpose(), {a}, [a](Tape& tp, const Mat& g) { tp.accumulate(a, g.transpose()); });
}

inline Var add(const Var& a, const Var& b) {
  Tape& t = *a.tape();
  return t.record(a.value() + b.value(), {a, b}, [a, b](Tape& tp, const Mat& g) {
    tp.accumulate(a, g);
    tp.accumulate(b, g);
  });
}

inline Var sub(const Var& a, const Var& b) {
  Tape& t = *a.tape();
  return t.record(a.value() - b.value(), {a, b}, [a, b](Tape& tp, const Mat& g) {
    tp.accumulate(a, g);
    tp.accumulate(b, -g);
  });
}

inline Var hadamard(const Var& a, const Var& b) {
  Tape& t = *a.tape();
  return t.record(a.value().cwiseProduct(b.value()), {a, b}, [a, b](Tape& tp, const Mat& g) {
    tp.accumulate(a, g.cwiseProduct(b.value()));
    tp.accumulate(b, g.cwiseProduct(a.value()));
  });
}

inline Var scale(const Var& a, double c) {
  Tape& t = *a.tape();
  return t.record(a.value() * c, {a}, [a, c](Tape& tp, const Mat& g) { tp.accumulate(a, g * c); });
}

// a * s where s is 1×1.
inline Var mul_scalar(const Var& a, const Var& s) {
  Tape& t = *a.tape();
  return t.record(a.value() * s.scalar(), {a, s}, [a, s](Tape& tp, const Mat& g) {
    tp.accumulate(a, g * s.scalar());
    tp.accumulate(s, Mat::Constant(1, 1, g.cwiseProduct(a.value()).sum()));
  });
}

// n×d plus a 1×d row broadcast over rows.
inline Var add_row(const Var& a, const Var& row) {
  Tape& t = *a.tape();
  Mat y = a.value();
  y.rowwise() += row.value().row(0);
  return t.record(std::move(y), {a, row}, [a, row](Tape& tp, const Mat& g) {
    tp.accumulate(a, g);
    tp.accumulate(row, g.colwise().sum());
  });
}

// Out(i,j) = col(i) + row(j).
inline Var outer_sum(const Var& col, const Var& row) {
  Tape& t = *col.tape();
  const Eigen::Index n = col.rows();
  const Eigen::Index m = row.cols();
  Mat y = col.value().replicate(1, m) + row.value().replicate(n, 1);
  return t.record(std::move(y), {col, row}, [col, row](Tape& tp, const Mat& g) {
    tp.accumulate(col, g.rowwise().sum());
    tp.accumulate(row, g.colwise().sum());
  });
}

// ---------------------------------------------------------------------------
// Elementwise nonlinearities

inline Var tanh(const Var& a) {
  Tape& t = *a.tape();
  Mat y = a.value().array().tanh().matrix();
  return t.record(y, {a}, [a, y](Tape& tp, const Mat& g) {
    tp.accumulate(a, g.cwiseProduct((1.0 - y.array().square()).matrix()));
  });
}

inline Var relu(const Var& a) {
  Tape& t = *a.tape();
  return t.record(a.value().cwiseMax(0.0), {a}, [a](Tape& tp, const Mat& g) {
    tp.accumulate(a, (a.value().array() > 0.0).select(g, 0.0).matrix());
  });
}

inline Var leaky_relu(const Var& a, double slope) {
  Tape& t = *a.tape();
  Mat y = (a.value().array() > 0.0).select(a.value(), a.value() * slope);
  return t.record(std::move(y), {a}, [a, slope](Tape& tp, const Mat& g) {
    tp.accumulate(a, (a.value().array() > 0.0).select(g, g * slope).matrix());
  });
}

inline double sigmoid_scalar(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double softplus_scalar(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

inline Var sigmoid(const Var& a) {
  Tape& t = *a.tape();
  Mat y = a.value().unaryExpr([](double x) { return sigmoid_scalar(x); });
  return t.record(y, {a}, [a, y](Tape& tp, const Mat& g) {
    tp.accumulate(a, g.cwiseProduct(y.cwiseProduct((1.0 - y.array()).matrix())));
  });
}

inline Var softplus(const Var& a) {
  Tape& t = *a.tape();
  Mat y = a.value().unaryExpr([](double x) { return softplus_scalar(x); });
  return t.record(std::move(y), {a}, [a](Tape& tp, const Mat& g) {
    tp.accumulate(a, g.cwiseProduct(a.value().unaryExpr([](double x) { return sigmoid_scalar(x); })));
  });
}

inline Var exp(const Var& a) {
  Tape& t = *a.tape();
  Mat y = a.value().array().exp().matrix();
  return t.record(y, {a}, [a, y](Tape& tp, const Mat& g) { tp.accumulate(a, g.cwiseProduct(y)); });
}

// Mean over entries of KL(Bernoulli(p) ‖ Bernoulli(r)), p clamped to [floor, 1 − floor].
inline Var bernoulli_kl(const Var& p, double r, double floor = 1e-6) {
  Tape& t = *p.tape();
  const auto n = static_cast<double>(p.value().size());
  if (n == 0) return t.constant(Mat::Zero(1, 1));
  Mat pc = p.value().array().max(floor).min(1.0 - floor).matrix();
  const double v = (pc.array() * (pc.array() / r).log() + (1.0 - pc.array()) * ((1.0 - pc.array()) / (1.0 - r)).log()).sum() / n;
  Mat slope = (((pc.array() / r).log() - ((1.0 - pc.array()) / (1.0 - r)).log()) / n).matrix();
  const Mat& raw = p.value();
  for (Eigen::Index i = 0; i < raw.size(); ++i)
    if (raw(i) < floor || raw(i) > 1.0 - floor) slope(i) = 0.0;
  return t.record(Mat::Constant(1, 1, v), {p}, [p, slope](Tape& tp, const Mat& g) { tp.accumulate(p, slope * g(0, 0)); });
}

inline Var reciprocal(const Var& a) {
  Tape& t = *a.tape();
  Mat y = a.value().cwiseInverse();
  return t.record(y, {a}, [a, y](Tape& tp, const Mat& g) {
    tp.accumulate(a, -g.cwiseProduct(y.cwiseProduct(y)));
  });
}

// ---------------------------------------------------------------------------
// Shape manipulation and reductions

inline Var hcat(const std::vector<Var>& parts) {
  Tape& t = *parts.front().tape();
  const Eigen::Index rows = parts.front().rows();
  Eigen::Index cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows) throw ContractViolation("hcat: row count mismatch");
    cols += p.cols();
  }
  Mat y(rows, cols);
  Eigen::Index off = 0;
  for (const auto& p : parts) {
    y.middleCols(off, p.cols()) = p.value();
    off += p.cols();
  }
  return t.record(std::move(y), parts, [parts](Tape& tp, const Mat& g) {
    Eigen::Index o = 0;
    for (const auto& p : parts) {
      tp.accumulate(p, g.middleCols(o, p.cols()));
      o += p.cols();
    }
  });
}

inline Var vcat(const std::vector<Var>& parts) {
  Tape& t = *parts.front().tape();
  const Eigen::Index cols = parts.front().cols();
  Eigen::Index rows = 0;
  for (const auto& p : parts) {
    if (p.cols() != cols) throw ContractViolation("vcat: column count mismatch");
    rows += p.rows();
  }
  Mat y(rows, cols);
  Eigen::Index off = 0;
  for (const auto& p : parts) {
    y.middleRows(off, p.rows()) = p.value();
    off += p.rows();
  }
  return t.record(std::move(y), parts, [parts](Tape& tp, const Mat& g) {
    Eigen::Index o = 0;
    for (const auto& p : parts) {
      tp.accumulate(p, g.middleRows(o, p.rows()));
      o += p.rows();
    }
  });
}

inline Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count) {
  Tape& t = *a.tape();
  return t.record(a.value().middleCols(start, count), {a}, [a, start, count](Tape& tp, const Mat& g) {
    Mat ga = Mat::Zero(a.rows(), a.cols());
    ga.middleCols(start, count) = g;
    tp.accumulate(a, ga);
  });
}

inline Var gather_rows(const Var& a, std::vector<int> idx) {
  Tape& t = *a.tape();
  Mat y(static_cast<Eigen::Index>(idx.size()), a.cols());
  for (std::size_t r = 0; r < idx.size(); ++r) y.row(static_cast<Eigen::Index>(r)) = a.value().row(idx[r]);
  return t.record(std::move(y), {a}, [a, idx = std::move(idx)](Tape& tp, const Mat& g) {
    Mat ga = Mat::Zero(a.rows(), a.cols());
    for (std::size_t r = 0; r < idx.size(); ++r) ga.row(idx[r]) += g.row(static_cast<Eigen::Index>(r));
    tp.accumulate(a, ga);
  });
}

// 1×d row repeated n times.
inline Var repeat_rows(const Var& row, Eigen::Index n) {
  Tape& t = *row.tape();
  return t.record(row.value().replicate(n, 1), {row}, [row](Tape& tp, const Mat& g) {
    tp.accumulate(row, g.colwise().sum());
  });
}

inline Var sum(const Var& a) {
  Tape& t = *a.tape();
  return t.record(Mat::Constant(1, 1, a.value().sum()), {a}, [a](Tape& tp, const Mat& g) {
    tp.accumulate(a, Mat::Constant(a.rows(), a.cols(), g(0, 0)));
  });
}

inline Var mean_rows(const Var& a) {
  Tape& t = *a.tape();
  const double n = static_cast<double>(a.rows());
  return t.record(a.value().colwise().mean(), {a}, [a, n](Tape& tp, const Mat& g) {
    tp.accumulate(a, g.replicate(a.rows(), 1) / n);
  });
}

// ---------------------------------------------------------------------------
// Softmax family

namespace detail {

// Row-wise α(i,j) = w(i,j)·exp(L(i,j)) / Σ_k w(i,k)·exp(L(i,k)). Entries with
// w == 0 never contribute. Returns α and the shifted exponentials scaled by 1/Z,
// which the weight gradient needs.
inline std::pair<Mat, Mat> weighted_softmax(const Mat& logits, const Mat& w) {
  const Eigen::Index n = logits.rows();
  const Eigen::Index m = logits.cols();
  Mat alpha = Mat::Zero(n, m);
  Mat e_over_z = Mat::Zero(n, m);
  for (Eigen::Index i = 0; i < n; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < m; ++j)
      if (w(i, j) > 0.0) mx = std::max(mx, logits(i, j));
    if (!std::isfinite(mx)) continue;
    double z = 0.0;
    for (Eigen::Index j = 0; j < m; ++j) {
      if (w(i, j) > 0.0) {
        const double e = std::exp(logits(i, j) - mx);
        e_over_z(i, j) = e;
        z += w(i, j) * e;
      }
    }
    if (z <= 0.0) continue;
    e_over_z.row(i) /= z;
    alpha.row(i) = w.row(i).cwiseProduct(e_over_z.row(i));
  }
  return {alpha, e_over_z};
}

}  // namespace detail

// Row softmax restricted to the support of a constant nonnegative weight mask.
inline Var weighted_softmax_rows(const Var& logits, const Mat& weights) {
  Tape& t = *logits.tape();
  auto [alpha, ez] = detail::weighted_softmax(logits.value(), weights);
  Mat a = alpha;
  return t.record(std::move(alpha), {logits}, [logits, a](Tape& tp, const Mat& g) {
    const Eigen::VectorXd dot = g.cwiseProduct(a).rowwise().sum();
    Mat centered = g.colwise() - dot;
    tp.accumulate(logits, a.cwiseProduct(centered));
  });
}

// Same, with differentiable weights.
inline Var weighted_softmax_rows(const Var& logits, const Var& weights) {
  Tape& t = *logits.tape();
  auto [alpha, ez] = detail::weighted_softmax(logits.value(), weights.value());
  Mat a = alpha;
  return t.record(std::move(alpha), {logits, weights}, [logits, weights, a, ez](Tape& tp, const Mat& g) {
    const Eigen::VectorXd dot = g.cwiseProduct(a).rowwise().sum();
    Mat centered = g.colwise() - dot;
    tp.accumulate(logits, a.cwiseProduct(centered));
    tp.accumulate(weights, ez.cwiseProduct(centered));
  });
}

inline Var softmax_rows(const Var& logits) {
  return weighted_softmax_rows(logits, Mat::Ones(logits.rows(), logits.cols()));
}

inline double logsumexp(const Eigen::Ref<const RowVec>& x) {
  const double mx = x.maxCoeff();
  return mx + std::log((x.array() - mx).exp().sum());
}

inline RowVec softmax_row_values(const Eigen::Ref<const RowVec>& x) {
  const double mx = x.maxCoeff();
  RowVec e = (x.array() - mx).exp().matrix();
  return e / e.sum();
}

// −log softmax(logits)[label] for a 1×C row.
inline Var cross_entropy(const Var& logits, int label) {
  if (logits.rows() != 1) throw ContractViolation("cross_entropy expects a single row of logits");
  if (label < 0 || label >= logits.cols()) throw ContractViolation("cross_entropy: label index out of range");
  Tape& t = *logits.tape();
  const RowVec row = logits.value().row(0);
  const double loss = logsumexp(row) - row(label);
  return t.record(Mat::Constant(1, 1, loss), {logits}, [logits, label](Tape& tp, const Mat& g) {
    Mat d = softmax_row_values(logits.value().row(0));
    d(0, label) -= 1.0;
    tp.accumulate(logits, d * g(0, 0));
  });
}

// −Σ_w counts_w · log softmax(logits)_w: one multinomial over the whole count vector.
inline Var multinomial_nll(const Var& logits, const RowVec& counts) {
  if (logits.rows() != 1 || logits.cols() != counts.size()) throw ContractViolation("multinomial_nll: shape mismatch");
  Tape& t = *logits.tape();
  const RowVec row = logits.value().row(0);
  const double total = counts.sum();
  const double loss = total == 0.0 ? 0.0 : total * logsumexp(row) - counts.dot(row);
  return t.record(Mat::Constant(1, 1, loss), {logits}, [logits, counts, total](Tape& tp, const Mat& g) {
    if (total == 0.0) return;
    Mat d = softmax_row_values(logits.value().row(0)) * total - counts;
    tp.accumulate(logits, d * g(0, 0));
  });
}

// KL(N(μ, diag σ²) ‖ N(0, I)) for 1×d rows μ, σ.
inline Var kl_standard_normal(const Var& mu, const Var& sigma) {
  if ((sigma.value().array() <= 0.0).any()) throw NumericDomainError("kl_standard_normal: sigma must be positive");
  Tape& t = *mu.tape();
  const auto m = mu.value().array();
  const auto s = sigma.value().array();
  const double kl = 0.5 * (m.square() + s.square() - 1.0 - 2.0 * s.log()).sum();
  return t.record(Mat::Constant(1, 1, kl), {mu, sigma}, [mu, sigma](Tape& tp, const Mat& g) {
    tp.accumulate(mu, mu.value() * g(0, 0));
    tp.accumulate(sigma, (sigma.value() - sigma.value().cwiseInverse()) * g(0, 0));
  });
}

// ---------------------------------------------------------------------------
// Graph-specific fused ops

// Concrete (binary Gumbel) relaxation of Bernoulli(π) with fixed uniform noise ε.
// π and ε are clamped to [floor, 1 − floor]; the gradient is zero where π is clamped.
inline Var concrete_relax(const Var& pi, const Mat& eps, double tau, double floor) {
  if (!(tau > 0.0)) throw NumericDomainError("concrete relaxation needs tau > 0");
  Tape& t = *pi.tape();
  const Mat& p = pi.value();
  Mat rho(p.rows(), p.cols());
  Mat dpi(p.rows(), p.cols());
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const double pc = std::clamp(p(i), floor, 1.0 - floor);
    const double ec = std::clamp(eps(i), floor, 1.0 - floor);
    const double x = (std::log(pc / (1.0 - pc)) + std::log(ec / (1.0 - ec))) / tau;
    const double r = sigmoid_scalar(x);
    rho(i) = r;
    const bool clamped = p(i) < floor || p(i) > 1.0 - floor;
    dpi(i) = clamped ? 0.0 : r * (1.0 - r) / (tau * pc * (1.0 - pc));
  }
  return t.record(std::move(rho), {pi}, [pi, dpi](Tape& tp, const Mat& g) { tp.accumulate(pi, g.cwiseProduct(dpi)); });
}

// Dense n×n effective adjacency: w(i,i) = 1 and, for each listed undirected edge k = (i,j),
// w(i,j) = w(j,i) = ρᵉ_k · ρᵛ_i · ρᵛ_j.
inline Var gated_adjacency(const Var& edge_gate, const Var& node_gate, const std::vector<std::pair<int, int>>& edges) {
  Tape& t = *node_gate.tape();
  const Eigen::Index n = node_gate.rows();
  Mat w = Mat::Identity(n, n);
  const Mat& re = edge_gate.value();
  const Mat& rv = node_gate.value();
  for (std::size_t k = 0; k < edges.size(); ++k) {
    const auto [i, j] = edges[k];
    const double v = re(static_cast<Eigen::Index>(k), 0) * rv(i, 0) * rv(j, 0);
    w(i, j) = v;
    w(j, i) = v;
  }
  return t.record(std::move(w), {edge_gate, node_gate}, [edge_gate, node_gate, edges](Tape& tp, const Mat& g) {
    const Mat& re2 = edge_gate.value();
    const Mat& rv2 = node_gate.value();
    Mat ge = Mat::Zero(re2.rows(), 1);
    Mat gv = Mat::Zero(rv2.rows(), 1);
    for (std::size_t k = 0; k < edges.size(); ++k) {
      const auto [i, j] = edges[k];
      const auto kk = static_cast<Eigen::Index>(k);
      const double up = g(i, j) + g(j, i);
      ge(kk, 0) += up * rv2(i, 0) * rv2(j, 0);
      gv(i, 0) += up * re2(kk, 0) * rv2(j, 0);
      gv(j, 0) += up * re2(kk, 0) * rv2(i, 0);
    }
    tp.accumulate(edge_gate, ge);
    tp.accumulate(node_gate, gv);
  });
}

}  // namespace cmggib::ag
