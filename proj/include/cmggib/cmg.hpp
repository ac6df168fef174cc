#pragma once

// Cross-modal graph construction and graph-attention encoding.
//
// Node order in a CrossModalGraph is textual nodes first ([0, m)) followed by
// visual nodes ([m, m + n)). Edges are stored once as undirected pairs (i < j);
// message passing always adds a self-loop to every node.

#include <algorithm>
#include <cmath>
#include <set>
#include <type_traits>
#include <string>
#include <utility>
#include <vector>

#include "cmggib/autograd.hpp"
#include "cmggib/errors.hpp"
#include "cmggib/nn.hpp"
#include "cmggib/sg_core.hpp"

namespace cmggib {

using ag::Mat;
using ag::RowVec;

inline double cosine(const Eigen::Ref<const RowVec>& u, const Eigen::Ref<const RowVec>& v) {
  if (u.size() != v.size()) throw ContractViolation("cosine: dimension mismatch");
  const double nu = u.norm();
  const double nv = v.norm();
  if (nu == 0.0 || nv == 0.0) throw NumericDomainError("cosine similarity is undefined for a zero vector");
  return std::clamp(u.dot(v) / (nu * nv), -1.0, 1.0);
}

using EdgeList = std::vector<std::pair<int, int>>;

struct CmgNode {
  Modality modality;
  NodeKind kind;
  std::string label;
  int source_id;  // id inside the originating scene graph
};

struct CrossModalGraph {
  int num_textual = 0;
  int num_visual = 0;
  std::vector<CmgNode> nodes;
  EdgeList intra_edges;  // E^T ∪ E^I, undirected, i < j
  EdgeList hyper_edges;  // E^×, (textual index, visual index)
  Mat features;          // X, one row per node
  double lambda = 0.0;

  int size() const { return num_textual + num_visual; }
  bool is_textual(int i) const { return i < num_textual; }

  // Every undirected edge used for message passing, sorted, without duplicates.
  EdgeList edges() const {
    std::set<std::pair<int, int>> s;
    for (auto [a, b] : intra_edges) s.insert({std::min(a, b), std::max(a, b)});
    for (auto [a, b] : hyper_edges) s.insert({std::min(a, b), std::max(a, b)});
    return {s.begin(), s.end()};
  }

  // e_{i,j} as a symmetric 0/1 matrix without self-loops.
  Mat adjacency() const {
    Mat a = Mat::Zero(size(), size());
    for (auto [i, j] : edges()) {
      a(i, j) = 1.0;
      a(j, i) = 1.0;
    }
    return a;
  }
};

namespace detail {

inline void add_scene_edges(const SceneGraph& g, int offset, std::set<std::pair<int, int>>& out) {
  for (const auto& e : g.edges) {
    const int s = g.index_of(e.source);
    const int t = g.index_of(e.target);
    if (s < 0 || t < 0) throw ValidationError("scene graph has a dangling edge");
    if (s == t) continue;
    out.insert({offset + std::min(s, t), offset + std::max(s, t)});
  }
}

}  // namespace detail

// Inter-modal hyper-edges: every (textual j, visual i) pair whose cosine is at
// least λ. Pairs involving a zero embedding have no defined similarity and are skipped.
inline EdgeList hyper_edges(const Mat& tsg_emb, const Mat& vsg_emb, double lambda) {
  EdgeList out;
  const auto m = static_cast<int>(tsg_emb.rows());
  for (int j = 0; j < m; ++j) {
    if (tsg_emb.row(j).norm() == 0.0) continue;
    for (int i = 0; i < vsg_emb.rows(); ++i) {
      if (vsg_emb.row(i).norm() == 0.0) continue;
      if (cosine(tsg_emb.row(j), vsg_emb.row(i)) >= lambda) out.emplace_back(j, m + i);
    }
  }
  return out;
}

inline CrossModalGraph build_cmg(const Mat& vsg_emb, const Mat& tsg_emb, const SceneGraph& vsg, const SceneGraph& tsg,
                                 double lambda) {
  if (vsg_emb.rows() != static_cast<Eigen::Index>(vsg.nodes.size()) ||
      tsg_emb.rows() != static_cast<Eigen::Index>(tsg.nodes.size()))
    throw StructuralError("embedding row count does not match scene-graph node count");
  if (vsg_emb.rows() > 0 && tsg_emb.rows() > 0 && vsg_emb.cols() != tsg_emb.cols())
    throw StructuralError("visual and textual embeddings have different dimensionality");

  CrossModalGraph g;
  g.num_textual = static_cast<int>(tsg.nodes.size());
  g.num_visual = static_cast<int>(vsg.nodes.size());
  g.lambda = lambda;
  for (const auto& n : tsg.nodes) g.nodes.push_back({Modality::kTextual, n.kind, n.label, n.id});
  for (const auto& n : vsg.nodes) g.nodes.push_back({Modality::kVisual, n.kind, n.label, n.id});

  const Eigen::Index d = tsg_emb.rows() > 0 ? tsg_emb.cols() : vsg_emb.cols();
  g.features.resize(g.size(), d);
  if (tsg_emb.rows() > 0) g.features.topRows(g.num_textual) = tsg_emb;
  if (vsg_emb.rows() > 0) g.features.bottomRows(g.num_visual) = vsg_emb;

  std::set<std::pair<int, int>> intra;
  detail::add_scene_edges(tsg, 0, intra);
  detail::add_scene_edges(vsg, g.num_textual, intra);
  g.intra_edges.assign(intra.begin(), intra.end());
  g.hyper_edges = hyper_edges(tsg_emb, vsg_emb, lambda);
  return g;
}

// Nodes within `order` hops of each node (excluding the node itself), over the
// undirected edge list. Row i of the result lists φ(v_i) in ascending order.
inline std::vector<std::vector<int>> l_order_context(int n, const EdgeList& edges, int order) {
  std::vector<std::vector<int>> adj(static_cast<std::size_t>(n));
  for (auto [a, b] : edges) {
    adj[static_cast<std::size_t>(a)].push_back(b);
    adj[static_cast<std::size_t>(b)].push_back(a);
  }
  std::vector<std::vector<int>> out(static_cast<std::size_t>(n));
  for (int s = 0; s < n; ++s) {
    std::vector<int> dist(static_cast<std::size_t>(n), -1);
    std::vector<int> frontier{s};
    dist[static_cast<std::size_t>(s)] = 0;
    for (int hop = 1; hop <= order && !frontier.empty(); ++hop) {
      std::vector<int> next;
      for (int u : frontier)
        for (int v : adj[static_cast<std::size_t>(u)])
          if (dist[static_cast<std::size_t>(v)] < 0) {
            dist[static_cast<std::size_t>(v)] = hop;
            next.push_back(v);
          }
      frontier = std::move(next);
    }
    for (int v = 0; v < n; ++v)
      if (v != s && dist[static_cast<std::size_t>(v)] > 0) out[static_cast<std::size_t>(s)].push_back(v);
  }
  return out;
}

struct GatLayer {
  ag::Parameter attention;  // W₂, 1 × 2d, scores [x_i; x_j]
  ag::Parameter value;      // W₃, d × d

  template <typename F>
  void visit(F&& f) {
    f(attention);
    f(value);
  }
};

struct GatParams {
  int hidden = 0;
  double negative_slope = 0.2;
  std::vector<GatLayer> layers;

  static GatParams init(int hidden, int num_layers, nn::Rng& rng) {
    GatParams p;
    p.hidden = hidden;
    for (int l = 0; l < num_layers; ++l) {
      const std::string name = "gat." + std::to_string(l);
      p.layers.push_back({ag::Parameter(name + ".attention", nn::glorot(1, 2 * hidden, rng)),
                          ag::Parameter(name + ".value", nn::glorot(hidden, hidden, rng))});
    }
    return p;
  }

  template <typename F>
  void visit(F&& f) {
    for (auto& l : layers) l.visit(f);
  }
};

// Per-layer record of the attention weights, for inspection.
struct GatTrace {
  std::vector<Mat> attention;
};

namespace detail {

template <typename Weights>
ag::Var gat_layer(ag::Tape& t, const ag::Var& x, const Weights& support, GatLayer& layer, double slope) {
  const Eigen::Index d = x.cols();
  ag::Var att = t.param(layer.attention);
  ag::Var self_score = ag::affine(x, ag::slice_cols(att, 0, d));       // n × 1
  ag::Var nbr_score = ag::affine(x, ag::slice_cols(att, d, d));        // n × 1
  ag::Var logits = ag::leaky_relu(ag::outer_sum(self_score, ag::transpose(nbr_score)), slope);
  ag::Var alpha = ag::weighted_softmax_rows(logits, support);
  ag::Var values = ag::affine(x, t.param(layer.value));
  return ag::relu(ag::matmul(alpha, values));
}

}  // namespace detail

// Multi-layer GAT over a dense nonnegative support matrix (1 on the diagonal,
// e_{i,j} or a gated weight elsewhere). Attention is
// α_{i,j} ∝ w_{i,j} · exp(LeakyReLU(W₂[x_i; x_j])), and h_i = ReLU(Σ_j α_{i,j} W₃ x_j).
template <typename Weights>
ag::Var gat_encode(ag::Tape& t, const ag::Var& x, const Weights& support, GatParams& params, GatTrace* trace = nullptr) {
  ag::Var h = x;
  for (auto& layer : params.layers) {
    if (trace != nullptr) {
      const Eigen::Index d = h.cols();
      const Mat& a = layer.attention.value;
      Mat logits = (h.value() * a.leftCols(d).transpose()).replicate(1, h.rows()) +
                   (h.value() * a.rightCols(d).transpose()).transpose().replicate(h.rows(), 1);
      logits = (logits.array() > 0.0).select(logits, logits * params.negative_slope);
      Mat w;
      if constexpr (std::is_same_v<Weights, ag::Var>) {
        w = support.value();
      } else {
        w = support;
      }
      trace->attention.push_back(ag::detail::weighted_softmax(logits, w).first);
    }
    h = detail::gat_layer(t, h, support, layer, params.negative_slope);
  }
  return h;
}

inline Mat message_support(const CrossModalGraph& g) { return g.adjacency() + Mat::Identity(g.size(), g.size()); }

// Value-level encoding H = GAT(G, X).
inline Mat gat_forward(const CrossModalGraph& g, const Mat& x, GatParams& params, GatTrace* trace = nullptr) {
  if (x.rows() != g.size()) throw ContractViolation("gat_forward: feature rows do not match graph size");
  ag::Tape t;
  return gat_encode(t, t.constant(x), message_support(g), params, trace).value();
}

}  // namespace cmggib
