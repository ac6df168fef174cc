#pragma once

// Information-bottleneck guided refinement of a cross-modal graph: concrete
// node/edge gates conditioned on l-order context and the entity pair, a
// re-encoding over the gated adjacency, the compressed Gaussian code z, and the
// bottleneck loss CE(q(Y|z), Y) + β·KL(p(z|G) ‖ N(0, I)).

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "cmggib/autograd.hpp"
#include "cmggib/cmg.hpp"
#include "cmggib/errors.hpp"
#include "cmggib/nn.hpp"

namespace cmggib {

struct GeneConfig {
  double tau = 0.1;
  double beta = 0.01;
  int context_order = 2;
  int iterations = 2;
  double clamp_floor = 1e-6;
  double hard_threshold = 0.5;
  double gate_prior = 0.5;   // r of the Bernoulli gate prior
  double gate_weight = 0.0;  // weight of KL(Bern(π) ‖ Bern(r)); 0 leaves the gates unregularized
};

// Deterministic mode fixes ε = 0.5 for gates and ε = 0 for Gaussian draws.
struct Sampling {
  bool deterministic = true;
  nn::Rng* rng = nullptr;

  Mat uniform(Eigen::Index rows, Eigen::Index cols) const {
    if (deterministic) return Mat::Constant(rows, cols, 0.5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Mat m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = u(*rng);
    return m;
  }

  Mat normal(Eigen::Index rows, Eigen::Index cols) const {
    if (deterministic) return Mat::Zero(rows, cols);
    std::normal_distribution<double> nd(0.0, 1.0);
    Mat m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = nd(*rng);
    return m;
  }
};

// ρ = Sigmoid((log(π/(1−π)) + log(ε/(1−ε))) / τ), with π and ε clamped to [floor, 1 − floor].
inline double concrete_sample(double pi, double tau, double eps, double floor = 1e-6) {
  if (!(tau > 0.0)) throw NumericDomainError("concrete_sample: tau must be positive");
  if (!std::isfinite(pi) || !std::isfinite(eps)) throw NumericDomainError("concrete_sample: non-finite input");
  const double pc = std::clamp(pi, floor, 1.0 - floor);
  const double ec = std::clamp(eps, floor, 1.0 - floor);
  return ag::sigmoid_scalar((std::log(pc / (1.0 - pc)) + std::log(ec / (1.0 - ec))) / tau);
}

// ½ Σ_d (μ_d² + σ_d² − 1 − 2 log σ_d)
inline double kl_gaussian(const RowVec& mu, const RowVec& sigma) {
  if (mu.size() != sigma.size()) throw ContractViolation("kl_gaussian: dimension mismatch");
  if ((sigma.array() <= 0.0).any()) throw NumericDomainError("kl_gaussian: sigma must be positive");
  return 0.5 * (mu.array().square() + sigma.array().square() - 1.0 - 2.0 * sigma.array().log()).sum();
}

struct GeneParams {
  GeneConfig config;
  ag::Parameter node_attention;  // W₄, 1 × 2d over [h_i; h_k]
  ag::Parameter node_value;      // W₅, d × d
  ag::Parameter edge_attention;  // W₆, 1 × 3d over [h_i; h_j; h_k]
  ag::Parameter edge_value;      // W₇, d × d
  nn::Mlp node_ffn;              // [r; h_s; h_o] -> logit π^v
  nn::Mlp edge_ffn;              // [r; h_s; h_o] -> logit π^e
  nn::Linear mu_head;            // a -> μ_z
  nn::Linear sigma_head;         // a -> pre-Softplus σ_z
  nn::Linear classifier;         // z -> logits of q(Y|z)

  static GeneParams init(const GeneConfig& cfg, int d, int dz, int width, int num_labels, nn::Rng& rng) {
    if (!(cfg.tau > 0.0)) throw ConfigError("tau must be positive");
    if (cfg.beta < 0.0) throw ConfigError("beta must be nonnegative");
    if (cfg.context_order < 1) throw ConfigError("context order must be at least 1");
    if (cfg.iterations < 0) throw ConfigError("refinement iterations must be nonnegative");
    GeneParams p;
    p.config = cfg;
    p.node_attention = ag::Parameter("gene.node_attention", nn::glorot(1, 2 * d, rng));
    p.node_value = ag::Parameter("gene.node_value", nn::glorot(d, d, rng));
    p.edge_attention = ag::Parameter("gene.edge_attention", nn::glorot(1, 3 * d, rng));
    p.edge_value = ag::Parameter("gene.edge_value", nn::glorot(d, d, rng));
    // Small output gain keeps the initial π close to 0.5.
    p.node_ffn = nn::Mlp("gene.node_ffn", 3 * d, width, 1, rng, 0.1);
    p.edge_ffn = nn::Mlp("gene.edge_ffn", 3 * d, width, 1, rng, 0.1);
    p.mu_head = nn::Linear("gene.mu_head", 3 * d, dz, rng);
    p.sigma_head = nn::Linear("gene.sigma_head", 3 * d, dz, rng);
    p.classifier = nn::Linear("gene.classifier", dz, num_labels, rng);
    return p;
  }

  template <typename F>
  void visit(F&& f) {
    f(node_attention);
    f(node_value);
    f(edge_attention);
    f(edge_value);
    node_ffn.visit(f);
    edge_ffn.visit(f);
    mu_head.visit(f);
    sigma_head.visit(f);
    classifier.visit(f);
  }
};

inline ag::Var mean_of_rows(const ag::Var& h, const std::vector<int>& rows) {
  if (rows.empty()) throw ContractViolation("mean_of_rows: empty row set");
  return ag::mean_rows(ag::gather_rows(h, rows));
}

// Attention over {v_i} ∪ φ(v_i):
//   α_{i,k} = softmax_k(W₄[h_i; h_k]),  r_i = Tanh(Σ_k α_{i,k} W₅ h_k).
inline ag::Var node_context(ag::Tape& t, const ag::Var& h, const std::vector<std::vector<int>>& context, GeneParams& p) {
  const Eigen::Index n = h.rows();
  const Eigen::Index d = h.cols();
  Mat mask = Mat::Identity(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (int k : context[static_cast<std::size_t>(i)]) mask(i, k) = 1.0;
  ag::Var att = t.param(p.node_attention);
  ag::Var s_self = ag::affine(h, ag::slice_cols(att, 0, d));
  ag::Var s_ctx = ag::affine(h, ag::slice_cols(att, d, d));
  ag::Var alpha = ag::weighted_softmax_rows(ag::outer_sum(s_self, ag::transpose(s_ctx)), mask);
  return ag::tanh(ag::matmul(alpha, ag::affine(h, t.param(p.node_value))));
}

// Attention over {v_i} ∪ φ(v_i) ∪ {v_j} ∪ φ(v_j) for each listed edge:
//   α_{i,j,k} = softmax_k(W₆[h_i; h_j; h_k]),  r_{i,j} = Tanh(Σ_k α_{i,j,k} W₇ h_k).
inline ag::Var edge_context(ag::Tape& t, const ag::Var& h, const EdgeList& edges,
                            const std::vector<std::vector<int>>& context, GeneParams& p) {
  const Eigen::Index n = h.rows();
  const Eigen::Index d = h.cols();
  const auto ne = static_cast<Eigen::Index>(edges.size());
  Mat mask = Mat::Zero(ne, n);
  std::vector<int> src, dst;
  for (Eigen::Index e = 0; e < ne; ++e) {
    const auto [i, j] = edges[static_cast<std::size_t>(e)];
    src.push_back(i);
    dst.push_back(j);
    mask(e, i) = 1.0;
    mask(e, j) = 1.0;
    for (int k : context[static_cast<std::size_t>(i)]) mask(e, k) = 1.0;
    for (int k : context[static_cast<std::size_t>(j)]) mask(e, k) = 1.0;
  }
  ag::Var att = t.param(p.edge_attention);
  ag::Var s_i = ag::gather_rows(ag::affine(h, ag::slice_cols(att, 0, d)), src);
  ag::Var s_j = ag::gather_rows(ag::affine(h, ag::slice_cols(att, d, d)), dst);
  ag::Var s_k = ag::affine(h, ag::slice_cols(att, 2 * d, d));
  ag::Var alpha = ag::weighted_softmax_rows(ag::outer_sum(ag::add(s_i, s_j), ag::transpose(s_k)), mask);
  return ag::tanh(ag::matmul(alpha, ag::affine(h, t.param(p.edge_value))));
}

// π = Sigmoid(FFN([r; h_s; h_o])) row-wise.
inline ag::Var gate_probabilities(ag::Tape& t, const ag::Var& r, const ag::Var& hs, const ag::Var& ho, nn::Mlp& ffn) {
  const Eigen::Index rows = r.rows();
  return ag::sigmoid(ffn(t, ag::hcat({r, ag::repeat_rows(hs, rows), ag::repeat_rows(ho, rows)})));
}

struct GateValue {
  double prob = 0.0;  // π
  double gate = 0.0;  // ρ
};

// Gate of a single node v_i given H, the entity representations and ε.
inline GateValue node_gate(int i, const Mat& h, const RowVec& hs, const RowVec& ho, const EdgeList& edges, GeneParams& p,
                           double eps = 0.5) {
  if (i < 0 || i >= h.rows()) throw ContractViolation("node_gate: node index out of range");
  ag::Tape t;
  ag::Var hv = t.constant(h);
  const auto context = l_order_context(static_cast<int>(h.rows()), edges, p.config.context_order);
  ag::Var r = node_context(t, hv, context, p);
  const double pi = gate_probabilities(t, r, t.constant(hs), t.constant(ho), p.node_ffn).value()(i, 0);
  return {pi, concrete_sample(pi, p.config.tau, eps, p.config.clamp_floor)};
}

// Gate of the edge (v_i, v_j); the pair must be an edge of `edges`.
inline GateValue edge_gate(int i, int j, const Mat& h, const RowVec& hs, const RowVec& ho, const EdgeList& edges,
                           GeneParams& p, double eps = 0.5) {
  const std::pair<int, int> key{std::min(i, j), std::max(i, j)};
  bool found = false;
  for (auto [a, b] : edges)
    if (std::min(a, b) == key.first && std::max(a, b) == key.second) found = true;
  if (!found) throw ContractViolation("edge_gate: (" + std::to_string(i) + "," + std::to_string(j) + ") is not an edge");
  ag::Tape t;
  ag::Var hv = t.constant(h);
  const auto context = l_order_context(static_cast<int>(h.rows()), edges, p.config.context_order);
  ag::Var r = edge_context(t, hv, EdgeList{{i, j}}, context, p);
  const double pi = gate_probabilities(t, r, t.constant(hs), t.constant(ho), p.edge_ffn).value()(0, 0);
  return {pi, concrete_sample(pi, p.config.tau, eps, p.config.clamp_floor)};
}

struct EntityNodes {
  std::vector<int> subject;
  std::vector<int> object;
};

struct RefinementState {
  ag::Var node_prob;   // π^v, n × 1
  ag::Var node_gate;   // ρ^v, n × 1
  ag::Var edge_prob;   // π^e, |E| × 1
  ag::Var edge_gate;   // ρ^e, |E| × 1
  EdgeList edges;      // row order of the edge gates
  bool gated = false;  // false when zero iterations ran
};

struct CompressedRep {
  ag::Var context;  // a = [g; h_s; h_o]
  ag::Var mu;
  ag::Var sigma;
  ag::Var z;
};

struct RefineResult {
  RefinementState state;
  ag::Var h_refined;  // H⁻
  ag::Var pooled;     // g
  ag::Var subject;    // h_s from H⁻
  ag::Var object;     // h_o from H⁻
  CompressedRep rep;
  bool degenerate = false;  // every node gate fell below the clamp floor
};

inline RefineResult refine(ag::Tape& t, const CrossModalGraph& graph, const ag::Var& x, const ag::Var& h,
                           const EntityNodes& entities, GatParams& gat, GeneParams& p, const Sampling& sampling) {
  if (h.rows() != graph.size()) throw ContractViolation("refine: H does not match the graph");
  const GeneConfig& cfg = p.config;
  const EdgeList edges = graph.edges();
  const auto context = l_order_context(graph.size(), edges, cfg.context_order);

  RefineResult out;
  out.state.edges = edges;
  ag::Var current = h;
  for (int it = 0; it < cfg.iterations; ++it) {
    ag::Var hs = mean_of_rows(current, entities.subject);
    ag::Var ho = mean_of_rows(current, entities.object);
    RefinementState st;
    st.edges = edges;
    st.gated = true;
    st.node_prob = gate_probabilities(t, node_context(t, current, context, p), hs, ho, p.node_ffn);
    st.node_gate = ag::concrete_relax(st.node_prob, sampling.uniform(graph.size(), 1), cfg.tau, cfg.clamp_floor);
    if (!edges.empty()) {
      st.edge_prob = gate_probabilities(t, edge_context(t, current, edges, context, p), hs, ho, p.edge_ffn);
      st.edge_gate = ag::concrete_relax(st.edge_prob, sampling.uniform(static_cast<Eigen::Index>(edges.size()), 1),
                                        cfg.tau, cfg.clamp_floor);
    } else {
      st.edge_prob = t.constant(Mat(0, 1));
      st.edge_gate = t.constant(Mat(0, 1));
    }
    ag::Var support = ag::gated_adjacency(st.edge_gate, st.node_gate, edges);
    current = gat_encode(t, x, support, gat);
    out.state = st;
  }

  out.h_refined = current;
  out.subject = mean_of_rows(current, entities.subject);
  out.object = mean_of_rows(current, entities.object);
  if (out.state.gated) {
    const double mass = out.state.node_gate.value().sum();
    out.degenerate = mass < cfg.clamp_floor * static_cast<double>(graph.size());
    // g = Σ_i ρ_i h_i / Σ_i ρ_i: the gate-weighted mean, so only relative gate values move g.
    ag::Var total = ag::add(ag::sum(out.state.node_gate), t.constant(Mat::Constant(1, 1, cfg.clamp_floor)));
    out.pooled = ag::mul_scalar(ag::matmul(ag::transpose(out.state.node_gate), current), ag::reciprocal(total));
  } else {
    out.pooled = ag::mean_rows(current);
  }

  CompressedRep& rep = out.rep;
  rep.context = ag::hcat({out.pooled, out.subject, out.object});
  rep.mu = p.mu_head(t, rep.context);
  rep.sigma = ag::softplus(p.sigma_head(t, rep.context));
  ag::Var noise = t.constant(sampling.normal(1, rep.mu.cols()));
  rep.z = ag::add(rep.mu, ag::hadamard(rep.sigma, noise));
  return out;
}

struct GibLoss {
  ag::Var total;
  ag::Var ce;
  ag::Var kl;
  ag::Var gate;  // set only when a gate prior is applied
};

inline GibLoss gib_loss(const ag::Var& mu, const ag::Var& sigma, const ag::Var& logits, int label, double beta) {
  if (beta < 0.0) throw ContractViolation("gib_loss: beta must be nonnegative");
  GibLoss l;
  l.ce = ag::cross_entropy(logits, label);
  l.kl = ag::kl_standard_normal(mu, sigma);
  l.total = ag::add(l.ce, ag::scale(l.kl, beta));
  return l;
}

// Adds γ·(mean KL(Bern(π^v) ‖ Bern(r)) + mean KL(Bern(π^e) ‖ Bern(r))) to the loss.
inline void add_gate_prior(GibLoss& l, const RefinementState& st, const GeneConfig& cfg) {
  if (!st.gated || cfg.gate_weight <= 0.0) return;
  if (!(cfg.gate_prior > 0.0 && cfg.gate_prior < 1.0)) throw ConfigError("gate prior must lie in (0, 1)");
  l.gate = ag::add(ag::bernoulli_kl(st.node_prob, cfg.gate_prior, cfg.clamp_floor),
                   ag::bernoulli_kl(st.edge_prob, cfg.gate_prior, cfg.clamp_floor));
  l.total = ag::add(l.total, ag::scale(l.gate, cfg.gate_weight));
}

// Hard-mode pruning: a node survives when its gate exceeds the threshold; an
// edge survives when its own gate and both endpoint gates do.
struct PrunedGraph {
  std::vector<int> nodes;
  EdgeList edges;
};

inline PrunedGraph hard_prune(const Eigen::VectorXd& node_gate, const Eigen::VectorXd& edge_gate, const EdgeList& edges,
                              double threshold = 0.5) {
  if (edge_gate.size() != static_cast<Eigen::Index>(edges.size())) throw ContractViolation("hard_prune: edge gate count mismatch");
  PrunedGraph out;
  for (Eigen::Index i = 0; i < node_gate.size(); ++i)
    if (node_gate(i) > threshold) out.nodes.push_back(static_cast<int>(i));
  for (std::size_t k = 0; k < edges.size(); ++k) {
    const auto [i, j] = edges[k];
    const double w = (edge_gate(static_cast<Eigen::Index>(k)) > threshold ? 1.0 : 0.0) *
                     (node_gate(i) > threshold ? 1.0 : 0.0) * (node_gate(j) > threshold ? 1.0 : 0.0);
    if (w > 0.0) out.edges.push_back(edges[k]);
  }
  return out;
}

}  // namespace cmggib
