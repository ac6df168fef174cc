#pragma once

// The full relation-extraction model: node featurization, CMG encoding,
// refinement, topic inference, topic integration and classification.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "cmggib/autograd.hpp"
#include "cmggib/cmg.hpp"
#include "cmggib/config.hpp"
#include "cmggib/corpus.hpp"
#include "cmggib/embedding.hpp"
#include "cmggib/errors.hpp"
#include "cmggib/fusion.hpp"
#include "cmggib/gene.hpp"
#include "cmggib/lamo.hpp"
#include "cmggib/nn.hpp"

namespace cmggib {

// Everything about an instance that does not depend on trainable parameters.
struct FeaturizedInstance {
  std::string id;
  int label = 0;
  SceneGraph vsg;
  SceneGraph tsg;
  Mat region_features;         // n × d₁, provider region vectors x̂
  std::vector<int> label_ids;  // label-table row per visual node, -1 when unknown
  Mat text_features;           // m × d₁
  EntityNodes entities;
  BowVector text_bow;
  BowVector visual_bow;
};

enum class ParamGroup { kPretrained, kOther };
enum class Component { kEncoder, kGene, kLamo, kFusion };

// How much of the graph a forward pass evaluates.
enum class ForwardScope {
  kGene,    // encoder + refinement + L_GIB
  kTopics,  // encoder + L_LAMO
  kFull,
};

struct ForwardPass {
  CrossModalGraph graph;
  ag::Var x;
  ag::Var h;
  RefineResult refined;
  GibLoss gib;
  TopicVars topics;
  LamoLoss lamo;
  Keywords keywords;
  TopicIntegration integration;
  ag::Var logits;
  ag::Var ce;
  ag::Var total;
  bool has_gene = false;
  bool has_topics = false;
  bool has_head = false;
};

class Model {
 public:
  Config config;
  ag::Parameter fusion{"embed.fusion", Mat()};  // W₁, d₁ × (d₁ + d₂)
  LabelEmbeddingTable labels;
  GatParams gat;
  GeneParams gene;
  TopicModelParams lamo;
  FusionParams head;
  Codebook codebook;
  Vocabulary vocabulary;
  Mat keyword_embeddings;  // U^T × d₁, one row per vocabulary word

  int num_relations() const { return static_cast<int>(relation_labels().size()); }
  // Keyword count L, clamped to both vocabulary sizes.
  int keyword_count() const { return std::max(0, std::min({config.keywords, vocabulary.size(), codebook.size()})); }

  // Builds parameters from the configuration. Codebook and vocabulary come
  // from `train`; the label table covers every visual category in `all`.
  static Model create(const Config& cfg, const std::vector<Instance>& train, const std::vector<Instance>& all,
                      const EmbeddingProvider& provider) {
    cfg.validate();
    if (provider.dim() != cfg.d1 || provider.word_dim() != cfg.d2)
      throw ConfigError("embedding provider dimensions do not match d1/d2");
    std::vector<std::string> categories;
    for (const auto& inst : all)
      for (const auto& n : inst.vsg.nodes) categories.push_back(n.label);
    std::vector<std::vector<std::string>> docs;
    std::vector<RowVec> regions;
    for (const auto& inst : train) {
      docs.push_back(inst.tokens);
      for (const auto& n : inst.vsg.nodes)
        if (n.kind == NodeKind::kObject) regions.push_back(provider.region(region_query(inst.vsg, n, inst.image_ref)));
    }
    Mat features(static_cast<Eigen::Index>(regions.size()), cfg.d1);
    for (std::size_t i = 0; i < regions.size(); ++i) features.row(static_cast<Eigen::Index>(i)) = regions[i];
    KMeansOptions km;
    km.max_iterations = cfg.kmeans_iterations;
    km.tolerance = cfg.kmeans_tolerance;
    Codebook cb = build_codebook(features, cfg.codebook_size, cfg.seed, km);
    Vocabulary vocab = Vocabulary::build(docs, cfg.min_count);
    if (vocab.words.empty()) throw ConfigError("textual vocabulary is empty after filtering");
    Mat keywords(vocab.size(), cfg.d1);
    for (int w = 0; w < vocab.size(); ++w) keywords.row(w) = provider.keyword(vocab.words[static_cast<std::size_t>(w)]);
    return assemble(cfg, LabelEmbeddingTable::build(categories, provider), std::move(cb), std::move(vocab),
                    std::move(keywords));
  }

  // Initialises every trainable tensor for fixed label table, codebook and vocabulary.
  static Model assemble(const Config& cfg, LabelEmbeddingTable table, Codebook cb, Vocabulary vocab, Mat keywords) {
    Model m;
    m.config = cfg;
    nn::Rng rng(cfg.seed);
    const int d = cfg.d1;
    const int dz = cfg.effective_dz();
    const int width = cfg.effective_width();
    // Identity on the region block keeps x̂ in the shared space at the start.
    Mat w1(d, d + cfg.d2);
    w1.leftCols(d) = Mat::Identity(d, d);
    w1.rightCols(cfg.d2) = nn::glorot(d, cfg.d2, rng, 0.3);
    m.fusion = ag::Parameter("embed.fusion", std::move(w1));
    m.labels = std::move(table);
    m.gat = GatParams::init(d, cfg.gat_layers, rng);
    m.gat.negative_slope = cfg.leaky_slope;
    GeneConfig gc;
    gc.tau = cfg.tau;
    gc.beta = cfg.beta;
    gc.context_order = cfg.context_order;
    gc.iterations = cfg.refine_iterations;
    gc.gate_prior = cfg.gate_prior;
    gc.gate_weight = cfg.gate_weight;
    m.gene = GeneParams::init(gc, d, dz, width, m.num_relations(), rng);
    m.codebook = std::move(cb);
    m.vocabulary = std::move(vocab);
    m.lamo = TopicModelParams::init(d, width, cfg.topics, static_cast<int>(m.vocabulary.words.size()),
                                    static_cast<int>(m.codebook.centroids.rows()), rng);
    m.head = FusionParams::init({cfg.eta1, cfg.eta2}, d, dz, width, m.num_relations(), rng);
    if (keywords.rows() != m.vocabulary.size() || keywords.cols() != d)
      throw StructuralError("keyword embedding table does not match the vocabulary");
    m.keyword_embeddings = std::move(keywords);
    return m;
  }

  FeaturizedInstance featurize(const Instance& inst, const EmbeddingProvider& provider) const {
    FeaturizedInstance f;
    f.id = inst.id;
    f.label = inst.label();
    if (f.label < 0) throw ValidationError("instance '" + inst.id + "' has an unknown relation label");
    f.vsg = inst.vsg;
    f.tsg = inst.tsg;
    const auto nv = static_cast<Eigen::Index>(inst.vsg.nodes.size());
    f.region_features = Mat(nv, config.d1);
    std::vector<RowVec> objects;
    for (Eigen::Index i = 0; i < nv; ++i) {
      const auto& n = inst.vsg.nodes[static_cast<std::size_t>(i)];
      f.region_features.row(i) = provider.region(region_query(inst.vsg, n, inst.image_ref));
      auto it = labels.index.find(n.label);
      f.label_ids.push_back(it == labels.index.end() ? -1 : it->second);
      if (n.kind == NodeKind::kObject) objects.push_back(f.region_features.row(i));
    }
    f.text_features = embed_textual_nodes(inst.tsg, inst.tokens, provider);
    if (f.text_features.rows() == 0) throw StructuralError("instance '" + inst.id + "' has an empty textual graph");
    f.entities.subject = entity_nodes(inst.tsg, inst.subject.span);
    f.entities.object = entity_nodes(inst.tsg, inst.object.span);
    f.text_bow = vocabulary.bow(inst.tokens);
    Mat obj(static_cast<Eigen::Index>(objects.size()), config.d1);
    for (std::size_t i = 0; i < objects.size(); ++i) obj.row(static_cast<Eigen::Index>(i)) = objects[i];
    f.visual_bow = assign_visual_words(obj, codebook);
    return f;
  }

  // X^I = Tanh([x̂; x̄] W₁ᵀ) on the tape.
  ag::Var visual_features(ag::Tape& t, const FeaturizedInstance& f) {
    const auto nv = f.region_features.rows();
    std::vector<int> rows;
    Mat mask = Mat::Ones(nv, config.d2);
    for (Eigen::Index i = 0; i < nv; ++i) {
      const int id = f.label_ids[static_cast<std::size_t>(i)];
      rows.push_back(std::max(id, 0));
      if (id < 0) mask.row(i).setZero();
    }
    ag::Var label_rows = ag::hadamard(ag::gather_rows(t.param(labels.weights), rows), t.constant(mask));
    return ag::tanh(ag::affine(ag::hcat({t.constant(f.region_features), label_rows}), t.param(fusion)));
  }

  ForwardPass forward(ag::Tape& t, const FeaturizedInstance& f, const Sampling& sampling,
                      ForwardScope scope = ForwardScope::kFull) {
    ForwardPass out;
    ag::Var xt = t.constant(f.text_features);
    if (f.region_features.rows() > 0) {
      ag::Var xv = visual_features(t, f);
      out.graph = build_cmg(xv.value(), f.text_features, f.vsg, f.tsg, config.lambda);
      out.x = ag::vcat({xt, xv});
    } else {
      out.graph = build_cmg(Mat(0, config.d1), f.text_features, f.vsg, f.tsg, config.lambda);
      out.x = xt;
    }
    out.h = gat_encode(t, out.x, message_support(out.graph), gat);

    const bool want_gene = scope != ForwardScope::kTopics;
    const bool want_topics = scope != ForwardScope::kGene;
    if (want_gene) {
      out.refined = refine(t, out.graph, out.x, out.h, f.entities, gat, gene, sampling);
      ag::Var gib_logits = gene.classifier(t, out.refined.rep.z);
      out.gib = gib_loss(out.refined.rep.mu, out.refined.rep.sigma, gib_logits, f.label, gene.config.beta);
      add_gate_prior(out.gib, out.refined.state, gene.config);
      out.has_gene = true;
    }
    if (want_topics) {
      // Topic pretraining sees H as a frozen input.
      out.topics = encode_topics(t, scope == ForwardScope::kTopics ? t.constant(out.h.value()) : out.h, lamo);
      sample_theta(t, out.topics, lamo, sampling.normal(1, lamo.num_topics));
      out.lamo = lamo_loss(t, out.topics, f.text_bow, f.visual_bow, lamo);
      out.has_topics = true;
    }
    if (scope == ForwardScope::kFull) {
      const int count = keyword_count();
      out.keywords = top_keywords(out.topics.theta.value(), lamo.chi.value, lamo.psi.value, count);
      Mat ut(count, config.d1);
      Mat ui(count, config.d1);
      for (int i = 0; i < count; ++i) {
        ut.row(i) = keyword_embeddings.row(out.keywords.textual[static_cast<std::size_t>(i)]);
        ui.row(i) = codebook.centroids.row(out.keywords.visual[static_cast<std::size_t>(i)]);
      }
      out.integration = integrate_topics(t, out.refined.rep.z, ut, ui, head, config.d1);
      out.logits = classify(t, out.integration.s, head);
      out.ce = ag::cross_entropy(out.logits, f.label);
      out.total = total_loss(out.ce, out.gib.total, out.lamo.total, head.config.eta1, head.config.eta2);
      out.has_head = true;
    } else if (scope == ForwardScope::kGene) {
      out.total = out.gib.total;
    } else {
      out.total = out.lamo.total;
    }
    return out;
  }

  template <typename F>
  void visit(F&& f) {
    f(fusion, Component::kEncoder, ParamGroup::kPretrained);
    f(labels.weights, Component::kEncoder, ParamGroup::kPretrained);
    gat.visit([&](ag::Parameter& p) { f(p, Component::kEncoder, ParamGroup::kOther); });
    gene.visit([&](ag::Parameter& p) { f(p, Component::kGene, ParamGroup::kOther); });
    lamo.visit([&](ag::Parameter& p) { f(p, Component::kLamo, ParamGroup::kOther); });
    head.visit([&](ag::Parameter& p) { f(p, Component::kFusion, ParamGroup::kOther); });
  }

  std::vector<ag::Parameter*> parameters() {
    std::vector<ag::Parameter*> out;
    visit([&](ag::Parameter& p, Component, ParamGroup) { out.push_back(&p); });
    return out;
  }
};

// Per-instance results of a deterministic evaluation pass.
struct InstanceOutput {
  std::string id;
  int gold = 0;
  int prediction = 0;
  RowVec probabilities;
  Eigen::VectorXd node_gate;
  Eigen::VectorXd edge_gate;
  EdgeList edges;
  PrunedGraph pruned;
  RowVec z;
  RowVec s;
  RowVec mean_h;
  RowVec theta;
  double kl = 0.0;
  double node_keep = 1.0;  // expected fraction of nodes whose sampled hard gate is open
  double edge_keep = 1.0;
  int num_textual = 0;
  CrossModalGraph graph;
};

inline InstanceOutput evaluate_instance(Model& model, const FeaturizedInstance& f) {
  ag::Tape t;
  Sampling det;
  ForwardPass fp = model.forward(t, f, det);
  InstanceOutput o;
  o.id = f.id;
  o.gold = f.label;
  o.probabilities = label_distribution(fp.logits.value());
  o.prediction = predict(o.probabilities);
  o.edges = fp.refined.state.edges;
  o.graph = fp.graph;
  o.num_textual = fp.graph.num_textual;
  const auto n = fp.graph.size();
  if (fp.refined.state.gated) {
    o.node_gate = fp.refined.state.node_gate.value().col(0);
    o.edge_gate = o.edges.empty() ? Eigen::VectorXd(0) : Eigen::VectorXd(fp.refined.state.edge_gate.value().col(0));
  } else {
    o.node_gate = Eigen::VectorXd::Ones(n);
    o.edge_gate = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(o.edges.size()));
  }
  const double thr = model.gene.config.hard_threshold;
  o.pruned = hard_prune(o.node_gate, o.edge_gate, o.edges, thr);
  // A Concrete sample clears 0.5 with probability exactly π, so the keep
  // ratios are the noise-averaged hard-gate fractions: the mean of π.
  if (fp.refined.state.gated) {
    o.node_keep = n > 0 ? fp.refined.state.node_prob.value().mean() : 1.0;
    o.edge_keep = o.edges.empty() ? 1.0 : fp.refined.state.edge_prob.value().mean();
  }
  o.z = fp.refined.rep.z.value();
  o.s = fp.integration.s.value();
  o.mean_h = fp.h.value().colwise().mean();
  o.theta = fp.topics.theta.value();
  o.kl = fp.gib.kl.scalar();
  return o;
}

}  // namespace cmggib
