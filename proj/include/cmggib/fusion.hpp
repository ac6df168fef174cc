#pragma once

// Topic-keyword integration, the relation classifier, and the joint objective
// L = L_CE + η₁·L_GIB + η₂·L_LAMO.

#include <cmath>
#include <string>
#include <vector>

#include "cmggib/autograd.hpp"
#include "cmggib/errors.hpp"
#include "cmggib/gene.hpp"
#include "cmggib/nn.hpp"
#include "cmggib/sg_core.hpp"

namespace cmggib {

// Textual object nodes whose span overlaps the entity span.
inline std::vector<int> entity_nodes(const SceneGraph& tsg, const TokenSpan& span) {
  if (span.length() <= 0) throw StructuralError("entity span is empty");
  std::vector<int> out;
  for (std::size_t j = 0; j < tsg.nodes.size(); ++j) {
    const auto& n = tsg.nodes[j];
    if (n.kind == NodeKind::kObject && n.span && n.span->overlaps(span)) out.push_back(static_cast<int>(j));
  }
  if (out.empty())
    throw StructuralError("entity span [" + std::to_string(span.start) + "," + std::to_string(span.end) +
                          ") matches no textual node");
  return out;
}

struct EntityReps {
  RowVec subject;
  RowVec object;
};

// Mean of the textual-node rows of H covered by each entity span. Textual
// nodes occupy the first rows of H.
inline EntityReps resolve_entity_reps(const Mat& h, const SceneGraph& tsg, const TokenSpan& subject, const TokenSpan& object) {
  auto pool = [&](const std::vector<int>& rows) {
    RowVec acc = RowVec::Zero(h.cols());
    for (int r : rows) acc += h.row(r);
    return RowVec(acc / static_cast<double>(rows.size()));
  };
  return {pool(entity_nodes(tsg, subject)), pool(entity_nodes(tsg, object))};
}

struct FusionConfig {
  double eta1 = 1.0;
  double eta2 = 1.0;
};

struct FusionParams {
  FusionConfig config;
  nn::Mlp text_score;    // [u^T_i; z] -> score
  nn::Mlp visual_score;  // [u^I_i; z] -> score
  nn::Linear classifier;  // s -> relation logits

  static FusionParams init(const FusionConfig& cfg, int d, int dz, int width, int num_labels, nn::Rng& rng) {
    if (cfg.eta1 < 0.0 || cfg.eta2 < 0.0) throw ConfigError("loss weights must be nonnegative");
    FusionParams p;
    p.config = cfg;
    p.text_score = nn::Mlp("fusion.text_score", d + dz, width, 1, rng);
    p.visual_score = nn::Mlp("fusion.visual_score", d + dz, width, 1, rng);
    p.classifier = nn::Linear("fusion.classifier", dz + 2 * d, num_labels, rng);
    return p;
  }

  template <typename F>
  void visit(F&& f) {
    text_score.visit(f);
    visual_score.visit(f);
    classifier.visit(f);
  }
};

struct TopicIntegration {
  ag::Var s;
  ag::Var text_attention;    // 1 × L^T (absent when no keywords)
  ag::Var visual_attention;  // 1 × L^I
  ag::Var text_summary;      // o^T
  ag::Var visual_summary;    // o^I
};

namespace detail {

inline void attend(ag::Tape& t, const ag::Var& z, const Mat& keywords, nn::Mlp& scorer, Eigen::Index d,
                   ag::Var& attention, ag::Var& summary) {
  if (keywords.rows() == 0) {
    summary = t.constant(Mat::Zero(1, d));
    return;
  }
  ag::Var u = t.constant(keywords);
  ag::Var scores = scorer(t, ag::hcat({u, ag::repeat_rows(z, keywords.rows())}));  // L × 1
  attention = ag::softmax_rows(ag::transpose(scores));                                // 1 × L
  summary = ag::matmul(attention, u);
}

}  // namespace detail

// α_i = softmax_i(FFN([u_i; z])) per modality, o = Σ α_i u_i, s = [z; o^T; o^I].
inline TopicIntegration integrate_topics(ag::Tape& t, const ag::Var& z, const Mat& text_keywords, const Mat& visual_keywords,
                                         FusionParams& p, Eigen::Index d) {
  TopicIntegration out;
  detail::attend(t, z, text_keywords, p.text_score, d, out.text_attention, out.text_summary);
  detail::attend(t, z, visual_keywords, p.visual_score, d, out.visual_attention, out.visual_summary);
  out.s = ag::hcat({z, out.text_summary, out.visual_summary});
  return out;
}

inline ag::Var classify(ag::Tape& t, const ag::Var& s, FusionParams& p) { return p.classifier(t, s); }

inline RowVec label_distribution(const RowVec& logits) { return ag::softmax_row_values(logits); }

inline int predict(const RowVec& probs) {
  int best = 0;
  for (Eigen::Index i = 1; i < probs.size(); ++i)
    if (probs(i) > probs(best)) best = static_cast<int>(i);
  return best;
}

// Aborts with the offending component named when any input is non-finite.
inline double total_loss(double ce, double gib, double lamo, double eta1, double eta2) {
  if (!std::isfinite(ce)) throw NumericDomainError("non-finite loss component: ce");
  if (!std::isfinite(gib)) throw NumericDomainError("non-finite loss component: gib");
  if (!std::isfinite(lamo)) throw NumericDomainError("non-finite loss component: lamo");
  return ce + eta1 * gib + eta2 * lamo;
}

inline ag::Var total_loss(const ag::Var& ce, const ag::Var& gib, const ag::Var& lamo, double eta1, double eta2) {
  total_loss(ce.scalar(), gib.scalar(), lamo.scalar(), eta1, eta2);
  return ag::add(ag::add(ce, ag::scale(gib, eta1)), ag::scale(lamo, eta2));
}

}  // namespace cmggib
