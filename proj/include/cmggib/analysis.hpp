#pragma once

// Post-training analyses: text-image relevance and bucketed metrics, linear
// probes and task entropy per feature stage, gate ranking quality, topic
// alignment, and the training-trajectory CSV.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "cmggib/corpus.hpp"
#include "cmggib/embedding.hpp"
#include "cmggib/errors.hpp"
#include "cmggib/metrics.hpp"
#include "cmggib/training.hpp"

namespace cmggib {

// ---------------------------------------------------------------------------
// Relevance

// Mean of max(0, cos) over every (visual row, textual row) pair. Empty sides
// give no score.
inline std::optional<double> relevance_score(const Mat& visual, const Mat& textual) {
  if (visual.rows() == 0 || textual.rows() == 0) return std::nullopt;
  double acc = 0.0;
  for (Eigen::Index i = 0; i < visual.rows(); ++i)
    for (Eigen::Index j = 0; j < textual.rows(); ++j) {
      const double nu = visual.row(i).norm();
      const double nv = textual.row(j).norm();
      if (nu == 0.0 || nv == 0.0) continue;
      acc += std::max(0.0, visual.row(i).dot(textual.row(j)) / (nu * nv));
    }
  return std::clamp(acc / static_cast<double>(visual.rows() * textual.rows()), 0.0, 1.0);
}

// Ψ over the object and attribute nodes of an instance's two graphs.
inline std::optional<double> relevance(const Instance& inst, const EmbeddingProvider& provider) {
  std::vector<RowVec> vis;
  for (const auto& n : inst.vsg.nodes)
    if (n.kind != NodeKind::kRelation) vis.push_back(provider.region(region_query(inst.vsg, n, inst.image_ref)));
  const Mat text_all = embed_textual_nodes(inst.tsg, inst.tokens, provider);
  std::vector<RowVec> txt;
  for (std::size_t j = 0; j < inst.tsg.nodes.size(); ++j)
    if (inst.tsg.nodes[j].kind != NodeKind::kRelation) txt.push_back(text_all.row(static_cast<Eigen::Index>(j)));
  auto stack = [&](const std::vector<RowVec>& rows) {
    Mat m(static_cast<Eigen::Index>(rows.size()), provider.dim());
    for (std::size_t i = 0; i < rows.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = rows[i];
    return m;
  };
  return relevance_score(stack(vis), stack(txt));
}

struct RelevanceBucket {
  double lo = 0.0;
  double hi = 0.0;  // the last bucket includes hi
  std::vector<std::string> ids;
  MetricsReport metrics;
};

inline int bucket_index(double score, int count) {
  const int b = static_cast<int>(std::floor(score * count));
  return std::clamp(b, 0, count - 1);
}

// Equal-width buckets over [0, 1]; unscored instances are skipped.
inline std::vector<RelevanceBucket> relevance_buckets(const std::vector<std::string>& ids,
                                                      const std::vector<std::optional<double>>& scores,
                                                      const std::vector<int>& predicted, const std::vector<int>& gold,
                                                      int count, int num_labels, int exclude_label) {
  if (count < 1) throw ConfigError("bucket count must be positive");
  if (ids.size() != scores.size() || ids.size() != predicted.size() || ids.size() != gold.size())
    throw ContractViolation("relevance_buckets: input lengths differ");
  std::vector<RelevanceBucket> out(static_cast<std::size_t>(count));
  std::vector<std::vector<int>> pred(static_cast<std::size_t>(count)), gd(static_cast<std::size_t>(count));
  for (int b = 0; b < count; ++b) {
    out[static_cast<std::size_t>(b)].lo = static_cast<double>(b) / count;
    out[static_cast<std::size_t>(b)].hi = static_cast<double>(b + 1) / count;
  }
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (!scores[i]) continue;
    const auto b = static_cast<std::size_t>(bucket_index(*scores[i], count));
    out[b].ids.push_back(ids[i]);
    pred[b].push_back(predicted[i]);
    gd[b].push_back(gold[i]);
  }
  for (std::size_t b = 0; b < out.size(); ++b) out[b].metrics = compute_metrics(pred[b], gd[b], num_labels, exclude_label);
  return out;
}

inline std::string buckets_csv(const std::vector<RelevanceBucket>& buckets) {
  std::ostringstream os;
  os << "lo,hi,count,accuracy,precision,recall,f1\n";
  for (const auto& b : buckets)
    os << b.lo << "," << b.hi << "," << b.ids.size() << "," << b.metrics.accuracy << "," << b.metrics.precision << ","
       << b.metrics.recall << "," << b.metrics.f1 << "\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// Probes and entropy

// Softmax regression on standardized features, fitted by full-batch gradient descent.
struct LinearProbe {
  bool fitted = false;
  RowVec mean;
  RowVec scale;
  Mat weight;  // features × classes
  RowVec bias;

  Mat standardize(const Mat& x) const {
    return ((x.rowwise() - mean).array().rowwise() / scale.array()).matrix();
  }

  Mat probabilities(const Mat& x) const {
    if (!fitted) throw ContractViolation("probe has not been fitted");
    Mat logits = (standardize(x) * weight).rowwise() + bias;
    Mat p(logits.rows(), logits.cols());
    for (Eigen::Index i = 0; i < logits.rows(); ++i) p.row(i) = ag::softmax_row_values(logits.row(i));
    return p;
  }
};

inline LinearProbe fit_probe(const Mat& x, const std::vector<int>& labels, int num_classes, int epochs, double lr,
                             double l2) {
  if (x.rows() != static_cast<Eigen::Index>(labels.size())) throw ContractViolation("fit_probe: label count mismatch");
  if (x.rows() == 0) throw ContractViolation("fit_probe: no training rows");
  LinearProbe p;
  p.mean = x.colwise().mean();
  p.scale = ((x.rowwise() - p.mean).array().square().colwise().mean().sqrt() + 1e-8).matrix();
  p.weight = Mat::Zero(x.cols(), num_classes);
  p.bias = RowVec::Zero(num_classes);
  p.fitted = true;
  const Mat xs = p.standardize(x);
  Mat onehot = Mat::Zero(x.rows(), num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) onehot(static_cast<Eigen::Index>(i), labels[i]) = 1.0;
  const double n = static_cast<double>(x.rows());
  for (int e = 0; e < epochs; ++e) {
    Mat g = (p.probabilities(x) - onehot) / n;
    p.weight -= lr * (xs.transpose() * g + l2 * p.weight);
    p.bias -= lr * g.colwise().sum();
  }
  return p;
}

inline double entropy(const RowVec& p) {
  double h = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i)
    if (p(i) > 0.0) h -= p(i) * std::log(p(i));
  return h;
}

inline double mean_entropy(const Mat& probs) {
  if (probs.rows() == 0) return 0.0;
  double acc = 0.0;
  for (Eigen::Index i = 0; i < probs.rows(); ++i) acc += entropy(probs.row(i));
  return acc / static_cast<double>(probs.rows());
}

enum class FeatureStage { kH, kZ, kS };

inline FeatureStage parse_feature_stage(const std::string& s) {
  if (s == "H" || s == "h") return FeatureStage::kH;
  if (s == "z") return FeatureStage::kZ;
  if (s == "s") return FeatureStage::kS;
  throw ConfigError("unknown feature stage '" + s + "'");
}

// Stacks the per-instance features of a stage: mean(H), z, or s.
inline Mat stage_features(const std::vector<InstanceOutput>& outputs, FeatureStage stage) {
  if (outputs.empty()) return Mat();
  auto pick = [&](const InstanceOutput& o) -> const RowVec& {
    switch (stage) {
      case FeatureStage::kH: return o.mean_h;
      case FeatureStage::kZ: return o.z;
      case FeatureStage::kS: return o.s;
    }
    return o.s;
  };
  Mat m(static_cast<Eigen::Index>(outputs.size()), pick(outputs.front()).size());
  for (std::size_t i = 0; i < outputs.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = pick(outputs[i]);
  return m;
}

struct StageProbes {
  LinearProbe h;
  LinearProbe z;
};

inline StageProbes fit_stage_probes(const std::vector<InstanceOutput>& train, int num_classes, const Config& cfg) {
  std::vector<int> gold;
  for (const auto& o : train) gold.push_back(o.gold);
  StageProbes p;
  p.h = fit_probe(stage_features(train, FeatureStage::kH), gold, num_classes, cfg.probe_epochs, cfg.probe_lr, cfg.probe_l2);
  p.z = fit_probe(stage_features(train, FeatureStage::kZ), gold, num_classes, cfg.probe_epochs, cfg.probe_lr, cfg.probe_l2);
  return p;
}

// Mean predictive entropy at a stage. H and z use the fitted probes; s uses
// the model's own relation classifier.
inline double task_entropy(FeatureStage stage, const std::vector<InstanceOutput>& outputs, const StageProbes& probes) {
  switch (stage) {
    case FeatureStage::kH: return mean_entropy(probes.h.probabilities(stage_features(outputs, stage)));
    case FeatureStage::kZ: return mean_entropy(probes.z.probabilities(stage_features(outputs, stage)));
    case FeatureStage::kS: {
      Mat p(static_cast<Eigen::Index>(outputs.size()), outputs.empty() ? 0 : outputs.front().probabilities.size());
      for (std::size_t i = 0; i < outputs.size(); ++i) p.row(static_cast<Eigen::Index>(i)) = outputs[i].probabilities;
      return mean_entropy(p);
    }
  }
  return 0.0;
}

// ---------------------------------------------------------------------------
// Gate quality

// Probability that a random positive outranks a random negative; ties count half.
inline double auc(const std::vector<double>& scores, const std::vector<bool>& positive) {
  if (scores.size() != positive.size()) throw ContractViolation("auc: length mismatch");
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum = 0.0;
  long pos = 0;
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k)
      if (positive[idx[k]]) {
        rank_sum += avg_rank;
        ++pos;
      }
    i = j;
  }
  const long neg = static_cast<long>(scores.size()) - pos;
  if (pos == 0 || neg == 0) throw ContractViolation("auc: need both classes");
  return (rank_sum - 0.5 * static_cast<double>(pos) * static_cast<double>(pos + 1)) /
         (static_cast<double>(pos) * static_cast<double>(neg));
}

// ---------------------------------------------------------------------------
// Topic alignment

inline double total_variation(const RowVec& p, const RowVec& q) { return 0.5 * (p - q).cwiseAbs().sum(); }

// Mean total-variation distance between matched rows under the best row permutation.
inline double aligned_topic_distance(const Mat& learned, const Mat& truth) {
  if (learned.rows() != truth.rows() || learned.cols() != truth.cols())
    throw ContractViolation("aligned_topic_distance: shape mismatch");
  std::vector<int> perm(static_cast<std::size_t>(truth.rows()));
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double acc = 0.0;
    for (std::size_t k = 0; k < perm.size(); ++k)
      acc += total_variation(learned.row(perm[k]), truth.row(static_cast<Eigen::Index>(k)));
    best = std::min(best, acc / static_cast<double>(perm.size()));
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

inline Mat row_softmax(const Mat& m) {
  Mat out(m.rows(), m.cols());
  for (Eigen::Index i = 0; i < m.rows(); ++i) out.row(i) = ag::softmax_row_values(m.row(i));
  return out;
}

// ---------------------------------------------------------------------------
// Trajectory

inline std::string trajectory_report(const TrainingLog& log) {
  std::ostringstream os;
  os.precision(10);
  os << "step,stage,epoch,node_keep_ratio,edge_keep_ratio,f1,mi_proxy\n";
  for (const auto& r : log.records)
    os << r.step << "," << r.stage << "," << r.epoch << "," << r.node_keep << "," << r.edge_keep << "," << r.dev_f1 << ","
       << r.mi_proxy << "\n";
  return os.str();
}

}  // namespace cmggib
