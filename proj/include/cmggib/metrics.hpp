#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cmggib/errors.hpp"

namespace cmggib {

// Micro-averaged precision / recall / F1. With `exclude_label` set, that label
// (the "None" relation) counts neither as a true positive nor as a prediction.
struct MetricsReport {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  long true_positive = 0;
  long predicted_positive = 0;
  long gold_positive = 0;
  Eigen::MatrixXi confusion;  // rows gold, cols predicted
};

inline double f1_score(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

inline MetricsReport compute_metrics(const std::vector<int>& predicted, const std::vector<int>& gold, int num_labels,
                                     int exclude_label = -1) {
  if (predicted.size() != gold.size()) throw ContractViolation("compute_metrics: prediction and gold lengths differ");
  MetricsReport m;
  m.confusion = Eigen::MatrixXi::Zero(num_labels, num_labels);
  long correct = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const int g = gold[i];
    const int p = predicted[i];
    if (g < 0 || g >= num_labels || p < 0 || p >= num_labels) throw ContractViolation("compute_metrics: label out of range");
    ++m.confusion(g, p);
    if (g == p) ++correct;
    if (p != exclude_label) ++m.predicted_positive;
    if (g != exclude_label) ++m.gold_positive;
    if (g == p && g != exclude_label) ++m.true_positive;
  }
  m.accuracy = gold.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(gold.size());
  m.precision = m.predicted_positive > 0 ? static_cast<double>(m.true_positive) / static_cast<double>(m.predicted_positive) : 0.0;
  m.recall = m.gold_positive > 0 ? static_cast<double>(m.true_positive) / static_cast<double>(m.gold_positive) : 0.0;
  m.f1 = f1_score(m.precision, m.recall);
  return m;
}

// Recomputes the scalar metrics from a confusion matrix alone.
inline MetricsReport metrics_from_confusion(const Eigen::MatrixXi& confusion, int exclude_label = -1) {
  MetricsReport m;
  m.confusion = confusion;
  const long total = confusion.sum();
  long correct = 0;
  for (Eigen::Index c = 0; c < confusion.rows(); ++c) {
    correct += confusion(c, c);
    if (c == exclude_label) continue;
    m.true_positive += confusion(c, c);
    m.predicted_positive += confusion.col(c).sum();
    m.gold_positive += confusion.row(c).sum();
  }
  m.accuracy = total > 0 ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
  m.precision = m.predicted_positive > 0 ? static_cast<double>(m.true_positive) / static_cast<double>(m.predicted_positive) : 0.0;
  m.recall = m.gold_positive > 0 ? static_cast<double>(m.true_positive) / static_cast<double>(m.gold_positive) : 0.0;
  m.f1 = f1_score(m.precision, m.recall);
  return m;
}

}  // namespace cmggib
