#include "spaloc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>

namespace spaloc {

void ClassCounts::add(const Scored& s, double threshold) {
  const bool predicted = s.score >= threshold;
  if (s.positive) {
    positives += s.weight;
    if (predicted) true_positives += s.weight;
  } else {
    negatives += s.weight;
    if (!predicted) true_negatives += s.weight;
  }
}

void ClassCounts::merge(const ClassCounts& o) {
  positives += o.positives;
  negatives += o.negatives;
  true_positives += o.true_positives;
  true_negatives += o.true_negatives;
}

double ClassCounts::balanced_accuracy() const {
  double sum = 0;
  int classes = 0;
  if (positives > 0) {
    sum += true_positives / positives;
    ++classes;
  }
  if (negatives > 0) {
    sum += true_negatives / negatives;
    ++classes;
  }
  if (classes == 0) throw EmptyEvaluationError("balanced accuracy over an empty set");
  return 100.0 * sum / classes;
}

double balanced_accuracy(std::span<const Scored> items, double threshold) {
  ClassCounts c;
  for (const auto& s : items) c.add(s, threshold);
  return c.balanced_accuracy();
}

double auc_pr(std::vector<Scored> items) {
  double total_pos = 0;
  for (const auto& s : items)
    if (s.positive) total_pos += s.weight;
  if (total_pos <= 0) throw EmptyEvaluationError("AUC-PR needs at least one positive");
  std::sort(items.begin(), items.end(), [](const Scored& a, const Scored& b) { return a.score > b.score; });
  double tp = 0, fp = 0;
  double prev_recall = 0, prev_precision = 1;
  double area = 0;
  for (std::size_t i = 0; i < items.size();) {
    std::size_t j = i;
    for (; j < items.size() && items[j].score == items[i].score; ++j) {
      if (items[j].positive) tp += items[j].weight;
      else fp += items[j].weight;
    }
    i = j;
    if (tp + fp <= 0) continue;
    const double recall = tp / total_pos;
    const double precision = tp / (tp + fp);
    area += (recall - prev_recall) * (precision + prev_precision) / 2;
    prev_recall = recall;
    prev_precision = precision;
  }
  return 100.0 * area;
}

double hit_at_k(std::span<const double> positive_scores, std::span<const std::vector<double>> negative_scores,
                int k) {
  if (positive_scores.empty()) throw EmptyEvaluationError("Hit@k over no positives");
  if (positive_scores.size() != negative_scores.size())
    throw std::invalid_argument("hit_at_k: one negative list per positive");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < positive_scores.size(); ++i) {
    const auto& neg = negative_scores[i];
    const auto above = std::count_if(neg.begin(), neg.end(), [&](double s) { return s >= positive_scores[i]; });
    if (above + 1 <= k) ++hits;
  }
  return 100.0 * static_cast<double>(hits) / static_cast<double>(positive_scores.size());
}

namespace {

void put(std::ostream& os, double v) {
  if (std::isnan(v)) return;
  os << std::fixed << std::setprecision(4) << v << std::defaultfloat;
}

}  // namespace

void write_metrics_header(std::ostream& os, bool timing) {
  os << "epoch,split,loss,accuracy,auc_pr,hit10,density_percent,peak_bytes";
  if (timing) os << ",seconds_per_sample";
  os << '\n';
}

void write_metrics_row(std::ostream& os, const MetricsRow& r, bool timing) {
  os << r.epoch << ',' << r.split << ',';
  put(os, r.loss);
  os << ',';
  put(os, r.accuracy);
  os << ',';
  put(os, r.auc_pr);
  os << ',';
  put(os, r.hit10);
  os << ',';
  put(os, r.density_percent);
  os << ',' << r.peak_bytes;
  if (timing) {
    os << ',' << std::scientific << std::setprecision(4) << r.seconds_per_sample << std::defaultfloat;
  }
  os << '\n';
}

}  // namespace spaloc
