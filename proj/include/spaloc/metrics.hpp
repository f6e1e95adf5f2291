#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace spaloc {

struct EmptyEvaluationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A prediction score standing for `weight` tuples with the same label.
/// Weights let tuples missing from a sparse output share one entry.
struct Scored {
  double score = 0;
  bool positive = false;
  double weight = 1;
};

/// Class-conditional hit counts at a threshold.
struct ClassCounts {
  double positives = 0;
  double negatives = 0;
  double true_positives = 0;
  double true_negatives = 0;

  void add(const Scored& s, double threshold = 0.5);
  void merge(const ClassCounts& o);
  /// Mean of positive-class and negative-class accuracy in percent. A class
  /// with no members is left out; throws EmptyEvaluationError if both are empty.
  double balanced_accuracy() const;
};

double balanced_accuracy(std::span<const Scored> items, double threshold = 0.5);

/// Area under the precision-recall curve in percent, trapezoidal in recall,
/// starting from (recall 0, precision 1). Tied scores form one curve point.
/// Throws EmptyEvaluationError without positives.
double auc_pr(std::vector<Scored> items);

/// Fraction (percent) of positives ranked within the top k among their own
/// negatives; ties count against the positive.
double hit_at_k(std::span<const double> positive_scores,
                std::span<const std::vector<double>> negative_scores, int k = 10);

/// One line of the metrics CSV. Optional fields are NaN when not measured.
struct MetricsRow {
  int epoch = 0;
  std::string split;
  double loss = 0;
  double accuracy = 0;
  double auc_pr = 0;
  double hit10 = 0;
  double density_percent = 0;
  std::int64_t peak_bytes = 0;
  double seconds_per_sample = 0;
};

/// Columns epoch,split,loss,accuracy,auc_pr,hit10,density_percent,peak_bytes
/// and, with `timing`, seconds_per_sample. Timing is kept out of the default
/// schema so that reruns with one seed produce identical files.
void write_metrics_header(std::ostream& os, bool timing = false);
void write_metrics_row(std::ostream& os, const MetricsRow& row, bool timing = false);

}  // namespace spaloc
