#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "harood/types.hpp"

namespace harood {

/// P(ood > id) + P(tie) / 2 via the rank statistic. Higher score = more OOD.
double auroc(std::span<const double> id_scores, std::span<const double> ood_scores);

/// Step-interpolated area under the precision-recall curve; `positive[i]`
/// is 1 for positives, and higher scores rank first.
double aupr(std::span<const double> scores, std::span<const int> positive);

/// FPR of ID samples at the lowest threshold whose OOD recall reaches `tpr`
/// (an ID score counts as a false positive when >= threshold).
double fpr_at_tpr(std::span<const double> id_scores, std::span<const double> ood_scores, double tpr = 0.95);

struct OodMetrics {
  double auroc = 0;
  double aupr_in = 0;
  double aupr_out = 0;
  double fpr95 = 0;
};

/// All four detection metrics; ID positives for AUPR_IN use the negated score.
OodMetrics ood_metrics(std::span<const double> id_scores, std::span<const double> ood_scores);

struct ClassificationReport {
  std::vector<double> per_class_accuracy;
  double average_accuracy = 0;
  /// confusion(true, predicted)
  Eigen::MatrixXi confusion;
  std::vector<int> counts;
};

ClassificationReport classification_report(std::span<const int> predictions, std::span<const int> labels,
                                           int n_classes = kNumActivityClasses);

struct TimingStats {
  std::size_t n_samples = 0;
  int repeats = 0;
  double mean_seconds = 0;
  double stddev_seconds = 0;
  double min_seconds = 0;
  double max_seconds = 0;
};

/// Wall time to evaluate all n_samples (eval(i) for each i), repeated.
TimingStats measure_test_time(const std::function<void(std::size_t)>& eval, std::size_t n_samples,
                              int repeats = 3);

}  // namespace harood
