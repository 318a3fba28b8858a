#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "harood/metrics.hpp"
#include "harood/ood.hpp"

namespace harood {

/// Detection metrics of one scoring method (higher score = more OOD).
struct MethodReport {
  std::string method;
  std::vector<OodMetrics> per_class;  // one entry per ID class
  OodMetrics average;
  std::map<std::string, double> auroc_per_ood_kind;  // all ID vs one OOD kind
};

struct EvaluationReport {
  std::uint64_t seed = 0;
  std::size_t n_test_id = 0;
  std::size_t n_test_ood = 0;
  std::map<std::string, int> test_counts;  // by scene kind
  std::vector<MethodReport> methods;       // HAROOD first
  ClassificationReport classification;
  Threshold threshold;
  double test_id_tpr = 0;        // ID test samples at or below the threshold
  double test_ood_detected = 0;  // OOD test samples above the threshold
  double mean_id_macro_mse = 0, mean_id_micro_mse = 0;
  double mean_ood_macro_mse = 0, mean_ood_micro_mse = 0;

  const MethodReport& method(std::string_view name) const;
};

nlohmann::json to_json(const OodMetrics& m);
nlohmann::json to_json(const EvaluationReport& r);
EvaluationReport evaluation_report_from_json(const nlohmann::json& j);

/// Detection table (AUROC, AUPR_IN, AUPR_OUT, FPR95 per ID class and method)
/// followed by the per-class accuracy table and the confusion matrix.
std::string render_text(const EvaluationReport& r);

nlohmann::json to_json(const TimingStats& t);

// Static SVG plots.
struct Curve {
  std::string label;
  std::vector<double> x, y;
};

/// ROC curve of scores (higher = more OOD, OOD positive).
Curve roc_curve(std::span<const double> id_scores, std::span<const double> ood_scores);
/// Precision-recall curve with OOD as the positive class.
Curve pr_curve(std::span<const double> id_scores, std::span<const double> ood_scores);

void write_curve_svg(const std::filesystem::path& path, const std::string& title, const std::string& x_label,
                     const std::string& y_label, std::span<const Curve> curves);
void write_confusion_svg(const std::filesystem::path& path, const Eigen::MatrixXi& confusion,
                         std::span<const std::string> class_names);

}  // namespace harood
