#include "harood/metrics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

namespace harood {

double auroc(std::span<const double> id_scores, std::span<const double> ood_scores) {
  if (id_scores.empty() || ood_scores.empty()) throw Error("AUROC needs ID and OOD scores");
  struct Item {
    double score;
    bool ood;
  };
  std::vector<Item> all;
  all.reserve(id_scores.size() + ood_scores.size());
  for (double s : id_scores) all.push_back({s, false});
  for (double s : ood_scores) all.push_back({s, true});
  std::sort(all.begin(), all.end(), [](const Item& a, const Item& b) { return a.score < b.score; });

  // Mann-Whitney U from average ranks of the OOD scores.
  double rank_sum = 0;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    while (j < all.size() && all[j].score == all[i].score) ++j;
    const double avg_rank = 0.5 * double(i + 1 + j);
    for (std::size_t k = i; k < j; ++k)
      if (all[k].ood) rank_sum += avg_rank;
    i = j;
  }
  const double n_ood = double(ood_scores.size()), n_id = double(id_scores.size());
  return (rank_sum - n_ood * (n_ood + 1) / 2) / (n_ood * n_id);
}

double aupr(std::span<const double> scores, std::span<const int> positive) {
  if (scores.size() != positive.size()) throw ShapeMismatch("score and label counts differ");
  const auto n_pos = std::count_if(positive.begin(), positive.end(), [](int p) { return p != 0; });
  if (n_pos == 0) throw Error("AUPR needs at least one positive");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  double area = 0, prev_recall = 0;
  std::size_t tp = 0, seen = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      tp += positive[order[j]] != 0;
      ++j;
    }
    seen = j;
    const double recall = double(tp) / double(n_pos);
    const double precision = double(tp) / double(seen);
    area += (recall - prev_recall) * precision;
    prev_recall = recall;
    i = j;
  }
  return area;
}

double fpr_at_tpr(std::span<const double> id_scores, std::span<const double> ood_scores, double tpr) {
  if (id_scores.empty() || ood_scores.empty()) throw Error("FPR needs ID and OOD scores");
  if (!(tpr > 0) || tpr > 1) throw ConfigError("TPR must be in (0, 1]");
  std::vector<double> ood(ood_scores.begin(), ood_scores.end());
  std::sort(ood.begin(), ood.end(), std::greater<>());
  const auto k = static_cast<std::size_t>(std::max(1.0, std::ceil(tpr * double(ood.size()) - 1e-9)));
  const double threshold = ood[k - 1];
  const auto fp = std::count_if(id_scores.begin(), id_scores.end(), [&](double s) { return s >= threshold; });
  return double(fp) / double(id_scores.size());
}

OodMetrics ood_metrics(std::span<const double> id_scores, std::span<const double> ood_scores) {
  OodMetrics m;
  m.auroc = auroc(id_scores, ood_scores);
  std::vector<double> scores(id_scores.begin(), id_scores.end());
  scores.insert(scores.end(), ood_scores.begin(), ood_scores.end());
  std::vector<int> is_ood(scores.size(), 0), is_id(scores.size(), 1);
  for (std::size_t i = id_scores.size(); i < scores.size(); ++i) {
    is_ood[i] = 1;
    is_id[i] = 0;
  }
  std::vector<double> negated(scores.size());
  std::transform(scores.begin(), scores.end(), negated.begin(), [](double s) { return -s; });
  m.aupr_in = aupr(negated, is_id);
  m.aupr_out = aupr(scores, is_ood);
  m.fpr95 = fpr_at_tpr(id_scores, ood_scores, 0.95);
  return m;
}

ClassificationReport classification_report(std::span<const int> predictions, std::span<const int> labels,
                                           int n_classes) {
  if (predictions.size() != labels.size()) throw ShapeMismatch("prediction and label counts differ");
  ClassificationReport r;
  r.confusion = Eigen::MatrixXi::Zero(n_classes, n_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= n_classes || predictions[i] < 0 || predictions[i] >= n_classes)
      throw Error("class index out of range");
    ++r.confusion(labels[i], predictions[i]);
  }
  r.counts.resize(std::size_t(n_classes));
  r.per_class_accuracy.resize(std::size_t(n_classes));
  for (int c = 0; c < n_classes; ++c) {
    r.counts[c] = r.confusion.row(c).sum();
    r.per_class_accuracy[c] = r.counts[c] ? double(r.confusion(c, c)) / r.counts[c] : 0.0;
  }
  r.average_accuracy =
      std::accumulate(r.per_class_accuracy.begin(), r.per_class_accuracy.end(), 0.0) / double(n_classes);
  return r;
}

TimingStats measure_test_time(const std::function<void(std::size_t)>& eval, std::size_t n_samples, int repeats) {
  if (repeats < 1) throw ConfigError("timing needs at least one repeat");
  std::vector<double> runs;
  for (int r = 0; r < repeats; ++r) {
    const auto start = std::chrono::steady_clock::now();
    for (std::size_t i = 0; i < n_samples; ++i) eval(i);
    runs.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
  }
  TimingStats t;
  t.n_samples = n_samples;
  t.repeats = repeats;
  t.mean_seconds = std::accumulate(runs.begin(), runs.end(), 0.0) / repeats;
  double var = 0;
  for (double x : runs) var += (x - t.mean_seconds) * (x - t.mean_seconds);
  t.stddev_seconds = repeats > 1 ? std::sqrt(var / (repeats - 1)) : 0.0;
  t.min_seconds = *std::min_element(runs.begin(), runs.end());
  t.max_seconds = *std::max_element(runs.begin(), runs.end());
  return t;
}

}  // namespace harood
