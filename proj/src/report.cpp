#include "harood/report.hpp"

#include <algorithm>
#include <cstdarg>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

namespace harood {

namespace {

std::string format(const char* fmt, ...) {
  char buf[512];
  va_list args;
  va_start(args, fmt);
  std::vsnprintf(buf, sizeof buf, fmt, args);
  va_end(args);
  return buf;
}

OodMetrics metrics_from_json(const nlohmann::json& j) {
  return {j.at("auroc").get<double>(), j.at("aupr_in").get<double>(), j.at("aupr_out").get<double>(),
          j.at("fpr95").get<double>()};
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw Error("cannot write " + path.string());
  f << text;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else out += c;
  }
  return out;
}

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

}  // namespace

const MethodReport& EvaluationReport::method(std::string_view name) const {
  for (const auto& m : methods)
    if (m.method == name) return m;
  throw Error("report has no method '" + std::string(name) + "'");
}

nlohmann::json to_json(const OodMetrics& m) {
  return {{"auroc", m.auroc}, {"aupr_in", m.aupr_in}, {"aupr_out", m.aupr_out}, {"fpr95", m.fpr95}};
}

nlohmann::json to_json(const EvaluationReport& r) {
  nlohmann::json methods = nlohmann::json::array();
  for (const auto& m : r.methods) {
    nlohmann::json per_class = nlohmann::json::object();
    for (std::size_t c = 0; c < m.per_class.size(); ++c)
      per_class[std::string(to_string(static_cast<SceneKind>(c)))] = to_json(m.per_class[c]);
    methods.push_back({{"method", m.method},
                       {"per_class", per_class},
                       {"average", to_json(m.average)},
                       {"auroc_per_ood_kind", m.auroc_per_ood_kind}});
  }
  nlohmann::json confusion = nlohmann::json::array();
  for (Index i = 0; i < r.classification.confusion.rows(); ++i) {
    std::vector<int> row(r.classification.confusion.cols());
    for (Index k = 0; k < r.classification.confusion.cols(); ++k) row[k] = r.classification.confusion(i, k);
    confusion.push_back(row);
  }
  return {{"seed", r.seed},
          {"n_test_id", r.n_test_id},
          {"n_test_ood", r.n_test_ood},
          {"test_counts", r.test_counts},
          {"methods", methods},
          {"classification",
           {{"per_class_accuracy", r.classification.per_class_accuracy},
            {"average_accuracy", r.classification.average_accuracy},
            {"counts", r.classification.counts},
            {"confusion", confusion}}},
          {"threshold",
           {{"value", r.threshold.value},
            {"target_tpr", r.threshold.target_tpr},
            {"calibration_size", r.threshold.calibration_size},
            {"test_id_tpr", r.test_id_tpr},
            {"test_ood_detected", r.test_ood_detected}}},
          {"reconstruction",
           {{"id_macro_mse", r.mean_id_macro_mse},
            {"id_micro_mse", r.mean_id_micro_mse},
            {"ood_macro_mse", r.mean_ood_macro_mse},
            {"ood_micro_mse", r.mean_ood_micro_mse}}}};
}

EvaluationReport evaluation_report_from_json(const nlohmann::json& j) {
  EvaluationReport r;
  try {
    r.seed = j.at("seed").get<std::uint64_t>();
    r.n_test_id = j.at("n_test_id").get<std::size_t>();
    r.n_test_ood = j.at("n_test_ood").get<std::size_t>();
    r.test_counts = j.at("test_counts").get<std::map<std::string, int>>();
    for (const auto& m : j.at("methods")) {
      MethodReport mr;
      mr.method = m.at("method").get<std::string>();
      for (int c = 0; c < kNumActivityClasses; ++c)
        mr.per_class.push_back(metrics_from_json(m.at("per_class").at(std::string(to_string(static_cast<SceneKind>(c))))));
      mr.average = metrics_from_json(m.at("average"));
      mr.auroc_per_ood_kind = m.at("auroc_per_ood_kind").get<std::map<std::string, double>>();
      r.methods.push_back(std::move(mr));
    }
    const auto& cls = j.at("classification");
    r.classification.per_class_accuracy = cls.at("per_class_accuracy").get<std::vector<double>>();
    r.classification.average_accuracy = cls.at("average_accuracy").get<double>();
    r.classification.counts = cls.at("counts").get<std::vector<int>>();
    const auto rows = cls.at("confusion").get<std::vector<std::vector<int>>>();
    r.classification.confusion = Eigen::MatrixXi::Zero(Index(rows.size()), Index(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t k = 0; k < rows[i].size() && k < rows.size(); ++k) r.classification.confusion(i, k) = rows[i][k];
    const auto& t = j.at("threshold");
    r.threshold = {t.at("value").get<double>(), t.at("target_tpr").get<double>(),
                   t.at("calibration_size").get<std::size_t>()};
    r.test_id_tpr = t.at("test_id_tpr").get<double>();
    r.test_ood_detected = t.at("test_ood_detected").get<double>();
    const auto& rec = j.at("reconstruction");
    r.mean_id_macro_mse = rec.at("id_macro_mse").get<double>();
    r.mean_id_micro_mse = rec.at("id_micro_mse").get<double>();
    r.mean_ood_macro_mse = rec.at("ood_macro_mse").get<double>();
    r.mean_ood_micro_mse = rec.at("ood_micro_mse").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed evaluation report: ") + e.what());
  }
  return r;
}

std::string render_text(const EvaluationReport& r) {
  std::ostringstream out;
  out << "OOD detection (percent; FPR95 lower is better)\n";
  out << format("%-10s %-8s %8s %8s %9s %8s\n", "ID class", "method", "AUROC", "AUPR_IN", "AUPR_OUT", "FPR95");
  auto row = [&](const std::string& cls, const std::string& method, const OodMetrics& m) {
    out << format("%-10s %-8s %8.2f %8.2f %9.2f %8.2f\n", cls.c_str(), method.c_str(), 100 * m.auroc,
                  100 * m.aupr_in, 100 * m.aupr_out, 100 * m.fpr95);
  };
  for (int c = 0; c < kNumActivityClasses; ++c)
    for (const auto& m : r.methods) row(std::string(to_string(static_cast<SceneKind>(c))), m.method, m.per_class[c]);
  for (const auto& m : r.methods) row("average", m.method, m.average);

  out << "\nActivity classification accuracy (percent)\n";
  for (int c = 0; c < kNumActivityClasses; ++c) out << format("%8s", std::string(to_string(static_cast<SceneKind>(c))).c_str());
  out << format("%9s\n", "average");
  for (double a : r.classification.per_class_accuracy) out << format("%8.2f", 100 * a);
  out << format("%9.2f\n", 100 * r.classification.average_accuracy);

  out << "\nConfusion matrix (rows = true, columns = predicted)\n" << format("%8s", "");
  for (int c = 0; c < kNumActivityClasses; ++c) out << format("%8s", std::string(to_string(static_cast<SceneKind>(c))).c_str());
  out << '\n';
  for (Index i = 0; i < r.classification.confusion.rows(); ++i) {
    out << format("%8s", std::string(to_string(static_cast<SceneKind>(i))).c_str());
    for (Index k = 0; k < r.classification.confusion.cols(); ++k) out << format("%8d", r.classification.confusion(i, k));
    out << '\n';
  }

  out << format("\nThreshold %.6g at target ID TPR %.2f (%zu calibration samples): test ID TPR %.4f, OOD detected %.4f\n",
                r.threshold.value, r.threshold.target_tpr, r.threshold.calibration_size, r.test_id_tpr,
                r.test_ood_detected);
  out << format("Mean reconstruction MSE  ID: macro %.6g micro %.6g  OOD: macro %.6g micro %.6g\n",
                r.mean_id_macro_mse, r.mean_id_micro_mse, r.mean_ood_macro_mse, r.mean_ood_micro_mse);
  out << format("Test samples: %zu ID, %zu OOD\n", r.n_test_id, r.n_test_ood);
  return out.str();
}

nlohmann::json to_json(const TimingStats& t) {
  return {{"n_samples", t.n_samples},       {"repeats", t.repeats},         {"mean_seconds", t.mean_seconds},
          {"stddev_seconds", t.stddev_seconds}, {"min_seconds", t.min_seconds}, {"max_seconds", t.max_seconds}};
}

Curve roc_curve(std::span<const double> id_scores, std::span<const double> ood_scores) {
  std::vector<std::pair<double, bool>> all;
  for (double s : id_scores) all.emplace_back(s, false);
  for (double s : ood_scores) all.emplace_back(s, true);
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  Curve c;
  c.x.push_back(0);
  c.y.push_back(0);
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    for (; j < all.size() && all[j].first == all[i].first; ++j) (all[j].second ? tp : fp) += 1;
    c.x.push_back(double(fp) / double(id_scores.size()));
    c.y.push_back(double(tp) / double(ood_scores.size()));
    i = j;
  }
  return c;
}

Curve pr_curve(std::span<const double> id_scores, std::span<const double> ood_scores) {
  const Curve roc = roc_curve(id_scores, ood_scores);
  Curve c;
  for (std::size_t i = 1; i < roc.x.size(); ++i) {
    const double tp = roc.y[i] * double(ood_scores.size()), fp = roc.x[i] * double(id_scores.size());
    c.x.push_back(roc.y[i]);
    c.y.push_back(tp + fp > 0 ? tp / (tp + fp) : 1.0);
  }
  return c;
}

void write_curve_svg(const std::filesystem::path& path, const std::string& title, const std::string& x_label,
                     const std::string& y_label, std::span<const Curve> curves) {
  constexpr double w = 480, h = 420, left = 60, top = 40, size = 340;
  std::ostringstream svg;
  svg << format("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%g\" height=\"%g\" font-family=\"sans-serif\" "
                "font-size=\"12\">\n",
                w, h);
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << format("<text x=\"%g\" y=\"24\" font-size=\"15\">%s</text>\n", left, escape(title).c_str());
  svg << format("<rect x=\"%g\" y=\"%g\" width=\"%g\" height=\"%g\" fill=\"none\" stroke=\"black\"/>\n", left, top,
                size, size);
  for (int t = 0; t <= 4; ++t) {
    const double v = t / 4.0;
    svg << format("<text x=\"%g\" y=\"%g\" text-anchor=\"middle\">%.2f</text>\n", left + v * size, top + size + 16, v);
    svg << format("<text x=\"%g\" y=\"%g\" text-anchor=\"end\">%.2f</text>\n", left - 6, top + size - v * size + 4, v);
  }
  svg << format("<text x=\"%g\" y=\"%g\" text-anchor=\"middle\">%s</text>\n", left + size / 2, top + size + 34,
                escape(x_label).c_str());
  svg << format("<text x=\"14\" y=\"%g\" transform=\"rotate(-90 14 %g)\" text-anchor=\"middle\">%s</text>\n",
                top + size / 2, top + size / 2, escape(y_label).c_str());
  for (std::size_t i = 0; i < curves.size(); ++i) {
    const char* color = kPalette[i % std::size(kPalette)];
    svg << format("<polyline fill=\"none\" stroke=\"%s\" stroke-width=\"1.5\" points=\"", color);
    for (std::size_t k = 0; k < curves[i].x.size(); ++k)
      svg << format("%.2f,%.2f ", left + curves[i].x[k] * size, top + size - curves[i].y[k] * size);
    svg << "\"/>\n";
    svg << format("<text x=\"%g\" y=\"%g\" fill=\"%s\">%s</text>\n", left + size + 8, top + 16 + 16.0 * i, color,
                  escape(curves[i].label).c_str());
  }
  svg << "</svg>\n";
  write_text(path, svg.str());
}

void write_confusion_svg(const std::filesystem::path& path, const Eigen::MatrixXi& confusion,
                         std::span<const std::string> class_names) {
  const Index n = confusion.rows();
  constexpr double cell = 80, left = 90, top = 50;
  std::ostringstream svg;
  svg << format("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%g\" height=\"%g\" font-family=\"sans-serif\" "
                "font-size=\"13\">\n",
                left + cell * n + 20, top + cell * n + 50);
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"10\" y=\"24\" font-size=\"15\">Confusion matrix (rows true, columns predicted)</text>\n";
  for (Index i = 0; i < n; ++i) {
    const double row_total = std::max(1, confusion.row(i).sum());
    for (Index k = 0; k < n; ++k) {
      const double frac = confusion(i, k) / row_total;
      const int shade = static_cast<int>(255 - 200 * frac);
      svg << format("<rect x=\"%g\" y=\"%g\" width=\"%g\" height=\"%g\" fill=\"rgb(%d,%d,255)\" stroke=\"black\"/>\n",
                    left + k * cell, top + i * cell, cell, cell, shade, shade);
      svg << format("<text x=\"%g\" y=\"%g\" text-anchor=\"middle\">%d</text>\n", left + (k + 0.5) * cell,
                    top + (i + 0.5) * cell + 5, confusion(i, k));
    }
    const std::string name = i < Index(class_names.size()) ? escape(class_names[i]) : std::to_string(i);
    svg << format("<text x=\"%g\" y=\"%g\" text-anchor=\"end\">%s</text>\n", left - 8, top + (i + 0.5) * cell + 5,
                  name.c_str());
    svg << format("<text x=\"%g\" y=\"%g\" text-anchor=\"middle\">%s</text>\n", left + (i + 0.5) * cell,
                  top + n * cell + 20, name.c_str());
  }
  svg << "</svg>\n";
  write_text(path, svg.str());
}

}  // namespace harood
