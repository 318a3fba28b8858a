#include "harood/ood.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace harood {

OodScore combine_ood_score(double macro_mse, double micro_mse) {
  if (!(macro_mse >= 0) || !(micro_mse >= 0)) throw NumericalError("reconstruction MSE must be finite and >= 0");
  return {kMacroWeight * macro_mse + kMicroWeight * micro_mse, macro_mse, micro_mse};
}

OodScore harood_score(const HaroodNetwork<float>& network, const SampleRecord& sample) {
  return harood_score<float>(network, sample.macro.values, sample.micro.values);
}

Threshold calibrate_threshold(std::span<const double> id_scores, double target_tpr) {
  if (id_scores.empty()) throw Error("threshold calibration needs ID scores");
  if (!(target_tpr > 0) || target_tpr > 1) throw ConfigError("target TPR must be in (0, 1]");
  std::vector<double> sorted(id_scores.begin(), id_scores.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = double(sorted.size());
  // Tolerance keeps e.g. 0.95 * 100 from rounding up to 96.
  const auto k = static_cast<std::size_t>(std::max(1.0, std::ceil(target_tpr * n - 1e-9)));
  return {sorted[k - 1], target_tpr, sorted.size()};
}

double msp_score(const Vector<double>& logits) { return softmax(logits).maxCoeff(); }

double maxlogit_score(const Vector<double>& logits) { return logits.maxCoeff(); }

double energy_score(const Vector<double>& logits, double temperature) {
  if (!(temperature > 0)) throw ConfigError("energy temperature must be positive");
  return temperature * log_sum_exp(logits / temperature);
}

void write_scores(const std::filesystem::path& path, std::span<const std::uint32_t> ids,
                  std::span<const double> scores) {
  if (ids.size() != scores.size()) throw ShapeMismatch("score and id counts differ");
  std::ofstream f(path);
  if (!f) throw Error("cannot write " + path.string());
  f.precision(17);
  for (std::size_t i = 0; i < ids.size(); ++i) f << ids[i] << ' ' << scores[i] << '\n';
}

std::pair<std::vector<std::uint32_t>, std::vector<double>> read_scores(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw Error("score file not found: " + path.string());
  std::pair<std::vector<std::uint32_t>, std::vector<double>> out;
  std::string line;
  int line_no = 0;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream in(line);
    std::uint32_t id = 0;
    double score = 0;
    if (!(in >> id >> score)) throw FormatError(path.string() + ":" + std::to_string(line_no) + ": bad score line");
    out.first.push_back(id);
    out.second.push_back(score);
  }
  return out;
}

}  // namespace harood
