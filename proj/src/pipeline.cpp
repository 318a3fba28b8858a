#include "harood/pipeline.hpp"

#include <fstream>
#include <map>

#include "harood/checkpoint.hpp"

namespace harood {

namespace {

struct Inference {
  OodScore score;
  Vector<double> logits;
};

Inference infer(const HaroodNetwork<float>& net, const SampleRecord& r) {
  const Matrix<float> rm = net.reconstruct(r.macro.values, RdiVariant::macro);
  const Matrix<float> ru = net.reconstruct(r.micro.values, RdiVariant::micro);
  Inference out;
  out.score = combine_ood_score(image_mse(r.macro.values, rm), image_mse(r.micro.values, ru));
  out.logits = net.classify(net.trace_head(rm, ru).embedding).cast<double>();
  if (!out.logits.allFinite() || !std::isfinite(out.score.value)) throw NumericalError("non-finite inference output");
  return out;
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream f(path);
  if (!f) throw Error("cannot write " + path.string());
  f << j.dump(2) << '\n';
}

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw Error("file not found: " + path.string());
  try {
    return nlohmann::json::parse(f);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

OodMetrics mean_metrics(const std::vector<OodMetrics>& per_class) {
  OodMetrics m;
  for (const auto& c : per_class) {
    m.auroc += c.auroc;
    m.aupr_in += c.aupr_in;
    m.aupr_out += c.aupr_out;
    m.fpr95 += c.fpr95;
  }
  const double n = double(per_class.size());
  return {m.auroc / n, m.aupr_in / n, m.aupr_out / n, m.fpr95 / n};
}

// Scores are oriented so that higher = more OOD.
MethodReport method_report(const std::string& name, std::span<const double> scores,
                           std::span<const SampleRecord> test) {
  MethodReport m;
  m.method = name;
  std::vector<double> ood, all_id;
  std::map<SceneKind, std::vector<double>> by_kind;
  for (std::size_t i = 0; i < test.size(); ++i) {
    by_kind[test[i].label].push_back(scores[i]);
    (is_in_distribution(test[i].label) ? all_id : ood).push_back(scores[i]);
  }
  for (int c = 0; c < kNumActivityClasses; ++c) {
    const auto& id = by_kind[static_cast<SceneKind>(c)];
    if (id.empty()) throw Error("test split has no samples of class " + std::string(to_string(static_cast<SceneKind>(c))));
    m.per_class.push_back(ood_metrics(id, ood));
  }
  m.average = mean_metrics(m.per_class);
  for (const auto& [kind, s] : by_kind)
    if (!is_in_distribution(kind)) m.auroc_per_ood_kind[std::string(to_string(kind))] = auroc(all_id, s);
  return m;
}

}  // namespace

std::filesystem::path dataset_dir(const RunConfig& config) { return config.out / "dataset"; }
std::filesystem::path model_dir(const RunConfig& config) { return config.out / "model"; }
std::filesystem::path eval_dir(const RunConfig& config) { return config.out / "eval"; }

DatasetManifest cmd_simulate(const RunConfig& config, int workers) {
  const auto dir = dataset_dir(config);
  std::filesystem::create_directories(dir);
  write_config_snapshot(config, dir);
  return build_dataset(config.dataset, config.radar, config.preprocess, dir, config.dataset_seed(), workers);
}

TrainingLog cmd_train(const RunConfig& config, int workers) {
  const auto manifest_path = dataset_dir(config) / "manifest.json";
  if (!std::filesystem::exists(manifest_path)) throw Error("dataset not found: " + manifest_path.string());
  const TrainingData data = load_training_data(load_manifest(manifest_path));
  if (data.train.front().macro.values.rows() != config.model.image_rows ||
      data.train.front().macro.values.cols() != config.model.image_cols)
    throw ConfigError("model image size does not match the dataset");

  const auto dir = model_dir(config);
  std::filesystem::create_directories(dir);
  write_config_snapshot(config, dir);

  HaroodNetwork<float> network(config.model);
  network.initialize(config.init_seed());
  TrainingLog log;
  log.seed = config.seed;
  log.config_snapshot = run_config_to_json(config);

  Stage1Schedule s1 = config.stage1;
  s1.seed = config.stage1_seed();
  train_stage1(network, data, s1, log, workers);
  save_checkpoint(network, dir / "stage1.ckpt");

  Stage2Schedule s2 = config.stage2;
  s2.seed = config.stage2_seed();
  train_stage2(network, data, s2, log, workers);
  save_checkpoint(network, dir / "harood.ckpt");
  write_json(dir / "training_log.json", log.to_json());
  return log;
}

EvaluationReport cmd_evaluate(const RunConfig& config, const std::optional<std::filesystem::path>& checkpoint,
                              int workers) {
  const auto ckpt = checkpoint.value_or(model_dir(config) / "harood.ckpt");
  if (!std::filesystem::is_regular_file(ckpt)) throw Error("checkpoint not found: " + ckpt.string());
  const HaroodNetwork<float> net = load_checkpoint(ckpt);
  const auto manifest_path = dataset_dir(config) / "manifest.json";
  if (!std::filesystem::exists(manifest_path)) throw Error("dataset not found: " + manifest_path.string());
  const DatasetManifest manifest = load_manifest(manifest_path);
  const std::vector<SampleRecord> calibration = read_samples(manifest, Split::calibration);
  const std::vector<SampleRecord> test = read_samples(manifest, Split::test);
  if (calibration.empty() || test.empty()) throw Error("calibration and test splits must be non-empty");

  const auto dir = eval_dir(config);
  std::filesystem::create_directories(dir);
  write_config_snapshot(config, dir);

  std::vector<double> calibration_scores(calibration.size());
  parallel_for(calibration.size(), workers,
               [&](std::size_t i) { calibration_scores[i] = harood_score(net, calibration[i]).value; });
  std::vector<Inference> results(test.size());
  parallel_for(test.size(), workers, [&](std::size_t i) { results[i] = infer(net, test[i]); });

  EvaluationReport report;
  report.seed = config.seed;
  report.threshold = calibrate_threshold(calibration_scores, config.evaluation.target_tpr);

  std::vector<std::uint32_t> ids(test.size());
  std::vector<double> harood(test.size());
  std::vector<int> predictions, labels;
  std::size_t id_accepted = 0, ood_flagged = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    ids[i] = test[i].id;
    harood[i] = results[i].score.value;
    ++report.test_counts[std::string(to_string(test[i].label))];
    const bool flagged = detect(results[i].score, report.threshold) == Decision::ood;
    if (is_in_distribution(test[i].label)) {
      ++report.n_test_id;
      id_accepted += !flagged;
      report.mean_id_macro_mse += results[i].score.macro_mse;
      report.mean_id_micro_mse += results[i].score.micro_mse;
      Index predicted = 0;
      results[i].logits.maxCoeff(&predicted);
      predictions.push_back(int(predicted));
      labels.push_back(int(test[i].label));
    } else {
      ++report.n_test_ood;
      ood_flagged += flagged;
      report.mean_ood_macro_mse += results[i].score.macro_mse;
      report.mean_ood_micro_mse += results[i].score.micro_mse;
    }
  }
  if (report.n_test_id == 0 || report.n_test_ood == 0) throw Error("test split needs ID and OOD samples");
  report.test_id_tpr = double(id_accepted) / double(report.n_test_id);
  report.test_ood_detected = double(ood_flagged) / double(report.n_test_ood);
  report.mean_id_macro_mse /= double(report.n_test_id);
  report.mean_id_micro_mse /= double(report.n_test_id);
  report.mean_ood_macro_mse /= double(report.n_test_ood);
  report.mean_ood_micro_mse /= double(report.n_test_ood);
  report.classification = classification_report(predictions, labels, net.n_classes());

  std::vector<std::pair<std::string, std::vector<double>>> methods{{"harood", harood}};
  for (Baseline b : config.baselines) {
    std::vector<double> s(test.size());
    switch (b) {
      case Baseline::msp:
        for (std::size_t i = 0; i < test.size(); ++i) s[i] = -msp_score(results[i].logits);
        break;
      case Baseline::maxlogit:
        for (std::size_t i = 0; i < test.size(); ++i) s[i] = -maxlogit_score(results[i].logits);
        break;
      case Baseline::energy:
        for (std::size_t i = 0; i < test.size(); ++i)
          s[i] = -energy_score(results[i].logits, config.evaluation.energy_temperature);
        break;
      case Baseline::odin:
        parallel_for(test.size(), workers, [&](std::size_t i) {
          s[i] = -odin_score<float>(net, test[i].macro.values, test[i].micro.values, config.evaluation.odin);
        });
        break;
    }
    methods.emplace_back(std::string(to_string(b)), std::move(s));
  }
  for (const auto& [name, scores] : methods) {
    report.methods.push_back(method_report(name, scores, test));
    write_scores(dir / ("scores_" + name + ".txt"), ids, scores);
  }

  {
    std::ofstream f(dir / "test_labels.txt");
    if (!f) throw Error("cannot write test labels");
    for (const auto& r : test) f << r.id << ' ' << to_string(r.label) << '\n';
  }
  write_json(dir / "report.json", to_json(report));
  {
    std::ofstream f(dir / "report.txt");
    if (!f) throw Error("cannot write report.txt");
    f << render_text(report);
  }

  const TimingStats timing = measure_test_time([&](std::size_t i) { infer(net, test[i]); }, test.size(),
                                               config.evaluation.timing_repeats);
  write_json(dir / "timing.json", to_json(timing));
  return report;
}

std::vector<std::filesystem::path> cmd_report(const RunConfig& config) {
  const auto dir = eval_dir(config);
  const EvaluationReport report = evaluation_report_from_json(read_json(dir / "report.json"));

  std::map<std::uint32_t, SceneKind> label_of;
  {
    std::ifstream f(dir / "test_labels.txt");
    if (!f) throw Error("file not found: " + (dir / "test_labels.txt").string());
    std::uint32_t id = 0;
    std::string kind;
    while (f >> id >> kind) label_of[id] = scene_kind_from_string(kind);
  }

  std::vector<Curve> roc, pr;
  for (const auto& m : report.methods) {
    const auto [ids, scores] = read_scores(dir / ("scores_" + m.method + ".txt"));
    std::vector<double> id_scores, ood_scores;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      const auto it = label_of.find(ids[i]);
      if (it == label_of.end()) throw FormatError("score for unknown sample id " + std::to_string(ids[i]));
      (is_in_distribution(it->second) ? id_scores : ood_scores).push_back(scores[i]);
    }
    Curve r = roc_curve(id_scores, ood_scores);
    r.label = m.method + " (AUROC " + std::to_string(auroc(id_scores, ood_scores)).substr(0, 5) + ")";
    roc.push_back(std::move(r));
    Curve p = pr_curve(id_scores, ood_scores);
    p.label = m.method;
    pr.push_back(std::move(p));
  }

  const auto plots = dir / "plots";
  std::filesystem::create_directories(plots);
  std::vector<std::filesystem::path> out{plots / "roc.svg", plots / "pr.svg", plots / "confusion.svg"};
  write_curve_svg(out[0], "ROC, all ID vs all OOD test samples", "false positive rate", "true positive rate", roc);
  write_curve_svg(out[1], "Precision-recall, OOD positive", "recall", "precision", pr);
  std::vector<std::string> names;
  for (int c = 0; c < kNumActivityClasses; ++c) names.emplace_back(to_string(static_cast<SceneKind>(c)));
  write_confusion_svg(out[2], report.classification.confusion, names);
  return out;
}

}  // namespace harood
