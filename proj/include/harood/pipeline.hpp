#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "harood/config.hpp"
#include "harood/dataset_store.hpp"
#include "harood/report.hpp"
#include "harood/trainer.hpp"

namespace harood {

// Output layout under RunConfig::out.
std::filesystem::path dataset_dir(const RunConfig& config);
std::filesystem::path model_dir(const RunConfig& config);
std::filesystem::path eval_dir(const RunConfig& config);

/// Simulates and preprocesses the dataset into <out>/dataset.
DatasetManifest cmd_simulate(const RunConfig& config, int workers);

/// Stage 1 and stage 2 training on <out>/dataset. Writes stage1.ckpt,
/// harood.ckpt and training_log.json into <out>/model.
TrainingLog cmd_train(const RunConfig& config, int workers);

/// Scores calibration and test splits with HAROOD and the enabled baselines.
/// Writes report.json, report.txt, timing.json, scores_<method>.txt and
/// test_labels.txt into <out>/eval. The checkpoint defaults to
/// <out>/model/harood.ckpt.
EvaluationReport cmd_evaluate(const RunConfig& config, const std::optional<std::filesystem::path>& checkpoint,
                              int workers);

/// ROC, PR and confusion-matrix SVGs from the files of cmd_evaluate.
std::vector<std::filesystem::path> cmd_report(const RunConfig& config);

}  // namespace harood
