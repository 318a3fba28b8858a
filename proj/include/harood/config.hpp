#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "harood/network.hpp"
#include "harood/ood.hpp"
#include "harood/radar_sim.hpp"
#include "harood/rdi_preproc.hpp"
#include "harood/trainer.hpp"

namespace harood {

enum class Baseline { msp, maxlogit, energy, odin };

std::string_view to_string(Baseline b);
Baseline baseline_from_string(std::string_view name);
/// Comma-separated list, e.g. "msp,energy". Empty string = none.
std::vector<Baseline> parse_baselines(std::string_view list);

struct EvaluationConfig {
  double target_tpr = 0.95;
  double energy_temperature = 1.0;
  OdinConfig odin{};
  int timing_repeats = 3;

  bool operator==(const EvaluationConfig&) const = default;
};

/// Everything a pipeline run depends on. Stage seeds are derived from `seed`.
struct RunConfig {
  std::uint64_t seed = 42;
  std::filesystem::path out = "out";
  RadarConfig radar{};
  PreprocessConfig preprocess{};
  DatasetRecipe dataset = DatasetRecipe::benchmark();
  NetworkConfig model{};
  Stage1Schedule stage1{};
  Stage2Schedule stage2{};
  EvaluationConfig evaluation{};
  std::vector<Baseline> baselines{Baseline::msp, Baseline::maxlogit, Baseline::energy, Baseline::odin};

  std::uint64_t dataset_seed() const;
  std::uint64_t init_seed() const;
  std::uint64_t stage1_seed() const;
  std::uint64_t stage2_seed() const;
};

/// The built-in configuration used by `--config default`.
RunConfig default_run_config();

/// Keys absent from `j` keep their defaults; unknown keys raise ConfigError.
RunConfig run_config_from_json(const nlohmann::json& j);
nlohmann::json run_config_to_json(const RunConfig& config);

/// "default" or a path to a JSON file.
RunConfig load_run_config(const std::string& name_or_path);

/// Writes the resolved configuration as `config.json` inside `dir`.
void write_config_snapshot(const RunConfig& config, const std::filesystem::path& dir);

}  // namespace harood
