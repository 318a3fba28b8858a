#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <vector>

#include "harood/types.hpp"

namespace harood {

inline constexpr double kSpeedOfLight = 299792458.0;

/// FMCW front-end parameters. Defaults describe a 1 Tx / 3 Rx 60 GHz sensor.
struct RadarConfig {
  int n_rx = 3;
  int n_chirps = 64;
  int n_samples = 128;
  double carrier_freq = 60e9;   // Hz
  double bandwidth = 1e9;       // Hz
  double chirp_period = 391.55e-6;  // s, chirp-to-chirp
  double frame_period = 50e-3;  // s
  double noise_std = 0.05;

  double wavelength() const { return kSpeedOfLight / carrier_freq; }
  double range_resolution() const { return kSpeedOfLight / (2.0 * bandwidth); }
  /// Real-sampled IF: only n_samples/2 positive-frequency bins are usable.
  double max_range() const { return kSpeedOfLight * n_samples / (4.0 * bandwidth); }
  double max_velocity() const { return wavelength() / (4.0 * chirp_period); }
  double velocity_resolution() const { return wavelength() / (2.0 * n_chirps * chirp_period); }
  int n_range_bins() const { return n_samples / 2; }

  /// Throws ConfigError when an invariant is broken.
  void validate() const;

  bool operator==(const RadarConfig&) const = default;
};

/// Point scatterer state at the start of a frame.
struct Scatterer {
  double range = 1.0;            // m
  double radial_velocity = 0.0;  // m/s, positive = receding
  double amplitude = 1.0;
  double micro_motion_amp = 0.0;   // m
  double micro_motion_freq = 0.0;  // Hz
  double micro_motion_phase = 0.0; // rad, oscillation phase at frame start

  bool operator==(const Scatterer&) const = default;
};

using ScattererSet = std::vector<Scatterer>;

/// One frame of digitized IF samples: n_rx matrices of n_chirps x n_samples
/// (row = chirp / slow time, column = fast-time sample).
struct RawFrameCube {
  std::vector<Matrix<double>> channels;

  int n_rx() const { return static_cast<int>(channels.size()); }
  Index n_chirps() const { return channels.empty() ? 0 : channels.front().rows(); }
  Index n_samples() const { return channels.empty() ? 0 : channels.front().cols(); }
};

struct Scenario {
  SceneKind kind = SceneKind::stationary_clutter;
  std::vector<ScattererSet> trajectory;  // one set per frame
  int n_frames = 0;
  std::uint64_t seed = 0;

  bool operator==(const Scenario&) const = default;
};

/// Throws RangeViolation if the scatterer is outside the unambiguous
/// range/velocity window of the configuration.
void check_scatterer(const Scatterer& s, const RadarConfig& config);

/// Synthesizes the de-chirped IF signal of a point-scatterer scene.
///
/// Every scatterer contributes amplitude * cos(phi_fast + phi_slow + phi_rx)
/// where the fast-time phase advances with the beat frequency 2 r B / (c T)
/// and the slow-time phase is 4 pi r(t) / lambda, r(t) including bulk motion
/// and the sinusoidal micro-motion. White Gaussian noise is drawn from
/// noise_seed, so the cube is a pure function of its arguments.
RawFrameCube simulate_frame(const ScattererSet& scatterers, const RadarConfig& config,
                            std::uint64_t noise_seed);

/// Deterministic scatterer trajectory for one recording of the given kind.
Scenario generate_scenario(SceneKind kind, int n_frames, const RadarConfig& config,
                           std::uint64_t seed);

/// Per-split sample counts by scene kind.
struct DatasetRecipe {
  std::map<Split, std::map<SceneKind, int>> counts;
  /// Samples taken from one simulated recording before a fresh scenario is drawn.
  int samples_per_recording = 50;

  int total(Split split) const;
  int total_in_distribution() const;

  /// Default benchmark: 900 train frames per activity, a 900-frame OE split
  /// (fan and toy car plus ID), 1050 calibration ID frames and a balanced
  /// 600 ID / 600 OOD test split.
  static DatasetRecipe benchmark();

  bool operator==(const DatasetRecipe&) const = default;
};

struct DatasetManifest;  // dataset_store.hpp
struct PreprocessConfig;  // rdi_preproc.hpp

/// Simulates every recording in the recipe, converts it to macro/micro RDIs
/// and writes the samples to output_dir. Recordings are independent and are
/// processed on up to `workers` threads; output does not depend on the count.
DatasetManifest build_dataset(const DatasetRecipe& recipe, const RadarConfig& config,
                              const PreprocessConfig& preprocess,
                              const std::filesystem::path& output_dir, std::uint64_t seed,
                              int workers = 1);

/// SplitMix64 finalizer, used to derive independent per-recording seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

}  // namespace harood
