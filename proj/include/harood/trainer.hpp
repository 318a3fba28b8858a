#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "harood/dataset_store.hpp"
#include "harood/gradients.hpp"
#include "harood/network.hpp"
#include "harood/optim.hpp"

namespace harood {

struct Stage1Schedule {
  int total_epochs = 6;
  int contrastive_epochs = 3;  // the first epochs add L_con
  int batch_size = 32;
  int batches_per_epoch = 0;  // 0 = ceil(train size / batch size)
  OptimizerConfig optimizer{};
  double triplet_margin = kTripletMargin;
  double contrastive_margin = kContrastiveMargin;
  std::uint64_t seed = 0;
};

struct Stage2Schedule {
  int epochs = 20;
  int batch_size = 32;
  OptimizerConfig optimizer{};
  std::uint64_t seed = 0;
};

struct EpochLog {
  int stage = 1;
  int epoch = 1;  // 1-based
  int batches = 0;
  LossBreakdown losses;  // batch means
  double cross_entropy = 0;
  double train_accuracy = 0;
  bool reconstruction_active = false;
  bool triplet_active = false;
  bool contrastive_active = false;
  double wall_seconds = 0;
};

struct TrainingLog {
  std::vector<EpochLog> stage1;
  std::vector<EpochLog> stage2;
  std::uint64_t seed = 0;
  nlohmann::json config_snapshot = nlohmann::json::object();

  std::vector<int> contrastive_flags() const;
  nlohmann::json to_json() const;
  static TrainingLog from_json(const nlohmann::json& j);
};

/// Records of the splits used for training, in manifest order.
struct TrainingData {
  DatasetManifest manifest;
  std::vector<SampleRecord> train;
  std::vector<SampleRecord> oe;

  const SampleRecord& at(RecordRef ref) const;
};

TrainingData load_training_data(const DatasetManifest& manifest);

/// Stage 1: per batch a triplet batch (L_rec + L_tri) and, during the
/// contrastive epochs, one pair batch (encoder-only L_con); the summed
/// gradient drives one Adamax step over both E-D pairs and the head.
void train_stage1(HaroodNetwork<float>& network, const TrainingData& data, const Stage1Schedule& schedule,
                  TrainingLog& log, int workers = 1);

/// Stage 2: embeddings of the train split are computed once with the frozen
/// stage-1 weights; only the classifier parameters are updated.
void train_stage2(HaroodNetwork<float>& network, const TrainingData& data, const Stage2Schedule& schedule,
                  TrainingLog& log, int workers = 1);

/// Embedding-head outputs, one column per record.
template <typename Scalar>
Matrix<Scalar> compute_embeddings(const HaroodNetwork<Scalar>& network, std::span<const SampleRecord> records,
                                  int workers = 1);

extern template Matrix<float> compute_embeddings(const HaroodNetwork<float>&, std::span<const SampleRecord>, int);

struct TermAudit {
  LossTerm term = LossTerm::reconstruction;
  int n_params = 0;
  double max_relative_error = 0;
  double max_abs_gradient = 0;
  /// True when every parameter outside the routed groups has an exactly zero gradient.
  bool routing_exact = false;
};

struct AuditConfig {
  int n_params = 32;
  double step = 1e-5;
  /// Denominator floor of |analytic - numeric| / max(|analytic|, |numeric|, floor).
  double relative_floor = 1e-6;
  int batch_size = 2;
  std::uint64_t seed = 0;
};

/// Central-difference check of every loss term on a random batch of
/// uniform [0, 1] images, over random parameters drawn from the groups the
/// term is routed to.
std::array<TermAudit, 4> finite_difference_audit(const HaroodNetwork<double>& network, const AuditConfig& config);

/// Parameter groups that receive gradient from a loss term.
std::vector<ParameterGroup> routed_groups(LossTerm term);

}  // namespace harood
