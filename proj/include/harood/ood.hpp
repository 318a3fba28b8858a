#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "harood/dataset_store.hpp"
#include "harood/losses.hpp"
#include "harood/network.hpp"

namespace harood {

inline constexpr double kMacroWeight = 1.0;
inline constexpr double kMicroWeight = 0.001;

/// Reconstruction-error OOD score; higher means more OOD.
struct OodScore {
  double value = 0;
  double macro_mse = 0;
  double micro_mse = 0;
};

OodScore combine_ood_score(double macro_mse, double micro_mse);

/// Per-variant reconstruction MSE of a sample, combined with weights (1, 0.001).
template <typename Scalar>
OodScore harood_score(const HaroodNetwork<Scalar>& network, const Matrix<Scalar>& macro,
                      const Matrix<Scalar>& micro) {
  const double macro_mse = image_mse(macro, network.reconstruct(macro, RdiVariant::macro));
  const double micro_mse = image_mse(micro, network.reconstruct(micro, RdiVariant::micro));
  return combine_ood_score(macro_mse, micro_mse);
}

OodScore harood_score(const HaroodNetwork<float>& network, const SampleRecord& sample);

struct Threshold {
  double value = 0;
  double target_tpr = 0.95;
  std::size_t calibration_size = 0;
};

/// Smallest calibration score s such that the fraction of ID scores <= s
/// reaches target_tpr.
Threshold calibrate_threshold(std::span<const double> id_scores, double target_tpr = 0.95);

enum class Decision { id, ood };

/// Strictly greater than the threshold is OOD.
inline Decision detect(double score, const Threshold& t) { return score > t.value ? Decision::ood : Decision::id; }
inline Decision detect(const OodScore& score, const Threshold& t) { return detect(score.value, t); }

// Logit baselines. All return higher = more ID.
double msp_score(const Vector<double>& logits);
double maxlogit_score(const Vector<double>& logits);
/// Negative free energy T * logsumexp(logits / T).
double energy_score(const Vector<double>& logits, double temperature = 1.0);

struct OdinConfig {
  double temperature = 1000.0;
  double epsilon = 0.0014;
};

/// Max softmax of logits / T after shifting both input RDIs by
/// epsilon * sign(d log max softmax(logits / T) / dx). The gradient runs
/// through classifier, head, decoders and encoders.
template <typename Scalar>
double odin_score(const HaroodNetwork<Scalar>& network, const Matrix<Scalar>& macro, const Matrix<Scalar>& micro,
                  const OdinConfig& config) {
  if (!(config.temperature > 0)) throw ConfigError("ODIN temperature must be positive");
  const Scalar t = Scalar(config.temperature);
  auto scaled_msp = [&](const Matrix<Scalar>& xm, const Matrix<Scalar>& xu) {
    const Vector<Scalar> logits = network.classify(network.embed(xm, xu));
    return double(softmax(Vector<Scalar>(logits / t)).maxCoeff());
  };
  if (config.epsilon == 0) return scaled_msp(macro, micro);

  Vector<Scalar> scratch = network.zero_gradient();
  const auto ae_macro = network.trace_autoencoder(macro, RdiVariant::macro);
  const auto ae_micro = network.trace_autoencoder(micro, RdiVariant::micro);
  const auto head = network.trace_head(ae_macro.reconstruction, ae_micro.reconstruction);
  const auto cls = network.trace_classifier(head.embedding);

  // d log softmax_c(z / T) / dz = (onehot_c - softmax(z / T)) / T
  const Vector<Scalar> p = softmax(Vector<Scalar>(cls.logits / t));
  Index c = 0;
  p.maxCoeff(&c);
  Vector<Scalar> g_logits = -p / t;
  g_logits[c] += Scalar(1) / t;

  const Vector<Scalar> g_embedding = network.backprop_classifier(cls, g_logits, scratch, true);
  auto [g_rm, g_ru] = network.backprop_head(head, g_embedding, scratch);
  const Matrix<Scalar> gx_macro = network.backprop_autoencoder(ae_macro, RdiVariant::macro, &g_rm, nullptr, scratch, true);
  const Matrix<Scalar> gx_micro = network.backprop_autoencoder(ae_micro, RdiVariant::micro, &g_ru, nullptr, scratch, true);
  if (!gx_macro.allFinite() || !gx_micro.allFinite()) throw NumericalError("non-finite ODIN input gradient");

  const Scalar eps = Scalar(config.epsilon);
  const Matrix<Scalar> xm = macro + eps * gx_macro.array().sign().matrix();
  const Matrix<Scalar> xu = micro + eps * gx_micro.array().sign().matrix();
  return scaled_msp(xm, xu);
}

/// Two-column text: sample id and score, one line per sample.
void write_scores(const std::filesystem::path& path, std::span<const std::uint32_t> ids,
                  std::span<const double> scores);
std::pair<std::vector<std::uint32_t>, std::vector<double>> read_scores(const std::filesystem::path& path);

}  // namespace harood
