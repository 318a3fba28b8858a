#pragma once

#include <complex>
#include <deque>
#include <optional>
#include <span>
#include <utility>

#include "harood/radar_sim.hpp"
#include "harood/types.hpp"

namespace harood {

/// Complex range profiles of one frame after antenna averaging,
/// n_chirps x n_samples/2.
struct RangeSpectrogram {
  Eigen::MatrixXcd values;
};

/// Magnitude image, rows = Doppler bins (zero Doppler at rows/2), cols = range bins.
template <typename Scalar>
struct RangeDopplerImage {
  Matrix<Scalar> values;
  RdiVariant variant = RdiVariant::macro;
  std::int64_t frame_index = 0;
};

using RangeDopplerImaged = RangeDopplerImage<double>;
using RangeDopplerImagef = RangeDopplerImage<float>;

inline constexpr int kMicroHistory = 8;

struct PreprocessConfig {
  int erespd_window = 10;
  double erespd_decay = 0.9;
  int sinc_length = 16;
  double sinc_cutoff = 0.25;  // fraction of Nyquist

  bool operator==(const PreprocessConfig&) const = default;
};

/// Periodic Hann window of length n.
template <typename Scalar = double>
Vector<Scalar> hann_window(Index n) {
  Vector<Scalar> w(n);
  for (Index i = 0; i < n; ++i)
    w[i] = Scalar(0.5) - Scalar(0.5) * std::cos(Scalar(2 * EIGEN_PI) * Scalar(i) / Scalar(n));
  return w;
}

/// Truncated windowless sinc low-pass taps h[k] = fc sinc(fc (k - (L-1)/2)).
Vector<double> sinc_kernel(int length, double cutoff);

/// FFT-shift of the rows so that bin 0 moves to rows/2.
Eigen::MatrixXcd fftshift_rows(const Eigen::MatrixXcd& m);

/// Hann-windowed fast-time FFT per chirp and antenna, positive half kept,
/// averaged across antennas into a single channel.
RangeSpectrogram range_transform(const RawFrameCube& cube, const RadarConfig& config);

/// Removes the slow-time mean of every range bin.
RangeSpectrogram mti_filter(const RangeSpectrogram& spectrogram);

/// Range-FFT, antenna mean, MTI, Hann-windowed Doppler-FFT, shift, magnitude.
RangeDopplerImaged compute_macro_rdi(const RawFrameCube& cube, const RadarConfig& config);
RangeDopplerImaged compute_macro_rdi(const RangeSpectrogram& spectrogram);

/// Stacks eight range spectrograms along slow time, removes fast- and
/// slow-time means, sinc-filters each range profile, Doppler-FFTs the stack
/// and keeps the central n_chirps Doppler bins.
RangeDopplerImaged compute_micro_rdi(std::span<const RawFrameCube> cubes, const RadarConfig& config,
                                     const PreprocessConfig& preprocess = {});
RangeDopplerImaged compute_micro_rdi(std::span<const RangeSpectrogram> spectrograms,
                                     const PreprocessConfig& preprocess = {});

/// Frame-accumulation enhancement: out_t = decay * out_{t-1} + rdi_t over the
/// last `window` images, then scaled so the maximum is 1. An all-zero
/// accumulation is returned unscaled.
RangeDopplerImaged apply_e_respd(std::span<const RangeDopplerImaged> history, int window,
                                 double decay);

/// log(1 + x) compression of magnitudes.
RangeDopplerImaged log_compress(const RangeDopplerImaged& rdi);

/// Min-max scaling to [0, 1] and conversion to the network scalar type.
/// A constant image maps to all zeros.
RangeDopplerImagef to_network_input(const RangeDopplerImaged& rdi);

/// Streaming conversion of one recording into (macro, micro) network inputs.
/// The first 8 + window - 2 frames only warm up the history.
class RecordingProcessor {
 public:
  RecordingProcessor(const RadarConfig& radar, const PreprocessConfig& preprocess);

  std::optional<std::pair<RangeDopplerImagef, RangeDopplerImagef>> push(const RawFrameCube& cube);

  int warmup_frames() const;

 private:
  RadarConfig radar_;
  PreprocessConfig preprocess_;
  std::int64_t frame_index_ = 0;
  std::deque<RangeSpectrogram> spectrograms_;
  std::deque<RangeDopplerImaged> macro_history_;
  std::deque<RangeDopplerImaged> micro_history_;
};

}  // namespace harood
