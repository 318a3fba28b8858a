#include "harood/rdi_preproc.hpp"

#include <cmath>
#include <vector>

#include <unsupported/Eigen/FFT>

namespace harood {

namespace {

using ComplexVector = Eigen::VectorXcd;

// Windowed forward DFT of every column.
Eigen::MatrixXcd column_fft(const Eigen::MatrixXcd& m, const Vector<double>& window) {
  Eigen::FFT<double> fft;
  Eigen::MatrixXcd out(m.rows(), m.cols());
  ComplexVector in(m.rows()), spectrum(m.rows());
  for (Index c = 0; c < m.cols(); ++c) {
    in = m.col(c).cwiseProduct(window.cast<std::complex<double>>());
    fft.fwd(spectrum, in);
    out.col(c) = spectrum;
  }
  return out;
}

RangeSpectrogram stack(std::span<const RangeSpectrogram> spectrograms) {
  const Index rows = spectrograms.front().values.rows();
  const Index cols = spectrograms.front().values.cols();
  RangeSpectrogram out;
  out.values.resize(rows * Index(spectrograms.size()), cols);
  for (std::size_t f = 0; f < spectrograms.size(); ++f) {
    if (spectrograms[f].values.rows() != rows || spectrograms[f].values.cols() != cols)
      throw ShapeMismatch("range spectrograms in the micro history differ in shape");
    out.values.middleRows(Index(f) * rows, rows) = spectrograms[f].values;
  }
  return out;
}

}  // namespace

Vector<double> sinc_kernel(int length, double cutoff) {
  if (length < 1 || !(cutoff > 0) || cutoff > 1) throw ConfigError("invalid sinc kernel parameters");
  Vector<double> h(length);
  const double center = 0.5 * (length - 1);
  for (int k = 0; k < length; ++k) {
    const double x = cutoff * (k - center);
    h[k] = x == 0 ? cutoff : cutoff * std::sin(EIGEN_PI * x) / (EIGEN_PI * x);
  }
  return h;
}

Eigen::MatrixXcd fftshift_rows(const Eigen::MatrixXcd& m) {
  const Index n = m.rows();
  Eigen::MatrixXcd out(n, m.cols());
  for (Index r = 0; r < n; ++r) out.row((r + n / 2) % n) = m.row(r);
  return out;
}

RangeSpectrogram range_transform(const RawFrameCube& cube, const RadarConfig& config) {
  if (cube.n_rx() != config.n_rx || cube.n_chirps() != config.n_chirps || cube.n_samples() != config.n_samples)
    throw ShapeMismatch("frame cube shape does not match the radar configuration");
  const Index nc = config.n_chirps, ns = config.n_samples;

  // The DFT is linear, so averaging antennas before the transform equals
  // averaging the per-antenna spectra.
  Matrix<double> mean = Matrix<double>::Zero(nc, ns);
  for (const auto& ch : cube.channels) mean += ch;
  mean /= double(cube.n_rx());

  const Vector<double> window = hann_window(ns);
  Eigen::FFT<double> fft;
  ComplexVector in(ns), spectrum(ns);
  RangeSpectrogram out;
  out.values.resize(nc, ns / 2);
  for (Index m = 0; m < nc; ++m) {
    in = mean.row(m).transpose().cwiseProduct(window).cast<std::complex<double>>();
    fft.fwd(spectrum, in);
    out.values.row(m) = spectrum.head(ns / 2).transpose();
  }
  return out;
}

RangeSpectrogram mti_filter(const RangeSpectrogram& spectrogram) {
  RangeSpectrogram out;
  out.values = spectrogram.values.rowwise() - spectrogram.values.colwise().mean();
  return out;
}

RangeDopplerImaged compute_macro_rdi(const RangeSpectrogram& spectrogram) {
  const RangeSpectrogram filtered = mti_filter(spectrogram);
  const Eigen::MatrixXcd doppler = fftshift_rows(column_fft(filtered.values, hann_window(filtered.values.rows())));
  RangeDopplerImaged rdi;
  rdi.values = doppler.cwiseAbs();
  rdi.variant = RdiVariant::macro;
  return rdi;
}

RangeDopplerImaged compute_macro_rdi(const RawFrameCube& cube, const RadarConfig& config) {
  return compute_macro_rdi(range_transform(cube, config));
}

RangeDopplerImaged compute_micro_rdi(std::span<const RangeSpectrogram> spectrograms,
                                     const PreprocessConfig& preprocess) {
  if (spectrograms.size() != kMicroHistory)
    throw Error("micro RDI needs exactly " + std::to_string(kMicroHistory) + " frames, got " +
                std::to_string(spectrograms.size()));
  const Index n_chirps = spectrograms.front().values.rows();
  Eigen::MatrixXcd s = stack(spectrograms).values;

  // Fast-time then slow-time mean removal.
  s.colwise() -= s.rowwise().mean();
  s.rowwise() -= s.colwise().mean();

  const Vector<double> h = sinc_kernel(preprocess.sinc_length, preprocess.sinc_cutoff);
  const Index taps = h.size(), half = taps / 2, n_range = s.cols();
  Eigen::MatrixXcd filtered = Eigen::MatrixXcd::Zero(s.rows(), n_range);
  for (Index i = 0; i < n_range; ++i)
    for (Index k = 0; k < taps; ++k) {
      const Index src = i + k - half;
      if (src < 0 || src >= n_range) continue;
      filtered.col(i) += h[k] * s.col(src);
    }

  const Eigen::MatrixXcd doppler = fftshift_rows(column_fft(filtered, hann_window(filtered.rows())));
  RangeDopplerImaged rdi;
  rdi.values = doppler.middleRows(doppler.rows() / 2 - n_chirps / 2, n_chirps).cwiseAbs();
  rdi.variant = RdiVariant::micro;
  return rdi;
}

RangeDopplerImaged compute_micro_rdi(std::span<const RawFrameCube> cubes, const RadarConfig& config,
                                     const PreprocessConfig& preprocess) {
  if (cubes.size() != kMicroHistory)
    throw Error("micro RDI needs exactly " + std::to_string(kMicroHistory) + " frames, got " +
                std::to_string(cubes.size()));
  std::vector<RangeSpectrogram> spectrograms;
  spectrograms.reserve(cubes.size());
  for (const auto& cube : cubes) spectrograms.push_back(range_transform(cube, config));
  return compute_micro_rdi(spectrograms, preprocess);
}

RangeDopplerImaged apply_e_respd(std::span<const RangeDopplerImaged> history, int window, double decay) {
  if (window < 1) throw Error("E-RESPD window must be >= 1");
  if (history.empty()) throw Error("E-RESPD history is empty");
  const std::size_t n = std::min<std::size_t>(history.size(), static_cast<std::size_t>(window));
  const auto recent = history.last(n);
  RangeDopplerImaged out;
  out.variant = recent.back().variant;
  out.frame_index = recent.back().frame_index;
  out.values = Matrix<double>::Zero(recent.back().values.rows(), recent.back().values.cols());
  for (const auto& rdi : recent) {
    if (rdi.values.rows() != out.values.rows() || rdi.values.cols() != out.values.cols())
      throw ShapeMismatch("E-RESPD history images differ in shape");
    out.values = decay * out.values + rdi.values;
  }
  const double peak = out.values.maxCoeff();
  if (peak > 0) out.values /= peak;
  return out;
}

RangeDopplerImaged log_compress(const RangeDopplerImaged& rdi) {
  RangeDopplerImaged out = rdi;
  out.values = rdi.values.array().log1p().matrix();
  return out;
}

RangeDopplerImagef to_network_input(const RangeDopplerImaged& rdi) {
  RangeDopplerImagef out;
  out.variant = rdi.variant;
  out.frame_index = rdi.frame_index;
  const double lo = rdi.values.minCoeff(), hi = rdi.values.maxCoeff();
  if (hi > lo)
    out.values = ((rdi.values.array() - lo) / (hi - lo)).matrix().cast<float>();
  else
    out.values = Matrix<float>::Zero(rdi.values.rows(), rdi.values.cols());
  return out;
}

RecordingProcessor::RecordingProcessor(const RadarConfig& radar, const PreprocessConfig& preprocess)
    : radar_(radar), preprocess_(preprocess) {
  radar_.validate();
  if (preprocess_.erespd_window < 1) throw ConfigError("E-RESPD window must be >= 1");
}

int RecordingProcessor::warmup_frames() const { return kMicroHistory + preprocess_.erespd_window - 2; }

std::optional<std::pair<RangeDopplerImagef, RangeDopplerImagef>> RecordingProcessor::push(const RawFrameCube& cube) {
  const std::int64_t index = frame_index_++;
  const std::size_t window = static_cast<std::size_t>(preprocess_.erespd_window);

  spectrograms_.push_back(range_transform(cube, radar_));
  if (spectrograms_.size() > kMicroHistory) spectrograms_.pop_front();

  RangeDopplerImaged macro = log_compress(compute_macro_rdi(spectrograms_.back()));
  macro.frame_index = index;
  macro_history_.push_back(std::move(macro));
  if (macro_history_.size() > window) macro_history_.pop_front();

  if (spectrograms_.size() < kMicroHistory) return std::nullopt;
  const std::vector<RangeSpectrogram> stacked(spectrograms_.begin(), spectrograms_.end());
  RangeDopplerImaged micro = log_compress(compute_micro_rdi(stacked, preprocess_));
  micro.frame_index = index;
  micro_history_.push_back(std::move(micro));
  if (micro_history_.size() > window) micro_history_.pop_front();

  if (micro_history_.size() < window) return std::nullopt;
  const std::vector<RangeDopplerImaged> macros(macro_history_.begin(), macro_history_.end());
  const std::vector<RangeDopplerImaged> micros(micro_history_.begin(), micro_history_.end());
  return std::make_pair(
      to_network_input(apply_e_respd(macros, preprocess_.erespd_window, preprocess_.erespd_decay)),
      to_network_input(apply_e_respd(micros, preprocess_.erespd_window, preprocess_.erespd_decay)));
}

}  // namespace harood
