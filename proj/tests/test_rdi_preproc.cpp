#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "harood/radar_sim.hpp"
#include "harood/rdi_preproc.hpp"

using namespace harood;

namespace {

RadarConfig quiet() {
  RadarConfig c;
  c.noise_std = 0;
  return c;
}

double energy(const Eigen::MatrixXcd& m) { return m.squaredNorm(); }
double energy(const Matrix<double>& m) { return m.squaredNorm(); }

Index argmax_row(const Matrix<double>& m, Index* col) {
  Index r = 0;
  m.maxCoeff(&r, col);
  return r;
}

// Eight consecutive frames of one scatterer whose micro-motion phase advances.
std::vector<RawFrameCube> frames(Scatterer s, const RadarConfig& c, std::uint64_t seed) {
  std::vector<RawFrameCube> out;
  const double phase0 = s.micro_motion_phase;
  for (int f = 0; f < kMicroHistory; ++f) {
    s.micro_motion_phase = phase0 + 2 * EIGEN_PI * s.micro_motion_freq * f * c.frame_period;
    s.range += s.radial_velocity * c.frame_period * (f > 0);
    out.push_back(simulate_frame({s}, c, seed + f));
  }
  return out;
}

}  // namespace

TEST(Windows, PeriodicHannAndSymmetricSinc) {
  const auto w = hann_window(8);
  EXPECT_EQ(w[0], 0.0);
  EXPECT_NEAR(w[4], 1.0, 1e-15);
  EXPECT_NEAR(w[1], w[7], 1e-15);
  const auto h = sinc_kernel(16, 0.25);
  ASSERT_EQ(h.size(), 16);
  for (int k = 0; k < 8; ++k) EXPECT_NEAR(h[k], h[15 - k], 1e-15);
  EXPECT_THROW(sinc_kernel(0, 0.25), ConfigError);
  EXPECT_THROW(sinc_kernel(16, 0.0), ConfigError);
}

TEST(FftShift, MovesBinZeroToCenter) {
  Eigen::MatrixXcd m(4, 1);
  m << 0.0, 1.0, 2.0, 3.0;
  const auto s = fftshift_rows(m);
  EXPECT_EQ(s(2, 0), std::complex<double>(0.0));
  EXPECT_EQ(s(0, 0), std::complex<double>(2.0));
}

TEST(RangeTransform, ZeroCubeGivesZeroSpectrogram) {
  const auto s = range_transform(simulate_frame({}, quiet(), 0), quiet());
  EXPECT_EQ(s.values.rows(), 64);
  EXPECT_EQ(s.values.cols(), 64);
  EXPECT_EQ(s.values.cwiseAbs().maxCoeff(), 0.0);
}

TEST(RangeTransform, PeakAtBinTenForEveryChirp) {
  const auto s = range_transform(simulate_frame({{1.5, 0.0, 1.0}}, quiet(), 0), quiet());
  for (Index m = 0; m < s.values.rows(); ++m) {
    Index bin = 0;
    s.values.row(m).cwiseAbs().maxCoeff(&bin);
    EXPECT_EQ(bin, 10);
  }
}

TEST(RangeTransform, IsLinear) {
  const RadarConfig c = quiet();
  RawFrameCube cube = simulate_frame({{2.2, 0.4, 1.0}}, c, 0);
  const auto a = range_transform(cube, c);
  for (auto& ch : cube.channels) ch *= 2.0;
  const auto b = range_transform(cube, c);
  EXPECT_LT((b.values - 2.0 * a.values).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(RangeTransform, RejectsShapeMismatch) {
  RadarConfig c = quiet();
  const RawFrameCube cube = simulate_frame({}, c, 0);
  c.n_samples = 64;
  EXPECT_THROW(range_transform(cube, c), ShapeMismatch);
}

TEST(Mti, RemovesConstantSlowTimeContentAndIsIdempotent) {
  RangeSpectrogram s;
  s.values = Eigen::MatrixXcd::Constant(64, 64, {1.5, -0.5});
  EXPECT_LT(mti_filter(s).values.cwiseAbs().maxCoeff(), 1e-15);

  const auto moving = range_transform(simulate_frame({{2.0, 1.2, 1.0}}, quiet(), 0), quiet());
  const auto once = mti_filter(moving);
  EXPECT_GT(energy(once.values), 0.1 * energy(moving.values));
  EXPECT_LT((mti_filter(once).values - once.values).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT(once.values.colwise().mean().cwiseAbs().maxCoeff(), 1e-12);
}

TEST(MacroRdi, StaticSceneIsSuppressedByMoreThanFortyDecibels) {
  const RadarConfig c = quiet();
  const RawFrameCube cube = simulate_frame({{2.0, 0.0, 1.0}, {3.4, 0.0, 0.5}}, c, 0);
  const double before = energy(range_transform(cube, c).values);
  const double after = energy(compute_macro_rdi(cube, c).values);
  ASSERT_GT(before, 0.0);
  EXPECT_LT(after, 1e-9 * before);
  EXPECT_LT(10 * std::log10(after / before + 1e-300), -40.0);
}

TEST(MacroRdi, SingleMoverPeaksAtPredictedBins) {
  const RadarConfig c = quiet();
  const auto rdi = compute_macro_rdi(simulate_frame({{1.5, 1.0, 1.0}}, c, 0), c);
  ASSERT_EQ(rdi.values.rows(), 64);
  ASSERT_EQ(rdi.values.cols(), 64);
  EXPECT_EQ(rdi.variant, RdiVariant::macro);
  Index col = 0;
  EXPECT_EQ(argmax_row(rdi.values, &col), 32 + 10);
  EXPECT_EQ(col, 10);
  EXPECT_GE(rdi.values.minCoeff(), 0.0);
}

TEST(MacroRdi, ZeroCubeGivesZeroImage) {
  const RadarConfig c = quiet();
  EXPECT_EQ(compute_macro_rdi(simulate_frame({}, c, 0), c).values.maxCoeff(), 0.0);
}

TEST(MicroRdi, ZeroAndStaticInputs) {
  const RadarConfig c = quiet();
  const std::vector<RawFrameCube> zeros(kMicroHistory, simulate_frame({}, c, 0));
  EXPECT_EQ(compute_micro_rdi(zeros, c).values.maxCoeff(), 0.0);

  const RawFrameCube still = simulate_frame({{2.5, 0.0, 1.0}}, c, 0);
  const std::vector<RawFrameCube> statics(kMicroHistory, still);
  double input = 0;
  for (const auto& f : statics) input += energy(range_transform(f, c).values);
  const auto micro = compute_micro_rdi(statics, c);
  EXPECT_LT(energy(micro.values), 1e-9 * input);
  EXPECT_EQ(micro.values.rows(), 64);
  EXPECT_EQ(micro.values.cols(), 64);
  EXPECT_EQ(micro.variant, RdiVariant::micro);
}

TEST(MicroRdi, RequiresEightFrames) {
  const RadarConfig c = quiet();
  const std::vector<RawFrameCube> seven(7, simulate_frame({}, c, 0));
  EXPECT_THROW(compute_micro_rdi(seven, c), Error);
}

TEST(MicroRdi, VibratingTargetHasMoreOffCenterEnergyThanClutter) {
  const RadarConfig c;  // with receiver noise
  const Scatterer vibrating{2.0, 0.0, 1.0, 0.02, 4.0, 0.3};
  const Scatterer clutter{2.0, 0.0, 1.0};
  auto off_center = [](const Matrix<double>& m) {
    const Index center = m.rows() / 2;
    double e = 0;
    for (Index r = 0; r < m.rows(); ++r)
      if (std::abs(r - center) > 1) e += m.row(r).squaredNorm();
    return e;
  };
  const double moving = off_center(compute_micro_rdi(frames(vibrating, c, 100), c).values);
  const double still = off_center(compute_micro_rdi(frames(clutter, c, 100), c).values);
  EXPECT_GT(moving, 10 * still);
}

TEST(ERespd, SingleFrameWindowNormalizesToUnitPeak) {
  RangeDopplerImaged a;
  a.values = Matrix<double>::Random(6, 5).cwiseAbs();
  const std::vector<RangeDopplerImaged> h{a};
  const auto out = apply_e_respd(h, 1, 0.9);
  EXPECT_LT((out.values - a.values / a.values.maxCoeff()).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(ERespd, ZeroHistoryStaysZero) {
  RangeDopplerImaged z;
  z.values = Matrix<double>::Zero(4, 4);
  const std::vector<RangeDopplerImaged> h(3, z);
  EXPECT_EQ(apply_e_respd(h, 3, 0.9).values.maxCoeff(), 0.0);
}

TEST(ERespd, TwoEqualFramesMatchHandRecurrence) {
  RangeDopplerImaged m;
  m.values = Matrix<double>::Random(5, 5).cwiseAbs();
  const std::vector<RangeDopplerImaged> h{m, m};
  // 0.5 * M + M = 1.5 M, normalized -> M / max(M)
  const auto out = apply_e_respd(h, 2, 0.5);
  EXPECT_LT((out.values - m.values / m.values.maxCoeff()).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(ERespd, OnlyTheLastWindowFramesCount) {
  RangeDopplerImaged big, small;
  big.values = Matrix<double>::Constant(2, 2, 100.0);
  big.values(0, 0) = 0;
  small.values = Matrix<double>::Identity(2, 2);
  const std::vector<RangeDopplerImaged> h{big, small};
  EXPECT_EQ(apply_e_respd(h, 1, 0.9).values, small.values);
  EXPECT_THROW(apply_e_respd(h, 0, 0.9), Error);
  EXPECT_THROW(apply_e_respd({}, 2, 0.9), Error);
}

TEST(NetworkInput, LogCompressionAndMinMaxScaling) {
  RangeDopplerImaged r;
  r.values = Matrix<double>(1, 3);
  r.values << 0.0, std::exp(1.0) - 1.0, 3.0;
  const auto logged = log_compress(r);
  EXPECT_NEAR(logged.values(0, 1), 1.0, 1e-15);
  const auto net = to_network_input(logged);
  EXPECT_FLOAT_EQ(net.values(0, 0), 0.0f);
  EXPECT_FLOAT_EQ(net.values(0, 2), 1.0f);
  r.values.setConstant(2.0);
  EXPECT_EQ(to_network_input(r).values.maxCoeff(), 0.0f);
}

TEST(RecordingProcessor, WarmsUpThenEmitsNormalizedPairs) {
  const RadarConfig c;
  RecordingProcessor p(c, PreprocessConfig{});
  EXPECT_EQ(p.warmup_frames(), 16);
  const Scenario sc = generate_scenario(SceneKind::walk, 20, c, 4);
  int emitted = 0;
  for (int f = 0; f < sc.n_frames; ++f) {
    const auto out = p.push(simulate_frame(sc.trajectory[f], c, f));
    EXPECT_EQ(out.has_value(), f >= p.warmup_frames()) << f;
    if (!out) continue;
    ++emitted;
    const auto& [macro, micro] = *out;
    EXPECT_EQ(macro.values.rows(), 64);
    EXPECT_EQ(micro.values.cols(), 64);
    EXPECT_EQ(macro.frame_index, f);
    EXPECT_GE(macro.values.minCoeff(), 0.0f);
    EXPECT_LE(micro.values.maxCoeff(), 1.0f);
  }
  EXPECT_EQ(emitted, 4);
}

TEST(RecordingProcessor, IsDeterministic) {
  const RadarConfig c;
  const Scenario sc = generate_scenario(SceneKind::fan, 18, c, 2);
  RecordingProcessor a(c, PreprocessConfig{}), b(c, PreprocessConfig{});
  std::optional<std::pair<RangeDopplerImagef, RangeDopplerImagef>> x, y;
  for (int f = 0; f < sc.n_frames; ++f) {
    x = a.push(simulate_frame(sc.trajectory[f], c, f));
    y = b.push(simulate_frame(sc.trajectory[f], c, f));
  }
  ASSERT_TRUE(x && y);
  EXPECT_EQ(x->first.values, y->first.values);
  EXPECT_EQ(x->second.values, y->second.values);
}
