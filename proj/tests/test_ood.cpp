#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "harood/metrics.hpp"
#include "harood/ood.hpp"
#include "test_support.hpp"

using namespace harood;

namespace {

Vector<double> logits(std::initializer_list<double> v) {
  Vector<double> z(Index(v.size()));
  Index i = 0;
  for (double x : v) z[i++] = x;
  return z;
}

NetworkConfig small_config() {
  NetworkConfig c;
  c.image_rows = 16;
  c.image_cols = 16;
  c.autoencoder.channels = {4, 8};
  c.head.channels = {4};
  c.head.embedding_dim = 8;
  c.classifier.hidden = 8;
  return c;
}

Matrix<double> uniform_image(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0, 1);
  Matrix<double> m(16, 16);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

}  // namespace

TEST(HaroodScore, WeightedSum) {
  EXPECT_NEAR(combine_ood_score(0.02, 3.0).value, 0.023, 1e-15);
  EXPECT_EQ(combine_ood_score(0.0, 0.0).value, 0.0);
  EXPECT_DOUBLE_EQ(combine_ood_score(0.0, 2000.0).value, 1000.0 * combine_ood_score(0.0, 2.0).value);
  EXPECT_THROW(combine_ood_score(-1.0, 0.0), Error);
  EXPECT_THROW(combine_ood_score(0.0, std::nan("")), Error);
}

TEST(HaroodScore, PerfectReconstructionScoresZero) {
  NetworkConfig c = small_config();
  c.autoencoder.channels = {1};
  c.autoencoder.kernel = 1;
  c.autoencoder.stride = 1;
  c.autoencoder.hidden = Activation::identity;
  c.autoencoder.output = Activation::identity;
  HaroodNetwork<double> net(c);
  for (const std::string name : {"encoder_macro", "decoder_macro", "encoder_micro", "decoder_micro"})
    net.parameters()[net.layout().find(name + ".conv0.weight").offset] = 1.0;
  std::mt19937_64 rng(1);
  const Matrix<double> x = uniform_image(rng), y = uniform_image(rng);
  EXPECT_EQ(harood_score(net, x, y).value, 0.0);
  HaroodNetwork<double> zero(c);
  const OodScore s = harood_score(zero, x, y);
  EXPECT_NEAR(s.macro_mse, x.squaredNorm() / 256.0, 1e-12);
  EXPECT_NEAR(s.value, s.macro_mse + 0.001 * s.micro_mse, 1e-15);
}

TEST(Threshold, OrderStatisticExamples) {
  std::vector<double> s(100);
  std::iota(s.begin(), s.end(), 1.0);
  std::shuffle(s.begin(), s.end(), std::mt19937_64(3));
  const Threshold t = calibrate_threshold(s, 0.95);
  EXPECT_EQ(t.value, 95.0);
  EXPECT_EQ(t.calibration_size, 100u);
  EXPECT_EQ(calibrate_threshold(s, 1.0).value, 100.0);

  const std::vector<double> same(120, 0.25);
  const Threshold u = calibrate_threshold(same);
  EXPECT_EQ(u.value, 0.25);
  int accepted = 0;
  for (double x : same) accepted += detect(x, u) == Decision::id;
  EXPECT_EQ(accepted, 120);

  EXPECT_THROW(calibrate_threshold(std::vector<double>{}), Error);
  EXPECT_THROW(calibrate_threshold(s, 0.0), Error);
}

TEST(Threshold, ReachesTheTargetWithinOneOverN) {
  std::mt19937_64 rng(11);
  std::lognormal_distribution<double> d(-3.0, 0.7);
  for (std::size_t n : {1000u, 1050u, 1777u}) {
    std::vector<double> s(n);
    for (auto& x : s) x = d(rng);
    for (double target : {0.9, 0.95, 0.99}) {
      const Threshold t = calibrate_threshold(s, target);
      std::size_t accepted = 0;
      for (double x : s) accepted += detect(x, t) == Decision::id;
      const double tpr = double(accepted) / double(n);
      EXPECT_GE(tpr, target);
      EXPECT_LE(tpr, target + 1.0 / double(n));
    }
  }
}

TEST(Detect, BoundaryIsInDistribution) {
  Threshold t;
  t.value = 0.5;
  EXPECT_EQ(detect(0.5, t), Decision::id);
  EXPECT_EQ(detect(std::nextafter(0.5, 1.0), t), Decision::ood);
  EXPECT_EQ(detect(0.0, t), Decision::id);
}

TEST(Baselines, SoftmaxProbability) {
  EXPECT_NEAR(msp_score(logits({0, 0, 0})), 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(msp_score(logits({30, 0, 0})), 1.0, 1e-9);
  const double e = std::exp(1.0);
  EXPECT_NEAR(msp_score(logits({2, 1, 0})), e * e / (e * e + e + 1), 1e-12);
  EXPECT_NEAR(msp_score(logits({2, 1, 0})), 0.6652, 1e-4);
}

TEST(Baselines, MaxLogit) {
  EXPECT_EQ(maxlogit_score(logits({2, 1, 0})), 2.0);
  EXPECT_EQ(maxlogit_score(logits({-4, -4, -4})), -4.0);
  EXPECT_EQ(maxlogit_score(logits({0, 2, 1})), maxlogit_score(logits({1, 0, 2})));
}

TEST(Baselines, NegativeEnergy) {
  EXPECT_NEAR(energy_score(logits({0, 0, 0})), std::log(3.0), 1e-12);
  EXPECT_NEAR(energy_score(logits({0.3, -1, 2}) + Vector<double>::Constant(3, 7.5)),
              energy_score(logits({0.3, -1, 2})) + 7.5, 1e-12);
  EXPECT_NEAR(energy_score(logits({30, 0, 0})), 30.0, 1e-9);
  EXPECT_NEAR(energy_score(logits({0, 0, 0}), 2.0), 2.0 * std::log(3.0), 1e-12);
}

TEST(Odin, DegenerateParameters) {
  HaroodNetwork<double> net(small_config());
  net.initialize(4);
  std::mt19937_64 rng(5);
  const Matrix<double> x = uniform_image(rng), y = uniform_image(rng);
  const Vector<double> z = net.classify(net.embed(x, y));
  EXPECT_NEAR(odin_score(net, x, y, {.temperature = 1.0, .epsilon = 0.0}), msp_score(z), 1e-12);
  EXPECT_NEAR(odin_score(net, x, y, {.temperature = 1e9, .epsilon = 0.0}), 1.0 / 3.0, 1e-9);
  EXPECT_THROW(odin_score(net, x, y, {.temperature = 0.0, .epsilon = 0.0}), ConfigError);
}

TEST(Odin, PerturbationRaisesTheScaledSoftmaxOnAverage) {
  HaroodNetwork<double> net(small_config());
  net.initialize(6);
  std::mt19937_64 rng(7);
  double with = 0, without = 0;
  for (int i = 0; i < 12; ++i) {
    const Matrix<double> x = uniform_image(rng), y = uniform_image(rng);
    with += odin_score(net, x, y, {.temperature = 1.0, .epsilon = 1e-3});
    without += odin_score(net, x, y, {.temperature = 1.0, .epsilon = 0.0});
  }
  EXPECT_GT(with, without);
}

TEST(ScoresFile, RoundTrip) {
  test::TempDir dir("scores");
  const std::vector<std::uint32_t> ids{3, 1, 4000000000u};
  const std::vector<double> scores{0.1 + 0.2, -1e-300, 12345.678901234567};
  write_scores(dir.path() / "s.txt", ids, scores);
  const auto [rid, rs] = read_scores(dir.path() / "s.txt");
  EXPECT_EQ(rid, ids);
  EXPECT_EQ(rs, scores);
  EXPECT_THROW(read_scores(dir.path() / "absent.txt"), Error);
}

TEST(OodProperties, AurocIsInvariantUnderMonotoneMaps) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> id(0, 1), ood(1, 1);
  std::vector<double> a(200), b(150), ea(200), eb(150);
  for (std::size_t i = 0; i < a.size(); ++i) ea[i] = std::exp(3 * (a[i] = id(rng)));
  for (std::size_t i = 0; i < b.size(); ++i) eb[i] = std::exp(3 * (b[i] = ood(rng)));
  EXPECT_NEAR(auroc(a, b), auroc(ea, eb), 1e-12);
}
