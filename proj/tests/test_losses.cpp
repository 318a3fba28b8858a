#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "harood/losses.hpp"

using namespace harood;

namespace {

using Mat = Matrix<double>;

SixWay<double> six(double value, Index rows = 3, Index cols = 5) {
  SixWay<double> s;
  for (auto& m : s.images) m = Mat::Constant(rows, cols, value);
  return s;
}

Mat at_distance(const Mat& base, double distance, Index direction = 0) {
  Mat out = base;
  out(direction, 0) += distance;
  return out;
}

// Random orthogonal matrix from the QR decomposition of a Gaussian matrix.
Mat random_rotation(Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Mat a(n, n);
  for (Index i = 0; i < a.size(); ++i) a.data()[i] = g(rng);
  return Eigen::HouseholderQR<Mat>(a).householderQ();
}

Mat random_matrix(Index rows, Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Mat a(rows, cols);
  for (Index i = 0; i < a.size(); ++i) a.data()[i] = g(rng);
  return a;
}

}  // namespace

TEST(ReconstructionLoss, HandEvaluatedExamples) {
  const std::vector<SixWay<double>> ones{six(1.0)}, zeros{six(0.0)};
  EXPECT_EQ(reconstruction_loss<double>(ones, ones), 0.0);
  EXPECT_DOUBLE_EQ(reconstruction_loss<double>(ones, zeros), 6.0);
  const std::vector<SixWay<double>> two_orig{six(1.0), six(1.0)}, two_rec{six(1.0), six(0.0)};
  EXPECT_DOUBLE_EQ(reconstruction_loss<double>(two_orig, two_rec), 3.0);
}

TEST(ReconstructionLoss, ShapeMismatchThrows) {
  const std::vector<SixWay<double>> a{six(1.0)}, b{six(1.0, 3, 4)}, two{six(1.0), six(1.0)};
  EXPECT_THROW(reconstruction_loss<double>(a, b), ShapeMismatch);
  EXPECT_THROW(reconstruction_loss<double>(a, two), ShapeMismatch);
}

TEST(ReconstructionLoss, GradientMatchesCentralDifference) {
  std::mt19937_64 rng(1);
  std::vector<SixWay<double>> orig(2), rec(2);
  for (int i = 0; i < 2; ++i)
    for (int s = 0; s < 6; ++s) {
      orig[i].images[s] = random_matrix(2, 3, rng);
      rec[i].images[s] = random_matrix(2, 3, rng);
    }
  std::vector<SixWay<double>> grad;
  reconstruction_loss<double>(orig, rec, &grad);
  const double h = 1e-6;
  for (int s : {0, 3, 5}) {
    auto plus = rec, minus = rec;
    plus[1].images[s](1, 2) += h;
    minus[1].images[s](1, 2) -= h;
    const double fd = (reconstruction_loss<double>(orig, plus) - reconstruction_loss<double>(orig, minus)) / (2 * h);
    EXPECT_NEAR(grad[1].images[s](1, 2), fd, 1e-8);
  }
}

TEST(TripletLoss, HandEvaluatedExamples) {
  const Mat a = Mat::Zero(4, 1);
  EXPECT_EQ(triplet_loss<double>(a, a, at_distance(a, 5.0)), 0.0);
  EXPECT_DOUBLE_EQ(triplet_loss<double>(a, a, a), 2.0);
  EXPECT_DOUBLE_EQ(triplet_loss<double>(a, at_distance(a, 3.0), at_distance(a, 1.0, 2)), 4.0);
}

TEST(TripletLoss, ShapeMismatchThrows) {
  EXPECT_THROW(triplet_loss<double>(Mat::Zero(4, 2), Mat::Zero(4, 2), Mat::Zero(3, 2)), ShapeMismatch);
}

TEST(ContrastiveLoss, HandEvaluatedExamples) {
  const Mat e = Mat::Zero(4, 1);
  const int similar[] = {0}, dissimilar[] = {1};
  EXPECT_EQ(contrastive_loss<double>(e, e, similar), 0.0);
  EXPECT_EQ(contrastive_loss<double>(e, at_distance(e, 3.0), dissimilar), 0.0);
  EXPECT_DOUBLE_EQ(contrastive_loss<double>(e, e, dissimilar), 4.0);
  EXPECT_DOUBLE_EQ(contrastive_loss<double>(e, at_distance(e, 1.5), similar), 2.25);
}

TEST(ContrastiveLoss, RejectsLabelsOutsideZeroOne) {
  const Mat e = Mat::Zero(2, 2);
  const int bad[] = {0, 2};
  EXPECT_THROW(contrastive_loss<double>(e, e, bad), Error);
  const int negative[] = {-1, 0};
  EXPECT_THROW(contrastive_loss<double>(e, e, negative), Error);
}

TEST(TotalLoss, Additivity) {
  const LossBreakdown all = total_stage1_loss(6.0, 4.0, 4.0, true);
  EXPECT_DOUBLE_EQ(all.total, 14.0);
  const LossBreakdown off = total_stage1_loss(6.0, 4.0, 4.0, false);
  EXPECT_EQ(off.total, 10.0);
  EXPECT_EQ(off.l_con, 0.0);
  EXPECT_EQ(total_stage1_loss(0, 0, 0, true).total, 0.0);
}

TEST(CrossEntropy, ClosedForms) {
  const int label0[] = {0};
  Mat z = Mat::Zero(3, 1);
  EXPECT_NEAR(cross_entropy<double>(z, label0), std::log(3.0), 1e-12);
  z(0, 0) = 30;
  EXPECT_LT(cross_entropy<double>(z, label0), 1e-9);
  const int label2[] = {2};
  Mat y(3, 1);
  y << 0.3, -1.2, 2.5;
  const double base = cross_entropy<double>(y, label2);
  EXPECT_NEAR(cross_entropy<double>(Mat(y.array() + 17.0), label2), base, 1e-9);
  const int bad[] = {3};
  EXPECT_THROW(cross_entropy<double>(y, bad), Error);
}

TEST(CrossEntropy, GradientIsSoftmaxMinusOneHot) {
  Mat z(3, 2);
  z << 1.0, -0.5, 0.2, 0.0, -0.7, 2.0;
  const int labels[] = {1, 2};
  Mat g;
  cross_entropy<double>(z, labels, &g);
  const double h = 1e-6;
  for (Index r = 0; r < 3; ++r)
    for (Index c = 0; c < 2; ++c) {
      Mat p = z, m = z;
      p(r, c) += h;
      m(r, c) -= h;
      EXPECT_NEAR(g(r, c), (cross_entropy<double>(p, labels) - cross_entropy<double>(m, labels)) / (2 * h), 1e-8);
    }
}

TEST(LossProperties, NonNegativeAndPermutationInvariant) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const Index b = 7;
    const Mat a = random_matrix(5, b, rng), p = random_matrix(5, b, rng), n = random_matrix(5, b, rng);
    std::vector<int> y(b);
    for (Index i = 0; i < b; ++i) y[i] = int(rng() % 2);
    const double t = triplet_loss<double>(a, p, n), c = contrastive_loss<double>(a, p, y);
    EXPECT_GE(t, 0.0);
    EXPECT_GE(c, 0.0);

    Eigen::PermutationMatrix<Eigen::Dynamic> perm(b);
    perm.setIdentity();
    std::shuffle(perm.indices().data(), perm.indices().data() + b, rng);
    Eigen::RowVectorXd yrow(b);
    for (Index i = 0; i < b; ++i) yrow[i] = y[i];
    const Eigen::RowVectorXd moved = yrow * perm;
    std::vector<int> yp(b);
    for (Index i = 0; i < b; ++i) yp[i] = int(moved[i]);
    EXPECT_NEAR(triplet_loss<double>(a * perm, p * perm, n * perm), t, 1e-12);
    EXPECT_NEAR(contrastive_loss<double>(a * perm, p * perm, yp), c, 1e-12);
  }
}

TEST(LossProperties, DistanceLossesAreRotationInvariant) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    const Mat a = random_matrix(6, 4, rng), p = random_matrix(6, 4, rng), n = random_matrix(6, 4, rng);
    const std::vector<int> y{0, 1, 1, 0};
    const Mat q = random_rotation(6, rng);
    EXPECT_NEAR(triplet_loss<double>(q * a, q * p, q * n), triplet_loss<double>(a, p, n), 1e-10);
    EXPECT_NEAR(contrastive_loss<double>(q * a, q * p, y), contrastive_loss<double>(a, p, y), 1e-10);
  }
}

TEST(LossProperties, DistanceGradientsMatchCentralDifference) {
  std::mt19937_64 rng(12);
  const Mat a = random_matrix(4, 3, rng), p = random_matrix(4, 3, rng), n = random_matrix(4, 3, rng);
  const std::vector<int> y{1, 0, 1};
  TripletGradient<double> tg;
  PairGradient<double> pg;
  triplet_loss<double>(a, p, n, 2.0, &tg);
  contrastive_loss<double>(a, p, y, 2.0, &pg);
  const double h = 1e-6;
  for (Index r = 0; r < 4; ++r)
    for (Index c = 0; c < 3; ++c) {
      Mat ap = a, am = a;
      ap(r, c) += h;
      am(r, c) -= h;
      EXPECT_NEAR(tg.anchors(r, c), (triplet_loss<double>(ap, p, n) - triplet_loss<double>(am, p, n)) / (2 * h), 1e-6);
      EXPECT_NEAR(pg.first(r, c),
                  (contrastive_loss<double>(ap, p, y) - contrastive_loss<double>(am, p, y)) / (2 * h), 1e-6);
    }
}

TEST(LossProperties, CoincidentEmbeddingsGiveFiniteGradients) {
  const Mat e = Mat::Zero(3, 1);
  const int dissimilar[] = {1};
  PairGradient<double> pg;
  TripletGradient<double> tg;
  contrastive_loss<double>(e, e, dissimilar, 2.0, &pg);
  triplet_loss<double>(e, e, e, 2.0, &tg);
  EXPECT_TRUE(pg.first.allFinite());
  EXPECT_TRUE(tg.anchors.allFinite());
}
