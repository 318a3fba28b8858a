#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "harood/types.hpp"

namespace harood {

inline constexpr double kTripletMargin = 2.0;
inline constexpr double kContrastiveMargin = 2.0;
/// Added under the square root of distance-gradient denominators.
inline constexpr double kDistanceEpsilon = 1e-12;

struct LossBreakdown {
  double l_rec = 0;
  double l_tri = 0;
  double l_con = 0;
  double total = 0;
  std::size_t batch_size = 0;
  bool contrastive_enabled = true;
};

/// total = l_rec + l_tri (+ l_con when enabled).
inline LossBreakdown total_stage1_loss(double l_rec, double l_tri, double l_con, bool contrastive_enabled,
                                       std::size_t batch_size = 0) {
  LossBreakdown b;
  b.l_rec = l_rec;
  b.l_tri = l_tri;
  b.l_con = contrastive_enabled ? l_con : 0.0;
  b.total = b.l_rec + b.l_tri + b.l_con;
  b.batch_size = batch_size;
  b.contrastive_enabled = contrastive_enabled;
  return b;
}

/// Per-image mean squared error.
template <typename Scalar>
Scalar image_mse(const Matrix<Scalar>& original, const Matrix<Scalar>& reconstruction) {
  if (original.rows() != reconstruction.rows() || original.cols() != reconstruction.cols())
    throw ShapeMismatch("reconstruction shape differs from original");
  return (reconstruction - original).squaredNorm() / Scalar(original.size());
}

/// d image_mse / d reconstruction.
template <typename Scalar>
Matrix<Scalar> image_mse_gradient(const Matrix<Scalar>& original, const Matrix<Scalar>& reconstruction) {
  return (reconstruction - original) * (Scalar(2) / Scalar(original.size()));
}

/// The six images of one triplet item, indexed by sample role k in {a, p, n}
/// and RDI variant j in {macro, micro}.
template <typename Scalar>
struct SixWay {
  std::array<Matrix<Scalar>, 6> images;

  static constexpr std::size_t slot(std::size_t k, std::size_t j) { return 2 * k + j; }
  Matrix<Scalar>& at(std::size_t k, std::size_t j) { return images[slot(k, j)]; }
  const Matrix<Scalar>& at(std::size_t k, std::size_t j) const { return images[slot(k, j)]; }
};

/// (1/b) sum over items and the six (k, j) combinations of per-image MSE.
template <typename Scalar>
Scalar reconstruction_loss(std::span<const SixWay<Scalar>> originals,
                           std::span<const SixWay<Scalar>> reconstructions,
                           std::vector<SixWay<Scalar>>* gradient = nullptr) {
  if (originals.size() != reconstructions.size()) throw ShapeMismatch("batch size mismatch");
  const std::size_t b = originals.size();
  if (b == 0) return Scalar(0);
  if (gradient) gradient->assign(b, {});
  Scalar total(0);
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t s = 0; s < 6; ++s) {
      total += image_mse(originals[i].images[s], reconstructions[i].images[s]);
      if (gradient)
        (*gradient)[i].images[s] =
            image_mse_gradient(originals[i].images[s], reconstructions[i].images[s]) / Scalar(b);
    }
  return total / Scalar(b);
}

template <typename Scalar>
struct TripletGradient {
  Matrix<Scalar> anchors, positives, negatives;
};

/// (1/b) sum max(|a - p| - |a - n| + margin, 0); columns are samples.
template <typename Scalar>
Scalar triplet_loss(const Matrix<Scalar>& anchors, const Matrix<Scalar>& positives,
                    const Matrix<Scalar>& negatives, Scalar margin = Scalar(kTripletMargin),
                    TripletGradient<Scalar>* gradient = nullptr) {
  if (anchors.rows() != positives.rows() || anchors.rows() != negatives.rows() ||
      anchors.cols() != positives.cols() || anchors.cols() != negatives.cols())
    throw ShapeMismatch("triplet embedding batches differ in shape");
  const Index b = anchors.cols();
  if (gradient) {
    gradient->anchors = Matrix<Scalar>::Zero(anchors.rows(), b);
    gradient->positives = Matrix<Scalar>::Zero(anchors.rows(), b);
    gradient->negatives = Matrix<Scalar>::Zero(anchors.rows(), b);
  }
  if (b == 0) return Scalar(0);
  Scalar total(0);
  for (Index i = 0; i < b; ++i) {
    const Vector<Scalar> dp = anchors.col(i) - positives.col(i);
    const Vector<Scalar> dn = anchors.col(i) - negatives.col(i);
    const Scalar sp = dp.squaredNorm(), sn = dn.squaredNorm();
    const Scalar hinge = std::sqrt(sp) - std::sqrt(sn) + margin;
    if (hinge <= Scalar(0)) continue;
    total += hinge;
    if (gradient) {
      const Vector<Scalar> up = dp / std::sqrt(sp + Scalar(kDistanceEpsilon)) / Scalar(b);
      const Vector<Scalar> un = dn / std::sqrt(sn + Scalar(kDistanceEpsilon)) / Scalar(b);
      gradient->anchors.col(i) = up - un;
      gradient->positives.col(i) = -up;
      gradient->negatives.col(i) = un;
    }
  }
  return total / Scalar(b);
}

template <typename Scalar>
struct PairGradient {
  Matrix<Scalar> first, second;
};

/// (1/b) sum (1 - y) |e1 - e2|^2 + y max(0, margin - |e1 - e2|)^2.
template <typename Scalar>
Scalar contrastive_loss(const Matrix<Scalar>& first, const Matrix<Scalar>& second, std::span<const int> y,
                        Scalar margin = Scalar(kContrastiveMargin), PairGradient<Scalar>* gradient = nullptr) {
  if (first.rows() != second.rows() || first.cols() != second.cols() ||
      static_cast<std::size_t>(first.cols()) != y.size())
    throw ShapeMismatch("contrastive batch shapes differ");
  const Index b = first.cols();
  if (gradient) {
    gradient->first = Matrix<Scalar>::Zero(first.rows(), b);
    gradient->second = Matrix<Scalar>::Zero(first.rows(), b);
  }
  if (b == 0) return Scalar(0);
  Scalar total(0);
  for (Index i = 0; i < b; ++i) {
    if (y[i] != 0 && y[i] != 1) throw Error("contrastive label must be 0 or 1");
    const Vector<Scalar> d = first.col(i) - second.col(i);
    const Scalar s = d.squaredNorm();
    Vector<Scalar> g;
    if (y[i] == 0) {
      total += s;
      if (gradient) g = Scalar(2) * d;
    } else {
      const Scalar dist = std::sqrt(s);
      const Scalar gap = margin - dist;
      if (gap <= Scalar(0)) continue;
      total += gap * gap;
      if (gradient) g = Scalar(-2) * gap * d / std::sqrt(s + Scalar(kDistanceEpsilon));
    }
    if (gradient) {
      gradient->first.col(i) = g / Scalar(b);
      gradient->second.col(i) = -g / Scalar(b);
    }
  }
  return total / Scalar(b);
}

/// Numerically stable log(sum(exp(v))).
template <typename Derived>
typename Derived::Scalar log_sum_exp(const Eigen::MatrixBase<Derived>& v) {
  using Scalar = typename Derived::Scalar;
  const Scalar m = v.maxCoeff();
  return m + std::log((v.array() - m).exp().sum());
}

template <typename Derived>
Vector<typename Derived::Scalar> softmax(const Eigen::MatrixBase<Derived>& v) {
  using Scalar = typename Derived::Scalar;
  const Scalar m = v.maxCoeff();
  Vector<Scalar> e = (v.array() - m).exp().matrix();
  return e / e.sum();
}

/// Mean negative log-softmax of the true class; logits are classes x batch.
template <typename Scalar>
Scalar cross_entropy(const Matrix<Scalar>& logits, std::span<const int> labels,
                     Matrix<Scalar>* gradient = nullptr) {
  if (static_cast<std::size_t>(logits.cols()) != labels.size()) throw ShapeMismatch("label count mismatch");
  const Index b = logits.cols();
  if (gradient) *gradient = Matrix<Scalar>::Zero(logits.rows(), b);
  if (b == 0) return Scalar(0);
  Scalar total(0);
  for (Index i = 0; i < b; ++i) {
    if (labels[i] < 0 || labels[i] >= logits.rows()) throw Error("class label out of range");
    total += log_sum_exp(logits.col(i)) - logits(labels[i], i);
    if (gradient) {
      gradient->col(i) = softmax(logits.col(i)) / Scalar(b);
      (*gradient)(labels[i], i) -= Scalar(1) / Scalar(b);
    }
  }
  return total / Scalar(b);
}

}  // namespace harood
