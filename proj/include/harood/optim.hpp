#pragma once

#include <cmath>

#include "harood/network.hpp"
#include "harood/types.hpp"

namespace harood {

struct OptimizerConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam variant whose second moment is an exponentially weighted infinity
/// norm: u = max(beta2 u, |g|). Updates only the parameters inside `range`.
template <typename Scalar>
class Adamax {
 public:
  Adamax(ParameterRange range, OptimizerConfig config = {})
      : range_(range), config_(config), m_(Vector<Scalar>::Zero(range.size())),
        u_(Vector<Scalar>::Zero(range.size())) {}

  void step(Vector<Scalar>& params, const Vector<Scalar>& grads) {
    ++t_;
    const Scalar b1 = Scalar(config_.beta1), b2 = Scalar(config_.beta2);
    const Scalar lr = Scalar(config_.learning_rate / (1.0 - std::pow(config_.beta1, double(t_))));
    auto g = grads.segment(range_.begin, range_.size()).array();
    m_.array() = b1 * m_.array() + (Scalar(1) - b1) * g;
    u_.array() = (b2 * u_.array()).max(g.abs());
    params.segment(range_.begin, range_.size()).array() -= lr * m_.array() / (u_.array() + Scalar(config_.epsilon));
  }

  long steps() const { return t_; }

 private:
  ParameterRange range_;
  OptimizerConfig config_;
  Vector<Scalar> m_, u_;
  long t_ = 0;
};

template <typename Scalar>
class Adam {
 public:
  Adam(ParameterRange range, OptimizerConfig config = {})
      : range_(range), config_(config), m_(Vector<Scalar>::Zero(range.size())),
        v_(Vector<Scalar>::Zero(range.size())) {}

  void step(Vector<Scalar>& params, const Vector<Scalar>& grads) {
    ++t_;
    const Scalar b1 = Scalar(config_.beta1), b2 = Scalar(config_.beta2);
    const Scalar c1 = Scalar(1.0 - std::pow(config_.beta1, double(t_)));
    const Scalar c2 = Scalar(1.0 - std::pow(config_.beta2, double(t_)));
    auto g = grads.segment(range_.begin, range_.size()).array();
    m_.array() = b1 * m_.array() + (Scalar(1) - b1) * g;
    v_.array() = b2 * v_.array() + (Scalar(1) - b2) * g.square();
    params.segment(range_.begin, range_.size()).array() -=
        Scalar(config_.learning_rate) * (m_.array() / c1) / ((v_.array() / c2).sqrt() + Scalar(config_.epsilon));
  }

 private:
  ParameterRange range_;
  OptimizerConfig config_;
  Vector<Scalar> m_, v_;
  long t_ = 0;
};

}  // namespace harood
