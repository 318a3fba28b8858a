#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace harood {

using Index = Eigen::Index;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using RowMajorMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Errors. Everything thrown by the library derives from harood::Error.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct RangeViolation : Error {
  using Error::Error;
};
struct ShapeMismatch : Error {
  using Error::Error;
};
struct FormatError : Error {
  using Error::Error;
};
struct ConfigError : Error {
  using Error::Error;
};
struct NumericalError : Error {
  using Error::Error;
};

/// Scene classes. The first three are the in-distribution activities; the
/// remaining kinds are disturbers that must be flagged as out-of-distribution.
enum class SceneKind : std::uint32_t {
  sit = 0,
  stand = 1,
  walk = 2,
  fan = 3,
  toy_car = 4,
  swinging = 5,
  stationary_clutter = 6,
  robot_vacuum = 7,
};

inline constexpr int kNumActivityClasses = 3;
inline constexpr int kNumSceneKinds = 8;

constexpr bool is_in_distribution(SceneKind kind) {
  return static_cast<std::uint32_t>(kind) < kNumActivityClasses;
}

std::string_view to_string(SceneKind kind);
SceneKind scene_kind_from_string(std::string_view name);
SceneKind scene_kind_from_code(std::uint32_t code);

enum class RdiVariant { macro = 0, micro = 1 };

std::string_view to_string(RdiVariant variant);

enum class Split : std::uint32_t { train = 0, oe = 1, calibration = 2, test = 3 };

inline constexpr int kNumSplits = 4;

std::string_view to_string(Split split);
Split split_from_string(std::string_view name);

}  // namespace harood
