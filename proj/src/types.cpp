#include "harood/types.hpp"

#include <array>
#include <string>

namespace harood {

namespace {

constexpr std::array<std::string_view, kNumSceneKinds> kSceneNames = {
    "sit", "stand", "walk", "fan", "toy_car", "swinging", "stationary_clutter", "robot_vacuum"};

constexpr std::array<std::string_view, kNumSplits> kSplitNames = {"train", "oe", "calibration", "test"};

}  // namespace

std::string_view to_string(SceneKind kind) {
  const auto i = static_cast<std::size_t>(kind);
  if (i >= kSceneNames.size()) throw Error("invalid scene kind code " + std::to_string(i));
  return kSceneNames[i];
}

SceneKind scene_kind_from_string(std::string_view name) {
  for (std::size_t i = 0; i < kSceneNames.size(); ++i)
    if (kSceneNames[i] == name) return static_cast<SceneKind>(i);
  throw Error("unknown scene kind '" + std::string(name) + "'");
}

SceneKind scene_kind_from_code(std::uint32_t code) {
  if (code >= kNumSceneKinds) throw FormatError("invalid label code " + std::to_string(code));
  return static_cast<SceneKind>(code);
}

std::string_view to_string(RdiVariant variant) {
  return variant == RdiVariant::macro ? "macro" : "micro";
}

std::string_view to_string(Split split) {
  const auto i = static_cast<std::size_t>(split);
  if (i >= kSplitNames.size()) throw Error("invalid split code");
  return kSplitNames[i];
}

Split split_from_string(std::string_view name) {
  for (std::size_t i = 0; i < kSplitNames.size(); ++i)
    if (kSplitNames[i] == name) return static_cast<Split>(i);
  throw Error("unknown split '" + std::string(name) + "'");
}

}  // namespace harood
