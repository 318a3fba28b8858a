#pragma once

#include <cstdint>
#include <filesystem>

#include <nlohmann/json.hpp>

#include "harood/network.hpp"

namespace harood {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Binary checkpoint: "HRDCKPT1" magic, u32 version, u32-length JSON network
/// config, u32 tensor count, shape table (u32 name length, name, u32 rows,
/// u32 cols) and then every tensor as little-endian float32 in table order.
void save_checkpoint(const HaroodNetwork<float>& network, const std::filesystem::path& path);
HaroodNetwork<float> load_checkpoint(const std::filesystem::path& path);

nlohmann::json network_config_to_json(const NetworkConfig& config);
NetworkConfig network_config_from_json(const nlohmann::json& j);

/// FNV-1a over the raw float bytes of a parameter range.
std::uint64_t parameter_checksum(const Vector<float>& params, ParameterRange range);

}  // namespace harood
