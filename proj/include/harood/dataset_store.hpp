#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "harood/radar_sim.hpp"
#include "harood/rdi_preproc.hpp"
#include "harood/types.hpp"

namespace harood {

inline constexpr int kDatasetFormatVersion = 1;

struct SampleRecord {
  std::uint32_t id = 0;
  RangeDopplerImagef macro;
  RangeDopplerImagef micro;
  SceneKind label = SceneKind::sit;
  Split split = Split::train;
};

struct ManifestEntry {
  std::uint32_t id = 0;
  SceneKind label = SceneKind::sit;
  std::uint64_t offset = 0;
};

struct SplitIndex {
  std::string file;
  std::uint64_t byte_length = 0;
  std::uint64_t checksum = 0;  // FNV-1a 64 over the blob
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::vector<ManifestEntry> records;
};

struct DatasetManifest {
  int format_version = kDatasetFormatVersion;
  std::uint64_t seed = 0;
  nlohmann::json config_snapshot = nlohmann::json::object();
  std::array<SplitIndex, kNumSplits> splits;
  /// Directory holding the blobs; not serialized.
  std::filesystem::path directory;

  const SplitIndex& split(Split s) const { return splits[static_cast<std::size_t>(s)]; }
  SplitIndex& split(Split s) { return splits[static_cast<std::size_t>(s)]; }
};

/// Writes one little-endian float32 blob per non-empty split and a
/// `manifest.json` into directory. Records of one split must share a shape.
DatasetManifest write_samples(std::span<const SampleRecord> records,
                              const std::filesystem::path& directory, std::uint64_t seed = 0,
                              const nlohmann::json& config_snapshot = nlohmann::json::object());

/// Reads back one split. Verifies version, byte length and checksum.
std::vector<SampleRecord> read_samples(const DatasetManifest& manifest, Split split);

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);
DatasetManifest load_manifest(const std::filesystem::path& path);

std::uint64_t fnv1a64(std::span<const unsigned char> bytes,
                      std::uint64_t hash = 0xcbf29ce484222325ULL);

/// Position of a record within its split's record list.
struct RecordRef {
  Split split = Split::train;
  std::size_t index = 0;

  bool operator==(const RecordRef&) const = default;
};

/// Indices into the train split.
struct TripletBatch {
  std::vector<std::size_t> anchors;
  std::vector<std::size_t> positives;
  std::vector<std::size_t> negatives;

  std::size_t size() const { return anchors.size(); }
};

struct ContrastivePairBatch {
  std::vector<RecordRef> first;
  std::vector<RecordRef> second;
  std::vector<int> y;  // 0 = similar (both ID or both OOD), 1 = dissimilar

  std::size_t size() const { return y.size(); }
};

/// Uniform anchors over the train split, positive from the anchor's class
/// (never the anchor itself), negative from any other class.
TripletBatch sample_triplets(const DatasetManifest& manifest, std::size_t batch_size,
                             std::uint64_t seed);

/// Exactly floor(b/2) dissimilar pairs, the rest similar, in shuffled order.
/// ID records come from train and oe, OOD records from oe.
ContrastivePairBatch sample_contrastive_pairs(const DatasetManifest& manifest,
                                              std::size_t batch_size, std::uint64_t seed);

}  // namespace harood
