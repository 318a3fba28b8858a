#include <gtest/gtest.h>

#include <fstream>
#include <vector>

#include "harood/dataset_store.hpp"
#include "test_support.hpp"

using namespace harood;
using test::make_record;

namespace {

std::vector<SampleRecord> ten_records() {
  std::vector<SampleRecord> r;
  const SceneKind kinds[] = {SceneKind::sit, SceneKind::stand, SceneKind::walk};
  for (std::uint32_t i = 0; i < 6; ++i) r.push_back(make_record(i, kinds[i % 3], Split::train));
  r.push_back(make_record(6, SceneKind::fan, Split::oe));
  r.push_back(make_record(7, SceneKind::sit, Split::oe));
  r.push_back(make_record(8, SceneKind::walk, Split::calibration));
  r.push_back(make_record(9, SceneKind::robot_vacuum, Split::test));
  r[0].macro.values(1, 2) = -3.5f;
  r[9].micro.values(3, 0) = 1e-20f;
  return r;
}

void rewrite_manifest(const std::filesystem::path& dir, const std::function<void(nlohmann::json&)>& edit) {
  nlohmann::json j;
  {
    std::ifstream f(dir / "manifest.json");
    j = nlohmann::json::parse(f);
  }
  edit(j);
  std::ofstream(dir / "manifest.json") << j.dump(2);
}

DatasetManifest manifest_with(int sit, int stand, int walk, int oe_id = 0, int oe_ood = 0) {
  DatasetManifest m;
  std::uint32_t id = 0;
  auto add = [&](Split s, SceneKind k, int n) {
    for (int i = 0; i < n; ++i) m.split(s).records.push_back({id++, k, 0});
  };
  add(Split::train, SceneKind::sit, sit);
  add(Split::train, SceneKind::stand, stand);
  add(Split::train, SceneKind::walk, walk);
  add(Split::oe, SceneKind::stand, oe_id);
  add(Split::oe, SceneKind::toy_car, oe_ood);
  return m;
}

}  // namespace

TEST(DatasetStore, RoundTripIsBitExact) {
  test::TempDir dir("store");
  const auto records = ten_records();
  const nlohmann::json snapshot = {{"note", "x"}};
  write_samples(records, dir.path(), 77, snapshot);
  const DatasetManifest m = load_manifest(dir.path() / "manifest.json");
  EXPECT_EQ(m.seed, 77u);
  EXPECT_EQ(m.config_snapshot, snapshot);
  std::size_t total = 0;
  for (int s = 0; s < kNumSplits; ++s) {
    const auto split = static_cast<Split>(s);
    const auto back = read_samples(m, split);
    total += back.size();
    for (const auto& r : back) {
      const auto& orig = records[r.id];
      EXPECT_EQ(r.label, orig.label);
      EXPECT_EQ(r.split, split);
      EXPECT_EQ(r.macro.values, orig.macro.values);
      EXPECT_EQ(r.micro.values, orig.micro.values);
      EXPECT_EQ(r.micro.variant, RdiVariant::micro);
    }
  }
  EXPECT_EQ(total, records.size());
}

TEST(DatasetStore, EmptySplitReadsAsEmpty) {
  test::TempDir dir("empty");
  const std::vector<SampleRecord> only_train{make_record(0, SceneKind::sit, Split::train)};
  const auto m = write_samples(only_train, dir.path());
  EXPECT_TRUE(read_samples(m, Split::test).empty());
  EXPECT_EQ(read_samples(m, Split::train).size(), 1u);
}

TEST(DatasetStore, DetectsTruncatedBlob) {
  test::TempDir dir("trunc");
  const auto m = write_samples(ten_records(), dir.path());
  const auto blob = dir.path() / m.split(Split::train).file;
  std::filesystem::resize_file(blob, std::filesystem::file_size(blob) - 4);
  EXPECT_THROW(read_samples(load_manifest(dir.path() / "manifest.json"), Split::train), FormatError);
}

TEST(DatasetStore, DetectsCorruptedBytes) {
  test::TempDir dir("corrupt");
  const auto m = write_samples(ten_records(), dir.path());
  const auto blob = dir.path() / m.split(Split::train).file;
  std::string bytes = test::read_bytes(blob);
  bytes[bytes.size() / 2] ^= 0x40;
  std::ofstream(blob, std::ios::binary) << bytes;
  EXPECT_THROW(read_samples(load_manifest(dir.path() / "manifest.json"), Split::train), FormatError);
}

TEST(DatasetStore, RejectsUnknownFormatVersion) {
  test::TempDir dir("version");
  write_samples(ten_records(), dir.path());
  rewrite_manifest(dir.path(), [](nlohmann::json& j) { j["format_version"] = 99; });
  EXPECT_THROW(load_manifest(dir.path() / "manifest.json"), FormatError);
}

TEST(DatasetStore, MissingManifestIsAFormatError) {
  test::TempDir dir("missing");
  EXPECT_THROW(load_manifest(dir.path() / "manifest.json"), FormatError);
}

TEST(DatasetStore, RejectsMixedShapesWithinASplit) {
  test::TempDir dir("shape");
  std::vector<SampleRecord> r{make_record(0, SceneKind::sit, Split::train),
                              make_record(1, SceneKind::sit, Split::train, 5, 4)};
  EXPECT_THROW(write_samples(r, dir.path()), ShapeMismatch);
}

TEST(Fnv1a, KnownVectors) {
  EXPECT_EQ(fnv1a64({}), 0xcbf29ce484222325ULL);
  const unsigned char a[] = {'a'};
  EXPECT_EQ(fnv1a64(a), 0xaf63dc4c8601ec8cULL);
}

TEST(Triplets, InvariantsHold) {
  const auto m = manifest_with(5, 7, 9);
  const auto& rec = m.split(Split::train).records;
  const auto batch = sample_triplets(m, 400, 3);
  ASSERT_EQ(batch.size(), 400u);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    EXPECT_NE(batch.anchors[i], batch.positives[i]);
    EXPECT_EQ(rec[batch.anchors[i]].label, rec[batch.positives[i]].label);
    EXPECT_NE(rec[batch.anchors[i]].label, rec[batch.negatives[i]].label);
  }
}

TEST(Triplets, DeterministicPerSeed) {
  const auto m = manifest_with(4, 4, 4);
  const auto a = sample_triplets(m, 50, 9), b = sample_triplets(m, 50, 9), c = sample_triplets(m, 50, 10);
  EXPECT_EQ(a.anchors, b.anchors);
  EXPECT_EQ(a.positives, b.positives);
  EXPECT_EQ(a.negatives, b.negatives);
  EXPECT_NE(a.anchors, c.anchors);
}

TEST(Triplets, AnchorsAreRoughlyBalancedOnABalancedSplit) {
  const auto m = manifest_with(30, 30, 30);
  const auto batch = sample_triplets(m, 1000, 21);
  int counts[3] = {0, 0, 0};
  for (auto a : batch.anchors) ++counts[static_cast<int>(m.split(Split::train).records[a].label)];
  for (int c : counts) {
    EXPECT_GE(c, 333 - 60);
    EXPECT_LE(c, 333 + 60);
  }
}

TEST(Triplets, ClassWithFewerThanTwoSamplesIsAnError) {
  EXPECT_THROW(sample_triplets(manifest_with(1, 4, 4), 8, 0), Error);
  EXPECT_THROW(sample_triplets(manifest_with(4, 0, 4), 8, 0), Error);
}

TEST(ContrastivePairs, LabelsMatchMembership) {
  const auto m = manifest_with(4, 4, 4, 3, 6);
  const auto batch = sample_contrastive_pairs(m, 301, 5);
  ASSERT_EQ(batch.size(), 301u);
  auto label = [&](RecordRef r) { return m.split(r.split).records[r.index].label; };
  int dissimilar = 0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const bool a = is_in_distribution(label(batch.first[i])), b = is_in_distribution(label(batch.second[i]));
    EXPECT_EQ(batch.y[i], a == b ? 0 : 1);
    for (RecordRef r : {batch.first[i], batch.second[i]}) {
      EXPECT_TRUE(r.split == Split::train || r.split == Split::oe);
      if (!is_in_distribution(label(r))) {
        EXPECT_EQ(r.split, Split::oe);
      }
    }
    dissimilar += batch.y[i];
  }
  EXPECT_EQ(dissimilar, 150);
}

TEST(ContrastivePairs, DeterministicAndBalanced) {
  const auto m = manifest_with(10, 10, 10, 5, 20);
  const auto a = sample_contrastive_pairs(m, 500, 8), b = sample_contrastive_pairs(m, 500, 8);
  EXPECT_EQ(a.y, b.y);
  EXPECT_EQ(a.first, b.first);
  EXPECT_EQ(a.second, b.second);
  int ones = 0;
  for (int y : a.y) ones += y;
  EXPECT_GE(ones, 195);
  EXPECT_LE(ones, 305);
}

TEST(ContrastivePairs, NeedsOodOutlierExposure) {
  EXPECT_THROW(sample_contrastive_pairs(manifest_with(4, 4, 4, 0, 0), 8, 0), Error);
  try {
    sample_contrastive_pairs(manifest_with(4, 4, 4, 3, 0), 8, 0);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("no OOD"), std::string::npos);
  }
}
