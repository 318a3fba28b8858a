#include "harood/dataset_store.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>

namespace harood {

namespace {

constexpr std::size_t kRecordHeaderBytes = 16;

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xffu));
}

std::uint32_t get_u32(const unsigned char* p) {
  return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) | (std::uint32_t(p[3]) << 24);
}

void put_image(std::vector<unsigned char>& out, const Matrix<float>& m) {
  for (Index r = 0; r < m.rows(); ++r)
    for (Index c = 0; c < m.cols(); ++c) put_u32(out, std::bit_cast<std::uint32_t>(m(r, c)));
}

Matrix<float> get_image(const unsigned char* p, Index rows, Index cols) {
  Matrix<float> m(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c, p += 4) m(r, c) = std::bit_cast<float>(get_u32(p));
  return m;
}

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

std::uint64_t parse_hex64(const std::string& s) { return std::stoull(s, nullptr, 16); }

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

std::uint64_t fnv1a64(std::span<const unsigned char> bytes, std::uint64_t hash) {
  for (unsigned char b : bytes) {
    hash ^= b;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

DatasetManifest write_samples(std::span<const SampleRecord> records, const std::filesystem::path& directory,
                              std::uint64_t seed, const nlohmann::json& config_snapshot) {
  std::error_code ec;
  std::filesystem::create_directories(directory, ec);
  if (ec) throw Error("cannot create dataset directory " + directory.string() + ": " + ec.message());

  DatasetManifest manifest;
  manifest.seed = seed;
  manifest.config_snapshot = config_snapshot;
  manifest.directory = directory;

  for (int s = 0; s < kNumSplits; ++s) {
    const Split split = static_cast<Split>(s);
    SplitIndex& index = manifest.split(split);
    std::vector<unsigned char> blob;
    for (const SampleRecord& rec : records) {
      if (rec.split != split) continue;
      const Index rows = rec.macro.values.rows(), cols = rec.macro.values.cols();
      if (rec.micro.values.rows() != rows || rec.micro.values.cols() != cols)
        throw ShapeMismatch("macro and micro images of record " + std::to_string(rec.id) + " differ in shape");
      if (index.records.empty()) {
        index.rows = static_cast<std::uint32_t>(rows);
        index.cols = static_cast<std::uint32_t>(cols);
      } else if (index.rows != rows || index.cols != cols) {
        throw ShapeMismatch("records of split " + std::string(to_string(split)) + " differ in shape");
      }
      index.records.push_back({rec.id, rec.label, blob.size()});
      put_u32(blob, rec.id);
      put_u32(blob, static_cast<std::uint32_t>(rec.label));
      put_u32(blob, index.rows);
      put_u32(blob, index.cols);
      put_image(blob, rec.macro.values);
      put_image(blob, rec.micro.values);
    }
    if (index.records.empty()) continue;
    index.file = std::string(to_string(split)) + ".bin";
    index.byte_length = blob.size();
    index.checksum = fnv1a64(blob);
    std::ofstream out(directory / index.file, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + (directory / index.file).string());
    out.write(reinterpret_cast<const char*>(blob.data()), static_cast<std::streamsize>(blob.size()));
    if (!out) throw Error("short write to " + (directory / index.file).string());
  }
  save_manifest(manifest, directory / "manifest.json");
  return manifest;
}

std::vector<SampleRecord> read_samples(const DatasetManifest& manifest, Split split) {
  if (manifest.format_version != kDatasetFormatVersion)
    throw FormatError("unsupported dataset format version " + std::to_string(manifest.format_version));
  const SplitIndex& index = manifest.split(split);
  if (index.records.empty()) return {};

  const std::filesystem::path path = manifest.directory / index.file;
  const std::vector<unsigned char> blob = read_file(path);
  if (blob.size() != index.byte_length)
    throw FormatError(path.string() + ": expected " + std::to_string(index.byte_length) + " bytes, found " +
                      std::to_string(blob.size()));
  if (fnv1a64(blob) != index.checksum) throw FormatError(path.string() + ": checksum mismatch");

  const std::size_t image_bytes = std::size_t(index.rows) * index.cols * 4;
  std::vector<SampleRecord> out;
  out.reserve(index.records.size());
  for (const ManifestEntry& e : index.records) {
    if (e.offset + kRecordHeaderBytes + 2 * image_bytes > blob.size())
      throw FormatError(path.string() + ": record " + std::to_string(e.id) + " is truncated");
    const unsigned char* p = blob.data() + e.offset;
    if (get_u32(p) != e.id || get_u32(p + 4) != static_cast<std::uint32_t>(e.label) || get_u32(p + 8) != index.rows ||
        get_u32(p + 12) != index.cols)
      throw FormatError(path.string() + ": record header does not match manifest for id " + std::to_string(e.id));
    SampleRecord rec;
    rec.id = e.id;
    rec.label = e.label;
    rec.split = split;
    rec.macro.variant = RdiVariant::macro;
    rec.micro.variant = RdiVariant::micro;
    rec.macro.values = get_image(p + kRecordHeaderBytes, index.rows, index.cols);
    rec.micro.values = get_image(p + kRecordHeaderBytes + image_bytes, index.rows, index.cols);
    out.push_back(std::move(rec));
  }
  return out;
}

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  nlohmann::json j;
  j["format_version"] = manifest.format_version;
  j["seed"] = manifest.seed;
  j["config"] = manifest.config_snapshot;
  nlohmann::json splits = nlohmann::json::object();
  for (int s = 0; s < kNumSplits; ++s) {
    const SplitIndex& index = manifest.splits[s];
    nlohmann::json records = nlohmann::json::array();
    for (const auto& e : index.records) records.push_back({e.id, std::string(to_string(e.label)), e.offset});
    splits[std::string(to_string(static_cast<Split>(s)))] = {
        {"file", index.file},   {"byte_length", index.byte_length}, {"checksum", hex64(index.checksum)},
        {"rows", index.rows},   {"cols", index.cols},               {"records", records}};
  }
  j["splits"] = splits;
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write manifest " + path.string());
  out << j.dump(1) << '\n';
  if (!out) throw Error("short write to manifest " + path.string());
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("manifest not found: " + path.string());
  DatasetManifest m;
  try {
    const nlohmann::json j = nlohmann::json::parse(in);
    m.format_version = j.at("format_version").get<int>();
    if (m.format_version != kDatasetFormatVersion)
      throw FormatError("unsupported dataset format version " + std::to_string(m.format_version));
    m.seed = j.at("seed").get<std::uint64_t>();
    m.config_snapshot = j.at("config");
    for (const auto& [name, sj] : j.at("splits").items()) {
      SplitIndex& index = m.split(split_from_string(name));
      index.file = sj.at("file").get<std::string>();
      index.byte_length = sj.at("byte_length").get<std::uint64_t>();
      index.checksum = parse_hex64(sj.at("checksum").get<std::string>());
      index.rows = sj.at("rows").get<std::uint32_t>();
      index.cols = sj.at("cols").get<std::uint32_t>();
      for (const auto& r : sj.at("records"))
        index.records.push_back({r.at(0).get<std::uint32_t>(), scene_kind_from_string(r.at(1).get<std::string>()),
                                 r.at(2).get<std::uint64_t>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("malformed manifest " + path.string() + ": " + e.what());
  }
  m.directory = path.parent_path();
  return m;
}

TripletBatch sample_triplets(const DatasetManifest& manifest, std::size_t batch_size, std::uint64_t seed) {
  const auto& records = manifest.split(Split::train).records;
  std::array<std::vector<std::size_t>, kNumActivityClasses> by_class;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (!is_in_distribution(records[i].label)) throw Error("train split holds a non-activity record");
    by_class[static_cast<std::size_t>(records[i].label)].push_back(i);
  }
  for (int c = 0; c < kNumActivityClasses; ++c)
    if (by_class[c].size() < 2)
      throw Error("class " + std::string(to_string(static_cast<SceneKind>(c))) +
                  " has fewer than 2 train samples; cannot form triplets");

  std::mt19937_64 rng(seed);
  TripletBatch batch;
  for (std::size_t i = 0; i < batch_size; ++i) {
    const std::size_t a = std::uniform_int_distribution<std::size_t>(0, records.size() - 1)(rng);
    const auto cls = static_cast<std::size_t>(records[a].label);
    const auto& same = by_class[cls];
    std::size_t p;
    do {
      p = same[std::uniform_int_distribution<std::size_t>(0, same.size() - 1)(rng)];
    } while (p == a);
    const std::size_t others = records.size() - same.size();
    std::size_t pick = std::uniform_int_distribution<std::size_t>(0, others - 1)(rng);
    std::size_t n = 0;
    for (std::size_t c = 0; c < kNumActivityClasses; ++c) {
      if (c == cls) continue;
      if (pick < by_class[c].size()) {
        n = by_class[c][pick];
        break;
      }
      pick -= by_class[c].size();
    }
    batch.anchors.push_back(a);
    batch.positives.push_back(p);
    batch.negatives.push_back(n);
  }
  return batch;
}

ContrastivePairBatch sample_contrastive_pairs(const DatasetManifest& manifest, std::size_t batch_size,
                                              std::uint64_t seed) {
  std::vector<RecordRef> id_pool, ood_pool;
  for (Split s : {Split::train, Split::oe}) {
    const auto& records = manifest.split(s).records;
    for (std::size_t i = 0; i < records.size(); ++i)
      (is_in_distribution(records[i].label) ? id_pool : ood_pool).push_back({s, i});
  }
  if (manifest.split(Split::oe).records.empty()) throw Error("outlier-exposure split is empty");
  if (ood_pool.empty()) throw Error("outlier-exposure split contains no OOD samples");
  if (id_pool.empty()) throw Error("no in-distribution samples for contrastive pairs");

  std::mt19937_64 rng(seed);
  auto draw = [&](const std::vector<RecordRef>& pool) {
    return pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng)];
  };

  std::vector<int> y(batch_size, 0);
  std::fill(y.begin(), y.begin() + static_cast<std::ptrdiff_t>(batch_size / 2), 1);
  std::shuffle(y.begin(), y.end(), rng);

  ContrastivePairBatch batch;
  for (int label : y) {
    RecordRef a, b;
    if (label == 1) {
      a = draw(id_pool);
      b = draw(ood_pool);
      if (std::uniform_int_distribution<int>(0, 1)(rng)) std::swap(a, b);
    } else {
      const auto& pool = std::uniform_int_distribution<int>(0, 1)(rng) ? ood_pool : id_pool;
      a = draw(pool);
      b = draw(pool);
    }
    batch.first.push_back(a);
    batch.second.push_back(b);
    batch.y.push_back(label);
  }
  return batch;
}

}  // namespace harood
