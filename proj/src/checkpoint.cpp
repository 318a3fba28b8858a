#include "harood/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "harood/dataset_store.hpp"

namespace harood {

namespace {

constexpr char kMagic[8] = {'H', 'R', 'D', 'C', 'K', 'P', 'T', '1'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

class Reader {
 public:
  Reader(std::string bytes, std::string source) : bytes_(std::move(bytes)), source_(std::move(source)) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }

  std::string take(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw FormatError(source_ + ": checkpoint is truncated");
  }

  std::string bytes_;
  std::string source_;
  std::size_t pos_ = 0;
};

std::string_view activation_name(Activation a) {
  switch (a) {
    case Activation::elu: return "elu";
    case Activation::sigmoid: return "sigmoid";
    case Activation::identity: break;
  }
  return "identity";
}

Activation activation_from_name(const std::string& s) {
  if (s == "elu") return Activation::elu;
  if (s == "sigmoid") return Activation::sigmoid;
  if (s == "identity") return Activation::identity;
  throw ConfigError("unknown activation '" + s + "'");
}

}  // namespace

std::string_view to_string(ParameterGroup group) {
  switch (group) {
    case ParameterGroup::encoder_macro: return "encoder_macro";
    case ParameterGroup::decoder_macro: return "decoder_macro";
    case ParameterGroup::encoder_micro: return "encoder_micro";
    case ParameterGroup::decoder_micro: return "decoder_micro";
    case ParameterGroup::head: return "head";
    case ParameterGroup::classifier: return "classifier";
  }
  return "?";
}

nlohmann::json network_config_to_json(const NetworkConfig& c) {
  return {{"image_rows", c.image_rows},
          {"image_cols", c.image_cols},
          {"bias", c.bias},
          {"autoencoder",
           {{"channels", c.autoencoder.channels},
            {"kernel", c.autoencoder.kernel},
            {"stride", c.autoencoder.stride},
            {"hidden", activation_name(c.autoencoder.hidden)},
            {"output", activation_name(c.autoencoder.output)}}},
          {"head",
           {{"channels", c.head.channels},
            {"kernel", c.head.kernel},
            {"stride", c.head.stride},
            {"embedding_dim", c.head.embedding_dim}}},
          {"classifier", {{"hidden", c.classifier.hidden}, {"n_classes", c.classifier.n_classes}}}};
}

NetworkConfig network_config_from_json(const nlohmann::json& j) {
  NetworkConfig c;
  try {
    auto reject_unknown = [](const nlohmann::json& obj, std::initializer_list<const char*> keys, const char* where) {
      for (const auto& [k, v] : obj.items()) {
        bool known = false;
        for (const char* key : keys) known = known || k == key;
        if (!known) throw ConfigError(std::string("unknown key '") + k + "' in " + where);
      }
    };
    reject_unknown(j, {"image_rows", "image_cols", "bias", "autoencoder", "head", "classifier"}, "model");
    c.image_rows = j.value("image_rows", c.image_rows);
    c.image_cols = j.value("image_cols", c.image_cols);
    c.bias = j.value("bias", c.bias);
    if (j.contains("autoencoder")) {
      const auto& a = j.at("autoencoder");
      reject_unknown(a, {"channels", "kernel", "stride", "hidden", "output"}, "model.autoencoder");
      c.autoencoder.channels = a.value("channels", c.autoencoder.channels);
      c.autoencoder.kernel = a.value("kernel", c.autoencoder.kernel);
      c.autoencoder.stride = a.value("stride", c.autoencoder.stride);
      if (a.contains("hidden")) c.autoencoder.hidden = activation_from_name(a.at("hidden").get<std::string>());
      if (a.contains("output")) c.autoencoder.output = activation_from_name(a.at("output").get<std::string>());
    }
    if (j.contains("head")) {
      const auto& h = j.at("head");
      reject_unknown(h, {"channels", "kernel", "stride", "embedding_dim"}, "model.head");
      c.head.channels = h.value("channels", c.head.channels);
      c.head.kernel = h.value("kernel", c.head.kernel);
      c.head.stride = h.value("stride", c.head.stride);
      c.head.embedding_dim = h.value("embedding_dim", c.head.embedding_dim);
    }
    if (j.contains("classifier")) {
      const auto& k = j.at("classifier");
      reject_unknown(k, {"hidden", "n_classes"}, "model.classifier");
      c.classifier.hidden = k.value("hidden", c.classifier.hidden);
      c.classifier.n_classes = k.value("n_classes", c.classifier.n_classes);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid model configuration: ") + e.what());
  }
  return c;
}

void save_checkpoint(const HaroodNetwork<float>& network, const std::filesystem::path& path) {
  std::string out(kMagic, sizeof kMagic);
  put_u32(out, kCheckpointVersion);
  const std::string config = network_config_to_json(network.config()).dump();
  put_u32(out, static_cast<std::uint32_t>(config.size()));
  out += config;
  const auto& tensors = network.layout().tensors();
  put_u32(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    put_u32(out, static_cast<std::uint32_t>(t.name.size()));
    out += t.name;
    put_u32(out, static_cast<std::uint32_t>(t.rows));
    put_u32(out, static_cast<std::uint32_t>(t.cols));
  }
  for (const auto& t : tensors)
    for (Index i = 0; i < t.size(); ++i) put_u32(out, std::bit_cast<std::uint32_t>(network.parameters()[t.offset + i]));

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot write checkpoint " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw Error("short write to checkpoint " + path.string());
}

HaroodNetwork<float> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("checkpoint not found: " + path.string());
  Reader in({std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()}, path.string());
  if (in.take(sizeof kMagic) != std::string(kMagic, sizeof kMagic))
    throw FormatError(path.string() + ": not a checkpoint file");
  if (const auto v = in.u32(); v != kCheckpointVersion)
    throw FormatError(path.string() + ": unsupported checkpoint version " + std::to_string(v));
  const std::uint32_t config_len = in.u32();
  NetworkConfig config;
  try {
    config = network_config_from_json(nlohmann::json::parse(in.take(config_len)));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": corrupt network config: " + e.what());
  }
  HaroodNetwork<float> network(config);
  const auto& tensors = network.layout().tensors();
  if (in.u32() != tensors.size()) throw FormatError(path.string() + ": tensor count does not match architecture");
  for (const auto& t : tensors) {
    const std::string name = in.take(in.u32());
    const std::uint32_t rows = in.u32(), cols = in.u32();
    if (name != t.name || rows != t.rows || cols != t.cols)
      throw FormatError(path.string() + ": tensor table mismatch at " + t.name);
  }
  for (const auto& t : tensors)
    for (Index i = 0; i < t.size(); ++i) network.parameters()[t.offset + i] = std::bit_cast<float>(in.u32());
  if (!in.done()) throw FormatError(path.string() + ": trailing bytes after tensor data");
  return network;
}

std::uint64_t parameter_checksum(const Vector<float>& params, ParameterRange range) {
  const auto* p = reinterpret_cast<const unsigned char*>(params.data() + range.begin);
  return fnv1a64(std::span<const unsigned char>(p, static_cast<std::size_t>(range.size()) * sizeof(float)));
}

}  // namespace harood
