#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "harood/layers.hpp"
#include "harood/types.hpp"

namespace harood {

struct AutoencoderConfig {
  std::vector<int> channels{8, 16, 32};
  int kernel = 3;
  int stride = 2;
  Activation hidden = Activation::elu;
  Activation output = Activation::sigmoid;

  bool operator==(const AutoencoderConfig&) const = default;
};

struct HeadConfig {
  std::vector<int> channels{16, 32};
  int kernel = 3;
  int stride = 2;
  int embedding_dim = 64;

  bool operator==(const HeadConfig&) const = default;
};

struct ClassifierConfig {
  int hidden = 32;
  int n_classes = kNumActivityClasses;

  bool operator==(const ClassifierConfig&) const = default;
};

struct NetworkConfig {
  int image_rows = 64;
  int image_cols = 64;
  bool bias = true;
  AutoencoderConfig autoencoder;
  HeadConfig head;
  ClassifierConfig classifier;

  bool operator==(const NetworkConfig&) const = default;
};

/// Contiguous parameter ranges, in storage order.
enum class ParameterGroup {
  encoder_macro = 0,
  decoder_macro = 1,
  encoder_micro = 2,
  decoder_micro = 3,
  head = 4,
  classifier = 5,
};

inline constexpr int kNumParameterGroups = 6;

std::string_view to_string(ParameterGroup group);

struct ParameterRange {
  Index begin = 0;
  Index end = 0;

  Index size() const { return end - begin; }
  bool contains(Index i) const { return i >= begin && i < end; }
};

inline ParameterGroup encoder_group(RdiVariant j) {
  return j == RdiVariant::macro ? ParameterGroup::encoder_macro : ParameterGroup::encoder_micro;
}
inline ParameterGroup decoder_group(RdiVariant j) {
  return j == RdiVariant::macro ? ParameterGroup::decoder_macro : ParameterGroup::decoder_micro;
}

template <typename Scalar>
struct AutoencoderTrace {
  Trace<Scalar> encoder;
  Trace<Scalar> decoder;
  FeatureMap<Scalar> latent;
  Matrix<Scalar> reconstruction;  // empty when the decoder was not run
};

template <typename Scalar>
struct HeadTrace {
  Trace<Scalar> layers;
  Vector<Scalar> embedding;
};

template <typename Scalar>
struct ClassifierTrace {
  Trace<Scalar> layers;
  Vector<Scalar> logits;
};

/// Two encoder-decoder pairs (macro and micro RDIs), an embedding head over
/// the concatenated reconstructions, and the stage-2 activity classifier.
/// All parameters share one flat vector so optimizers, checkpoints and
/// gradient-routing checks work on plain index ranges.
template <typename Scalar>
class HaroodNetwork {
 public:
  using Image = Matrix<Scalar>;
  using VectorType = Vector<Scalar>;

  explicit HaroodNetwork(const NetworkConfig& config = {}) : config_(config) { build(); }

  const NetworkConfig& config() const { return config_; }
  const ParameterLayout& layout() const { return layout_; }
  VectorType& parameters() { return params_; }
  const VectorType& parameters() const { return params_; }
  VectorType zero_gradient() const { return VectorType::Zero(layout_.size()); }

  ParameterRange range(ParameterGroup g) const { return groups_[static_cast<std::size_t>(g)]; }
  /// Everything trained in stage 1: both E-D pairs and the embedding head.
  ParameterRange stage1_range() const {
    return {range(ParameterGroup::encoder_macro).begin, range(ParameterGroup::head).end};
  }

  Index latent_size() const { return latent_size_; }
  int embedding_dim() const { return config_.head.embedding_dim; }
  int n_classes() const { return config_.classifier.n_classes; }

  void initialize(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (const auto& s : encoders_) s.initialize(params_, rng);
    for (const auto& s : decoders_) s.initialize(params_, rng);
    head_.initialize(params_, rng);
    classifier_.initialize(params_, rng);
  }

  template <typename Other>
  HaroodNetwork<Other> cast() const {
    HaroodNetwork<Other> out(config_);
    out.parameters() = params_.template cast<Other>();
    return out;
  }

  // Direct access for custom initializations.
  const Sequential& encoder(RdiVariant j) const { return encoders_[index(j)]; }
  const Sequential& decoder(RdiVariant j) const { return decoders_[index(j)]; }

  AutoencoderTrace<Scalar> trace_autoencoder(const Image& x, RdiVariant j, bool decode = true) const {
    check_image(x);
    AutoencoderTrace<Scalar> t;
    t.latent = encoders_[index(j)].forward(params_, FeatureMap<Scalar>::from_image(x), &t.encoder);
    if (decode) t.reconstruction = decoders_[index(j)].forward(params_, t.latent, &t.decoder).channel_image(0);
    return t;
  }

  /// Backpropagates a reconstruction gradient (through decoder then encoder)
  /// and/or a latent gradient (encoder only). Returns d/dx when requested.
  Image backprop_autoencoder(const AutoencoderTrace<Scalar>& t, RdiVariant j, const Image* grad_reconstruction,
                             const Matrix<Scalar>* grad_latent, VectorType& grads,
                             bool need_input_grad = false) const {
    FeatureMap<Scalar> g;
    g.height = t.latent.height;
    g.width = t.latent.width;
    g.data = Matrix<Scalar>::Zero(t.latent.data.rows(), t.latent.data.cols());
    if (grad_reconstruction) {
      if (t.reconstruction.size() == 0) throw Error("autoencoder trace has no decoder pass");
      g = decoders_[index(j)].backward(params_, t.decoder, FeatureMap<Scalar>::from_image(*grad_reconstruction),
                                       grads, true);
    }
    if (grad_latent) g.data += *grad_latent;
    if (!grad_reconstruction && !grad_latent) return {};
    FeatureMap<Scalar> gx = encoders_[index(j)].backward(params_, t.encoder, std::move(g), grads, need_input_grad);
    return need_input_grad ? gx.channel_image(0) : Image{};
  }

  HeadTrace<Scalar> trace_head(const Image& reconstruction_macro, const Image& reconstruction_micro) const {
    check_image(reconstruction_macro);
    check_image(reconstruction_micro);
    FeatureMap<Scalar> x;
    x.height = config_.image_rows;
    x.width = config_.image_cols;
    x.data.resize(2, reconstruction_macro.size());
    x.data.row(0) = FeatureMap<Scalar>::from_image(reconstruction_macro).data;
    x.data.row(1) = FeatureMap<Scalar>::from_image(reconstruction_micro).data;
    HeadTrace<Scalar> t;
    t.embedding = head_.forward(params_, std::move(x), &t.layers).data.col(0);
    return t;
  }

  /// Returns gradients with respect to the (macro, micro) reconstructions.
  std::pair<Image, Image> backprop_head(const HeadTrace<Scalar>& t, const VectorType& grad_embedding,
                                        VectorType& grads) const {
    FeatureMap<Scalar> g;
    g.height = g.width = 1;
    g.data = grad_embedding;
    FeatureMap<Scalar> gx = head_.backward(params_, t.layers, std::move(g), grads, true);
    return {gx.channel_image(0), gx.channel_image(1)};
  }

  ClassifierTrace<Scalar> trace_classifier(const VectorType& embedding) const {
    if (embedding.size() != embedding_dim()) throw ShapeMismatch("embedding size mismatch");
    FeatureMap<Scalar> x;
    x.height = x.width = 1;
    x.data = embedding;
    ClassifierTrace<Scalar> t;
    t.logits = classifier_.forward(params_, std::move(x), &t.layers).data.col(0);
    return t;
  }

  VectorType backprop_classifier(const ClassifierTrace<Scalar>& t, const VectorType& grad_logits,
                                 VectorType& grads, bool need_input_grad = false) const {
    FeatureMap<Scalar> g;
    g.height = g.width = 1;
    g.data = grad_logits;
    FeatureMap<Scalar> gx = classifier_.backward(params_, t.layers, std::move(g), grads, need_input_grad);
    return need_input_grad ? VectorType(gx.data.col(0)) : VectorType{};
  }

  /// Flattened encoder output E_j(x).
  VectorType encode(const Image& x, RdiVariant j) const {
    check_image(x);
    FeatureMap<Scalar> latent = encoders_[index(j)].forward(params_, FeatureMap<Scalar>::from_image(x));
    return Eigen::Map<const VectorType>(latent.data.data(), latent.data.size());
  }

  /// D_j(E_j(x)).
  Image reconstruct(const Image& x, RdiVariant j) const {
    check_image(x);
    FeatureMap<Scalar> latent = encoders_[index(j)].forward(params_, FeatureMap<Scalar>::from_image(x));
    return decoders_[index(j)].forward(params_, std::move(latent)).channel_image(0);
  }

  /// E_macro(x_macro) followed by E_micro(x_micro).
  VectorType contrastive_embedding(const Image& x_macro, const Image& x_micro) const {
    VectorType e(2 * latent_size_);
    e << encode(x_macro, RdiVariant::macro), encode(x_micro, RdiVariant::micro);
    return e;
  }

  /// Embedding head applied to both reconstructions.
  VectorType embed(const Image& x_macro, const Image& x_micro) const {
    return trace_head(reconstruct(x_macro, RdiVariant::macro), reconstruct(x_micro, RdiVariant::micro))
        .embedding;
  }

  VectorType classify(const VectorType& embedding) const {
    if (embedding.size() != embedding_dim()) throw ShapeMismatch("embedding size mismatch");
    FeatureMap<Scalar> x;
    x.height = x.width = 1;
    x.data = embedding;
    return classifier_.forward(params_, std::move(x)).data.col(0);
  }

 private:
  static std::size_t index(RdiVariant j) { return static_cast<std::size_t>(j); }

  void check_image(const Image& x) const {
    if (x.rows() != config_.image_rows || x.cols() != config_.image_cols)
      throw ShapeMismatch("expected a " + std::to_string(config_.image_rows) + "x" +
                          std::to_string(config_.image_cols) + " image, got " + std::to_string(x.rows()) +
                          "x" + std::to_string(x.cols()));
  }

  void build() {
    const auto& ae = config_.autoencoder;
    if (ae.channels.empty() || config_.head.channels.empty()) throw ConfigError("empty channel list");
    int shrink = 1;
    for (std::size_t s = 0; s < ae.channels.size(); ++s) shrink *= ae.stride;
    if (config_.image_rows % shrink || config_.image_cols % shrink)
      throw ConfigError("image size must be divisible by stride^stages");
    latent_size_ = Index(ae.channels.back()) * (config_.image_rows / shrink) * (config_.image_cols / shrink);

    for (RdiVariant j : {RdiVariant::macro, RdiVariant::micro}) {
      const std::string tag(to_string(j));
      Index begin = layout_.size();
      Sequential& enc = encoders_[index(j)];
      int in = 1;
      for (std::size_t s = 0; s < ae.channels.size(); ++s) {
        enc.add_conv(layout_, "encoder_" + tag + ".conv" + std::to_string(s), in, ae.channels[s], ae.kernel,
                     ae.stride, config_.bias);
        enc.add_activation(ae.hidden);
        in = ae.channels[s];
      }
      groups_[static_cast<std::size_t>(encoder_group(j))] = {begin, layout_.size()};

      begin = layout_.size();
      Sequential& dec = decoders_[index(j)];
      for (std::size_t s = ae.channels.size(); s-- > 0;) {
        const int out = s > 0 ? ae.channels[s - 1] : 1;
        dec.add_upsample(ae.stride);
        dec.add_conv(layout_, "decoder_" + tag + ".conv" + std::to_string(ae.channels.size() - 1 - s),
                     ae.channels[s], out, ae.kernel, 1, config_.bias);
        dec.add_activation(s > 0 ? ae.hidden : ae.output);
      }
      groups_[static_cast<std::size_t>(decoder_group(j))] = {begin, layout_.size()};
    }

    Index begin = layout_.size();
    const auto& hc = config_.head;
    int in = 2;
    for (std::size_t s = 0; s < hc.channels.size(); ++s) {
      head_.add_conv(layout_, "head.conv" + std::to_string(s), in, hc.channels[s], hc.kernel, hc.stride,
                     config_.bias);
      head_.add_activation(Activation::elu);
      in = hc.channels[s];
    }
    head_.add_global_average_pool();
    head_.add_linear(layout_, "head.linear", in, hc.embedding_dim, config_.bias);
    groups_[static_cast<std::size_t>(ParameterGroup::head)] = {begin, layout_.size()};

    begin = layout_.size();
    const auto& cc = config_.classifier;
    classifier_.add_linear(layout_, "classifier.linear0", hc.embedding_dim, cc.hidden, config_.bias);
    classifier_.add_activation(Activation::elu);
    classifier_.add_linear(layout_, "classifier.linear1", cc.hidden, cc.n_classes, config_.bias);
    groups_[static_cast<std::size_t>(ParameterGroup::classifier)] = {begin, layout_.size()};

    params_ = VectorType::Zero(layout_.size());
  }

  NetworkConfig config_;
  ParameterLayout layout_;
  std::array<Sequential, 2> encoders_;
  std::array<Sequential, 2> decoders_;
  Sequential head_;
  Sequential classifier_;
  std::array<ParameterRange, kNumParameterGroups> groups_{};
  Index latent_size_ = 0;
  VectorType params_;
};

}  // namespace harood
