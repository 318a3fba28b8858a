#pragma once

#include <cmath>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "harood/types.hpp"

namespace harood {

/// Named slice of the flat parameter vector. Weights are stored as an Eigen
/// column-major matrix of `rows x cols`; biases as a vector (cols == 1).
struct TensorInfo {
  std::string name;
  Index rows = 0;
  Index cols = 0;
  Index offset = 0;

  Index size() const { return rows * cols; }
};

class ParameterLayout {
 public:
  Index add(std::string name, Index rows, Index cols) {
    tensors_.push_back({std::move(name), rows, cols, size_});
    size_ += rows * cols;
    return tensors_.back().offset;
  }

  Index size() const { return size_; }
  const std::vector<TensorInfo>& tensors() const { return tensors_; }

  const TensorInfo& find(const std::string& name) const {
    for (const auto& t : tensors_)
      if (t.name == name) return t;
    throw Error("no parameter tensor named " + name);
  }

 private:
  std::vector<TensorInfo> tensors_;
  Index size_ = 0;
};

/// Channels x (height * width) activations; pixel (y, x) lives in column y * width + x.
template <typename Scalar>
struct FeatureMap {
  Matrix<Scalar> data;
  int height = 0;
  int width = 0;

  Index channels() const { return data.rows(); }

  static FeatureMap from_image(const Matrix<Scalar>& image) {
    FeatureMap fm;
    fm.height = static_cast<int>(image.rows());
    fm.width = static_cast<int>(image.cols());
    fm.data.resize(1, image.size());
    Eigen::Map<RowMajorMatrix<Scalar>>(fm.data.data(), image.rows(), image.cols()) = image;
    return fm;
  }

  Matrix<Scalar> channel_image(Index c) const {
    Matrix<Scalar> image(height, width);
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) image(y, x) = data(c, Index(y) * width + x);
    return image;
  }
};

enum class Activation { identity, elu, sigmoid };

struct ConvSpec {
  int in_channels = 1;
  int out_channels = 1;
  int kernel = 3;
  int stride = 1;
  int pad = 1;
  bool bias = true;
  Index weight_offset = 0;
  Index bias_offset = 0;
};

struct LinearSpec {
  int in_features = 1;
  int out_features = 1;
  bool bias = true;
  Index weight_offset = 0;
  Index bias_offset = 0;
};

enum class LayerKind { conv, upsample, activation, linear, global_average_pool };

struct LayerSpec {
  LayerKind kind = LayerKind::activation;
  ConvSpec conv;
  LinearSpec linear;
  int factor = 1;
  Activation activation = Activation::identity;
};

/// Saved state of one layer for the backward pass.
template <typename Scalar>
struct LayerCache {
  Matrix<Scalar> saved;  // im2col columns, layer output or layer input
  int in_height = 0;
  int in_width = 0;
};

template <typename Scalar>
using Trace = std::vector<LayerCache<Scalar>>;

namespace detail {

inline int conv_out(int n, const ConvSpec& c) { return (n + 2 * c.pad - c.kernel) / c.stride + 1; }

template <typename Scalar>
Matrix<Scalar> im2col(const FeatureMap<Scalar>& in, const ConvSpec& c, int out_h, int out_w) {
  const int k = c.kernel;
  Matrix<Scalar> cols = Matrix<Scalar>::Zero(Index(c.in_channels) * k * k, Index(out_h) * out_w);
  for (int ch = 0; ch < c.in_channels; ++ch)
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx) {
        const Index row = (Index(ch) * k + ky) * k + kx;
        for (int oy = 0; oy < out_h; ++oy) {
          const int iy = oy * c.stride - c.pad + ky;
          if (iy < 0 || iy >= in.height) continue;
          for (int ox = 0; ox < out_w; ++ox) {
            const int ix = ox * c.stride - c.pad + kx;
            if (ix < 0 || ix >= in.width) continue;
            cols(row, Index(oy) * out_w + ox) = in.data(ch, Index(iy) * in.width + ix);
          }
        }
      }
  return cols;
}

template <typename Scalar>
FeatureMap<Scalar> col2im(const Matrix<Scalar>& cols, const ConvSpec& c, int in_h, int in_w,
                          int out_h, int out_w) {
  const int k = c.kernel;
  FeatureMap<Scalar> out;
  out.height = in_h;
  out.width = in_w;
  out.data = Matrix<Scalar>::Zero(c.in_channels, Index(in_h) * in_w);
  for (int ch = 0; ch < c.in_channels; ++ch)
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx) {
        const Index row = (Index(ch) * k + ky) * k + kx;
        for (int oy = 0; oy < out_h; ++oy) {
          const int iy = oy * c.stride - c.pad + ky;
          if (iy < 0 || iy >= in_h) continue;
          for (int ox = 0; ox < out_w; ++ox) {
            const int ix = ox * c.stride - c.pad + kx;
            if (ix < 0 || ix >= in_w) continue;
            out.data(ch, Index(iy) * in_w + ix) += cols(row, Index(oy) * out_w + ox);
          }
        }
      }
  return out;
}

template <typename Scalar>
Scalar activate(Activation a, Scalar x) {
  switch (a) {
    case Activation::elu: return x > Scalar(0) ? x : std::expm1(x);
    case Activation::sigmoid: return Scalar(1) / (Scalar(1) + std::exp(-x));
    case Activation::identity: break;
  }
  return x;
}

// Derivative expressed through the activation output y.
template <typename Scalar>
Scalar activate_grad(Activation a, Scalar y) {
  switch (a) {
    case Activation::elu: return y > Scalar(0) ? Scalar(1) : y + Scalar(1);
    case Activation::sigmoid: return y * (Scalar(1) - y);
    case Activation::identity: break;
  }
  return Scalar(1);
}

}  // namespace detail

/// Feed-forward chain of layers whose parameters live in a shared flat vector.
class Sequential {
 public:
  Sequential() = default;

  /// Appends a "same"-padded convolution (pad = kernel / 2).
  void add_conv(ParameterLayout& layout, const std::string& name, int in_channels,
                int out_channels, int kernel, int stride, bool bias = true) {
    LayerSpec l;
    l.kind = LayerKind::conv;
    l.conv.in_channels = in_channels;
    l.conv.out_channels = out_channels;
    l.conv.kernel = kernel;
    l.conv.stride = stride;
    l.conv.pad = kernel / 2;
    l.conv.bias = bias;
    l.conv.weight_offset = layout.add(name + ".weight", out_channels, Index(in_channels) * kernel * kernel);
    if (bias) l.conv.bias_offset = layout.add(name + ".bias", out_channels, 1);
    layers_.push_back(l);
  }

  void add_linear(ParameterLayout& layout, const std::string& name, int in_features,
                  int out_features, bool bias = true) {
    LayerSpec l;
    l.kind = LayerKind::linear;
    l.linear.in_features = in_features;
    l.linear.out_features = out_features;
    l.linear.bias = bias;
    l.linear.weight_offset = layout.add(name + ".weight", out_features, in_features);
    if (bias) l.linear.bias_offset = layout.add(name + ".bias", out_features, 1);
    layers_.push_back(l);
  }

  void add_upsample(int factor) {
    LayerSpec l;
    l.kind = LayerKind::upsample;
    l.factor = factor;
    layers_.push_back(l);
  }

  void add_activation(Activation a) {
    if (a == Activation::identity) return;
    LayerSpec l;
    l.kind = LayerKind::activation;
    l.activation = a;
    layers_.push_back(l);
  }

  void add_global_average_pool() {
    LayerSpec l;
    l.kind = LayerKind::global_average_pool;
    layers_.push_back(l);
  }

  const std::vector<LayerSpec>& layers() const { return layers_; }

  /// Fan-in scaled uniform initialization of this chain's weights; biases zero.
  template <typename Scalar, typename Rng>
  void initialize(Vector<Scalar>& params, Rng& rng) const {
    for (const auto& l : layers_) {
      Index offset = 0, count = 0, bias_offset = 0, bias_count = 0;
      double fan_in = 1;
      if (l.kind == LayerKind::conv) {
        offset = l.conv.weight_offset;
        count = Index(l.conv.out_channels) * l.conv.in_channels * l.conv.kernel * l.conv.kernel;
        fan_in = double(l.conv.in_channels) * l.conv.kernel * l.conv.kernel;
        if (l.conv.bias) bias_offset = l.conv.bias_offset, bias_count = l.conv.out_channels;
      } else if (l.kind == LayerKind::linear) {
        offset = l.linear.weight_offset;
        count = Index(l.linear.out_features) * l.linear.in_features;
        fan_in = l.linear.in_features;
        if (l.linear.bias) bias_offset = l.linear.bias_offset, bias_count = l.linear.out_features;
      } else {
        continue;
      }
      const double bound = std::sqrt(6.0 / fan_in);
      std::uniform_real_distribution<double> dist(-bound, bound);
      for (Index i = 0; i < count; ++i) params[offset + i] = Scalar(dist(rng));
      params.segment(bias_offset, bias_count).setZero();
    }
  }

  template <typename Scalar>
  FeatureMap<Scalar> forward(const Vector<Scalar>& params, FeatureMap<Scalar> x,
                             Trace<Scalar>* trace = nullptr) const {
    if (trace) trace->assign(layers_.size(), {});
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const LayerSpec& l = layers_[i];
      LayerCache<Scalar>* cache = trace ? &(*trace)[i] : nullptr;
      if (cache) {
        cache->in_height = x.height;
        cache->in_width = x.width;
      }
      switch (l.kind) {
        case LayerKind::conv: x = conv_forward(l.conv, params, x, cache); break;
        case LayerKind::linear: x = linear_forward(l.linear, params, x, cache); break;
        case LayerKind::upsample: x = upsample_forward(x, l.factor); break;
        case LayerKind::activation:
          x.data = x.data.unaryExpr([a = l.activation](Scalar v) { return detail::activate(a, v); });
          if (cache) cache->saved = x.data;
          break;
        case LayerKind::global_average_pool: {
          FeatureMap<Scalar> pooled;
          pooled.height = pooled.width = 1;
          pooled.data = x.data.rowwise().mean();
          x = std::move(pooled);
          break;
        }
      }
    }
    return x;
  }

  /// Accumulates parameter gradients into `grads` and returns the gradient
  /// with respect to the chain input (empty unless need_input_grad).
  template <typename Scalar>
  FeatureMap<Scalar> backward(const Vector<Scalar>& params, const Trace<Scalar>& trace,
                              FeatureMap<Scalar> g, Vector<Scalar>& grads,
                              bool need_input_grad) const {
    for (std::size_t r = layers_.size(); r-- > 0;) {
      const LayerSpec& l = layers_[r];
      const LayerCache<Scalar>& cache = trace[r];
      const bool input_grad = need_input_grad || r > 0;
      switch (l.kind) {
        case LayerKind::conv: g = conv_backward(l.conv, params, cache, g, grads, input_grad); break;
        case LayerKind::linear: g = linear_backward(l.linear, params, cache, g, grads, input_grad); break;
        case LayerKind::upsample: g = upsample_backward(g, l.factor); break;
        case LayerKind::activation:
          g.data.array() *= cache.saved.unaryExpr([a = l.activation](Scalar y) {
            return detail::activate_grad(a, y);
          }).array();
          break;
        case LayerKind::global_average_pool: {
          const Index n = Index(cache.in_height) * cache.in_width;
          FeatureMap<Scalar> spread;
          spread.height = cache.in_height;
          spread.width = cache.in_width;
          spread.data = g.data.replicate(1, n) / Scalar(n);
          g = std::move(spread);
          break;
        }
      }
      if (!input_grad) return {};
    }
    return g;
  }

 private:
  template <typename Scalar>
  static FeatureMap<Scalar> conv_forward(const ConvSpec& c, const Vector<Scalar>& params,
                                         const FeatureMap<Scalar>& x, LayerCache<Scalar>* cache) {
    if (x.channels() != c.in_channels) throw ShapeMismatch("convolution input channel mismatch");
    const int oh = detail::conv_out(x.height, c), ow = detail::conv_out(x.width, c);
    Matrix<Scalar> cols = detail::im2col(x, c, oh, ow);
    Eigen::Map<const Matrix<Scalar>> w(params.data() + c.weight_offset, c.out_channels, cols.rows());
    FeatureMap<Scalar> y;
    y.height = oh;
    y.width = ow;
    y.data.noalias() = w * cols;
    if (c.bias) y.data.colwise() += params.segment(c.bias_offset, c.out_channels);
    if (cache) cache->saved = std::move(cols);
    return y;
  }

  template <typename Scalar>
  static FeatureMap<Scalar> conv_backward(const ConvSpec& c, const Vector<Scalar>& params,
                                          const LayerCache<Scalar>& cache, const FeatureMap<Scalar>& g,
                                          Vector<Scalar>& grads, bool input_grad) {
    const Matrix<Scalar>& cols = cache.saved;
    Eigen::Map<Matrix<Scalar>> gw(grads.data() + c.weight_offset, c.out_channels, cols.rows());
    gw.noalias() += g.data * cols.transpose();
    if (c.bias) grads.segment(c.bias_offset, c.out_channels) += g.data.rowwise().sum();
    if (!input_grad) return {};
    Eigen::Map<const Matrix<Scalar>> w(params.data() + c.weight_offset, c.out_channels, cols.rows());
    Matrix<Scalar> dcols = w.transpose() * g.data;
    return detail::col2im(dcols, c, cache.in_height, cache.in_width, g.height, g.width);
  }

  template <typename Scalar>
  static FeatureMap<Scalar> linear_forward(const LinearSpec& l, const Vector<Scalar>& params,
                                           const FeatureMap<Scalar>& x, LayerCache<Scalar>* cache) {
    if (x.data.size() != l.in_features) throw ShapeMismatch("linear input size mismatch");
    Eigen::Map<const Matrix<Scalar>> w(params.data() + l.weight_offset, l.out_features, l.in_features);
    Eigen::Map<const Vector<Scalar>> in(x.data.data(), l.in_features);
    FeatureMap<Scalar> y;
    y.height = y.width = 1;
    y.data.resize(l.out_features, 1);
    y.data.col(0).noalias() = w * in;
    if (l.bias) y.data.col(0) += params.segment(l.bias_offset, l.out_features);
    if (cache) cache->saved = in;
    return y;
  }

  template <typename Scalar>
  static FeatureMap<Scalar> linear_backward(const LinearSpec& l, const Vector<Scalar>& params,
                                            const LayerCache<Scalar>& cache, const FeatureMap<Scalar>& g,
                                            Vector<Scalar>& grads, bool input_grad) {
    Eigen::Map<const Vector<Scalar>> go(g.data.data(), l.out_features);
    Eigen::Map<Matrix<Scalar>> gw(grads.data() + l.weight_offset, l.out_features, l.in_features);
    gw.noalias() += go * cache.saved.col(0).transpose();
    if (l.bias) grads.segment(l.bias_offset, l.out_features) += go;
    if (!input_grad) return {};
    Eigen::Map<const Matrix<Scalar>> w(params.data() + l.weight_offset, l.out_features, l.in_features);
    FeatureMap<Scalar> gi;
    gi.height = cache.in_height;
    gi.width = cache.in_width;
    gi.data.resize(l.in_features / (Index(cache.in_height) * cache.in_width),
                   Index(cache.in_height) * cache.in_width);
    Eigen::Map<Vector<Scalar>>(gi.data.data(), l.in_features).noalias() = w.transpose() * go;
    return gi;
  }

  template <typename Scalar>
  static FeatureMap<Scalar> upsample_forward(const FeatureMap<Scalar>& x, int f) {
    if (f == 1) return x;
    FeatureMap<Scalar> y;
    y.height = x.height * f;
    y.width = x.width * f;
    y.data.resize(x.channels(), Index(y.height) * y.width);
    for (Index c = 0; c < x.channels(); ++c)
      for (int yy = 0; yy < y.height; ++yy)
        for (int xx = 0; xx < y.width; ++xx)
          y.data(c, Index(yy) * y.width + xx) = x.data(c, Index(yy / f) * x.width + xx / f);
    return y;
  }

  template <typename Scalar>
  static FeatureMap<Scalar> upsample_backward(const FeatureMap<Scalar>& g, int f) {
    if (f == 1) return g;
    FeatureMap<Scalar> gi;
    gi.height = g.height / f;
    gi.width = g.width / f;
    gi.data = Matrix<Scalar>::Zero(g.channels(), Index(gi.height) * gi.width);
    for (Index c = 0; c < g.channels(); ++c)
      for (int yy = 0; yy < g.height; ++yy)
        for (int xx = 0; xx < g.width; ++xx)
          gi.data(c, Index(yy / f) * gi.width + xx / f) += g.data(c, Index(yy) * g.width + xx);
    return gi;
  }

  std::vector<LayerSpec> layers_;
};

}  // namespace harood
