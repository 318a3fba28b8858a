#pragma once

#include <array>
#include <cmath>
#include <span>
#include <vector>

#include "harood/losses.hpp"
#include "harood/network.hpp"
#include "harood/parallel.hpp"

namespace harood {

enum class LossTerm { reconstruction, triplet, contrastive, cross_entropy };

std::string_view to_string(LossTerm term);

/// Images of one (anchor, positive, negative) triple, indexed [k][j].
template <typename Scalar>
struct TripletItem {
  std::array<std::array<const Matrix<Scalar>*, 2>, 3> images{};
};

template <typename Scalar>
struct PairItem {
  std::array<const Matrix<Scalar>*, 2> first{};
  std::array<const Matrix<Scalar>*, 2> second{};
  int y = 0;
};

template <typename Scalar>
struct TripletObjective {
  Scalar reconstruction = 0;
  Scalar triplet = 0;
};

struct Stage1Terms {
  bool reconstruction = true;
  bool triplet = true;
};

namespace detail {

// Sums per-item gradient vectors in index order.
template <typename Scalar>
void reduce_in_order(const std::vector<Vector<Scalar>>& parts, Vector<Scalar>& out) {
  for (const auto& p : parts)
    if (p.size()) out += p;
}

template <typename Scalar>
void require_finite(Scalar value, const char* what) {
  if (!std::isfinite(value)) throw NumericalError(std::string("non-finite ") + what + " loss");
}

}  // namespace detail

/// L_rec and L_tri over a triplet batch. Gradients (when requested) are
/// accumulated into `grads` with the routing: L_rec reaches both E-D pairs,
/// L_tri reaches the head and, through the reconstructions, both E-D pairs.
/// The classifier never receives gradient here.
template <typename Scalar>
TripletObjective<Scalar> triplet_objective(const HaroodNetwork<Scalar>& net,
                                           std::span<const TripletItem<Scalar>> batch, Stage1Terms terms,
                                           Scalar margin, Vector<Scalar>* grads, int workers = 1) {
  const std::size_t b = batch.size();
  std::vector<Scalar> rec(b, Scalar(0)), tri(b, Scalar(0));
  std::vector<Vector<Scalar>> parts(grads ? b : 0);
  const Scalar inv_b = Scalar(1) / Scalar(std::max<std::size_t>(b, 1));

  parallel_for(b, workers, [&](std::size_t i) {
    const auto& item = batch[i];
    std::array<std::array<AutoencoderTrace<Scalar>, 2>, 3> ae;
    std::array<HeadTrace<Scalar>, 3> head;
    for (std::size_t k = 0; k < 3; ++k) {
      for (std::size_t j = 0; j < 2; ++j) {
        ae[k][j] = net.trace_autoencoder(*item.images[k][j], static_cast<RdiVariant>(j));
        rec[i] += image_mse(*item.images[k][j], ae[k][j].reconstruction) * inv_b;
      }
      head[k] = net.trace_head(ae[k][0].reconstruction, ae[k][1].reconstruction);
    }
    TripletGradient<Scalar> tg;
    tri[i] = triplet_loss<Scalar>(head[0].embedding, head[1].embedding, head[2].embedding, margin,
                                  grads ? &tg : nullptr) *
             inv_b;
    if (!grads) return;

    Vector<Scalar> g = net.zero_gradient();
    std::array<std::array<Matrix<Scalar>, 2>, 3> grad_recon;
    for (std::size_t k = 0; k < 3; ++k)
      for (std::size_t j = 0; j < 2; ++j)
        grad_recon[k][j] = terms.reconstruction
                               ? Matrix<Scalar>(image_mse_gradient(*item.images[k][j], ae[k][j].reconstruction) * inv_b)
                               : Matrix<Scalar>::Zero(net.config().image_rows, net.config().image_cols);
    if (terms.triplet && tri[i] > Scalar(0)) {
      const Matrix<Scalar>* ge[3] = {&tg.anchors, &tg.positives, &tg.negatives};
      for (std::size_t k = 0; k < 3; ++k) {
        auto [gm, gu] = net.backprop_head(head[k], Vector<Scalar>(ge[k]->col(0) * inv_b), g);
        grad_recon[k][0] += gm;
        grad_recon[k][1] += gu;
      }
    }
    if (terms.reconstruction || (terms.triplet && tri[i] > Scalar(0)))
      for (std::size_t k = 0; k < 3; ++k)
        for (std::size_t j = 0; j < 2; ++j)
          net.backprop_autoencoder(ae[k][j], static_cast<RdiVariant>(j), &grad_recon[k][j], nullptr, g);
    parts[i] = std::move(g);
  });

  TripletObjective<Scalar> out;
  for (std::size_t i = 0; i < b; ++i) {
    out.reconstruction += rec[i];
    out.triplet += tri[i];
  }
  detail::require_finite(out.reconstruction, "reconstruction");
  detail::require_finite(out.triplet, "triplet");
  if (grads) detail::reduce_in_order(parts, *grads);
  return out;
}

/// L_con over a pair batch on the concatenated encoder latents. Only the
/// encoders are touched: the decoders are never run.
template <typename Scalar>
Scalar contrastive_objective(const HaroodNetwork<Scalar>& net, std::span<const PairItem<Scalar>> batch,
                             Scalar margin, Vector<Scalar>* grads, int workers = 1) {
  const std::size_t b = batch.size();
  std::vector<Scalar> con(b, Scalar(0));
  std::vector<Vector<Scalar>> parts(grads ? b : 0);
  const Scalar inv_b = Scalar(1) / Scalar(std::max<std::size_t>(b, 1));
  const Index n = net.latent_size();

  parallel_for(b, workers, [&](std::size_t i) {
    const auto& item = batch[i];
    std::array<std::array<AutoencoderTrace<Scalar>, 2>, 2> ae;
    Matrix<Scalar> e(2 * n, 2);
    for (std::size_t s = 0; s < 2; ++s) {
      const auto& images = s == 0 ? item.first : item.second;
      for (std::size_t j = 0; j < 2; ++j) {
        ae[s][j] = net.trace_autoencoder(*images[j], static_cast<RdiVariant>(j), false);
        e.col(s).segment(Index(j) * n, n) = Eigen::Map<const Vector<Scalar>>(ae[s][j].latent.data.data(), n);
      }
    }
    const int y = item.y;
    PairGradient<Scalar> pg;
    con[i] = contrastive_loss<Scalar>(e.col(0), e.col(1), std::span<const int>(&y, 1), margin,
                                      grads ? &pg : nullptr) *
             inv_b;
    if (!grads) return;
    Vector<Scalar> g = net.zero_gradient();
    if (con[i] > Scalar(0)) {
      for (std::size_t s = 0; s < 2; ++s) {
        const Matrix<Scalar>& gs = s == 0 ? pg.first : pg.second;
        for (std::size_t j = 0; j < 2; ++j) {
          const auto& latent = ae[s][j].latent;
          Matrix<Scalar> gl =
              Eigen::Map<const Matrix<Scalar>>(gs.data() + Index(j) * n, latent.data.rows(), latent.data.cols()) *
              inv_b;
          net.backprop_autoencoder(ae[s][j], static_cast<RdiVariant>(j), nullptr, &gl, g);
        }
      }
    }
    parts[i] = std::move(g);
  });

  Scalar total(0);
  for (Scalar c : con) total += c;
  detail::require_finite(total, "contrastive");
  if (grads) detail::reduce_in_order(parts, *grads);
  return total;
}

/// Stage-2 cross-entropy over fixed embeddings (columns). Only the
/// classifier receives gradient.
template <typename Scalar>
Scalar classifier_objective(const HaroodNetwork<Scalar>& net, const Matrix<Scalar>& embeddings,
                            std::span<const int> labels, Vector<Scalar>* grads) {
  const Index b = embeddings.cols();
  Matrix<Scalar> logits(net.n_classes(), b);
  std::vector<ClassifierTrace<Scalar>> traces(b);
  for (Index i = 0; i < b; ++i) {
    traces[i] = net.trace_classifier(embeddings.col(i));
    logits.col(i) = traces[i].logits;
  }
  Matrix<Scalar> gl;
  const Scalar loss = cross_entropy<Scalar>(logits, labels, grads ? &gl : nullptr);
  detail::require_finite(loss, "cross-entropy");
  if (grads)
    for (Index i = 0; i < b; ++i) net.backprop_classifier(traces[i], gl.col(i), *grads);
  return loss;
}

}  // namespace harood
