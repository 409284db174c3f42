// SPDX-License-Identifier: Apache-2.0
//
// Adversarial (BCE-with-logits), L1 and recomposition terms of the
// training objective, with their input gradients.
#pragma once

#include <cmath>

#include "dgd/nn/tensor.hpp"

namespace dgd {

struct LossBreakdown {
  double adv_d = 0.0;
  double adv_g = 0.0;
  double l1_g1 = 0.0;
  double l2_g2 = 0.0;
  double total_g = 0.0;

  bool finite() const {
    return std::isfinite(adv_d) && std::isfinite(adv_g) && std::isfinite(l1_g1) && std::isfinite(l2_g2) &&
           std::isfinite(total_g);
  }
};

namespace detail {

// log(1 + exp(z)) without overflow.
inline double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

inline double sigmoid(double z) { return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); }

}  // namespace detail

/// Mean BCE-with-logits against a constant label (1 = real, 0 = fake).
template <typename T>
double bce_with_logits(const nn::Tensor<T>& logits, double label) {
  double acc = 0.0;
  for (T z : logits.v) acc += label * detail::softplus(-z) + (1.0 - label) * detail::softplus(z);
  return acc / static_cast<double>(logits.size());
}

/// d(scale · bce_with_logits)/d(logits).
template <typename T>
nn::Tensor<T> bce_with_logits_grad(const nn::Tensor<T>& logits, double label, double scale) {
  nn::Tensor<T> g(logits.n, logits.c, logits.h, logits.w);
  const double k = scale / static_cast<double>(logits.size());
  for (std::size_t i = 0; i < g.size(); ++i) g.v[i] = static_cast<T>(k * (detail::sigmoid(logits.v[i]) - label));
  return g;
}

struct AdversarialLosses {
  double adv_d = 0.0;  // ½·[BCE(real, 1) + BCE(fake, 0)]
  double adv_g = 0.0;  // BCE(fake, 1)
};

template <typename T>
AdversarialLosses adversarial_losses(const nn::Tensor<T>& real_logits, const nn::Tensor<T>& fake_logits) {
  nn::require_same_shape(real_logits, fake_logits, "adversarial_losses");
  return {0.5 * (bce_with_logits(real_logits, 1.0) + bce_with_logits(fake_logits, 0.0)), bce_with_logits(fake_logits, 1.0)};
}

/// Mean absolute difference over batch, channels and pixels.
template <typename T>
double l1_loss(const nn::Tensor<T>& pred, const nn::Tensor<T>& target) {
  nn::require_same_shape(pred, target, "l1_loss");
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) acc += std::abs(static_cast<double>(pred.v[i]) - static_cast<double>(target.v[i]));
  return acc / static_cast<double>(pred.size());
}

/// d(scale · l1_loss)/d(pred); zero where pred == target.
template <typename T>
nn::Tensor<T> l1_loss_grad(const nn::Tensor<T>& pred, const nn::Tensor<T>& target, double scale) {
  nn::Tensor<T> g(pred.n, pred.c, pred.h, pred.w);
  const T k = static_cast<T>(scale / static_cast<double>(pred.size()));
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const T d = pred.v[i] - target.v[i];
    g.v[i] = d > T(0) ? k : (d < T(0) ? -k : T(0));
  }
  return g;
}

template <typename T>
double l1_loss_g1(const nn::Tensor<T>& pred, const nn::Tensor<T>& gt) {
  return l1_loss(pred, gt);
}

/// N = G1 ⊙ G2_T + G2_A, left unclamped.
template <typename T>
nn::Tensor<T> recompose(const nn::Tensor<T>& g1_out, const nn::Tensor<T>& g2_t, const nn::Tensor<T>& g2_a) {
  nn::require_same_shape(g1_out, g2_t, "recompose(G1, T)");
  nn::require_same_shape(g1_out, g2_a, "recompose(G1, A)");
  nn::Tensor<T> n = g1_out;
  for (std::size_t i = 0; i < n.size(); ++i) n.v[i] = g1_out.v[i] * g2_t.v[i] + g2_a.v[i];
  return n;
}

/// Consistency of the recomposed image with the underwater input.
template <typename T>
double l2_loss_g2(const nn::Tensor<T>& n, const nn::Tensor<T>& x1) {
  return l1_loss(n, x1);
}

}  // namespace dgd
