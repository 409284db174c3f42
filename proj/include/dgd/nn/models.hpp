// SPDX-License-Identifier: Apache-2.0
//
// The two generators and the discriminator at the level the training
// engine uses them: image-valued G1, (transmission, veiling light)-valued
// G2, and raw patch logits from D.
#pragma once

#include <cstdint>

#include "dgd/nn/patch_discriminator.hpp"
#include "dgd/nn/unet.hpp"
#include "dgd/uifm.hpp"

namespace dgd::nn {

template <typename T>
UNetGenerator<T> build_generator(const GeneratorConfig& cfg, std::uint64_t init_seed) {
  return UNetGenerator<T>(cfg, init_seed);
}

template <typename T>
PatchDiscriminator<T> build_discriminator(const DiscriminatorConfig& cfg, std::uint64_t init_seed) {
  return PatchDiscriminator<T>(cfg, init_seed);
}

/// Restored radiance in [0,1].
template <typename T>
Tensor<T> forward_g1(const UNetGenerator<T>& g1, const Tensor<T>& x1, std::uint64_t noise_seed, Mode mode = Mode::kEval) {
  if (x1.c != 3) throw InvalidInput("forward_g1: expected a 3-channel batch");
  return image_head(g1.forward(x1, mode, noise_seed));
}

template <typename T>
struct GeneratorOutputPair {
  Tensor<T> g2_t;  // in [kTransmissionFloor, 1]
  Tensor<T> g2_a;  // in [0, 1]
};

template <typename T>
GeneratorOutputPair<T> forward_g2(const UNetGenerator<T>& g2, const Tensor<T>& x2, std::uint64_t noise_seed,
                                  Mode mode = Mode::kEval) {
  if (x2.c != 6) throw InvalidInput("forward_g2: expected a 6-channel batch [T | A]");
  auto heads = transmission_veil_head(g2.forward(x2, mode, noise_seed), static_cast<T>(kTransmissionFloor));
  return {std::move(heads.t), std::move(heads.a)};
}

template <typename T>
Tensor<T> forward_discriminator(const PatchDiscriminator<T>& d, const Tensor<T>& x1, const Tensor<T>& y,
                                Mode mode = Mode::kEval) {
  if (!x1.same_shape(y)) throw InvalidInput("forward_discriminator: x1 and y differ in shape " + x1.shape_str() + " vs " + y.shape_str());
  typename PatchDiscriminator<T>::Cache c;
  return d.forward(x1, y, mode, c);
}

}  // namespace dgd::nn
