// SPDX-License-Identifier: Apache-2.0
//
// Conditional patch discriminator over the 6-channel pair (input | candidate).
//
//   conv 4x4/2 (no norm) → LReLU
//   [conv 4x4/2 → BN → LReLU] × (n_layers − 1)
//   conv 4x4/1 → BN → LReLU
//   conv 4x4/1 → 1 logit per patch
//
// With n_layers = 3 every output logit sees a 70×70 input window; a 256×256
// pair yields a 30×30 grid.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dgd/nn/layers.hpp"

namespace dgd::nn {

struct DiscriminatorConfig {
  std::size_t in_channels = 6;
  std::size_t base_width = 64;
  std::size_t n_layers = 3;
  double negative_slope = 0.2;

  void validate() const {
    if (base_width < 1 || n_layers < 1 || in_channels < 1) throw InvalidInput("DiscriminatorConfig: invalid sizes");
  }

  /// Side length of the logit grid for a square input of side `n`.
  std::size_t grid_size(std::size_t n) const {
    for (std::size_t i = 0; i < n_layers; ++i) n = (n + 2 - 4) / 2 + 1;
    return n - 2;
  }

  /// Receptive field of one logit, in input pixels.
  std::size_t receptive_field() const {
    std::size_t rf = 1;
    for (std::size_t i = 0; i < 2; ++i) rf += 3;  // two stride-1 layers
    for (std::size_t i = 0; i < n_layers; ++i) rf = (rf - 1) * 2 + 4;
    return rf;
  }
};

template <typename T>
class PatchDiscriminator {
 public:
  struct Cache {
    Mode mode = Mode::kTrain;
    std::vector<Tensor<T>> conv_in;   // input of conv i
    std::vector<Tensor<T>> pre_act;   // input of LReLU after block i
    std::vector<typename BatchNorm2d<T>::Cache> bn;
  };

  PatchDiscriminator() = default;

  PatchDiscriminator(const DiscriminatorConfig& cfg, std::uint64_t init_seed) : cfg_(cfg) {
    cfg_.validate();
    const std::size_t w = cfg_.base_width;
    auto width = [&](std::size_t i) { return std::min(w << i, 8 * w); };
    convs_.push_back(Conv2d<T>::create(params_, "d0.conv", cfg_.in_channels, w, 4, 2, 1, true));
    bns_.emplace_back();
    has_bn_.push_back(false);
    for (std::size_t i = 1; i <= cfg_.n_layers; ++i) {
      const std::string n = "d" + std::to_string(i);
      const std::size_t stride = i < cfg_.n_layers ? 2 : 1;
      convs_.push_back(Conv2d<T>::create(params_, n + ".conv", width(i - 1), width(i), 4, stride, 1, false));
      bns_.push_back(BatchNorm2d<T>::create(params_, n + ".bn", width(i)));
      has_bn_.push_back(true);
    }
    convs_.push_back(Conv2d<T>::create(params_, "d" + std::to_string(cfg_.n_layers + 1) + ".conv", width(cfg_.n_layers), 1, 4, 1, 1, true));
    init_gaussian(params_, init_seed);
  }

  const DiscriminatorConfig& config() const noexcept { return cfg_; }
  ParamSet<T>& params() noexcept { return params_; }
  const ParamSet<T>& params() const noexcept { return params_; }
  std::size_t parameter_count() const { return params_.parameter_count(); }

  /// Raw patch logits for the channel concatenation of (input, candidate).
  Tensor<T> forward(const Tensor<T>& input, const Tensor<T>& candidate, Mode mode, Cache& c) const {
    if (input.n != candidate.n || input.h != candidate.h || input.w != candidate.w)
      throw InvalidInput("discriminator: input/candidate shape mismatch " + input.shape_str() + " vs " + candidate.shape_str());
    Tensor<T> x = concat_channels(input, candidate);
    if (x.c != cfg_.in_channels) throw InvalidInput("discriminator: expected " + std::to_string(cfg_.in_channels) + " channels");
    c = Cache{};
    c.mode = mode;
    c.bn.resize(convs_.size());
    const T slope = static_cast<T>(cfg_.negative_slope);
    for (std::size_t i = 0; i < convs_.size(); ++i) {
      c.conv_in.push_back(std::move(x));
      Tensor<T> y = convs_[i].forward(params_, c.conv_in.back());
      if (i + 1 == convs_.size()) return y;
      if (has_bn_[i]) y = bns_[i].forward(params_, y, mode, c.bn[i]);
      c.pre_act.push_back(y);
      x = relu(y, slope);
    }
    return x;
  }

  /// Accumulates parameter gradients into `g` and returns dL/d(candidate).
  Tensor<T> backward(const Cache& c, const Tensor<T>& d_logits, Gradients<T>& g, std::size_t candidate_channels) const {
    const T slope = static_cast<T>(cfg_.negative_slope);
    Tensor<T> d = convs_.back().backward(params_, c.conv_in.back(), d_logits, g);
    for (std::size_t i = convs_.size() - 1; i-- > 0;) {
      d = relu_backward(c.pre_act[i], d, slope);
      if (has_bn_[i]) d = bns_[i].backward(params_, c.bn[i], d, c.mode, g);
      d = convs_[i].backward(params_, c.conv_in[i], d, g);
    }
    return slice_channels(d, d.c - candidate_channels, candidate_channels);
  }

  void commit_running_stats(const Cache& c) {
    if (c.mode != Mode::kTrain) return;
    for (std::size_t i = 0; i < bns_.size(); ++i)
      if (has_bn_[i]) bns_[i].commit(params_, c.bn[i]);
  }

 private:
  DiscriminatorConfig cfg_;
  ParamSet<T> params_;
  std::vector<Conv2d<T>> convs_;
  std::vector<BatchNorm2d<T>> bns_;
  std::vector<bool> has_bn_;
};

}  // namespace dgd::nn
