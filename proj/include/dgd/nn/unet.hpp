// SPDX-License-Identifier: Apache-2.0
//
// U-Net generator with residual units on every skip connection.
//
//   level k = 0 .. depth-1, width(k) = min(base·2^k, 8·base)
//
//   e0 = Conv4x4/2(x)
//   ek = Conv4x4/2(ReLU(BN(e(k-1))))                   k ≥ 1
//   sk = ResU^m(ek)                                    k ≤ depth-2
//   d(depth-1) = ConvT4x4/2(ReLU(BN(e(depth-1))))
//   dk = ConvT4x4/2(ReLU(BN([d(k+1) | sk])))          k ≤ depth-2
//   out = head(d0)
//
// ResU(x) = x + Conv3x3(ReLU(BN(Conv3x3(ReLU(BN(x))))))   (bias-free convs)
//
// The `dropout_blocks` innermost decoder outputs (never d0) go through
// seeded dropout; this realizes the generator's noise input and is active
// in training and evaluation alike.
#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "dgd/error.hpp"
#include "dgd/nn/layers.hpp"
#include "dgd/nn/params.hpp"
#include "dgd/nn/tensor.hpp"
#include "dgd/rng.hpp"

namespace dgd::nn {

enum class NoiseMode { kDropout };

struct GeneratorConfig {
  std::size_t in_channels = 3;
  std::size_t out_channels = 3;
  std::size_t base_width = 64;
  std::size_t depth = 8;
  std::size_t dru_blocks_per_skip = 1;
  NoiseMode noise_mode = NoiseMode::kDropout;
  double dropout_rate = 0.5;
  std::size_t dropout_blocks = 3;

  static GeneratorConfig g1() { return {}; }
  static GeneratorConfig g2() {
    GeneratorConfig c;
    c.in_channels = 6;
    c.out_channels = 6;
    return c;
  }

  std::size_t width(std::size_t level) const { return std::min(base_width << level, 8 * base_width); }

  void validate() const {
    if (base_width < 1) throw InvalidInput("GeneratorConfig: base_width must be >= 1");
    if (depth < 1 || depth > 16) throw InvalidInput("GeneratorConfig: depth must be in [1, 16]");
    if (in_channels < 1 || out_channels < 1) throw InvalidInput("GeneratorConfig: channel counts must be >= 1");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw InvalidInput("GeneratorConfig: dropout_rate must be in [0, 1)");
  }

  /// Training images must be at least 2^depth on each side.
  void validate_for(std::size_t height, std::size_t width_px) const {
    validate();
    const std::size_t span = std::size_t{1} << depth;
    if (span > std::min(height, width_px))
      throw InvalidInput("GeneratorConfig: 2^depth = " + std::to_string(span) + " exceeds image size " +
                         std::to_string(height) + "x" + std::to_string(width_px));
  }

  bool dropout_on(std::size_t level) const {
    return level >= 1 && level + dropout_blocks >= depth && dropout_rate > 0.0;
  }
};

template <typename T>
struct ResidualUnit {
  BatchNorm2d<T> bn1, bn2;
  Conv2d<T> conv1, conv2;

  struct Cache {
    typename BatchNorm2d<T>::Cache bn1, bn2;
    Tensor<T> b1, h1, b2;  // bn1 output, conv1 output, bn2 output
  };

  static ResidualUnit create(ParamSet<T>& ps, const std::string& name, std::size_t ch) {
    ResidualUnit u;
    u.bn1 = BatchNorm2d<T>::create(ps, name + ".bn1", ch);
    u.conv1 = Conv2d<T>::create(ps, name + ".conv1", ch, ch, 3, 1, 1, false);
    u.bn2 = BatchNorm2d<T>::create(ps, name + ".bn2", ch);
    u.conv2 = Conv2d<T>::create(ps, name + ".conv2", ch, ch, 3, 1, 1, false);
    return u;
  }

  Tensor<T> forward(const ParamSet<T>& ps, const Tensor<T>& x, Mode mode, Cache& c) const {
    c.b1 = bn1.forward(ps, x, mode, c.bn1);
    c.h1 = conv1.forward(ps, relu(c.b1));
    c.b2 = bn2.forward(ps, c.h1, mode, c.bn2);
    Tensor<T> y = conv2.forward(ps, relu(c.b2));
    add_inplace(y, x);
    return y;
  }

  Tensor<T> backward(const ParamSet<T>& ps, const Cache& c, const Tensor<T>& dy, Mode mode, Gradients<T>& g) const {
    Tensor<T> d = conv2.backward(ps, relu(c.b2), dy, g);
    d = bn2.backward(ps, c.bn2, relu_backward(c.b2, d), mode, g);
    d = conv1.backward(ps, relu(c.b1), d, g);
    d = bn1.backward(ps, c.bn1, relu_backward(c.b1, d), mode, g);
    add_inplace(d, dy);
    return d;
  }

  void commit(ParamSet<T>& ps, const Cache& c) const {
    bn1.commit(ps, c.bn1);
    bn2.commit(ps, c.bn2);
  }
};

template <typename T>
class UNetGenerator {
 public:
  struct Cache {
    Mode mode = Mode::kTrain;
    Tensor<T> x;
    std::vector<Tensor<T>> enc;                                   // e_k
    std::vector<typename BatchNorm2d<T>::Cache> enc_bn;           // index k ≥ 1
    std::vector<Tensor<T>> enc_b;                                 // BN output feeding enc conv k
    std::vector<std::vector<Tensor<T>>> skip_in;                  // inputs of each residual unit
    std::vector<std::vector<typename ResidualUnit<T>::Cache>> skip_ru;
    std::vector<typename BatchNorm2d<T>::Cache> dec_bn;
    std::vector<Tensor<T>> dec_b;                                 // BN output feeding dec convT k
    std::vector<std::vector<T>> dec_mask;                         // empty when no dropout
  };

  UNetGenerator() = default;

  /// Builds the layer graph and draws weights from N(0, 0.02) with `init_seed`.
  UNetGenerator(const GeneratorConfig& cfg, std::uint64_t init_seed) : cfg_(cfg) {
    cfg_.validate();
    const std::size_t depth = cfg_.depth;
    enc_conv_.push_back(Conv2d<T>::create(params_, "enc0.conv", cfg_.in_channels, cfg_.width(0), 4, 2, 1, true));
    enc_bn_.emplace_back();
    for (std::size_t k = 1; k < depth; ++k) {
      const std::string n = "enc" + std::to_string(k);
      enc_bn_.push_back(BatchNorm2d<T>::create(params_, n + ".bn", cfg_.width(k - 1)));
      enc_conv_.push_back(Conv2d<T>::create(params_, n + ".conv", cfg_.width(k - 1), cfg_.width(k), 4, 2, 1, true));
    }
    skip_.resize(depth > 0 ? depth - 1 : 0);
    for (std::size_t k = 0; k + 1 < depth; ++k)
      for (std::size_t r = 0; r < cfg_.dru_blocks_per_skip; ++r)
        skip_[k].push_back(ResidualUnit<T>::create(params_, "skip" + std::to_string(k) + ".ru" + std::to_string(r), cfg_.width(k)));
    dec_bn_.resize(depth);
    dec_conv_.resize(depth);
    for (std::size_t kk = depth; kk-- > 0;) {
      const std::string n = "dec" + std::to_string(kk);
      const std::size_t in = kk + 1 == depth ? cfg_.width(kk) : 2 * cfg_.width(kk);
      const std::size_t out = kk == 0 ? cfg_.out_channels : cfg_.width(kk - 1);
      dec_bn_[kk] = BatchNorm2d<T>::create(params_, n + ".bn", in);
      dec_conv_[kk] = ConvTranspose2d<T>::create(params_, n + ".convT", in, out, 4, 2, 1, true);
    }
    init_gaussian(params_, init_seed);
  }

  const GeneratorConfig& config() const noexcept { return cfg_; }
  ParamSet<T>& params() noexcept { return params_; }
  const ParamSet<T>& params() const noexcept { return params_; }
  std::size_t parameter_count() const { return params_.parameter_count(); }

  void check_input(const Tensor<T>& x) const {
    if (x.c != cfg_.in_channels)
      throw InvalidInput("generator: expected " + std::to_string(cfg_.in_channels) + " input channels, got " + std::to_string(x.c));
    const std::size_t span = std::size_t{1} << cfg_.depth;
    if (x.n == 0 || x.h % span != 0 || x.w % span != 0 || x.h == 0 || x.w == 0)
      throw InvalidInput("generator: spatial size " + std::to_string(x.h) + "x" + std::to_string(x.w) +
                         " is not a positive multiple of 2^depth = " + std::to_string(span));
  }

  /// Raw (pre-head) output. Pure function of (params, x, mode, noise_seed).
  Tensor<T> forward(const Tensor<T>& x, Mode mode, std::uint64_t noise_seed, Cache& c) const {
    check_input(x);
    const std::size_t depth = cfg_.depth;
    c = Cache{};
    c.mode = mode;
    c.x = x;
    c.enc.resize(depth);
    c.enc_bn.resize(depth);
    c.enc_b.resize(depth);
    c.enc[0] = enc_conv_[0].forward(params_, x);
    for (std::size_t k = 1; k < depth; ++k) {
      c.enc_b[k] = enc_bn_[k].forward(params_, c.enc[k - 1], mode, c.enc_bn[k]);
      c.enc[k] = enc_conv_[k].forward(params_, relu(c.enc_b[k]));
    }
    std::vector<Tensor<T>> skips(skip_.size());
    c.skip_in.resize(skip_.size());
    c.skip_ru.resize(skip_.size());
    for (std::size_t k = 0; k < skip_.size(); ++k) {
      Tensor<T> s = c.enc[k];
      c.skip_ru[k].resize(skip_[k].size());
      for (std::size_t r = 0; r < skip_[k].size(); ++r) {
        c.skip_in[k].push_back(s);
        s = skip_[k][r].forward(params_, s, mode, c.skip_ru[k][r]);
      }
      skips[k] = std::move(s);
    }
    c.dec_bn.resize(depth);
    c.dec_b.resize(depth);
    c.dec_mask.resize(depth);
    Tensor<T> d;
    for (std::size_t kk = depth; kk-- > 0;) {
      const Tensor<T> in = kk + 1 == depth ? c.enc[kk] : concat_channels(d, skips[kk]);
      c.dec_b[kk] = dec_bn_[kk].forward(params_, in, mode, c.dec_bn[kk]);
      d = dec_conv_[kk].forward(params_, relu(c.dec_b[kk]));
      if (cfg_.dropout_on(kk)) {
        c.dec_mask[kk] = dropout_mask<T>(d.size(), cfg_.dropout_rate, derive_seed({noise_seed, kk}));
        for (std::size_t i = 0; i < d.size(); ++i) d.v[i] *= c.dec_mask[kk][i];
      }
    }
    return d;
  }

  Tensor<T> forward(const Tensor<T>& x, Mode mode, std::uint64_t noise_seed) const {
    Cache c;
    return forward(x, mode, noise_seed, c);
  }

  /// Accumulates parameter gradients given dL/d(raw output).
  void backward(const Cache& c, const Tensor<T>& d_out, Gradients<T>& g) const {
    const std::size_t depth = cfg_.depth;
    std::vector<Tensor<T>> d_enc(depth);
    for (std::size_t k = 0; k < depth; ++k) d_enc[k] = Tensor<T>(c.enc[k].n, c.enc[k].c, c.enc[k].h, c.enc[k].w);
    Tensor<T> dd = d_out;
    for (std::size_t kk = 0; kk < depth; ++kk) {
      if (!c.dec_mask[kk].empty())
        for (std::size_t i = 0; i < dd.size(); ++i) dd.v[i] *= c.dec_mask[kk][i];
      Tensor<T> t = dec_conv_[kk].backward(params_, relu(c.dec_b[kk]), dd, g);
      t = dec_bn_[kk].backward(params_, c.dec_bn[kk], relu_backward(c.dec_b[kk], t), c.mode, g);
      if (kk + 1 == depth) {
        add_inplace(d_enc[kk], t);
      } else {
        const std::size_t ch = cfg_.width(kk);
        dd = slice_channels(t, 0, ch);
        Tensor<T> ds = slice_channels(t, ch, ch);
        for (std::size_t r = skip_[kk].size(); r-- > 0;) ds = skip_[kk][r].backward(params_, c.skip_ru[kk][r], ds, c.mode, g);
        add_inplace(d_enc[kk], ds);
      }
    }
    for (std::size_t k = depth; k-- > 1;) {
      Tensor<T> t = enc_conv_[k].backward(params_, relu(c.enc_b[k]), d_enc[k], g);
      t = enc_bn_[k].backward(params_, c.enc_bn[k], relu_backward(c.enc_b[k], t), c.mode, g);
      add_inplace(d_enc[k - 1], t);
    }
    enc_conv_[0].backward(params_, c.x, d_enc[0], g);
  }

  /// Folds the batch statistics of a training-mode forward into running buffers.
  void commit_running_stats(const Cache& c) {
    if (c.mode != Mode::kTrain) return;
    for (std::size_t k = 1; k < cfg_.depth; ++k) enc_bn_[k].commit(params_, c.enc_bn[k]);
    for (std::size_t k = 0; k < skip_.size(); ++k)
      for (std::size_t r = 0; r < skip_[k].size(); ++r) skip_[k][r].commit(params_, c.skip_ru[k][r]);
    for (std::size_t k = 0; k < cfg_.depth; ++k) dec_bn_[k].commit(params_, c.dec_bn[k]);
  }

  const std::vector<std::vector<ResidualUnit<T>>>& skip_units() const noexcept { return skip_; }

 private:
  GeneratorConfig cfg_;
  ParamSet<T> params_;
  std::vector<Conv2d<T>> enc_conv_;
  std::vector<BatchNorm2d<T>> enc_bn_;  // [0] unused
  std::vector<std::vector<ResidualUnit<T>>> skip_;
  std::vector<BatchNorm2d<T>> dec_bn_;
  std::vector<ConvTranspose2d<T>> dec_conv_;
};

// ---------------------------------------------------------------------------
// Output heads

/// (tanh(z) + 1) / 2.
template <typename T>
Tensor<T> image_head(const Tensor<T>& raw) {
  Tensor<T> y = raw;
  for (auto& v : y.v) v = (std::tanh(v) + T(1)) / T(2);
  return y;
}

template <typename T>
Tensor<T> image_head_backward(const Tensor<T>& raw, const Tensor<T>& dy) {
  Tensor<T> dz = dy;
  for (std::size_t i = 0; i < dz.size(); ++i) {
    const T t = std::tanh(raw.v[i]);
    dz.v[i] *= (T(1) - t * t) / T(2);
  }
  return dz;
}

template <typename T>
T sigmoid(T z) {
  return z >= T(0) ? T(1) / (T(1) + std::exp(-z)) : std::exp(z) / (T(1) + std::exp(z));
}

/// Splits a 6-channel output into transmission (sigmoid, floored) and veiling light (sigmoid).
template <typename T>
struct TransmissionVeilHead {
  Tensor<T> t;
  Tensor<T> a;
};

template <typename T>
TransmissionVeilHead<T> transmission_veil_head(const Tensor<T>& raw, T floor) {
  if (raw.c != 6) throw InvalidInput("transmission/veil head: expected 6 channels");
  TransmissionVeilHead<T> out{slice_channels(raw, 0, 3), slice_channels(raw, 3, 3)};
  for (auto& v : out.t.v) v = std::max(sigmoid(v), floor);
  for (auto& v : out.a.v) v = sigmoid(v);
  return out;
}

template <typename T>
Tensor<T> transmission_veil_head_backward(const Tensor<T>& raw, const Tensor<T>& dt, const Tensor<T>& da, T floor) {
  Tensor<T> dz(raw.n, raw.c, raw.h, raw.w);
  const std::size_t half = 3 * raw.plane();
  for (std::size_t i = 0; i < raw.n; ++i) {
    const T* z = raw.sample(i);
    T* d = dz.sample(i);
    const T* gt = dt.sample(i);
    const T* ga = da.sample(i);
    for (std::size_t k = 0; k < half; ++k) {
      const T st = sigmoid(z[k]);
      d[k] = st > floor ? gt[k] * st * (T(1) - st) : T(0);
      const T sa = sigmoid(z[half + k]);
      d[half + k] = ga[k] * sa * (T(1) - sa);
    }
  }
  return dz;
}

}  // namespace dgd::nn
