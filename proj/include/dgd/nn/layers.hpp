// SPDX-License-Identifier: Apache-2.0
//
// Layers with explicit forward/backward passes. Forward functions are const
// and never touch parameter state; backward accumulates into Gradients.
#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "dgd/nn/params.hpp"
#include "dgd/nn/tensor.hpp"
#include "dgd/rng.hpp"

namespace dgd::nn {

enum class Mode { kTrain, kEval };

namespace detail {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using CMapMat = Eigen::Map<const RowMat<T>>;

struct Geometry {
  std::size_t c, h, w, k, stride, pad, out_h, out_w;
  std::size_t rows() const { return c * k * k; }
  std::size_t cols() const { return out_h * out_w; }
};

// Unfolds one C×H×W sample into a (C·k·k) × (out_h·out_w) matrix.
template <typename T>
void im2col(const T* x, const Geometry& g, T* col) {
  const auto h = static_cast<std::ptrdiff_t>(g.h), w = static_cast<std::ptrdiff_t>(g.w);
  for (std::size_t c = 0; c < g.c; ++c)
    for (std::size_t ky = 0; ky < g.k; ++ky)
      for (std::size_t kx = 0; kx < g.k; ++kx) {
        T* row = col + ((c * g.k + ky) * g.k + kx) * g.cols();
        const T* plane = x + c * g.h * g.w;
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) - static_cast<std::ptrdiff_t>(g.pad);
          T* dst = row + oy * g.out_w;
          if (iy < 0 || iy >= h) {
            std::fill_n(dst, g.out_w, T(0));
            continue;
          }
          const T* src = plane + iy * w;
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) - static_cast<std::ptrdiff_t>(g.pad);
            dst[ox] = (ix >= 0 && ix < w) ? src[ix] : T(0);
          }
        }
      }
}

// Adjoint of im2col: accumulates columns back into a C×H×W sample.
template <typename T>
void col2im(const T* col, const Geometry& g, T* x) {
  const auto h = static_cast<std::ptrdiff_t>(g.h), w = static_cast<std::ptrdiff_t>(g.w);
  for (std::size_t c = 0; c < g.c; ++c)
    for (std::size_t ky = 0; ky < g.k; ++ky)
      for (std::size_t kx = 0; kx < g.k; ++kx) {
        const T* row = col + ((c * g.k + ky) * g.k + kx) * g.cols();
        T* plane = x + c * g.h * g.w;
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) - static_cast<std::ptrdiff_t>(g.pad);
          if (iy < 0 || iy >= h) continue;
          const T* src = row + oy * g.out_w;
          T* dst = plane + iy * w;
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) - static_cast<std::ptrdiff_t>(g.pad);
            if (ix >= 0 && ix < w) dst[ix] += src[ox];
          }
        }
      }
}

}  // namespace detail

/// 2-D convolution, weight layout [out][in][k][k].
template <typename T>
struct Conv2d {
  std::size_t in_ch = 0, out_ch = 0, kernel = 0, stride = 1, pad = 0;
  bool has_bias = true;
  std::size_t weight = 0, bias = 0;

  static Conv2d create(ParamSet<T>& ps, const std::string& name, std::size_t in_ch, std::size_t out_ch,
                       std::size_t kernel, std::size_t stride, std::size_t pad, bool has_bias) {
    Conv2d c{in_ch, out_ch, kernel, stride, pad, has_bias, 0, 0};
    c.weight = ps.add_param(name + ".weight", {out_ch, in_ch, kernel, kernel});
    if (has_bias) c.bias = ps.add_param(name + ".bias", {out_ch});
    return c;
  }

  detail::Geometry geometry(const Tensor<T>& x) const {
    if (x.c != in_ch) throw InvalidInput("conv: expected " + std::to_string(in_ch) + " input channels, got " + std::to_string(x.c));
    if (x.h + 2 * pad < kernel || x.w + 2 * pad < kernel) throw InvalidInput("conv: input smaller than kernel");
    return {in_ch, x.h, x.w, kernel, stride, pad, (x.h + 2 * pad - kernel) / stride + 1, (x.w + 2 * pad - kernel) / stride + 1};
  }

  Tensor<T> forward(const ParamSet<T>& ps, const Tensor<T>& x) const {
    const auto g = geometry(x);
    Tensor<T> y(x.n, out_ch, g.out_h, g.out_w);
    std::vector<T> col(g.rows() * g.cols());
    detail::CMapMat<T> wm(ps.params[weight].value.data(), static_cast<Eigen::Index>(out_ch), static_cast<Eigen::Index>(g.rows()));
    for (std::size_t i = 0; i < x.n; ++i) {
      detail::im2col(x.sample(i), g, col.data());
      detail::CMapMat<T> cm(col.data(), static_cast<Eigen::Index>(g.rows()), static_cast<Eigen::Index>(g.cols()));
      detail::MapMat<T> ym(y.sample(i), static_cast<Eigen::Index>(out_ch), static_cast<Eigen::Index>(g.cols()));
      ym.noalias() = wm * cm;
      if (has_bias)
        for (std::size_t o = 0; o < out_ch; ++o) ym.row(static_cast<Eigen::Index>(o)).array() += ps.params[bias].value[o];
    }
    return y;
  }

  /// Accumulates weight/bias gradients and returns dL/dx.
  Tensor<T> backward(const ParamSet<T>& ps, const Tensor<T>& x, const Tensor<T>& dy, Gradients<T>& grads) const {
    const auto g = geometry(x);
    Tensor<T> dx(x.n, x.c, x.h, x.w);
    std::vector<T> col(g.rows() * g.cols()), dcol(g.rows() * g.cols());
    detail::CMapMat<T> wm(ps.params[weight].value.data(), static_cast<Eigen::Index>(out_ch), static_cast<Eigen::Index>(g.rows()));
    detail::MapMat<T> dwm(grads[weight].data(), static_cast<Eigen::Index>(out_ch), static_cast<Eigen::Index>(g.rows()));
    for (std::size_t i = 0; i < x.n; ++i) {
      detail::im2col(x.sample(i), g, col.data());
      detail::CMapMat<T> cm(col.data(), static_cast<Eigen::Index>(g.rows()), static_cast<Eigen::Index>(g.cols()));
      detail::CMapMat<T> dym(dy.sample(i), static_cast<Eigen::Index>(out_ch), static_cast<Eigen::Index>(g.cols()));
      dwm.noalias() += dym * cm.transpose();
      if (has_bias)
        for (std::size_t o = 0; o < out_ch; ++o) grads[bias][o] += dym.row(static_cast<Eigen::Index>(o)).sum();
      detail::MapMat<T> dcm(dcol.data(), static_cast<Eigen::Index>(g.rows()), static_cast<Eigen::Index>(g.cols()));
      dcm.noalias() = wm.transpose() * dym;
      detail::col2im(dcol.data(), g, dx.sample(i));
    }
    return dx;
  }
};

/// Transposed convolution (fractionally strided), weight layout [in][out][k][k].
template <typename T>
struct ConvTranspose2d {
  std::size_t in_ch = 0, out_ch = 0, kernel = 0, stride = 1, pad = 0;
  bool has_bias = true;
  std::size_t weight = 0, bias = 0;

  static ConvTranspose2d create(ParamSet<T>& ps, const std::string& name, std::size_t in_ch, std::size_t out_ch,
                                std::size_t kernel, std::size_t stride, std::size_t pad, bool has_bias) {
    ConvTranspose2d c{in_ch, out_ch, kernel, stride, pad, has_bias, 0, 0};
    c.weight = ps.add_param(name + ".weight", {in_ch, out_ch, kernel, kernel});
    if (has_bias) c.bias = ps.add_param(name + ".bias", {out_ch});
    return c;
  }

  // Geometry of the *output* viewed as the input of the adjoint convolution.
  detail::Geometry geometry(const Tensor<T>& x) const {
    if (x.c != in_ch) throw InvalidInput("conv_transpose: expected " + std::to_string(in_ch) + " input channels, got " + std::to_string(x.c));
    const std::size_t oh = (x.h - 1) * stride + kernel - 2 * pad;
    const std::size_t ow = (x.w - 1) * stride + kernel - 2 * pad;
    return {out_ch, oh, ow, kernel, stride, pad, x.h, x.w};
  }

  Tensor<T> forward(const ParamSet<T>& ps, const Tensor<T>& x) const {
    const auto g = geometry(x);
    Tensor<T> y(x.n, out_ch, g.h, g.w);
    std::vector<T> col(g.rows() * g.cols());
    detail::CMapMat<T> wm(ps.params[weight].value.data(), static_cast<Eigen::Index>(in_ch), static_cast<Eigen::Index>(g.rows()));
    for (std::size_t i = 0; i < x.n; ++i) {
      detail::CMapMat<T> xm(x.sample(i), static_cast<Eigen::Index>(in_ch), static_cast<Eigen::Index>(g.cols()));
      detail::MapMat<T> cm(col.data(), static_cast<Eigen::Index>(g.rows()), static_cast<Eigen::Index>(g.cols()));
      cm.noalias() = wm.transpose() * xm;
      detail::col2im(col.data(), g, y.sample(i));
      if (has_bias)
        for (std::size_t o = 0; o < out_ch; ++o) {
          T* p = y.sample(i) + o * y.plane();
          for (std::size_t k = 0; k < y.plane(); ++k) p[k] += ps.params[bias].value[o];
        }
    }
    return y;
  }

  Tensor<T> backward(const ParamSet<T>& ps, const Tensor<T>& x, const Tensor<T>& dy, Gradients<T>& grads) const {
    const auto g = geometry(x);
    Tensor<T> dx(x.n, x.c, x.h, x.w);
    std::vector<T> col(g.rows() * g.cols());
    detail::CMapMat<T> wm(ps.params[weight].value.data(), static_cast<Eigen::Index>(in_ch), static_cast<Eigen::Index>(g.rows()));
    detail::MapMat<T> dwm(grads[weight].data(), static_cast<Eigen::Index>(in_ch), static_cast<Eigen::Index>(g.rows()));
    for (std::size_t i = 0; i < x.n; ++i) {
      detail::im2col(dy.sample(i), g, col.data());
      detail::CMapMat<T> cm(col.data(), static_cast<Eigen::Index>(g.rows()), static_cast<Eigen::Index>(g.cols()));
      detail::CMapMat<T> xm(x.sample(i), static_cast<Eigen::Index>(in_ch), static_cast<Eigen::Index>(g.cols()));
      dwm.noalias() += xm * cm.transpose();
      detail::MapMat<T> dxm(dx.sample(i), static_cast<Eigen::Index>(in_ch), static_cast<Eigen::Index>(g.cols()));
      dxm.noalias() = wm * cm;
      if (has_bias)
        for (std::size_t o = 0; o < out_ch; ++o) {
          const T* p = dy.sample(i) + o * dy.plane();
          T s = T(0);
          for (std::size_t k = 0; k < dy.plane(); ++k) s += p[k];
          grads[bias][o] += s;
        }
    }
    return dx;
  }
};

/// Per-channel batch normalization. Training mode normalizes with batch
/// statistics and reports them; evaluation mode uses the running buffers.
template <typename T>
struct BatchNorm2d {
  std::size_t channels = 0;
  std::size_t gamma = 0, beta = 0, running_mean = 0, running_var = 0;
  double eps = 1e-5;
  double momentum = 0.1;

  struct Cache {
    Tensor<T> xhat;
    std::vector<T> inv_std;
    std::vector<T> batch_mean;
    std::vector<T> batch_var_unbiased;
  };

  static BatchNorm2d create(ParamSet<T>& ps, const std::string& name, std::size_t channels) {
    BatchNorm2d bn;
    bn.channels = channels;
    bn.gamma = ps.add_param(name + ".gamma", {channels}, T(1));
    bn.beta = ps.add_param(name + ".beta", {channels}, T(0));
    bn.running_mean = ps.add_buffer(name + ".running_mean", {channels}, T(0));
    bn.running_var = ps.add_buffer(name + ".running_var", {channels}, T(1));
    return bn;
  }

  Tensor<T> forward(const ParamSet<T>& ps, const Tensor<T>& x, Mode mode, Cache& cache) const {
    if (x.c != channels) throw InvalidInput("batchnorm: channel mismatch");
    const std::size_t m = x.n * x.plane();
    cache.xhat = Tensor<T>(x.n, x.c, x.h, x.w);
    cache.inv_std.assign(channels, T(0));
    cache.batch_mean.assign(channels, T(0));
    cache.batch_var_unbiased.assign(channels, T(0));
    Tensor<T> y(x.n, x.c, x.h, x.w);
    for (std::size_t c = 0; c < channels; ++c) {
      T mean, var;
      if (mode == Mode::kTrain) {
        double s = 0.0;
        for (std::size_t i = 0; i < x.n; ++i) {
          const T* p = x.sample(i) + c * x.plane();
          for (std::size_t k = 0; k < x.plane(); ++k) s += p[k];
        }
        const double mu = s / static_cast<double>(m);
        double ss = 0.0;
        for (std::size_t i = 0; i < x.n; ++i) {
          const T* p = x.sample(i) + c * x.plane();
          for (std::size_t k = 0; k < x.plane(); ++k) ss += (p[k] - mu) * (p[k] - mu);
        }
        mean = static_cast<T>(mu);
        var = static_cast<T>(ss / static_cast<double>(m));
        cache.batch_mean[c] = mean;
        cache.batch_var_unbiased[c] = m > 1 ? static_cast<T>(ss / static_cast<double>(m - 1)) : var;
      } else {
        mean = ps.buffers[running_mean].value[c];
        var = ps.buffers[running_var].value[c];
      }
      const T inv = T(1) / std::sqrt(var + static_cast<T>(eps));
      cache.inv_std[c] = inv;
      const T gm = ps.params[gamma].value[c], bt = ps.params[beta].value[c];
      for (std::size_t i = 0; i < x.n; ++i) {
        const T* p = x.sample(i) + c * x.plane();
        T* xh = cache.xhat.sample(i) + c * x.plane();
        T* q = y.sample(i) + c * x.plane();
        for (std::size_t k = 0; k < x.plane(); ++k) {
          xh[k] = (p[k] - mean) * inv;
          q[k] = gm * xh[k] + bt;
        }
      }
    }
    return y;
  }

  /// Folds the batch statistics of a training-mode forward into the running buffers.
  void commit(ParamSet<T>& ps, const Cache& cache) const {
    const T mom = static_cast<T>(momentum);
    for (std::size_t c = 0; c < channels; ++c) {
      auto& rm = ps.buffers[running_mean].value[c];
      auto& rv = ps.buffers[running_var].value[c];
      rm = (T(1) - mom) * rm + mom * cache.batch_mean[c];
      rv = (T(1) - mom) * rv + mom * cache.batch_var_unbiased[c];
    }
  }

  Tensor<T> backward(const ParamSet<T>& ps, const Cache& cache, const Tensor<T>& dy, Mode mode, Gradients<T>& grads) const {
    const auto& xh = cache.xhat;
    Tensor<T> dx(dy.n, dy.c, dy.h, dy.w);
    const double m = static_cast<double>(dy.n * dy.plane());
    for (std::size_t c = 0; c < channels; ++c) {
      double sum_dy = 0.0, sum_dy_xh = 0.0;
      for (std::size_t i = 0; i < dy.n; ++i) {
        const T* g = dy.sample(i) + c * dy.plane();
        const T* h = xh.sample(i) + c * dy.plane();
        for (std::size_t k = 0; k < dy.plane(); ++k) {
          sum_dy += g[k];
          sum_dy_xh += g[k] * h[k];
        }
      }
      grads[gamma][c] += static_cast<T>(sum_dy_xh);
      grads[beta][c] += static_cast<T>(sum_dy);
      const T gm = ps.params[gamma].value[c];
      const T inv = cache.inv_std[c];
      const T mean_dy = static_cast<T>(sum_dy / m), mean_dy_xh = static_cast<T>(sum_dy_xh / m);
      for (std::size_t i = 0; i < dy.n; ++i) {
        const T* g = dy.sample(i) + c * dy.plane();
        const T* h = xh.sample(i) + c * dy.plane();
        T* d = dx.sample(i) + c * dy.plane();
        for (std::size_t k = 0; k < dy.plane(); ++k)
          d[k] = mode == Mode::kTrain ? gm * inv * (g[k] - mean_dy - h[k] * mean_dy_xh) : gm * inv * g[k];
      }
    }
    return dx;
  }
};

template <typename T>
Tensor<T> relu(const Tensor<T>& x, T negative_slope = T(0)) {
  Tensor<T> y = x;
  for (auto& v : y.v)
    if (v < T(0)) v *= negative_slope;
  return y;
}

/// Gradient of (leaky) ReLU given its input.
template <typename T>
Tensor<T> relu_backward(const Tensor<T>& x, const Tensor<T>& dy, T negative_slope = T(0)) {
  Tensor<T> dx = dy;
  for (std::size_t i = 0; i < dx.v.size(); ++i)
    if (x.v[i] < T(0)) dx.v[i] *= negative_slope;
  return dx;
}

/// Inverted dropout whose keep mask is a pure function of (seed, size).
template <typename T>
std::vector<T> dropout_mask(std::size_t count, double rate, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<T> mask(count);
  const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
  for (auto& m : mask) m = rng.uniform() < rate ? T(0) : keep_scale;
  return mask;
}

}  // namespace dgd::nn
