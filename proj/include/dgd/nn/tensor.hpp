// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstddef>
#include <string>
#include <vector>

#include "dgd/error.hpp"
#include "dgd/image.hpp"

namespace dgd::nn {

/// Dense N×C×H×W batch.
template <typename T>
struct Tensor {
  std::size_t n = 0, c = 0, h = 0, w = 0;
  std::vector<T> v;

  Tensor() = default;
  Tensor(std::size_t n_, std::size_t c_, std::size_t h_, std::size_t w_, T fill = T(0))
      : n(n_), c(c_), h(h_), w(w_), v(n_ * c_ * h_ * w_, fill) {}

  std::size_t size() const noexcept { return v.size(); }
  std::size_t plane() const noexcept { return h * w; }
  std::size_t sample_size() const noexcept { return c * h * w; }
  T* sample(std::size_t i) noexcept { return v.data() + i * sample_size(); }
  const T* sample(std::size_t i) const noexcept { return v.data() + i * sample_size(); }
  T& at(std::size_t ni, std::size_t ci, std::size_t y, std::size_t x) { return v[((ni * c + ci) * h + y) * w + x]; }
  T at(std::size_t ni, std::size_t ci, std::size_t y, std::size_t x) const { return v[((ni * c + ci) * h + y) * w + x]; }

  bool same_shape(const Tensor& o) const noexcept { return n == o.n && c == o.c && h == o.h && w == o.w; }
  std::string shape_str() const {
    return std::to_string(n) + "x" + std::to_string(c) + "x" + std::to_string(h) + "x" + std::to_string(w);
  }
};

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* what) {
  if (!a.same_shape(b)) throw InvalidInput(std::string(what) + ": shape mismatch " + a.shape_str() + " vs " + b.shape_str());
}

/// Concatenates along channels.
template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.n != b.n || a.h != b.h || a.w != b.w) throw InvalidInput("concat: incompatible shapes " + a.shape_str() + " / " + b.shape_str());
  Tensor<T> out(a.n, a.c + b.c, a.h, a.w);
  for (std::size_t i = 0; i < a.n; ++i) {
    std::copy_n(a.sample(i), a.sample_size(), out.sample(i));
    std::copy_n(b.sample(i), b.sample_size(), out.sample(i) + a.sample_size());
  }
  return out;
}

/// Channels [first, first + count).
template <typename T>
Tensor<T> slice_channels(const Tensor<T>& a, std::size_t first, std::size_t count) {
  if (first + count > a.c) throw InvalidInput("slice_channels: out of range");
  Tensor<T> out(a.n, count, a.h, a.w);
  for (std::size_t i = 0; i < a.n; ++i) std::copy_n(a.sample(i) + first * a.plane(), count * a.plane(), out.sample(i));
  return out;
}

template <typename T>
void add_inplace(Tensor<T>& dst, const Tensor<T>& src) {
  for (std::size_t i = 0; i < dst.v.size(); ++i) dst.v[i] += src.v[i];
}

/// Stacks H×W×C images into one N×C×H×W batch.
template <typename T>
Tensor<T> to_batch(const std::vector<const Planar*>& images) {
  if (images.empty()) throw InvalidInput("to_batch: empty batch");
  const auto& f = *images.front();
  Tensor<T> out(images.size(), f.channels(), f.height(), f.width());
  for (std::size_t i = 0; i < images.size(); ++i) {
    const auto& img = *images[i];
    if (!img.same_shape(f)) throw InvalidInput("to_batch: images differ in shape");
    for (std::size_t y = 0; y < f.height(); ++y)
      for (std::size_t x = 0; x < f.width(); ++x)
        for (std::size_t c = 0; c < f.channels(); ++c) out.at(i, c, y, x) = static_cast<T>(img.at(y, x, c));
  }
  return out;
}

template <typename T>
Tensor<T> to_batch(const Planar& image) {
  return to_batch<T>(std::vector<const Planar*>{&image});
}

template <typename T>
Planar from_batch(const Tensor<T>& t, std::size_t index) {
  Planar img(t.h, t.w, t.c);
  for (std::size_t y = 0; y < t.h; ++y)
    for (std::size_t x = 0; x < t.w; ++x)
      for (std::size_t c = 0; c < t.c; ++c) img.at(y, x, c) = static_cast<double>(t.at(index, c, y, x));
  return img;
}

}  // namespace dgd::nn
