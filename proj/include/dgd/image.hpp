// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "dgd/error.hpp"

namespace dgd {

/// Interleaved H×W×C array of doubles, row-major with channels innermost.
///
/// Used for RGB images (C = 3), per-channel transmission and veiling light,
/// and the 6-channel [T | A] generator input.
class Planar {
 public:
  Planar() = default;
  Planar(std::size_t height, std::size_t width, std::size_t channels, double fill = 0.0)
      : height_(height), width_(width), channels_(channels), data_(height * width * channels, fill) {}

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t channels() const noexcept { return channels_; }
  std::size_t pixels() const noexcept { return height_ * width_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& at(std::size_t y, std::size_t x, std::size_t c) { return data_[(y * width_ + x) * channels_ + c]; }
  double at(std::size_t y, std::size_t x, std::size_t c) const { return data_[(y * width_ + x) * channels_ + c]; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  bool same_shape(const Planar& o) const noexcept {
    return height_ == o.height_ && width_ == o.width_ && channels_ == o.channels_;
  }
  bool same_spatial(const Planar& o) const noexcept { return height_ == o.height_ && width_ == o.width_; }

  friend bool operator==(const Planar&, const Planar&) = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::size_t channels_ = 0;
  std::vector<double> data_;
};

/// RGB image with intensities in [0,1].
using ImageTensor = Planar;

inline ImageTensor make_image(std::size_t height, std::size_t width, double fill = 0.0) {
  return ImageTensor(height, width, 3, fill);
}

inline ImageTensor make_image(std::size_t height, std::size_t width, double r, double g, double b) {
  ImageTensor img(height, width, 3);
  for (std::size_t i = 0; i < img.pixels(); ++i) {
    img[3 * i] = r;
    img[3 * i + 1] = g;
    img[3 * i + 2] = b;
  }
  return img;
}

inline void require_rgb(const Planar& img, const char* what) {
  if (img.height() < 1 || img.width() < 1 || img.channels() != 3)
    throw InvalidInput(std::string(what) + ": expected a non-empty H×W×3 image");
}

inline void require_same_shape(const Planar& a, const Planar& b, const char* what) {
  if (!a.same_shape(b))
    throw InvalidInput(std::string(what) + ": shape mismatch (" + std::to_string(a.height()) + "x" +
                       std::to_string(a.width()) + "x" + std::to_string(a.channels()) + " vs " +
                       std::to_string(b.height()) + "x" + std::to_string(b.width()) + "x" +
                       std::to_string(b.channels()) + ")");
}

/// Clamps every element into [lo, hi]; returns how many elements moved.
inline std::size_t clamp_inplace(Planar& img, double lo, double hi) {
  std::size_t moved = 0;
  for (double& v : img.data()) {
    if (v < lo) {
      v = lo;
      ++moved;
    } else if (v > hi) {
      v = hi;
      ++moved;
    }
  }
  return moved;
}

inline Planar flip_vertical(const Planar& in) {
  Planar out(in.height(), in.width(), in.channels());
  const std::size_t row = in.width() * in.channels();
  for (std::size_t y = 0; y < in.height(); ++y)
    std::copy_n(in.data().begin() + (in.height() - 1 - y) * row, row, out.data().begin() + y * row);
  return out;
}

inline Planar flip_horizontal(const Planar& in) {
  Planar out(in.height(), in.width(), in.channels());
  for (std::size_t y = 0; y < in.height(); ++y)
    for (std::size_t x = 0; x < in.width(); ++x)
      for (std::size_t c = 0; c < in.channels(); ++c) out.at(y, x, c) = in.at(y, in.width() - 1 - x, c);
  return out;
}

/// Copies a rectangular window [y0, y0+h) × [x0, x0+w).
inline Planar crop(const Planar& in, std::size_t y0, std::size_t x0, std::size_t h, std::size_t w) {
  if (y0 + h > in.height() || x0 + w > in.width()) throw InvalidInput("crop: window exceeds image bounds");
  Planar out(h, w, in.channels());
  const std::size_t c = in.channels();
  for (std::size_t y = 0; y < h; ++y)
    std::copy_n(in.data().begin() + ((y0 + y) * in.width() + x0) * c, w * c, out.data().begin() + y * w * c);
  return out;
}

/// Channel-wise concatenation of two images with identical spatial shape.
inline Planar concat_channels(const Planar& a, const Planar& b) {
  if (!a.same_spatial(b)) throw InvalidInput("concat_channels: spatial shape mismatch");
  Planar out(a.height(), a.width(), a.channels() + b.channels());
  for (std::size_t i = 0; i < a.pixels(); ++i) {
    std::copy_n(a.data().begin() + i * a.channels(), a.channels(), out.data().begin() + i * out.channels());
    std::copy_n(b.data().begin() + i * b.channels(), b.channels(),
                out.data().begin() + i * out.channels() + a.channels());
  }
  return out;
}

/// Extracts channels [first, first + count).
inline Planar slice_channels(const Planar& in, std::size_t first, std::size_t count) {
  if (first + count > in.channels()) throw InvalidInput("slice_channels: channel range out of bounds");
  Planar out(in.height(), in.width(), count);
  for (std::size_t i = 0; i < in.pixels(); ++i)
    std::copy_n(in.data().begin() + i * in.channels() + first, count, out.data().begin() + i * count);
  return out;
}

inline bool all_finite(const Planar& img) {
  return std::all_of(img.data().begin(), img.data().end(), [](double v) { return std::isfinite(v); });
}

}  // namespace dgd
