// SPDX-License-Identifier: Apache-2.0
//
// Full-reference (ED, PSNR, SSIM) and no-reference (UIQM) image quality
// measures on [0,1] RGB images.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

#include "dgd/error.hpp"
#include "dgd/image.hpp"

namespace dgd {

inline constexpr double kPsnrCap = 100.0;

struct EuclideanDistance {
  double r = 0.0;
  double g = 0.0;
  double b = 0.0;
  double avg = 0.0;
};

/// Per-channel RMS distance and the mean of the three channel distances.
inline EuclideanDistance euclidean_distance(const ImageTensor& pred, const ImageTensor& ref) {
  require_rgb(pred, "euclidean_distance");
  require_same_shape(pred, ref, "euclidean_distance");
  std::array<double, 3> acc{0.0, 0.0, 0.0};
  for (std::size_t p = 0; p < pred.pixels(); ++p)
    for (std::size_t c = 0; c < 3; ++c) {
      const double d = pred[3 * p + c] - ref[3 * p + c];
      acc[c] += d * d;
    }
  const double n = static_cast<double>(pred.pixels());
  EuclideanDistance ed{std::sqrt(acc[0] / n), std::sqrt(acc[1] / n), std::sqrt(acc[2] / n), 0.0};
  ed.avg = (ed.r + ed.g + ed.b) / 3.0;
  return ed;
}

inline double mean_squared_error(const ImageTensor& pred, const ImageTensor& ref) {
  require_same_shape(pred, ref, "mean_squared_error");
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - ref[i];
    acc += d * d;
  }
  return acc / static_cast<double>(pred.size());
}

/// Peak signal-to-noise ratio with peak 1.0, capped at kPsnrCap.
inline double psnr(const ImageTensor& pred, const ImageTensor& ref) {
  require_rgb(pred, "psnr");
  require_same_shape(pred, ref, "psnr");
  const double mse = mean_squared_error(pred, ref);
  if (mse == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

struct SsimOptions {
  std::size_t window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 1.0;
};

namespace detail {

inline std::vector<double> gaussian_kernel(std::size_t size, double sigma) {
  std::vector<double> k(size);
  const double centre = (static_cast<double>(size) - 1.0) / 2.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < size; ++i) {
    const double d = static_cast<double>(i) - centre;
    k[i] = std::exp(-(d * d) / (2.0 * sigma * sigma));
    sum += k[i];
  }
  for (double& v : k) v /= sum;
  return k;
}

// Separable "valid" correlation of one H×W plane.
inline std::vector<double> filter_valid(const std::vector<double>& plane, std::size_t h, std::size_t w,
                                        const std::vector<double>& k) {
  const std::size_t n = k.size();
  const std::size_t ow = w - n + 1;
  const std::size_t oh = h - n + 1;
  std::vector<double> rows(h * ow, 0.0);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < ow; ++x) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += k[i] * plane[y * w + x + i];
      rows[y * ow + x] = s;
    }
  std::vector<double> out(oh * ow, 0.0);
  for (std::size_t y = 0; y < oh; ++y)
    for (std::size_t x = 0; x < ow; ++x) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += k[i] * rows[(y + i) * ow + x];
      out[y * ow + x] = s;
    }
  return out;
}

inline std::vector<double> channel_plane(const ImageTensor& img, std::size_t c, double scale = 1.0) {
  std::vector<double> p(img.pixels());
  for (std::size_t i = 0; i < img.pixels(); ++i) p[i] = scale * img[3 * i + c];
  return p;
}

}  // namespace detail

/// Mean SSIM over all valid Gaussian windows, averaged across R, G, B.
inline double ssim(const ImageTensor& pred, const ImageTensor& ref, const SsimOptions& opt = {}) {
  require_rgb(pred, "ssim");
  require_same_shape(pred, ref, "ssim");
  if (pred.height() < opt.window || pred.width() < opt.window)
    throw InvalidInput("ssim: image smaller than the " + std::to_string(opt.window) + "x" +
                       std::to_string(opt.window) + " window");
  const auto kernel = detail::gaussian_kernel(opt.window, opt.sigma);
  const double c1 = (opt.k1 * opt.dynamic_range) * (opt.k1 * opt.dynamic_range);
  const double c2 = (opt.k2 * opt.dynamic_range) * (opt.k2 * opt.dynamic_range);
  const std::size_t h = pred.height(), w = pred.width();

  double total = 0.0;
  for (std::size_t c = 0; c < 3; ++c) {
    const auto x = detail::channel_plane(pred, c);
    const auto y = detail::channel_plane(ref, c);
    std::vector<double> xx(x.size()), yy(x.size()), xy(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      xx[i] = x[i] * x[i];
      yy[i] = y[i] * y[i];
      xy[i] = x[i] * y[i];
    }
    const auto mx = detail::filter_valid(x, h, w, kernel);
    const auto my = detail::filter_valid(y, h, w, kernel);
    const auto sxx = detail::filter_valid(xx, h, w, kernel);
    const auto syy = detail::filter_valid(yy, h, w, kernel);
    const auto sxy = detail::filter_valid(xy, h, w, kernel);
    double acc = 0.0;
    for (std::size_t i = 0; i < mx.size(); ++i) {
      const double vx = sxx[i] - mx[i] * mx[i];
      const double vy = syy[i] - my[i] * my[i];
      const double cov = sxy[i] - mx[i] * my[i];
      acc += ((2.0 * mx[i] * my[i] + c1) * (2.0 * cov + c2)) /
             ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
    }
    total += acc / static_cast<double>(mx.size());
  }
  return total / 3.0;
}

// ---------------------------------------------------------------------------
// UIQM: c1·UICM + c2·UISM + c3·UIConM, evaluated on the 0–255 scale the
// measure's coefficients were fitted to.

struct UiqmOptions {
  double c1 = 0.0282;
  double c2 = 0.2953;
  double c3 = 3.5753;
  double trim_low = 0.1;
  double trim_high = 0.1;
  std::size_t block = 8;
  std::array<double, 3> luminance_weights{0.299, 0.587, 0.114};
};

struct UiqmBreakdown {
  double uicm = 0.0;
  double uism = 0.0;
  double uiconm = 0.0;
  double uiqm = 0.0;
};

namespace detail {

// Mean after dropping ceil(low·K) smallest and floor(high·K) largest samples,
// plus the spread of all samples around that mean.
inline std::pair<double, double> trimmed_stats(std::vector<double> v, double low, double high) {
  std::sort(v.begin(), v.end());
  const std::size_t k = v.size();
  const auto drop_lo = static_cast<std::size_t>(std::ceil(low * static_cast<double>(k)));
  const auto drop_hi = static_cast<std::size_t>(std::floor(high * static_cast<double>(k)));
  double mean = 0.0;
  if (drop_lo + drop_hi < k) {
    for (std::size_t i = drop_lo; i < k - drop_hi; ++i) mean += v[i];
    mean /= static_cast<double>(k - drop_lo - drop_hi);
  }
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  return {mean, var / static_cast<double>(k)};
}

// Half-sample symmetric index, as in "abcd|dcba" border extension.
inline std::size_t reflect_index(std::ptrdiff_t i, std::size_t n) {
  const auto len = static_cast<std::ptrdiff_t>(n);
  const std::ptrdiff_t period = 2 * len;
  i %= period;
  if (i < 0) i += period;
  return static_cast<std::size_t>(i < len ? i : period - 1 - i);
}

// Sobel gradient magnitude rescaled so its maximum is 255 (all-zero stays zero).
inline std::vector<double> sobel_magnitude(const std::vector<double>& p, std::size_t h, std::size_t w) {
  auto px = [&](std::ptrdiff_t y, std::ptrdiff_t x) { return p[reflect_index(y, h) * w + reflect_index(x, w)]; };
  std::vector<double> mag(h * w);
  double peak = 0.0;
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      const auto yy = static_cast<std::ptrdiff_t>(y);
      const auto xx = static_cast<std::ptrdiff_t>(x);
      // Rows: difference across y, smoothing across x.
      const double gy = (px(yy + 1, xx - 1) + 2.0 * px(yy + 1, xx) + px(yy + 1, xx + 1)) -
                        (px(yy - 1, xx - 1) + 2.0 * px(yy - 1, xx) + px(yy - 1, xx + 1));
      const double gx = (px(yy - 1, xx + 1) + 2.0 * px(yy, xx + 1) + px(yy + 1, xx + 1)) -
                        (px(yy - 1, xx - 1) + 2.0 * px(yy, xx - 1) + px(yy + 1, xx - 1));
      mag[y * w + x] = std::hypot(gx, gy);
      peak = std::max(peak, mag[y * w + x]);
    }
  if (peak > 0.0)
    for (double& m : mag) m *= 255.0 / peak;
  return mag;
}

// Block-wise EME: 2/(k1·k2) Σ log(max/min); blocks with a zero extreme add 0.
inline double eme(const std::vector<double>& p, std::size_t h, std::size_t w, std::size_t block) {
  const std::size_t bx = w / block, by = h / block;
  double val = 0.0;
  for (std::size_t j = 0; j < by; ++j)
    for (std::size_t i = 0; i < bx; ++i) {
      double lo = p[j * block * w + i * block], hi = lo;
      for (std::size_t y = j * block; y < (j + 1) * block; ++y)
        for (std::size_t x = i * block; x < (i + 1) * block; ++x) {
          lo = std::min(lo, p[y * w + x]);
          hi = std::max(hi, p[y * w + x]);
        }
      if (lo > 0.0 && hi > 0.0) val += std::log(hi / lo);
    }
  return 2.0 / static_cast<double>(bx * by) * val;
}

}  // namespace detail

inline double uicm(const ImageTensor& img, const UiqmOptions& opt = {}) {
  std::vector<double> rg(img.pixels()), yb(img.pixels());
  for (std::size_t i = 0; i < img.pixels(); ++i) {
    const double r = 255.0 * img[3 * i], g = 255.0 * img[3 * i + 1], b = 255.0 * img[3 * i + 2];
    rg[i] = r - g;
    yb[i] = (r + g) / 2.0 - b;
  }
  const auto [mu_rg, var_rg] = detail::trimmed_stats(std::move(rg), opt.trim_low, opt.trim_high);
  const auto [mu_yb, var_yb] = detail::trimmed_stats(std::move(yb), opt.trim_low, opt.trim_high);
  return -0.0268 * std::sqrt(mu_rg * mu_rg + mu_yb * mu_yb) + 0.1586 * std::sqrt(var_rg + var_yb);
}

inline double uism(const ImageTensor& img, const UiqmOptions& opt = {}) {
  const std::size_t h = img.height(), w = img.width();
  double total = 0.0;
  for (std::size_t c = 0; c < 3; ++c) {
    auto plane = detail::channel_plane(img, c, 255.0);
    auto edges = detail::sobel_magnitude(plane, h, w);
    for (std::size_t i = 0; i < edges.size(); ++i) edges[i] *= plane[i];
    total += opt.luminance_weights[c] * detail::eme(edges, h, w, opt.block);
  }
  return total;
}

/// Block-wise log-AMEE contrast; each block pools all three channels.
inline double uiconm(const ImageTensor& img, const UiqmOptions& opt = {}) {
  const std::size_t b = opt.block;
  const std::size_t bx = img.width() / b, by = img.height() / b;
  double val = 0.0;
  for (std::size_t j = 0; j < by; ++j)
    for (std::size_t i = 0; i < bx; ++i) {
      double lo = 255.0 * img.at(j * b, i * b, 0), hi = lo;
      for (std::size_t y = j * b; y < (j + 1) * b; ++y)
        for (std::size_t x = i * b; x < (i + 1) * b; ++x)
          for (std::size_t c = 0; c < 3; ++c) {
            lo = std::min(lo, 255.0 * img.at(y, x, c));
            hi = std::max(hi, 255.0 * img.at(y, x, c));
          }
      const double top = hi - lo, bot = hi + lo;
      if (top != 0.0 && bot != 0.0) val += (top / bot) * std::log(top / bot);
    }
  return -val / static_cast<double>(bx * by);
}

inline UiqmBreakdown uiqm_breakdown(const ImageTensor& img, const UiqmOptions& opt = {}) {
  require_rgb(img, "uiqm");
  if (img.height() < opt.block || img.width() < opt.block)
    throw InvalidInput("uiqm: image must contain at least one " + std::to_string(opt.block) + "x" +
                       std::to_string(opt.block) + " block");
  UiqmBreakdown out;
  out.uicm = uicm(img, opt);
  out.uism = uism(img, opt);
  out.uiconm = uiconm(img, opt);
  out.uiqm = opt.c1 * out.uicm + opt.c2 * out.uism + opt.c3 * out.uiconm;
  return out;
}

inline double uiqm(const ImageTensor& img, const UiqmOptions& opt = {}) { return uiqm_breakdown(img, opt).uiqm; }

}  // namespace dgd
