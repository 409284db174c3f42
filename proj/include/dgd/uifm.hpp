// SPDX-License-Identifier: Apache-2.0
//
// Underwater image formation physics: composition I = J⊙T + A⊙(1−T),
// transmission from range, the Duntley radiance model, and the
// gray-world / closed-form estimators for veiling light and transmission.
//
// Everything here is a pure function of its arguments.
#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>

#include "dgd/error.hpp"
#include "dgd/image.hpp"

namespace dgd {

/// Lower bound on any transmission value.
inline constexpr double kTransmissionFloor = 1e-3;
/// |Î − A| below this makes the closed-form transmission undefined.
inline constexpr double kDenominatorEps = 1e-3;

using Rgb = std::array<double, 3>;

/// Per-channel transmittance, every element in [kTransmissionFloor, 1].
struct TransmissionMap {
  Planar data;

  /// Builds a map from raw values, clamping into [floor, 1].
  static TransmissionMap from_values(Planar values) {
    if (values.channels() != 3) throw InvalidInput("TransmissionMap: expected 3 channels");
    for (double& v : values.data()) {
      if (std::isnan(v)) throw InvalidInput("TransmissionMap: NaN value");
      v = std::clamp(v, kTransmissionFloor, 1.0);
    }
    return TransmissionMap{std::move(values)};
  }
  static TransmissionMap uniform(std::size_t h, std::size_t w, double value) {
    return from_values(Planar(h, w, 3, value));
  }
};

/// Veiling light A. `constant` marks a field that is identical at every pixel.
struct VeilingLightField {
  Planar data;
  bool constant = false;

  static VeilingLightField uniform(std::size_t h, std::size_t w, const Rgb& value) {
    return VeilingLightField{make_image(h, w, value[0], value[1], value[2]), true};
  }
  /// Channel values at pixel (0, 0); meaningful for constant fields.
  Rgb value() const { return {data.at(0, 0, 0), data.at(0, 0, 1), data.at(0, 0, 2)}; }
};

/// Camera-to-scene distance per pixel, in meters (H×W×1).
struct DepthMap {
  Planar data;

  static DepthMap uniform(std::size_t h, std::size_t w, double meters) { return DepthMap{Planar(h, w, 1, meters)}; }
};

/// Inputs of the full Duntley radiance model. Depth z and azimuth enter
/// only through alpha and K, so they are not carried separately.
struct DuntleyParams {
  Rgb alpha{};                // beam attenuation, 1/m
  Rgb diffuse_k{};            // diffuse attenuation K(z, θ, φ), 1/m
  double range = 0.0;         // camera–object distance r, m
  double zenith = 0.0;        // θ, rad
  Rgb background_radiance{};  // N(z_t, θ, φ), in [0,1]

  void validate() const {
    if (!(range >= 0.0) || !std::isfinite(range)) throw InvalidInput("DuntleyParams: range must be finite and >= 0");
    if (!(zenith >= 0.0 && zenith <= std::numbers::pi)) throw InvalidInput("DuntleyParams: zenith must be in [0, pi]");
    for (std::size_t c = 0; c < 3; ++c) {
      if (!(alpha[c] >= 0.0) || !std::isfinite(alpha[c])) throw InvalidInput("DuntleyParams: alpha must be >= 0");
      if (!std::isfinite(diffuse_k[c])) throw InvalidInput("DuntleyParams: K must be finite");
      if (!(background_radiance[c] >= 0.0 && background_radiance[c] <= 1.0))
        throw InvalidInput("DuntleyParams: background radiance must be in [0,1]");
      // Keeps the bracketed factor of the model inside [0, 1].
      if (alpha[c] * range - diffuse_k[c] * range * std::cos(zenith) < 0.0)
        throw InvalidInput("DuntleyParams: alpha*r - K*r*cos(theta) must be >= 0 in channel " + std::to_string(c));
    }
  }
};

struct GrayWorldScalars {
  double alpha = 1.0;
  double tau = 1.0;
  double gamma = 1.0;
};

/// Diagnostics for operations that clamp their output.
struct ClampStats {
  std::size_t clamped = 0;
  std::size_t total = 0;
  double fraction() const { return total == 0 ? 0.0 : static_cast<double>(clamped) / static_cast<double>(total); }
};

namespace detail {

inline void finish_clamped(Planar& out, ClampStats* stats) {
  const std::size_t moved = clamp_inplace(out, 0.0, 1.0);
  if (stats) {
    stats->clamped += moved;
    stats->total += out.size();
  }
}

}  // namespace detail

/// J⊙T + A⊙(1−T) without the final clamp.
inline ImageTensor compose_underwater_raw(const ImageTensor& j, const TransmissionMap& t, const VeilingLightField& a) {
  require_rgb(j, "compose_underwater");
  require_same_shape(j, t.data, "compose_underwater(J, T)");
  require_same_shape(j, a.data, "compose_underwater(J, A)");
  ImageTensor out(j.height(), j.width(), 3);
  for (std::size_t i = 0; i < j.size(); ++i) out[i] = j[i] * t.data[i] + a.data[i] * (1.0 - t.data[i]);
  return out;
}

inline ImageTensor compose_underwater(const ImageTensor& j, const TransmissionMap& t, const VeilingLightField& a,
                                      ClampStats* stats = nullptr) {
  ImageTensor out = compose_underwater_raw(j, t, a);
  detail::finish_clamped(out, stats);
  return out;
}

/// T(u, c) = exp(−beta_c · d(u)), clamped to [floor, 1].
inline TransmissionMap transmission_from_depth(const DepthMap& d, const Rgb& beta) {
  if (d.data.channels() != 1 || d.data.empty()) throw InvalidInput("transmission_from_depth: expected a non-empty H×W depth map");
  for (double b : beta)
    if (!(b >= 0.0) || !std::isfinite(b)) throw InvalidInput("transmission_from_depth: beta must be finite and >= 0");
  Planar t(d.data.height(), d.data.width(), 3);
  for (std::size_t i = 0; i < d.data.pixels(); ++i) {
    const double depth = d.data[i];
    if (!(depth >= 0.0) || !std::isfinite(depth)) throw InvalidInput("transmission_from_depth: depth must be finite and >= 0");
    for (std::size_t c = 0; c < 3; ++c) t[3 * i + c] = std::exp(-beta[c] * depth);
  }
  return TransmissionMap::from_values(std::move(t));
}

/// Duntley radiance before clamping.
inline ImageTensor duntley_radiance_raw(const ImageTensor& object_radiance, const DuntleyParams& p) {
  require_rgb(object_radiance, "duntley_radiance");
  p.validate();
  const double cos_theta = std::cos(p.zenith);
  Rgb direct{}, veil{};
  for (std::size_t c = 0; c < 3; ++c) {
    direct[c] = std::exp(-p.alpha[c] * p.range);
    const double lift = p.diffuse_k[c] * p.range * cos_theta;
    veil[c] = p.background_radiance[c] * std::exp(lift) * (1.0 - std::exp(-p.alpha[c] * p.range + lift));
  }
  ImageTensor out(object_radiance.height(), object_radiance.width(), 3);
  for (std::size_t i = 0; i < out.pixels(); ++i)
    for (std::size_t c = 0; c < 3; ++c) out[3 * i + c] = object_radiance[3 * i + c] * direct[c] + veil[c];
  return out;
}

inline ImageTensor duntley_radiance(const ImageTensor& object_radiance, const DuntleyParams& p,
                                    ClampStats* stats = nullptr) {
  ImageTensor out = duntley_radiance_raw(object_radiance, p);
  detail::finish_clamped(out, stats);
  return out;
}

/// Gray-world veiling light: per-channel mean scaled by (alpha, tau, gamma),
/// broadcast over the image.
inline VeilingLightField estimate_veiling_light(const ImageTensor& i, const GrayWorldScalars& s = {}) {
  if (i.empty() || i.channels() != 3) throw InvalidInput("estimate_veiling_light: empty image");
  if (!(s.alpha > 0.0 && s.tau > 0.0 && s.gamma > 0.0))
    throw InvalidInput("estimate_veiling_light: scalars must be positive");
  Rgb sum{0.0, 0.0, 0.0};
  for (std::size_t p = 0; p < i.pixels(); ++p)
    for (std::size_t c = 0; c < 3; ++c) sum[c] += i[3 * p + c];
  const double n = static_cast<double>(i.pixels());
  const Rgb scale{s.alpha, s.tau, s.gamma};
  Rgb a{};
  for (std::size_t c = 0; c < 3; ++c) a[c] = std::clamp(scale[c] * sum[c] / n, 0.0, 1.0);
  return VeilingLightField::uniform(i.height(), i.width(), a);
}

/// T = (I − A) ⊘ (Î − A); pixels with |Î − A| < kDenominatorEps get the floor.
inline TransmissionMap estimate_transmission(const ImageTensor& i, const ImageTensor& i_hat, const VeilingLightField& a,
                                             ClampStats* stats = nullptr) {
  require_rgb(i, "estimate_transmission");
  require_same_shape(i, i_hat, "estimate_transmission(I, I_hat)");
  require_same_shape(i, a.data, "estimate_transmission(I, A)");
  Planar t(i.height(), i.width(), 3);
  for (std::size_t k = 0; k < i.size(); ++k) {
    const double denom = i_hat[k] - a.data[k];
    t[k] = std::abs(denom) < kDenominatorEps ? kTransmissionFloor : (i[k] - a.data[k]) / denom;
  }
  if (stats) {
    for (double v : t.data()) stats->clamped += (v < kTransmissionFloor || v > 1.0) ? 1 : 0;
    stats->total += t.size();
  }
  return TransmissionMap::from_values(std::move(t));
}

}  // namespace dgd
