// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dgd/cli/config.hpp"
#include "dgd/rng.hpp"
#include "dgd/uifm.hpp"

namespace dgd::cli {

/// Parameters read from a synthesis params file.
///
/// Every key may appear globally or prefixed with an image stem
/// (`reef01.beta = 1 0.4 0.2`); prefixed values override globals for that
/// image only. Three-component values also accept a single number.
///
///   model          = simple | duntley
///   beta           = r g b        attenuation, 1/m        (simple)
///   veiling        = r g b        veiling light A         (simple)
///   depth          = d            constant depth, m       (simple)
///   depth_gradient = top bottom   linear depth along rows (simple)
///   alpha          = r g b        beam attenuation, 1/m   (duntley)
///   diffuse_k      = r g b        diffuse attenuation     (duntley, default 0)
///   range          = r            camera-object distance  (duntley)
///   zenith         = theta        radians                 (duntley, default 0)
///   background     = r g b        background radiance     (duntley)
///   noise_sigma    = s            additive Gaussian noise (default 0)
///   category       = name         output category         (global only)
struct SynthesisSpec {
  std::string model = "simple";
  std::optional<Rgb> beta, veiling, alpha, background;
  Rgb diffuse_k{0.0, 0.0, 0.0};
  std::optional<double> depth, range;
  std::optional<std::pair<double, double>> depth_gradient;
  double zenith = 0.0;
  double noise_sigma = 0.0;
  std::map<std::string, std::size_t> lines;  // key -> defining line
};

struct SynthesisParams {
  std::string source = "params";
  std::string category = "synthetic";
  SynthesisSpec global;
  std::map<std::string, std::vector<std::tuple<std::string, std::string, std::size_t>>> overrides;
};

namespace detail {

inline std::vector<double> parse_list(const std::string& v) {
  std::string s = v;
  for (char& ch : s)
    if (ch == ',') ch = ' ';
  std::istringstream is(s);
  std::vector<double> out;
  std::string tok;
  while (is >> tok) out.push_back(parse_double(tok));
  return out;
}

inline double parse_scalar(const std::string& v, double lo, double hi) {
  const auto xs = parse_list(v);
  if (xs.size() != 1) throw ConfigError("expected one number, got '" + v + "'");
  if (!(xs[0] >= lo && xs[0] <= hi)) throw ConfigError("value " + v + " outside [" + fmt_double(lo) + ", " + fmt_double(hi) + "]");
  return xs[0];
}

inline Rgb parse_rgb(const std::string& v, double lo, double hi) {
  auto xs = parse_list(v);
  if (xs.size() == 1) xs.assign(3, xs[0]);
  if (xs.size() != 3) throw ConfigError("expected 1 or 3 numbers, got '" + v + "'");
  for (double x : xs)
    if (!(x >= lo && x <= hi)) throw ConfigError("value " + fmt_double(x) + " outside [" + fmt_double(lo) + ", " + fmt_double(hi) + "]");
  return {xs[0], xs[1], xs[2]};
}

inline void apply_spec_key(SynthesisSpec& s, const std::string& key, const std::string& value, std::size_t line) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  if (key == "model") {
    if (value != "simple" && value != "duntley") throw ConfigError("model must be 'simple' or 'duntley'");
    s.model = value;
  } else if (key == "beta") {
    s.beta = parse_rgb(value, 0.0, 1e6);
  } else if (key == "veiling") {
    s.veiling = parse_rgb(value, 0.0, 1.0);
  } else if (key == "depth") {
    s.depth = parse_scalar(value, 0.0, 1e6);
    s.depth_gradient.reset();
  } else if (key == "depth_gradient") {
    const auto xs = parse_list(value);
    if (xs.size() != 2 || !(xs[0] >= 0.0) || !(xs[1] >= 0.0) || !std::isfinite(xs[0]) || !std::isfinite(xs[1]))
      throw ConfigError("depth_gradient expects two non-negative numbers");
    s.depth_gradient = std::make_pair(xs[0], xs[1]);
    s.depth.reset();
  } else if (key == "alpha") {
    s.alpha = parse_rgb(value, 0.0, 1e6);
  } else if (key == "diffuse_k") {
    s.diffuse_k = parse_rgb(value, -1e6, 1e6);
  } else if (key == "range") {
    s.range = parse_scalar(value, 0.0, 1e6);
  } else if (key == "zenith") {
    s.zenith = parse_scalar(value, 0.0, std::numbers::pi);
  } else if (key == "background") {
    s.background = parse_rgb(value, 0.0, 1.0);
  } else if (key == "noise_sigma") {
    s.noise_sigma = parse_scalar(value, 0.0, kInf);
  } else {
    throw ConfigError("unknown key '" + key + "'");
  }
  s.lines[key] = line;
}

}  // namespace detail

inline SynthesisParams parse_synthesis_params(std::string_view text, const std::string& source = "params") {
  SynthesisParams p;
  p.source = source;
  std::size_t line_no = 0, pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    const auto raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    const std::string line = detail::trim(raw.substr(0, raw.find('#')));
    if (line.empty()) continue;
    const std::string where = source + ":" + std::to_string(line_no) + ": ";
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected 'key = value'");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    try {
      if (key == "category") {
        if (value.empty() || value.find('/') != std::string::npos) throw ConfigError("invalid category name");
        p.category = value;
      } else if (const auto dot = key.rfind('.'); dot != std::string::npos) {
        const std::string stem = key.substr(0, dot), sub = key.substr(dot + 1);
        if (stem.empty()) throw ConfigError("empty image stem");
        SynthesisSpec probe;
        detail::apply_spec_key(probe, sub, value, line_no);  // validates eagerly
        p.overrides[stem].emplace_back(sub, value, line_no);
      } else {
        detail::apply_spec_key(p.global, key, value, line_no);
      }
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
  }
  return p;
}

inline SynthesisParams load_synthesis_params(const std::filesystem::path& path) {
  return parse_synthesis_params(read_text_file(path), path.string());
}

/// Global spec with the overrides for `stem` applied, checked for completeness.
inline SynthesisSpec resolve_spec(const SynthesisParams& p, const std::string& stem) {
  SynthesisSpec s = p.global;
  if (auto it = p.overrides.find(stem); it != p.overrides.end())
    for (const auto& [key, value, line] : it->second) detail::apply_spec_key(s, key, value, line);
  auto missing = [&](const std::string& what) {
    return ConfigError(p.source + ": image '" + stem + "': " + s.model + " model requires '" + what + "'");
  };
  if (s.model == "simple") {
    if (!s.beta) throw missing("beta");
    if (!s.veiling) throw missing("veiling");
    if (!s.depth && !s.depth_gradient) throw missing("depth");
  } else {
    if (!s.alpha) throw missing("alpha");
    if (!s.range) throw missing("range");
    if (!s.background) throw missing("background");
    DuntleyParams dp{*s.alpha, s.diffuse_k, *s.range, s.zenith, *s.background};
    try {
      dp.validate();
    } catch (const InvalidInput& e) {
      const auto line = s.lines.count("diffuse_k") ? s.lines.at("diffuse_k") : s.lines.at("alpha");
      throw ConfigError(p.source + ":" + std::to_string(line) + ": image '" + stem + "': " + e.what());
    }
  }
  return s;
}

inline DepthMap depth_for(const SynthesisSpec& s, std::size_t h, std::size_t w) {
  if (s.depth) return DepthMap::uniform(h, w, *s.depth);
  DepthMap d{Planar(h, w, 1)};
  const auto [top, bottom] = *s.depth_gradient;
  for (std::size_t y = 0; y < h; ++y) {
    const double f = h > 1 ? static_cast<double>(y) / static_cast<double>(h - 1) : 0.0;
    for (std::size_t x = 0; x < w; ++x) d.data.at(y, x, 0) = top + (bottom - top) * f;
  }
  return d;
}

/// Synthesizes the underwater counterpart of `clean` (values in [0,1]).
/// `noise_seed` drives the optional sensor noise.
inline ImageTensor synthesize_underwater(const ImageTensor& clean, const SynthesisSpec& s, std::uint64_t noise_seed,
                                         ClampStats* stats = nullptr) {
  require_rgb(clean, "synthesize_underwater");
  ImageTensor out;
  if (s.model == "simple") {
    const auto t = transmission_from_depth(depth_for(s, clean.height(), clean.width()), *s.beta);
    const auto a = VeilingLightField::uniform(clean.height(), clean.width(), *s.veiling);
    out = compose_underwater_raw(clean, t, a);
  } else {
    out = duntley_radiance_raw(clean, DuntleyParams{*s.alpha, s.diffuse_k, *s.range, s.zenith, *s.background});
  }
  if (s.noise_sigma > 0.0) {
    Rng rng(noise_seed);
    for (double& v : out.data()) v += s.noise_sigma * rng.normal();
  }
  const std::size_t moved = clamp_inplace(out, 0.0, 1.0);
  if (stats) {
    stats->clamped += moved;
    stats->total += out.size();
  }
  return out;
}

inline nlohmann::ordered_json to_json(const SynthesisSpec& s) {
  nlohmann::ordered_json j;
  j["model"] = s.model;
  auto put = [&](const char* k, const auto& opt) {
    if (opt) j[k] = *opt;
  };
  if (s.model == "simple") {
    put("beta", s.beta);
    put("veiling", s.veiling);
    if (s.depth) j["depth"] = *s.depth;
    if (s.depth_gradient) j["depth_gradient"] = {s.depth_gradient->first, s.depth_gradient->second};
  } else {
    put("alpha", s.alpha);
    j["diffuse_k"] = s.diffuse_k;
    put("range", s.range);
    j["zenith"] = s.zenith;
    put("background", s.background);
  }
  j["noise_sigma"] = s.noise_sigma;
  return j;
}

}  // namespace dgd::cli
