// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "dgd/error.hpp"
#include "dgd/rng.hpp"

namespace dgd::nn {

/// Named learnable arrays (`params`) and non-learnable state such as
/// batch-norm running statistics (`buffers`). Layers refer to entries by index.
template <typename T>
struct ParamSet {
  struct Entry {
    std::string name;
    std::vector<std::size_t> shape;
    std::vector<T> value;
  };
  std::vector<Entry> params;
  std::vector<Entry> buffers;

  std::size_t add_param(std::string name, std::vector<std::size_t> shape, T fill = T(0)) {
    return add(params, std::move(name), std::move(shape), fill);
  }
  std::size_t add_buffer(std::string name, std::vector<std::size_t> shape, T fill = T(0)) {
    return add(buffers, std::move(name), std::move(shape), fill);
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : params) n += p.value.size();
    return n;
  }

  bool all_finite() const {
    for (const auto& p : params)
      for (T v : p.value)
        if (!std::isfinite(v)) return false;
    return true;
  }

  void fill_all(T value) {
    for (auto& p : params) std::fill(p.value.begin(), p.value.end(), value);
  }

  const Entry* find_param(const std::string& name) const {
    for (const auto& p : params)
      if (p.name == name) return &p;
    return nullptr;
  }

  friend bool operator==(const ParamSet& a, const ParamSet& b) {
    auto same = [](const std::vector<Entry>& x, const std::vector<Entry>& y) {
      if (x.size() != y.size()) return false;
      for (std::size_t i = 0; i < x.size(); ++i)
        if (x[i].name != y[i].name || x[i].shape != y[i].shape || x[i].value != y[i].value) return false;
      return true;
    };
    return same(a.params, b.params) && same(a.buffers, b.buffers);
  }

 private:
  static std::size_t add(std::vector<Entry>& into, std::string name, std::vector<std::size_t> shape, T fill) {
    std::size_t count = 1;
    for (auto d : shape) count *= d;
    into.push_back({std::move(name), std::move(shape), std::vector<T>(count, fill)});
    return into.size() - 1;
  }
};

/// Gradient storage parallel to ParamSet::params.
template <typename T>
struct Gradients {
  std::vector<std::vector<T>> g;

  explicit Gradients(const ParamSet<T>& ps) {
    g.reserve(ps.params.size());
    for (const auto& p : ps.params) g.emplace_back(p.value.size(), T(0));
  }
  void zero() {
    for (auto& v : g) std::fill(v.begin(), v.end(), T(0));
  }
  std::vector<T>& operator[](std::size_t i) { return g[i]; }
  const std::vector<T>& operator[](std::size_t i) const { return g[i]; }
};

/// Adam with bias correction.
struct AdamConfig {
  double lr = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename T>
struct AdamState {
  std::vector<std::vector<T>> m, v;
  std::uint64_t step = 0;

  explicit AdamState(const ParamSet<T>& ps) {
    for (const auto& p : ps.params) {
      m.emplace_back(p.value.size(), T(0));
      v.emplace_back(p.value.size(), T(0));
    }
  }

  void apply(ParamSet<T>& ps, const Gradients<T>& grads, const AdamConfig& cfg) {
    ++step;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
    const T b1 = static_cast<T>(cfg.beta1), b2 = static_cast<T>(cfg.beta2);
    const T step_size = static_cast<T>(cfg.lr / bc1);
    const T inv_sqrt_bc2 = static_cast<T>(1.0 / std::sqrt(bc2));
    const T eps = static_cast<T>(cfg.eps);
    for (std::size_t k = 0; k < ps.params.size(); ++k) {
      auto& value = ps.params[k].value;
      const auto& g = grads[k];
      auto& mk = m[k];
      auto& vk = v[k];
      for (std::size_t i = 0; i < value.size(); ++i) {
        mk[i] = b1 * mk[i] + (T(1) - b1) * g[i];
        vk[i] = b2 * vk[i] + (T(1) - b2) * g[i] * g[i];
        value[i] -= step_size * mk[i] / (std::sqrt(vk[i]) * inv_sqrt_bc2 + eps);
      }
    }
  }
};

/// Fills every weight-like parameter from N(0, std) in declaration order.
/// Entries whose name ends in ".bias"/".beta" start at zero and ".gamma" at one.
template <typename T>
void init_gaussian(ParamSet<T>& ps, std::uint64_t seed, double std_dev = 0.02) {
  Rng rng(seed);
  auto ends_with = [](const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
  };
  for (auto& p : ps.params) {
    if (ends_with(p.name, ".bias") || ends_with(p.name, ".beta"))
      std::fill(p.value.begin(), p.value.end(), T(0));
    else if (ends_with(p.name, ".gamma"))
      std::fill(p.value.begin(), p.value.end(), T(1));
    else
      for (auto& v : p.value) v = static_cast<T>(std_dev * rng.normal());
  }
  for (auto& b : ps.buffers)
    std::fill(b.value.begin(), b.value.end(), ends_with(b.name, ".running_var") ? T(1) : T(0));
}

}  // namespace dgd::nn
