// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "dgd/dataset.hpp"
#include "dgd/training.hpp"

namespace dgd::testing {

struct GradCheckResult {
  std::string network;
  std::size_t checked = 0;
  double rel_error = 0.0;      // ||analytic - numeric|| / max(||analytic||, ||numeric||) over the sampled weights
  double max_rel_error = 0.0;  // worst single weight
  std::string worst;  // "<param>[index]: analytic vs numeric"
};

/// |a − n| / max(|a|, |n|), with a 1e-8 floor on the denominator so that
/// weights with vanishing gradient compare on an absolute scale.
inline double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-8});
}

/// Compares analytic gradients in `grads` against central differences of
/// sum_i weights[i] * terms()[i] for `count` randomly sampled weights of `ps`.
/// Each term is differenced on its own before the weighted sum is formed.
inline GradCheckResult check_params(const std::string& network, nn::ParamSet<double>& ps,
                                    const nn::Gradients<double>& grads,
                                    const std::function<std::vector<double>()>& terms,
                                    const std::vector<double>& weights, std::size_t count, std::uint64_t seed,
                                    double step = 1e-6) {
  std::size_t total = 0;
  for (const auto& p : ps.params) total += p.value.size();
  Rng rng(seed);
  GradCheckResult r{network, 0, 0.0, 0.0, {}};
  double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
  for (std::size_t k = 0; k < count; ++k) {
    std::size_t flat = rng.below(total), entry = 0;
    while (flat >= ps.params[entry].value.size()) flat -= ps.params[entry++].value.size();
    double& w = ps.params[entry].value[flat];
    const double saved = w;
    w = saved + step;
    const auto up = terms();
    w = saved - step;
    const auto down = terms();
    w = saved;
    double numeric = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) numeric += weights[i] * ((up[i] - down[i]) / (2 * step));
    const double analytic = grads[entry][flat];
    const double err = relative_error(analytic, numeric);
    diff2 += (analytic - numeric) * (analytic - numeric);
    a2 += analytic * analytic;
    n2 += numeric * numeric;
    ++r.checked;
    if (err >= r.max_rel_error) {
      r.max_rel_error = err;
      char buf[160];
      std::snprintf(buf, sizeof buf, "%s[%zu]: %.6e vs %.6e", ps.params[entry].name.c_str(), flat, analytic, numeric);
      r.worst = buf;
    }
  }
  r.rel_error = std::sqrt(diff2) / std::max({std::sqrt(a2), std::sqrt(n2), 1e-300});
  return r;
}

inline PairedSample gradcheck_sample(Rng& rng, std::size_t size, const std::string& id) {
  ImageTensor j = make_image(size, size), u = make_image(size, size);
  for (double& v : j.data()) v = 0.2 + 0.7 * rng.uniform();
  DepthMap depth{Planar(size, size, 1)};
  for (double& v : depth.data.data()) v = 0.5 + 1.5 * rng.uniform();
  const auto t = transmission_from_depth(depth, {1.0, 0.5, 0.3});
  u = compose_underwater(j, t, VeilingLightField::uniform(size, size, {0.1, 0.4, 0.5}));
  return make_sample(id, u, j, size);
}

/// Gradient checks of total_g w.r.t. G1 and G2 and of adv_d w.r.t. D.
inline std::vector<GradCheckResult> check_gan_gradients(std::size_t batch, std::size_t size, const ModelConfig& mc,
                                                        std::size_t count, std::uint64_t seed, double step = 1e-6) {
  Rng rng(seed);
  std::vector<PairedSample> samples;
  for (std::size_t i = 0; i < batch; ++i) samples.push_back(gradcheck_sample(rng, size, "g" + std::to_string(i)));
  const auto b = make_batch<double>(samples);
  GanModel<double> m(mc, derive_seed({seed, 11}));
  TrainConfig cfg;
  const StepSeeds seeds = StepSeeds::derive(seed, 0);

  nn::Gradients<double> g1(m.g1.params()), g2(m.g2.params()), gd(m.d.params());
  generator_objective(m, b, cfg, seeds, &g1, &g2);
  const std::vector<double> total_weights{1.0, cfg.lambda1, cfg.lambda2};
  auto total_terms = [&] {
    const auto l = generator_objective(m, b, cfg, seeds);
    return std::vector<double>{l.adv_g, l.l1_g1, l.l2_g2};
  };

  GeneratorPass<double> pass;
  run_g1(m, b, seeds.g1_noise, pass);
  const auto fake = pass.fake;
  discriminator_objective(m, b, fake, &gd);
  auto adv_d = [&] { return std::vector<double>{discriminator_objective<double>(m, b, fake, nullptr)}; };

  return {check_params("G1", m.g1.params(), g1, total_terms, total_weights, count, derive_seed({seed, 21}), step),
          check_params("G2", m.g2.params(), g2, total_terms, total_weights, count, derive_seed({seed, 22}), step),
          check_params("D", m.d.params(), gd, adv_d, {1.0}, count, derive_seed({seed, 23}), step)};
}

}  // namespace dgd::testing
