// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include <nlohmann/json.hpp>

#include "dgd/error.hpp"
#include "dgd/nn/models.hpp"
#include "dgd/nn/params.hpp"
#include "dgd/rng.hpp"

namespace dgd {

struct TrainConfig {
  double lr = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  std::size_t batch_size = 5;
  std::size_t epochs = 850;
  double lambda1 = 100.0;
  double lambda2 = 0.5;
  std::uint64_t seed = 0;
  std::size_t checkpoint_every = 50;
  bool detach_g1_in_l2 = false;

  void validate() const {
    if (!(lr > 0.0) || !std::isfinite(lr)) throw InvalidInput("TrainConfig: lr must be positive");
    if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0))
      throw InvalidInput("TrainConfig: beta1/beta2 must be in (0, 1)");
    if (batch_size < 1) throw InvalidInput("TrainConfig: batch_size must be >= 1");
    if (checkpoint_every < 1) throw InvalidInput("TrainConfig: checkpoint_every must be >= 1");
    if (!(lambda1 >= 0.0) || !std::isfinite(lambda1) || !(lambda2 >= 0.0) || !std::isfinite(lambda2))
      throw InvalidInput("TrainConfig: lambda values must be finite and non-negative");
  }

  nn::AdamConfig adam() const { return {lr, beta1, beta2, 1e-8}; }
};

struct ModelConfig {
  nn::GeneratorConfig g1 = nn::GeneratorConfig::g1();
  nn::GeneratorConfig g2 = nn::GeneratorConfig::g2();
  nn::DiscriminatorConfig d{};

  /// Same width/depth for both generators and the discriminator.
  static ModelConfig uniform(std::size_t base_width, std::size_t depth, std::size_t disc_width, std::size_t dru_blocks = 1) {
    ModelConfig m;
    for (auto* g : {&m.g1, &m.g2}) {
      g->base_width = base_width;
      g->depth = depth;
      g->dru_blocks_per_skip = dru_blocks;
    }
    m.d.base_width = disc_width;
    return m;
  }

  void validate() const {
    g1.validate();
    g2.validate();
    d.validate();
    if (g1.in_channels != 3 || g1.out_channels != 3) throw InvalidInput("ModelConfig: G1 must map 3 -> 3 channels");
    if (g2.in_channels != 6 || g2.out_channels != 6) throw InvalidInput("ModelConfig: G2 must map 6 -> 6 channels");
    if (d.in_channels != 6) throw InvalidInput("ModelConfig: discriminator must see 6 channels");
    if (g1.depth != g2.depth) throw InvalidInput("ModelConfig: generators must share depth");
  }
};

/// G1, G2, D and their optimizer states.
template <typename T>
struct GanModel {
  ModelConfig config;
  nn::UNetGenerator<T> g1;
  nn::UNetGenerator<T> g2;
  nn::PatchDiscriminator<T> d;
  nn::AdamState<T> opt_g1;
  nn::AdamState<T> opt_g2;
  nn::AdamState<T> opt_d;

  GanModel(const ModelConfig& cfg, std::uint64_t seed)
      : config((cfg.validate(), cfg)),
        g1(cfg.g1, derive_seed({seed, 1})),
        g2(cfg.g2, derive_seed({seed, 2})),
        d(cfg.d, derive_seed({seed, 3})),
        opt_g1(g1.params()),
        opt_g2(g2.params()),
        opt_d(d.params()) {}
};

// ---------------------------------------------------------------------------
// JSON echoes for checkpoints and config files.

inline nlohmann::ordered_json to_json(const nn::GeneratorConfig& c) {
  return {{"in_channels", c.in_channels},   {"out_channels", c.out_channels},
          {"base_width", c.base_width},     {"depth", c.depth},
          {"dru_blocks_per_skip", c.dru_blocks_per_skip}, {"noise_mode", "dropout"},
          {"dropout_rate", c.dropout_rate}, {"dropout_blocks", c.dropout_blocks}};
}

inline nn::GeneratorConfig generator_config_from_json(const nlohmann::ordered_json& j) {
  nn::GeneratorConfig c;
  c.in_channels = j.at("in_channels").get<std::size_t>();
  c.out_channels = j.at("out_channels").get<std::size_t>();
  c.base_width = j.at("base_width").get<std::size_t>();
  c.depth = j.at("depth").get<std::size_t>();
  c.dru_blocks_per_skip = j.at("dru_blocks_per_skip").get<std::size_t>();
  if (j.at("noise_mode").get<std::string>() != "dropout") throw InvalidInput("unsupported noise_mode");
  c.dropout_rate = j.at("dropout_rate").get<double>();
  c.dropout_blocks = j.at("dropout_blocks").get<std::size_t>();
  return c;
}

inline nlohmann::ordered_json to_json(const nn::DiscriminatorConfig& c) {
  return {{"in_channels", c.in_channels}, {"base_width", c.base_width}, {"n_layers", c.n_layers},
          {"negative_slope", c.negative_slope}};
}

inline nn::DiscriminatorConfig discriminator_config_from_json(const nlohmann::ordered_json& j) {
  nn::DiscriminatorConfig c;
  c.in_channels = j.at("in_channels").get<std::size_t>();
  c.base_width = j.at("base_width").get<std::size_t>();
  c.n_layers = j.at("n_layers").get<std::size_t>();
  c.negative_slope = j.at("negative_slope").get<double>();
  return c;
}

inline nlohmann::ordered_json to_json(const TrainConfig& c) {
  return {{"lr", c.lr},           {"beta1", c.beta1},       {"beta2", c.beta2},
          {"batch_size", c.batch_size}, {"epochs", c.epochs}, {"lambda1", c.lambda1},
          {"lambda2", c.lambda2}, {"seed", c.seed},         {"checkpoint_every", c.checkpoint_every},
          {"detach_g1_in_l2", c.detach_g1_in_l2}};
}

inline TrainConfig train_config_from_json(const nlohmann::ordered_json& j) {
  TrainConfig c;
  c.lr = j.at("lr").get<double>();
  c.beta1 = j.at("beta1").get<double>();
  c.beta2 = j.at("beta2").get<double>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.epochs = j.at("epochs").get<std::size_t>();
  c.lambda1 = j.at("lambda1").get<double>();
  c.lambda2 = j.at("lambda2").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.checkpoint_every = j.at("checkpoint_every").get<std::size_t>();
  c.detach_g1_in_l2 = j.at("detach_g1_in_l2").get<bool>();
  return c;
}

}  // namespace dgd
