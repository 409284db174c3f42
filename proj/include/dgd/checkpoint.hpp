// SPDX-License-Identifier: Apache-2.0
//
// Checkpoint archive ("dgd-ckpt-v1"): named float32 weight arrays of G1, G2
// and D, batch-norm buffers, Adam moments, config echoes, epoch counter and
// the training seed.
#pragma once

#include <filesystem>
#include <string>

#include "dgd/binary_archive.hpp"
#include "dgd/gan_model.hpp"

namespace dgd {

inline constexpr const char* kCheckpointTag = "dgd-ckpt-v1";

struct CheckpointState {
  std::size_t epoch = 0;
  std::uint64_t global_step = 0;
  TrainConfig train;
};

namespace detail {

template <typename T>
ArchiveTensor to_archive(const std::vector<std::size_t>& shape, const std::vector<T>& values) {
  return {shape, std::vector<float>(values.begin(), values.end())};
}

template <typename T>
void store_params(Archive& ar, const std::string& prefix, const nn::ParamSet<T>& ps, const nn::AdamState<T>& opt) {
  for (std::size_t k = 0; k < ps.params.size(); ++k) {
    const auto& p = ps.params[k];
    ar.tensors[prefix + ".param." + p.name] = to_archive(p.shape, p.value);
    ar.tensors[prefix + ".adam_m." + p.name] = to_archive(p.shape, opt.m[k]);
    ar.tensors[prefix + ".adam_v." + p.name] = to_archive(p.shape, opt.v[k]);
  }
  for (const auto& b : ps.buffers) ar.tensors[prefix + ".buffer." + b.name] = to_archive(b.shape, b.value);
}

template <typename T>
void restore_array(const Archive& ar, const std::string& key, const std::vector<std::size_t>& shape, std::vector<T>& out) {
  auto it = ar.tensors.find(key);
  if (it == ar.tensors.end()) throw InvalidInput("checkpoint is missing tensor '" + key + "'");
  if (it->second.shape != shape) throw InvalidInput("checkpoint tensor '" + key + "' has the wrong shape");
  out.assign(it->second.values.begin(), it->second.values.end());
}

template <typename T>
void restore_params(const Archive& ar, const std::string& prefix, nn::ParamSet<T>& ps, nn::AdamState<T>& opt) {
  for (std::size_t k = 0; k < ps.params.size(); ++k) {
    auto& p = ps.params[k];
    restore_array(ar, prefix + ".param." + p.name, p.shape, p.value);
    restore_array(ar, prefix + ".adam_m." + p.name, p.shape, opt.m[k]);
    restore_array(ar, prefix + ".adam_v." + p.name, p.shape, opt.v[k]);
  }
  for (auto& b : ps.buffers) restore_array(ar, prefix + ".buffer." + b.name, b.shape, b.value);
}

}  // namespace detail

template <typename T>
void save_checkpoint(const std::filesystem::path& path, const GanModel<T>& model, const CheckpointState& state) {
  Archive ar;
  ar.format_tag = kCheckpointTag;
  ar.meta["format"] = kCheckpointTag;
  ar.meta["g1"] = to_json(model.config.g1);
  ar.meta["g2"] = to_json(model.config.g2);
  ar.meta["d"] = to_json(model.config.d);
  ar.meta["train"] = to_json(state.train);
  ar.meta["epoch"] = state.epoch;
  ar.meta["global_step"] = state.global_step;
  ar.meta["seeds"] = {{"train_seed", state.train.seed}};
  ar.meta["adam_steps"] = {{"g1", model.opt_g1.step}, {"g2", model.opt_g2.step}, {"d", model.opt_d.step}};
  detail::store_params(ar, "g1", model.g1.params(), model.opt_g1);
  detail::store_params(ar, "g2", model.g2.params(), model.opt_g2);
  detail::store_params(ar, "d", model.d.params(), model.opt_d);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  write_archive(path, ar);
}

template <typename T>
struct LoadedCheckpoint {
  GanModel<T> model;
  CheckpointState state;
};

/// Rebuilds the model from the stored configs and restores every array.
template <typename T>
LoadedCheckpoint<T> load_checkpoint(const std::filesystem::path& path) {
  const Archive ar = read_archive(path, kCheckpointTag);
  try {
    ModelConfig cfg;
    cfg.g1 = generator_config_from_json(ar.meta.at("g1"));
    cfg.g2 = generator_config_from_json(ar.meta.at("g2"));
    cfg.d = discriminator_config_from_json(ar.meta.at("d"));
    CheckpointState state;
    state.train = train_config_from_json(ar.meta.at("train"));
    state.epoch = ar.meta.at("epoch").get<std::size_t>();
    state.global_step = ar.meta.at("global_step").get<std::uint64_t>();
    LoadedCheckpoint<T> out{GanModel<T>(cfg, 0), state};
    detail::restore_params(ar, "g1", out.model.g1.params(), out.model.opt_g1);
    detail::restore_params(ar, "g2", out.model.g2.params(), out.model.opt_g2);
    detail::restore_params(ar, "d", out.model.d.params(), out.model.opt_d);
    const auto& steps = ar.meta.at("adam_steps");
    out.model.opt_g1.step = steps.at("g1").get<std::uint64_t>();
    out.model.opt_g2.step = steps.at("g2").get<std::uint64_t>();
    out.model.opt_d.step = steps.at("d").get<std::uint64_t>();
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput("malformed checkpoint metadata in " + path.string() + ": " + e.what());
  }
}

}  // namespace dgd
