// SPDX-License-Identifier: Apache-2.0
//
// Alternating optimization of D and (G1, G2), the epoch loop with
// checkpoint/resume, and single-image inference through G1.
#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include "dgd/checkpoint.hpp"
#include "dgd/dataset.hpp"
#include "dgd/gan_model.hpp"
#include "dgd/losses.hpp"

namespace dgd {

template <typename T>
struct TrainBatch {
  nn::Tensor<T> x1;  // underwater, N×3×H×W
  nn::Tensor<T> y1;  // ground truth
  nn::Tensor<T> x2;  // [T | A], N×6×H×W
};

template <typename T>
TrainBatch<T> make_batch(const std::vector<PairedSample>& samples) {
  if (samples.empty()) throw InvalidInput("make_batch: empty batch");
  std::vector<const Planar*> x1, y1;
  std::vector<Planar> x2_store;
  x2_store.reserve(samples.size());
  for (const auto& s : samples) {
    x1.push_back(&s.x1);
    y1.push_back(&s.y1);
    x2_store.push_back(s.x2());
  }
  std::vector<const Planar*> x2;
  for (const auto& p : x2_store) x2.push_back(&p);
  return {nn::to_batch<T>(x1), nn::to_batch<T>(y1), nn::to_batch<T>(x2)};
}

struct StepSeeds {
  std::uint64_t g1_noise = 0;
  std::uint64_t g2_noise = 0;

  static StepSeeds derive(std::uint64_t seed, std::uint64_t step) {
    return {derive_seed({seed, 0x61, step}), derive_seed({seed, 0x62, step})};
  }
};

/// Generator-side forward/backward for one batch. G1's forward can be
/// supplied (train_step reuses the one the discriminator step saw).
template <typename T>
struct GeneratorPass {
  typename nn::UNetGenerator<T>::Cache c1, c2;
  nn::Tensor<T> g1_raw, fake;
  LossBreakdown loss;
};

template <typename T>
void run_g1(const GanModel<T>& m, const TrainBatch<T>& b, std::uint64_t noise_seed, GeneratorPass<T>& pass) {
  pass.g1_raw = m.g1.forward(b.x1, nn::Mode::kTrain, noise_seed, pass.c1);
  pass.fake = nn::image_head(pass.g1_raw);
}

/// Computes adv_g, l1_g1, l2_g2, total_g and, when gradient buffers are
/// given, their parameter gradients. D is read but never updated.
template <typename T>
void generator_objective(const GanModel<T>& m, const TrainBatch<T>& b, const TrainConfig& cfg, std::uint64_t g2_noise,
                         GeneratorPass<T>& pass, nn::Gradients<T>* g1_grads, nn::Gradients<T>* g2_grads) {
  typename nn::PatchDiscriminator<T>::Cache dc;
  const auto fake_logits = m.d.forward(b.x1, pass.fake, nn::Mode::kTrain, dc);
  pass.loss.adv_g = bce_with_logits(fake_logits, 1.0);
  pass.loss.l1_g1 = l1_loss(pass.fake, b.y1);

  const auto g2_raw = m.g2.forward(b.x2, nn::Mode::kTrain, g2_noise, pass.c2);
  const auto heads = nn::transmission_veil_head(g2_raw, static_cast<T>(kTransmissionFloor));
  const auto n = recompose(pass.fake, heads.t, heads.a);
  pass.loss.l2_g2 = l2_loss_g2(n, b.x1);
  pass.loss.total_g = pass.loss.adv_g + cfg.lambda1 * pass.loss.l1_g1 + cfg.lambda2 * pass.loss.l2_g2;
  if (!g1_grads && !g2_grads) return;

  // dL/dN, shared by both generators.
  const auto d_n = l1_loss_grad(n, b.x1, cfg.lambda2);

  if (g1_grads) {
    nn::Gradients<T> scratch(m.d.params());
    auto d_fake = m.d.backward(dc, bce_with_logits_grad(fake_logits, 1.0, 1.0), scratch, 3);
    const auto d_l1 = l1_loss_grad(pass.fake, b.y1, cfg.lambda1);
    for (std::size_t i = 0; i < d_fake.size(); ++i) {
      d_fake.v[i] += d_l1.v[i];
      if (!cfg.detach_g1_in_l2) d_fake.v[i] += d_n.v[i] * heads.t.v[i];
    }
    m.g1.backward(pass.c1, nn::image_head_backward(pass.g1_raw, d_fake), *g1_grads);
  }
  if (g2_grads) {
    nn::Tensor<T> d_t = d_n;
    for (std::size_t i = 0; i < d_t.size(); ++i) d_t.v[i] *= pass.fake.v[i];
    m.g2.backward(pass.c2, nn::transmission_veil_head_backward(g2_raw, d_t, d_n, static_cast<T>(kTransmissionFloor)), *g2_grads);
  }
}

/// Full generator objective from scratch (used for gradient verification).
template <typename T>
LossBreakdown generator_objective(const GanModel<T>& m, const TrainBatch<T>& b, const TrainConfig& cfg, StepSeeds seeds,
                                  nn::Gradients<T>* g1_grads = nullptr, nn::Gradients<T>* g2_grads = nullptr) {
  GeneratorPass<T> pass;
  run_g1(m, b, seeds.g1_noise, pass);
  generator_objective(m, b, cfg, seeds.g2_noise, pass, g1_grads, g2_grads);
  return pass.loss;
}

/// adv_d for a given fake batch; optionally accumulates D gradients and
/// returns the caches for the running-statistics update.
template <typename T>
double discriminator_objective(const GanModel<T>& m, const TrainBatch<T>& b, const nn::Tensor<T>& fake,
                               nn::Gradients<T>* d_grads,
                               typename nn::PatchDiscriminator<T>::Cache* real_cache = nullptr,
                               typename nn::PatchDiscriminator<T>::Cache* fake_cache = nullptr) {
  typename nn::PatchDiscriminator<T>::Cache rc, fc;
  const auto real_logits = m.d.forward(b.x1, b.y1, nn::Mode::kTrain, rc);
  const auto fake_logits = m.d.forward(b.x1, fake, nn::Mode::kTrain, fc);
  const double adv_d = adversarial_losses(real_logits, fake_logits).adv_d;
  if (d_grads) {
    m.d.backward(rc, bce_with_logits_grad(real_logits, 1.0, 0.5), *d_grads, 3);
    m.d.backward(fc, bce_with_logits_grad(fake_logits, 0.0, 0.5), *d_grads, 3);
  }
  if (real_cache) *real_cache = std::move(rc);
  if (fake_cache) *fake_cache = std::move(fc);
  return adv_d;
}

/// One Adam step of D on real (x1, y1) vs detached fake (x1, G1(x1)).
template <typename T>
double discriminator_step(GanModel<T>& m, const TrainBatch<T>& b, const nn::Tensor<T>& fake, const TrainConfig& cfg) {
  nn::Gradients<T> grads(m.d.params());
  typename nn::PatchDiscriminator<T>::Cache rc, fc;
  const double adv_d = discriminator_objective(m, b, fake, &grads, &rc, &fc);
  if (!std::isfinite(adv_d)) throw TrainingAborted("non-finite discriminator loss", "");
  m.opt_d.apply(m.d.params(), grads, cfg.adam());
  m.d.commit_running_stats(rc);
  m.d.commit_running_stats(fc);
  if (!m.d.params().all_finite()) throw TrainingAborted("non-finite discriminator parameters after update", "");
  return adv_d;
}

/// One joint Adam step of G1 and G2 on total_g. With lambda2 = 0 G2 takes
/// no part in the objective and is left untouched.
template <typename T>
LossBreakdown generator_step(GanModel<T>& m, const TrainBatch<T>& b, GeneratorPass<T>& pass, const TrainConfig& cfg,
                             std::uint64_t g2_noise) {
  nn::Gradients<T> g1_grads(m.g1.params()), g2_grads(m.g2.params());
  const bool update_g2 = cfg.lambda2 != 0.0;
  generator_objective(m, b, cfg, g2_noise, pass, &g1_grads, update_g2 ? &g2_grads : nullptr);
  if (!pass.loss.finite()) throw TrainingAborted("non-finite generator loss", "");
  m.opt_g1.apply(m.g1.params(), g1_grads, cfg.adam());
  m.g1.commit_running_stats(pass.c1);
  if (update_g2) {
    m.opt_g2.apply(m.g2.params(), g2_grads, cfg.adam());
    m.g2.commit_running_stats(pass.c2);
  }
  if (!m.g1.params().all_finite() || !m.g2.params().all_finite())
    throw TrainingAborted("non-finite generator parameters after update", "");
  return pass.loss;
}

/// D step, then G step, sharing one G1 forward.
template <typename T>
LossBreakdown train_step(GanModel<T>& m, const TrainBatch<T>& b, const TrainConfig& cfg, StepSeeds seeds) {
  GeneratorPass<T> pass;
  run_g1(m, b, seeds.g1_noise, pass);
  const double adv_d = discriminator_step(m, b, pass.fake, cfg);
  LossBreakdown loss = generator_step(m, b, pass, cfg, seeds.g2_noise);
  loss.adv_d = adv_d;
  return loss;
}

// ---------------------------------------------------------------------------
// Epoch loop

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  LossBreakdown mean;
};

inline void write_history_csv(const std::filesystem::path& path, const std::vector<EpochRecord>& history) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << "epoch,adv_d,adv_g,l1_g1,l2_g2,total_g\n";
  char buf[256];
  for (const auto& r : history) {
    std::snprintf(buf, sizeof buf, "%zu,%.9g,%.9g,%.9g,%.9g,%.9g\n", r.epoch, r.mean.adv_d, r.mean.adv_g, r.mean.l1_g1,
                  r.mean.l2_g2, r.mean.total_g);
    os << buf;
  }
}

inline std::vector<EpochRecord> read_history_csv(const std::filesystem::path& path) {
  std::vector<EpochRecord> out;
  std::ifstream is(path);
  if (!is) return out;
  std::string line;
  std::getline(is, line);
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    EpochRecord r;
    if (std::sscanf(line.c_str(), "%zu,%lf,%lf,%lf,%lf,%lf", &r.epoch, &r.mean.adv_d, &r.mean.adv_g, &r.mean.l1_g1,
                    &r.mean.l2_g2, &r.mean.total_g) != 6)
      throw InvalidInput("malformed history row: " + line);
    out.push_back(r);
  }
  return out;
}

struct TrainLoopOptions {
  std::filesystem::path output_dir;
  bool resume = false;
  std::function<void(const EpochRecord&)> on_epoch;
  /// Stop after this many epochs in this invocation (simulates an interrupt); 0 = no limit.
  std::size_t stop_after_epochs = 0;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  std::vector<LossBreakdown> steps;  // this invocation only
  std::filesystem::path final_checkpoint;
  std::size_t start_epoch = 0;       // epochs already completed when this run began
};

inline std::filesystem::path checkpoint_path(const std::filesystem::path& dir, std::size_t epoch) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "epoch_%06zu.dgd", epoch);
  return dir / "checkpoints" / buf;
}

/// Highest-epoch checkpoint in `dir`, or empty.
inline std::filesystem::path latest_checkpoint(const std::filesystem::path& dir) {
  const auto ckpt_dir = dir / "checkpoints";
  if (!std::filesystem::is_directory(ckpt_dir)) return {};
  std::filesystem::path best;
  for (const auto& e : std::filesystem::directory_iterator(ckpt_dir)) {
    const auto name = e.path().filename().string();
    if (name.starts_with("epoch_") && name.ends_with(".dgd") && (best.empty() || name > best.filename().string()))
      best = e.path();
  }
  return best;
}

inline LossBreakdown mean_of(const std::vector<LossBreakdown>& v) {
  LossBreakdown m;
  for (const auto& l : v) {
    m.adv_d += l.adv_d;
    m.adv_g += l.adv_g;
    m.l1_g1 += l.l1_g1;
    m.l2_g2 += l.l2_g2;
    m.total_g += l.total_g;
  }
  const double n = static_cast<double>(std::max<std::size_t>(1, v.size()));
  m.adv_d /= n;
  m.adv_g /= n;
  m.l1_g1 /= n;
  m.l2_g2 /= n;
  m.total_g /= n;
  return m;
}

/// Trains for cfg.epochs epochs over `train_ids` with on-the-fly paired flips.
/// Writes output_dir/history.csv after every epoch and a checkpoint every
/// cfg.checkpoint_every epochs and at the end. With `resume`, continues from
/// the latest checkpoint in output_dir.
inline TrainResult train_loop(const SampleProvider& samples, const std::vector<std::string>& train_ids,
                              const TrainConfig& cfg, const ModelConfig& model_cfg, const TrainLoopOptions& opt) {
  cfg.validate();
  if (train_ids.empty()) throw InvalidInput("train_loop: empty training split");
  if (opt.output_dir.empty()) throw InvalidInput("train_loop: output_dir is required");
  std::filesystem::create_directories(opt.output_dir);
  const auto history_path = opt.output_dir / "history.csv";

  TrainResult result;
  std::optional<GanModel<float>> model;
  std::uint64_t global_step = 0;
  if (opt.resume) {
    const auto latest = latest_checkpoint(opt.output_dir);
    if (!latest.empty()) {
      auto loaded = load_checkpoint<float>(latest);
      model.emplace(std::move(loaded.model));
      result.start_epoch = loaded.state.epoch;
      global_step = loaded.state.global_step;
      result.history = read_history_csv(history_path);
      std::erase_if(result.history, [&](const EpochRecord& r) { return r.epoch > result.start_epoch; });
      result.final_checkpoint = latest;
    }
  }
  if (!model) {
    model.emplace(model_cfg, derive_seed({cfg.seed, 0x1A17}));
    result.final_checkpoint = checkpoint_path(opt.output_dir, 0);
    save_checkpoint(result.final_checkpoint, *model, CheckpointState{0, 0, cfg});
  }
  for (const auto& id : train_ids) {
    const auto probe = samples.load(id);
    model->config.g1.validate_for(probe.x1.height(), probe.x1.width());
    break;
  }

  SplitManifest manifest;
  manifest.train_ids = train_ids;
  BatchIterator batches(manifest, Split::kTrain, cfg.batch_size, derive_seed({cfg.seed, 0x5A}));

  std::size_t run_epochs = 0;
  for (std::size_t epoch = result.start_epoch + 1; epoch <= cfg.epochs; ++epoch) {
    if (opt.stop_after_epochs && run_epochs == opt.stop_after_epochs) break;
    batches.begin_epoch(epoch);
    std::vector<LossBreakdown> epoch_steps;
    std::size_t batch_index = 0;
    while (auto ids = batches.next()) {
      Rng flip_rng(derive_seed({cfg.seed, 0xF11B, epoch, batch_index++}));
      std::vector<PairedSample> batch;
      for (const auto& id : *ids) batch.push_back(augment_flips(samples.load(id), flip_rng));
      const auto tb = make_batch<float>(batch);
      LossBreakdown loss;
      try {
        loss = train_step(*model, tb, cfg, StepSeeds::derive(cfg.seed, global_step));
      } catch (const TrainingAborted& e) {
        throw TrainingAborted(std::string(e.what()) + " at epoch " + std::to_string(epoch) + ", step " +
                                  std::to_string(global_step),
                              result.final_checkpoint.string());
      }
      ++global_step;
      epoch_steps.push_back(loss);
      result.steps.push_back(loss);
    }
    EpochRecord rec{epoch, mean_of(epoch_steps)};
    result.history.push_back(rec);
    write_history_csv(history_path, result.history);
    if (opt.on_epoch) opt.on_epoch(rec);
    ++run_epochs;
    if (epoch % cfg.checkpoint_every == 0 || epoch == cfg.epochs) {
      result.final_checkpoint = checkpoint_path(opt.output_dir, epoch);
      save_checkpoint(result.final_checkpoint, *model, CheckpointState{epoch, global_step, cfg});
    }
  }
  if (result.history.empty()) write_history_csv(history_path, result.history);
  return result;
}

// ---------------------------------------------------------------------------
// Inference

/// Restores an image with G1 alone (evaluation-mode batch norm, seeded dropout).
template <typename T>
ImageTensor dewater(const GanModel<T>& model, const ImageTensor& img, std::uint64_t noise_seed) {
  require_rgb(img, "dewater");
  const auto out = nn::forward_g1(model.g1, nn::to_batch<T>(img), noise_seed, nn::Mode::kEval);
  ImageTensor restored = nn::from_batch(out, 0);
  clamp_inplace(restored, 0.0, 1.0);
  return restored;
}

inline ImageTensor dewater(const std::filesystem::path& checkpoint, const ImageTensor& img, std::uint64_t noise_seed) {
  return dewater(load_checkpoint<float>(checkpoint).model, img, noise_seed);
}

}  // namespace dgd
