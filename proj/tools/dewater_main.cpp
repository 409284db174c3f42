// SPDX-License-Identifier: Apache-2.0
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dgd/cli/commands.hpp"

namespace {

using dgd::cli::RunConfig;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::vector<std::string> sets;
};

void add_common(CLI::App* cmd, Common& c, const std::string& out_help) {
  cmd->add_option("--config", c.config, "flat key = value config file (applied after $DGD_CONFIG)");
  cmd->add_option("--seed", c.seed, "master seed (overrides the 'seed' key)");
  cmd->add_option("--out", c.out, out_help);
  cmd->add_option("--set", c.sets, "override one config key, KEY=VALUE (repeatable)");
}

RunConfig resolve(const Common& c) {
  RunConfig cfg = dgd::cli::load_run_config(c.config);
  for (const auto& kv : c.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw dgd::cli::ConfigError("--set expects KEY=VALUE, got '" + kv + "'");
    dgd::cli::set_key(cfg, dgd::cli::detail::trim(kv.substr(0, eq)), dgd::cli::detail::trim(kv.substr(eq + 1)));
  }
  if (c.seed) cfg.train.seed = *c.seed;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Underwater image dewatering with a physics-guided dual-generator GAN"};
  app.footer(dgd::cli::describe_keys());
  app.require_subcommand(1);

  Common prep_c, train_c, dew_c, eval_c, syn_c;
  std::string root, cache, prepared;
  std::optional<std::size_t> epochs;
  bool resume = false;
  std::string checkpoint, input;
  std::string pred, ref;
  std::string clean, params;

  auto* prep = app.add_subcommand("prepare-data", "scan, split and cache a paired dataset");
  add_common(prep, prep_c, "cache directory (overrides cache_dir)");
  prep->add_option("--root", root, "dataset root (overrides dataset_root)");

  auto* train = app.add_subcommand("train", "train the generators and discriminator");
  add_common(train, train_c, "output directory for checkpoints and history (overrides output_dir)");
  train->add_option("--root", root, "dataset root used to locate the prepared cache");
  train->add_option("--cache", cache, "cache directory (overrides cache_dir)");
  train->add_option("--prepared", prepared, "prepared cache directory (overrides prepared_dir)");
  train->add_option("--epochs", epochs, "number of epochs (overrides epochs)");
  train->add_flag("--resume", resume, "continue from the latest checkpoint in the output directory");

  auto* dew = app.add_subcommand("dewater", "restore underwater images with a trained checkpoint");
  add_common(dew, dew_c, "output directory for restored PNGs");
  dew->add_option("--checkpoint", checkpoint, "checkpoint file (overrides checkpoint)");
  dew->add_option("input", input, "image file or directory")->required();

  auto* eval = app.add_subcommand("evaluate", "score restored images and write CSV/JSON reports");
  add_common(eval, eval_c, "report path; writes <out>.csv and <out>.json");
  eval->add_option("--pred", pred, "directory of restored images")->required();
  eval->add_option("--ref", ref, "directory of reference images (omit for UIQM only)");

  auto* syn = app.add_subcommand("synthesize", "render underwater/reference pairs from clean images");
  add_common(syn, syn_c, "output dataset root");
  syn->add_option("--clean", clean, "clean image file or directory")->required();
  syn->add_option("--params", params, "synthesis params file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*prep) {
      auto cfg = resolve(prep_c);
      if (!root.empty()) cfg.dataset_root = root;
      if (!prep_c.out.empty()) cfg.cache_dir = prep_c.out;
      return dgd::cli::cmd_prepare_data(cfg);
    }
    if (*train) {
      auto cfg = resolve(train_c);
      if (!root.empty()) cfg.dataset_root = root;
      if (!cache.empty()) cfg.cache_dir = cache;
      if (!prepared.empty()) cfg.prepared_dir = prepared;
      if (!train_c.out.empty()) cfg.output_dir = train_c.out;
      if (epochs) cfg.train.epochs = *epochs;
      if (resume) cfg.resume = true;
      return dgd::cli::cmd_train(cfg);
    }
    if (*dew) {
      auto cfg = resolve(dew_c);
      if (!checkpoint.empty()) cfg.checkpoint = checkpoint;
      if (cfg.checkpoint.empty()) throw dgd::cli::ConfigError("dewater: no checkpoint given");
      const std::string out = dew_c.out.empty() ? cfg.output_dir : dew_c.out;
      return dgd::cli::cmd_dewater(cfg.checkpoint, input, out, cfg.train.seed);
    }
    if (*eval) {
      resolve(eval_c);
      const std::string out = eval_c.out.empty() ? "metrics" : eval_c.out;
      std::optional<std::filesystem::path> ref_dir;
      if (!ref.empty()) ref_dir = ref;
      return dgd::cli::cmd_evaluate(pred, ref_dir, out);
    }
    if (*syn) {
      auto cfg = resolve(syn_c);
      const std::string out = syn_c.out.empty() ? cfg.output_dir : syn_c.out;
      return dgd::cli::cmd_synthesize(clean, params, out, cfg.train.seed);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return dgd::cli::kExitFatal;
  }
  return dgd::cli::kExitFatal;
}
