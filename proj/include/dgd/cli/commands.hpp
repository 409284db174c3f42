// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "dgd/checkpoint.hpp"
#include "dgd/cli/config.hpp"
#include "dgd/cli/synthesis.hpp"
#include "dgd/io/image_io.hpp"
#include "dgd/pipeline.hpp"
#include "dgd/report.hpp"
#include "dgd/training.hpp"

namespace dgd::cli {

enum ExitCode : int { kExitOk = 0, kExitFatal = 1, kExitWarnings = 2 };

/// Collects warnings and chooses the exit code.
class Console {
 public:
  Console(std::ostream& out, std::ostream& err) : out_(out), err_(err) {}
  std::ostream& out() { return out_; }
  void warn(const std::string& msg) {
    err_ << "warning: " << msg << '\n';
    ++warnings_;
  }
  int fatal(const std::string& msg) {
    err_ << "error: " << msg << '\n';
    return kExitFatal;
  }
  std::size_t warnings() const { return warnings_; }
  int finish() const { return warnings_ ? kExitWarnings : kExitOk; }

 private:
  std::ostream& out_;
  std::ostream& err_;
  std::size_t warnings_ = 0;
};

// ---------------------------------------------------------------------------
// Helpers

/// Index into [0, n) under whole-sample mirroring (…2 1 0 1 2…), repeated periodically.
inline std::size_t mirror_index(std::size_t i, std::size_t n) {
  if (n == 1) return 0;
  const std::size_t period = 2 * (n - 1);
  const std::size_t m = i % period;
  return m < n ? m : period - m;
}

inline std::size_t next_multiple(std::size_t v, std::size_t m) { return (v + m - 1) / m * m; }

/// Extends the image to the right and bottom by mirroring.
inline Planar reflect_pad(const Planar& img, std::size_t out_h, std::size_t out_w) {
  if (out_h < img.height() || out_w < img.width()) throw InvalidInput("reflect_pad: target smaller than image");
  Planar out(out_h, out_w, img.channels());
  for (std::size_t y = 0; y < out_h; ++y) {
    const std::size_t sy = mirror_index(y, img.height());
    for (std::size_t x = 0; x < out_w; ++x) {
      const std::size_t sx = mirror_index(x, img.width());
      for (std::size_t c = 0; c < img.channels(); ++c) out.at(y, x, c) = img.at(sy, sx, c);
    }
  }
  return out;
}

/// Supported images under `path` (a file or a directory), sorted by name.
inline std::vector<std::filesystem::path> list_images(const std::filesystem::path& path, Console* console = nullptr) {
  namespace fs = std::filesystem;
  std::vector<fs::path> out;
  if (fs::is_regular_file(path)) {
    out.push_back(path);
    return out;
  }
  if (!fs::is_directory(path)) throw InvalidInput("no such file or directory: " + path.string());
  for (const auto& e : fs::directory_iterator(path)) {
    if (!e.is_regular_file()) continue;
    if (io::is_supported_image(e.path())) out.push_back(e.path());
    else if (console) console->warn("ignoring unsupported file " + e.path().string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline std::uint64_t name_seed(std::uint64_t seed, const std::string& name) {
  Fnv1a h;
  h.update(name);
  return derive_seed({seed, h.digest()});
}

/// Cache directory for the configured dataset, or the explicit prepared_dir.
inline std::filesystem::path resolve_prepared_dir(const RunConfig& cfg) {
  if (!cfg.prepared_dir.empty()) return cfg.prepared_dir;
  if (cfg.dataset_root.empty()) throw InvalidInput("either prepared_dir or dataset_root must be set");
  PrepareOptions opt{cfg.train.seed, cfg.resolution, cfg.quadrisect, cfg.created_at};
  return std::filesystem::path(cfg.cache_dir) / cache_key(scan_dataset(cfg.dataset_root), opt);
}

// ---------------------------------------------------------------------------
// Commands

inline int cmd_prepare_data(const RunConfig& cfg, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  Console con(out, err);
  if (cfg.dataset_root.empty()) return con.fatal("prepare-data: dataset_root is not set");
  PrepareReport rep;
  try {
    rep = prepare_dataset(cfg.dataset_root, cfg.cache_dir,
                          PrepareOptions{cfg.train.seed, cfg.resolution, cfg.quadrisect, cfg.created_at});
  } catch (const std::exception& e) {
    return con.fatal(std::string("prepare-data: ") + e.what());
  }
  for (const auto& s : rep.skipped) con.warn(s);
  out << (rep.cache_hit ? "cache hit: " : "prepared: ") << rep.cache_path.string() << '\n';
  out << "pairs " << rep.source_pairs << ", samples " << rep.sample_count;
  if (rep.manifest) out << ", train " << rep.manifest->train_ids.size() << ", test " << rep.manifest->test_ids.size();
  out << ", transmission clamped " << rep.transmission_clamp.clamped << "/" << rep.transmission_clamp.total << '\n';
  if (rep.sample_count == 0) con.warn("no samples found under " + cfg.dataset_root);
  else if (!rep.manifest) con.warn("fewer than 2 samples; no split manifest written");
  return con.finish();
}

inline int cmd_train(const RunConfig& cfg, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  Console con(out, err);
  try {
    const auto dir = resolve_prepared_dir(cfg);
    if (!std::filesystem::exists(dir / "manifest.json"))
      return con.fatal("train: no prepared cache at " + dir.string() + " (run prepare-data first)");
    CachedSamples samples(dir);
    const auto manifest = samples.manifest();
    TrainLoopOptions opt;
    opt.output_dir = cfg.output_dir;
    opt.resume = cfg.resume;
    opt.on_epoch = [&](const EpochRecord& r) {
      char line[256];
      std::snprintf(line, sizeof line, "epoch %zu adv_d %.6f adv_g %.6f l1_g1 %.6f l2_g2 %.6f total_g %.6f\n", r.epoch,
                    r.mean.adv_d, r.mean.adv_g, r.mean.l1_g1, r.mean.l2_g2, r.mean.total_g);
      out << line << std::flush;
    };
    const auto result = train_loop(samples, manifest.train_ids, cfg.train, cfg.model(), opt);
    out << "checkpoint: " << result.final_checkpoint.string() << '\n';
  } catch (const TrainingAborted& e) {
    return con.fatal(std::string("train: ") + e.what() + "; last good checkpoint " + e.last_good_checkpoint());
  } catch (const std::exception& e) {
    return con.fatal(std::string("train: ") + e.what());
  }
  return con.finish();
}

/// Restores every image under `input`, writing <stem>_dewatered.png to `output_dir`.
inline int cmd_dewater(const std::filesystem::path& checkpoint, const std::filesystem::path& input,
                       const std::filesystem::path& output_dir, std::uint64_t seed, std::ostream& out = std::cout,
                       std::ostream& err = std::cerr) {
  Console con(out, err);
  std::optional<LoadedCheckpoint<float>> loaded;
  std::vector<std::filesystem::path> inputs;
  try {
    loaded.emplace(load_checkpoint<float>(checkpoint));
    inputs = list_images(input, &con);
    std::filesystem::create_directories(output_dir);
  } catch (const std::exception& e) {
    return con.fatal(std::string("dewater: ") + e.what());
  }
  const std::size_t span = std::size_t{1} << loaded->model.config.g1.depth;
  std::size_t done = 0;
  for (const auto& path : inputs) {
    ImageTensor img;
    try {
      img = io::read_image(path);
    } catch (const std::exception& e) {
      con.warn("skipping " + path.string() + ": " + e.what());
      continue;
    }
    const auto padded = reflect_pad(img, next_multiple(img.height(), span), next_multiple(img.width(), span));
    const auto restored = dewater(loaded->model, padded, name_seed(seed, path.filename().string()));
    const auto cropped = crop(restored, 0, 0, img.height(), img.width());
    const auto target = output_dir / (path.stem().string() + "_dewatered.png");
    io::write_png(target, cropped);
    out << path.filename().string() << " -> " << target.string() << '\n';
    ++done;
  }
  if (done == 0) return con.fatal("dewater: no images processed");
  return con.finish();
}

inline std::string strip_dewatered_suffix(const std::string& stem) {
  static const std::string suffix = "_dewatered";
  if (stem.size() > suffix.size() && stem.ends_with(suffix)) return stem.substr(0, stem.size() - suffix.size());
  return stem;
}

/// Writes <out>.csv and <out>.json. A trailing .csv or .json on `out_path` is replaced.
inline int cmd_evaluate(const std::filesystem::path& pred_dir, const std::optional<std::filesystem::path>& ref_dir,
                        const std::filesystem::path& out_path, std::ostream& out = std::cout,
                        std::ostream& err = std::cerr) {
  Console con(out, err);
  std::vector<ReportEntry> entries;
  try {
    std::map<std::string, std::filesystem::path> preds, refs;
    for (const auto& p : list_images(pred_dir, &con)) {
      const auto stem = strip_dewatered_suffix(p.stem().string());
      if (!preds.emplace(stem, p).second) con.warn("duplicate prediction stem " + stem + "; keeping " + preds[stem].string());
    }
    if (ref_dir)
      for (const auto& p : list_images(*ref_dir, &con)) refs.emplace(p.stem().string(), p);

    for (const auto& [stem, path] : preds) {
      if (ref_dir && !refs.contains(stem)) {
        con.warn("no reference for prediction " + path.string());
        continue;
      }
      ReportEntry e;
      e.image_id = stem;
      try {
        e.pred = io::read_image(path);
        if (ref_dir) {
          e.ref = io::read_image(refs.at(stem));
          if (!e.pred.same_shape(*e.ref)) {
            con.warn("size mismatch for " + stem + "; skipped");
            continue;
          }
        }
      } catch (const std::exception& ex) {
        con.warn("skipping " + stem + ": " + ex.what());
        continue;
      }
      entries.push_back(std::move(e));
    }
    if (ref_dir)
      for (const auto& [stem, path] : refs)
        if (!preds.contains(stem)) con.warn("no prediction for reference " + path.string());
    if (entries.empty()) return con.fatal("evaluate: no matched images");

    const auto method = pred_dir.filename().string();
    const auto dataset = ref_dir ? ref_dir->filename().string() : std::string();
    const auto report = build_report(entries, dataset, method);
    auto base = out_path;
    if (base.extension() == ".csv" || base.extension() == ".json") base.replace_extension();
    if (base.has_parent_path()) std::filesystem::create_directories(base.parent_path());
    const std::filesystem::path csv = base.string() + ".csv", json = base.string() + ".json";
    {
      std::ofstream os(csv, std::ios::trunc);
      if (!os) return con.fatal("evaluate: cannot write " + csv.string());
      write_csv(os, report);
    }
    write_json_file(json, to_json(report));
    out << "evaluated " << report.per_image.size() << " images -> " << csv.string() << ", " << json.string() << '\n';
  } catch (const std::exception& e) {
    return con.fatal(std::string("evaluate: ") + e.what());
  }
  return con.finish();
}

/// Writes <out>/<category>/{underwater,reference}/<stem>.png and <out>/synthesis.json.
inline int cmd_synthesize(const std::filesystem::path& clean_dir, const std::filesystem::path& params_file,
                          const std::filesystem::path& out_dir, std::uint64_t seed, std::ostream& out = std::cout,
                          std::ostream& err = std::cerr) {
  namespace fs = std::filesystem;
  Console con(out, err);
  try {
    const auto params = load_synthesis_params(params_file);
    const auto inputs = list_images(clean_dir, &con);
    const fs::path under_dir = out_dir / params.category / "underwater";
    const fs::path ref_dir = out_dir / params.category / "reference";
    fs::create_directories(under_dir);
    fs::create_directories(ref_dir);

    nlohmann::ordered_json log;
    log["category"] = params.category;
    log["seed"] = seed;
    auto images = nlohmann::ordered_json::object();
    std::set<std::string> seen;
    for (const auto& path : inputs) {
      const std::string stem = path.stem().string();
      if (!seen.insert(stem).second) {
        con.warn("duplicate stem " + stem + "; skipping " + path.string());
        continue;
      }
      ImageTensor clean;
      try {
        clean = io::read_image(path);
      } catch (const std::exception& e) {
        con.warn("skipping " + path.string() + ": " + e.what());
        continue;
      }
      const auto spec = resolve_spec(params, stem);
      ClampStats clamp;
      const auto under = synthesize_underwater(clean, spec, name_seed(seed, stem), &clamp);
      io::write_png(under_dir / (stem + ".png"), under);
      io::write_png(ref_dir / (stem + ".png"), clean);
      auto entry = to_json(spec);
      entry["clamped"] = clamp.clamped;
      images[stem] = std::move(entry);
    }
    for (const auto& [stem, _] : params.overrides)
      if (!seen.contains(stem)) con.warn(params.source + ": overrides for unknown image '" + stem + "'");
    if (images.empty()) return con.fatal("synthesize: no clean images processed");
    log["images"] = std::move(images);
    write_json_file(out_dir / "synthesis.json", log);
    out << "synthesized " << log["images"].size() << " pairs into " << (out_dir / params.category).string() << '\n';
  } catch (const std::exception& e) {
    return con.fatal(std::string("synthesize: ") + e.what());
  }
  return con.finish();
}

}  // namespace dgd::cli
