// SPDX-License-Identifier: Apache-2.0
//
// Paired-image data preparation: directory scan, quadrant split, bilinear
// resize, target precomputation, paired flip augmentation, train/test split
// and mini-batch iteration.
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dgd/error.hpp"
#include "dgd/image.hpp"
#include "dgd/io/image_io.hpp"
#include "dgd/rng.hpp"
#include "dgd/uifm.hpp"

namespace dgd {

inline constexpr std::size_t kTrainingResolution = 256;
inline constexpr double kTrainFraction = 0.8;
inline constexpr double kVerticalFlipProbability = 0.5;
inline constexpr double kHorizontalFlipProbability = 0.3;

// ---------------------------------------------------------------------------
// Scanning

struct RawPair {
  std::filesystem::path underwater_path;
  std::filesystem::path groundtruth_path;
  std::string category;
  std::string stem;

  std::string id() const { return category + "/" + stem; }
};

struct ScanResult {
  std::vector<RawPair> pairs;
  std::vector<std::string> skipped;  // human-readable reasons, sorted
};

/// Scans root/<category>/underwater/<stem>.<ext> against root/<category>/reference/<stem>.<ext>.
/// Unpaired files are reported in `skipped`; an unreadable file throws.
inline ScanResult scan_dataset(const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root)) throw InvalidInput("scan_dataset: not a directory: " + root.string());
  ScanResult out;
  std::vector<fs::path> categories;
  for (const auto& e : fs::directory_iterator(root))
    if (e.is_directory()) categories.push_back(e.path());
  std::sort(categories.begin(), categories.end());

  auto index_images = [](const fs::path& dir) {
    std::map<std::string, fs::path> by_stem;
    if (!fs::is_directory(dir)) return by_stem;
    for (const auto& e : fs::directory_iterator(dir))
      if (e.is_regular_file() && io::is_supported_image(e.path())) by_stem[e.path().stem().string()] = e.path();
    return by_stem;
  };
  auto require_readable = [](const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    if (!f || f.peek() == std::ifstream::traits_type::eof())
      throw io::ImageIoError("unreadable file: " + p.string());
  };

  for (const auto& cat_dir : categories) {
    const std::string category = cat_dir.filename().string();
    const auto underwater = index_images(cat_dir / "underwater");
    const auto reference = index_images(cat_dir / "reference");
    for (const auto& [stem, path] : underwater) {
      auto it = reference.find(stem);
      if (it == reference.end()) {
        out.skipped.push_back("missing reference for " + path.string());
        continue;
      }
      require_readable(path);
      require_readable(it->second);
      out.pairs.push_back({path, it->second, category, stem});
    }
    for (const auto& [stem, path] : reference)
      if (!underwater.contains(stem)) out.skipped.push_back("missing underwater image for " + path.string());
  }
  std::sort(out.pairs.begin(), out.pairs.end(), [](const auto& a, const auto& b) { return a.id() < b.id(); });
  std::sort(out.skipped.begin(), out.skipped.end());
  return out;
}

// ---------------------------------------------------------------------------
// Geometry

/// Top-left, top-right, bottom-left, bottom-right quadrants of size ⌊H/2⌋×⌊W/2⌋.
inline std::array<ImageTensor, 4> quadrisect(const ImageTensor& img) {
  if (img.height() < 2 || img.width() < 2) throw InvalidInput("quadrisect: image must be at least 2x2");
  const std::size_t h = img.height() / 2, w = img.width() / 2;
  return {crop(img, 0, 0, h, w), crop(img, 0, w, h, w), crop(img, h, 0, h, w), crop(img, h, w, h, w)};
}

/// Bilinear resampling with pixel-centre alignment and edge clamping.
inline Planar resize_bilinear(const Planar& img, std::size_t out_h, std::size_t out_w) {
  if (img.height() < 1 || img.width() < 1 || out_h < 1 || out_w < 1) throw InvalidInput("resize_bilinear: empty image");
  if (img.height() == out_h && img.width() == out_w) return img;
  const std::size_t ch = img.channels();
  Planar out(out_h, out_w, ch);
  const double sy = static_cast<double>(img.height()) / static_cast<double>(out_h);
  const double sx = static_cast<double>(img.width()) / static_cast<double>(out_w);
  const double max_y = static_cast<double>(img.height() - 1), max_x = static_cast<double>(img.width() - 1);
  for (std::size_t y = 0; y < out_h; ++y) {
    const double fy = std::clamp((static_cast<double>(y) + 0.5) * sy - 0.5, 0.0, max_y);
    const auto y0 = static_cast<std::size_t>(fy);
    const std::size_t y1 = std::min(y0 + 1, img.height() - 1);
    const double wy = fy - static_cast<double>(y0);
    for (std::size_t x = 0; x < out_w; ++x) {
      const double fx = std::clamp((static_cast<double>(x) + 0.5) * sx - 0.5, 0.0, max_x);
      const auto x0 = static_cast<std::size_t>(fx);
      const std::size_t x1 = std::min(x0 + 1, img.width() - 1);
      const double wx = fx - static_cast<double>(x0);
      for (std::size_t c = 0; c < ch; ++c) {
        const double top = img.at(y0, x0, c) * (1.0 - wx) + img.at(y0, x1, c) * wx;
        const double bot = img.at(y1, x0, c) * (1.0 - wx) + img.at(y1, x1, c) * wx;
        out.at(y, x, c) = std::clamp(top * (1.0 - wy) + bot * wy, 0.0, 1.0);
      }
    }
  }
  return out;
}

inline ImageTensor resize_to_training(const ImageTensor& img, std::size_t resolution = kTrainingResolution) {
  if (img.height() < 2 || img.width() < 2) throw InvalidInput("resize_to_training: image must be at least 2x2");
  return resize_bilinear(img, resolution, resolution);
}

// ---------------------------------------------------------------------------
// Samples

struct PairedSample {
  std::string sample_id;
  ImageTensor x1;  // underwater
  ImageTensor y1;  // ground truth
  TransmissionMap t;
  VeilingLightField a;

  /// Six-channel generator input [T | A].
  Planar x2() const { return concat_channels(t.data, a.data); }
};

struct Targets {
  TransmissionMap t;
  VeilingLightField a;
};

/// Gray-world veiling light from the underwater image, then closed-form transmission.
inline Targets precompute_targets(const ImageTensor& x1, const ImageTensor& y1, ClampStats* stats = nullptr) {
  require_same_shape(x1, y1, "precompute_targets");
  auto a = estimate_veiling_light(x1, GrayWorldScalars{});
  auto t = estimate_transmission(x1, y1, a, stats);
  return {std::move(t), std::move(a)};
}

inline PairedSample make_sample(std::string id, const ImageTensor& underwater, const ImageTensor& reference,
                                std::size_t resolution = kTrainingResolution, ClampStats* stats = nullptr) {
  require_same_shape(underwater, reference, "make_sample");
  auto x1 = resize_to_training(underwater, resolution);
  auto y1 = resize_to_training(reference, resolution);
  auto targets = precompute_targets(x1, y1, stats);
  return {std::move(id), std::move(x1), std::move(y1), std::move(targets.t), std::move(targets.a)};
}

struct FlipDecision {
  bool vertical = false;
  bool horizontal = false;
};

inline FlipDecision draw_flips(Rng& rng) {
  FlipDecision d;
  d.vertical = rng.uniform() < kVerticalFlipProbability;
  d.horizontal = rng.uniform() < kHorizontalFlipProbability;
  return d;
}

/// Applies the same flips to every tensor of the sample.
inline PairedSample augment_flips(const PairedSample& s, FlipDecision d) {
  auto apply = [&](const Planar& p) {
    Planar out = d.vertical ? flip_vertical(p) : p;
    return d.horizontal ? flip_horizontal(out) : out;
  };
  return {s.sample_id, apply(s.x1), apply(s.y1), TransmissionMap{apply(s.t.data)},
          VeilingLightField{apply(s.a.data), s.a.constant}};
}

/// Draws two uniforms from `rng` (vertical, then horizontal) and applies them.
inline PairedSample augment_flips(const PairedSample& s, Rng& rng) { return augment_flips(s, draw_flips(rng)); }

/// Loads samples by id; implemented by the in-memory store and the on-disk cache.
class SampleProvider {
 public:
  virtual ~SampleProvider() = default;
  virtual PairedSample load(const std::string& sample_id) const = 0;
};

class InMemorySamples final : public SampleProvider {
 public:
  InMemorySamples() = default;
  explicit InMemorySamples(std::vector<PairedSample> samples) {
    for (auto& s : samples) add(std::move(s));
  }
  void add(PairedSample s) {
    auto id = s.sample_id;
    if (!samples_.emplace(std::move(id), std::move(s)).second) throw InvalidInput("duplicate sample id");
  }
  PairedSample load(const std::string& sample_id) const override {
    auto it = samples_.find(sample_id);
    if (it == samples_.end()) throw InvalidInput("unknown sample id: " + sample_id);
    return it->second;
  }
  std::vector<std::string> ids() const {
    std::vector<std::string> out;
    for (const auto& [id, s] : samples_) out.push_back(id);
    return out;
  }
  std::size_t size() const noexcept { return samples_.size(); }

 private:
  std::map<std::string, PairedSample> samples_;
};

// ---------------------------------------------------------------------------
// Splitting and batching

struct SplitManifest {
  std::vector<std::string> train_ids;
  std::vector<std::string> test_ids;
  std::uint64_t seed = 0;
  std::string created_at;
};

/// Shuffles ids with `seed` and keeps round(0.8·N) for training.
inline SplitManifest make_split(std::vector<std::string> ids, std::uint64_t seed, std::string created_at = {}) {
  if (ids.size() < 2) throw InvalidInput("make_split: need at least 2 samples");
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) throw InvalidInput("make_split: duplicate sample id");
  Rng rng(derive_seed({seed, 0x5917}));
  rng.shuffle(ids);
  const auto n_train = static_cast<std::size_t>(std::llround(kTrainFraction * static_cast<double>(ids.size())));
  SplitManifest m;
  m.train_ids.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_train));
  m.test_ids.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_train), ids.end());
  m.seed = seed;
  m.created_at = std::move(created_at);
  return m;
}

inline SplitManifest make_split(const std::vector<PairedSample>& samples, std::uint64_t seed, std::string created_at = {}) {
  std::vector<std::string> ids;
  ids.reserve(samples.size());
  for (const auto& s : samples) ids.push_back(s.sample_id);
  return make_split(std::move(ids), seed, std::move(created_at));
}

enum class Split { kTrain, kTest };

inline Split parse_split(const std::string& label) {
  if (label == "train") return Split::kTrain;
  if (label == "test") return Split::kTest;
  throw InvalidInput("unknown split label: " + label);
}

using Batch = std::vector<std::string>;

/// Sequential mini-batch stream over one split. The train split is
/// reshuffled every epoch from shuffle_seed + epoch; the final short
/// batch is kept.
class BatchIterator {
 public:
  BatchIterator(const SplitManifest& manifest, Split split, std::size_t batch_size, std::uint64_t shuffle_seed)
      : ids_(split == Split::kTrain ? manifest.train_ids : manifest.test_ids),
        shuffle_(split == Split::kTrain),
        batch_size_(batch_size),
        shuffle_seed_(shuffle_seed) {
    if (batch_size == 0) throw InvalidInput("batch_iterator: batch_size must be >= 1");
    begin_epoch(0);
  }
  BatchIterator(const SplitManifest& manifest, const std::string& split, std::size_t batch_size,
                std::uint64_t shuffle_seed)
      : BatchIterator(manifest, parse_split(split), batch_size, shuffle_seed) {}

  void begin_epoch(std::size_t epoch) {
    order_ = ids_;
    if (shuffle_) {
      Rng rng(shuffle_seed_ + epoch);
      rng.shuffle(order_);
    }
    cursor_ = 0;
    epoch_ = epoch;
  }

  std::optional<Batch> next() {
    if (cursor_ >= order_.size()) return std::nullopt;
    const std::size_t end = std::min(order_.size(), cursor_ + batch_size_);
    Batch b(order_.begin() + static_cast<std::ptrdiff_t>(cursor_), order_.begin() + static_cast<std::ptrdiff_t>(end));
    cursor_ = end;
    return b;
  }

  std::vector<Batch> epoch_batches(std::size_t epoch) {
    begin_epoch(epoch);
    std::vector<Batch> out;
    while (auto b = next()) out.push_back(std::move(*b));
    return out;
  }

  std::size_t epoch() const noexcept { return epoch_; }
  std::size_t size() const noexcept { return ids_.size(); }
  std::size_t batches_per_epoch() const noexcept { return (ids_.size() + batch_size_ - 1) / batch_size_; }

 private:
  std::vector<std::string> ids_;
  std::vector<std::string> order_;
  bool shuffle_;
  std::size_t batch_size_;
  std::uint64_t shuffle_seed_;
  std::size_t cursor_ = 0;
  std::size_t epoch_ = 0;
};

}  // namespace dgd
