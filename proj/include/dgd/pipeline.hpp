// SPDX-License-Identifier: Apache-2.0
//
// End-to-end preparation: scan → quadrisect → resize → precompute targets →
// split, with every sample cached on disk under a content-hash key.
#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dgd/binary_archive.hpp"
#include "dgd/dataset.hpp"
#include "dgd/io/image_io.hpp"

namespace dgd {

inline constexpr const char* kSampleTag = "dgd-sample-v1";
inline constexpr const char* kPipelineVersion = "dgd-pipeline-v1";

namespace detail {

inline ArchiveTensor planar_to_archive(const Planar& p) {
  return {{p.height(), p.width(), p.channels()}, std::vector<float>(p.data().begin(), p.data().end())};
}

inline Planar planar_from_archive(const ArchiveTensor& t) {
  if (t.shape.size() != 3) throw ArchiveError("sample tensor must be H×W×C");
  Planar p(t.shape[0], t.shape[1], t.shape[2]);
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = static_cast<double>(t.values[i]);
  return p;
}

}  // namespace detail

/// File name for a sample id ("cat/stem/q0" → "cat__stem__q0.smp").
inline std::string sample_filename(const std::string& id) {
  std::string out;
  for (char ch : id) {
    if (ch == '/') out += "__";
    else out += ch;
  }
  return out + ".smp";
}

inline void write_sample(const std::filesystem::path& path, const PairedSample& s) {
  Archive ar;
  ar.format_tag = kSampleTag;
  ar.meta["sample_id"] = s.sample_id;
  ar.meta["veiling_constant"] = s.a.constant;
  ar.tensors["x1"] = detail::planar_to_archive(s.x1);
  ar.tensors["y1"] = detail::planar_to_archive(s.y1);
  ar.tensors["t"] = detail::planar_to_archive(s.t.data);
  ar.tensors["a"] = detail::planar_to_archive(s.a.data);
  write_archive(path, ar);
}

/// Values come back at float32 precision.
inline PairedSample read_sample(const std::filesystem::path& path) {
  const Archive ar = read_archive(path, kSampleTag);
  PairedSample s;
  s.sample_id = ar.meta.at("sample_id").get<std::string>();
  s.x1 = detail::planar_from_archive(ar.tensors.at("x1"));
  s.y1 = detail::planar_from_archive(ar.tensors.at("y1"));
  s.t = TransmissionMap{detail::planar_from_archive(ar.tensors.at("t"))};
  s.a = VeilingLightField{detail::planar_from_archive(ar.tensors.at("a")), ar.meta.at("veiling_constant").get<bool>()};
  return s;
}

inline nlohmann::ordered_json to_json(const SplitManifest& m) {
  return {{"train_ids", m.train_ids}, {"test_ids", m.test_ids}, {"seed", m.seed}, {"created_at", m.created_at}};
}

inline SplitManifest manifest_from_json(const nlohmann::ordered_json& j) {
  SplitManifest m;
  m.train_ids = j.at("train_ids").get<std::vector<std::string>>();
  m.test_ids = j.at("test_ids").get<std::vector<std::string>>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.created_at = j.at("created_at").get<std::string>();
  return m;
}

inline void write_json_file(const std::filesystem::path& path, const nlohmann::ordered_json& j) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << j.dump(2) << '\n';
}

inline nlohmann::ordered_json read_json_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path.string());
  return nlohmann::ordered_json::parse(is);
}

struct PrepareOptions {
  std::uint64_t seed = 0;
  std::size_t resolution = kTrainingResolution;
  bool quadrisect = true;
  std::string created_at;  // stamped into the manifest
};

struct PrepareReport {
  std::filesystem::path cache_path;  // <cache_dir>/<key>
  std::string cache_key;
  bool cache_hit = false;
  std::size_t source_pairs = 0;
  std::size_t sample_count = 0;
  std::vector<std::string> skipped;
  ClampStats transmission_clamp;
  std::optional<SplitManifest> manifest;  // absent when fewer than 2 samples

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["cache_key"] = cache_key;
    j["source_pairs"] = source_pairs;
    j["samples"] = sample_count;
    j["train"] = manifest ? manifest->train_ids.size() : 0;
    j["test"] = manifest ? manifest->test_ids.size() : 0;
    j["skipped"] = skipped;
    j["transmission_clamped"] = transmission_clamp.clamped;
    j["transmission_total"] = transmission_clamp.total;
    j["transmission_clamp_fraction"] = transmission_clamp.fraction();
    return j;
  }
};

/// Cache key over the pipeline version, options (except created_at) and the
/// bytes of every source file.
inline std::string cache_key(const ScanResult& scan, const PrepareOptions& opt) {
  Fnv1a h;
  h.update(kPipelineVersion);
  h.update(std::to_string(opt.seed));
  h.update(std::to_string(opt.resolution));
  h.update(opt.quadrisect ? "quad" : "whole");
  for (const auto& p : scan.pairs) {
    h.update(p.id());
    h.update_file(p.underwater_path);
    h.update_file(p.groundtruth_path);
  }
  return h.hex();
}

inline std::vector<std::string> sample_ids_for(const RawPair& p, bool quadrisect) {
  if (!quadrisect) return {p.id()};
  std::vector<std::string> ids;
  for (int q = 0; q < 4; ++q) ids.push_back(p.id() + "/q" + std::to_string(q));
  return ids;
}

inline PrepareReport prepare_dataset(const std::filesystem::path& root, const std::filesystem::path& cache_dir,
                                     const PrepareOptions& opt = {}) {
  namespace fs = std::filesystem;
  if (opt.resolution < 2) throw InvalidInput("prepare_dataset: resolution must be >= 2");
  const ScanResult scan = scan_dataset(root);
  PrepareReport rep;
  rep.cache_key = cache_key(scan, opt);
  rep.cache_path = cache_dir / rep.cache_key;
  rep.source_pairs = scan.pairs.size();

  const auto report_path = rep.cache_path / "prepare_report.json";
  const auto manifest_path = rep.cache_path / "manifest.json";
  if (fs::exists(report_path)) {
    const auto j = read_json_file(report_path);
    rep.cache_hit = true;
    rep.sample_count = j.at("samples").get<std::size_t>();
    rep.skipped = j.at("skipped").get<std::vector<std::string>>();
    rep.transmission_clamp.clamped = j.at("transmission_clamped").get<std::size_t>();
    rep.transmission_clamp.total = j.at("transmission_total").get<std::size_t>();
    if (fs::exists(manifest_path)) rep.manifest = manifest_from_json(read_json_file(manifest_path));
    return rep;
  }

  fs::create_directories(rep.cache_path / "samples");
  rep.skipped = scan.skipped;
  std::vector<std::string> ids;
  for (const auto& pair : scan.pairs) {
    const ImageTensor under = io::read_image(pair.underwater_path);
    const ImageTensor ref = io::read_image(pair.groundtruth_path);
    if (!under.same_shape(ref)) {
      rep.skipped.push_back("dimension mismatch for " + pair.id());
      continue;
    }
    std::vector<ImageTensor> parts_u, parts_r;
    if (opt.quadrisect) {
      auto qu = quadrisect(under);
      auto qr = quadrisect(ref);
      parts_u.assign(qu.begin(), qu.end());
      parts_r.assign(qr.begin(), qr.end());
    } else {
      parts_u.push_back(under);
      parts_r.push_back(ref);
    }
    const auto part_ids = sample_ids_for(pair, opt.quadrisect);
    for (std::size_t q = 0; q < parts_u.size(); ++q) {
      const auto sample = make_sample(part_ids[q], parts_u[q], parts_r[q], opt.resolution, &rep.transmission_clamp);
      write_sample(rep.cache_path / "samples" / sample_filename(sample.sample_id), sample);
      ids.push_back(sample.sample_id);
    }
  }
  std::sort(rep.skipped.begin(), rep.skipped.end());
  rep.sample_count = ids.size();
  if (ids.size() >= 2) {
    rep.manifest = make_split(ids, opt.seed, opt.created_at);
    write_json_file(manifest_path, to_json(*rep.manifest));
  }
  write_json_file(report_path, rep.to_json());
  return rep;
}

/// Loads samples from a prepared cache directory.
class CachedSamples final : public SampleProvider {
 public:
  explicit CachedSamples(std::filesystem::path cache_path) : dir_(std::move(cache_path)) {
    if (!std::filesystem::is_directory(dir_ / "samples")) throw InvalidInput("no prepared sample cache at " + dir_.string());
  }
  PairedSample load(const std::string& id) const override {
    return read_sample(dir_ / "samples" / sample_filename(id));
  }
  SplitManifest manifest() const { return manifest_from_json(read_json_file(dir_ / "manifest.json")); }

 private:
  std::filesystem::path dir_;
};

}  // namespace dgd
