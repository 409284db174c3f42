// SPDX-License-Identifier: Apache-2.0
//
// Tagged container used by the sample cache and checkpoints:
//
//   bytes 0..N   format tag followed by '\n'
//   u64 LE       length of the JSON header
//   header       UTF-8 JSON; "tensors" maps name -> {shape, offset, count}
//   payload      little-endian float32 values, concatenated
#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dgd/error.hpp"

namespace dgd {

class ArchiveError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ArchiveTensor {
  std::vector<std::size_t> shape;
  std::vector<float> values;
};

struct Archive {
  std::string format_tag;
  nlohmann::ordered_json meta = nlohmann::ordered_json::object();
  std::map<std::string, ArchiveTensor> tensors;  // written in key order
};

namespace detail {

static_assert(std::endian::native == std::endian::little, "archive I/O assumes a little-endian host");

inline void put_u64(std::ostream& os, std::uint64_t v) {
  char buf[8];
  std::memcpy(buf, &v, 8);
  os.write(buf, 8);
}

inline std::uint64_t get_u64(std::istream& is) {
  char buf[8];
  if (!is.read(buf, 8)) throw ArchiveError("archive truncated");
  std::uint64_t v;
  std::memcpy(&v, buf, 8);
  return v;
}

}  // namespace detail

inline void write_archive(const std::filesystem::path& path, const Archive& ar) {
  nlohmann::ordered_json header;
  header["meta"] = ar.meta;
  nlohmann::ordered_json index = nlohmann::ordered_json::object();
  std::uint64_t offset = 0;
  for (const auto& [name, t] : ar.tensors) {
    std::size_t count = 1;
    for (auto d : t.shape) count *= d;
    if (count != t.values.size()) throw ArchiveError("tensor '" + name + "' shape does not match value count");
    index[name] = {{"shape", t.shape}, {"offset", offset}, {"count", count}};
    offset += count;
  }
  header["tensors"] = std::move(index);
  const std::string text = header.dump();

  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw ArchiveError("cannot write " + tmp);
    os << ar.format_tag << '\n';
    detail::put_u64(os, text.size());
    os.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& [name, t] : ar.tensors)
      os.write(reinterpret_cast<const char*>(t.values.data()), static_cast<std::streamsize>(t.values.size() * sizeof(float)));
    if (!os) throw ArchiveError("write failed: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

/// Reads an archive, rejecting a mismatched format tag.
inline Archive read_archive(const std::filesystem::path& path, const std::string& expected_tag) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ArchiveError("cannot open " + path.string());
  Archive ar;
  std::getline(is, ar.format_tag);
  if (ar.format_tag != expected_tag)
    throw InvalidInput("format mismatch in " + path.string() + ": expected '" + expected_tag + "', found '" +
                       ar.format_tag.substr(0, 32) + "'");
  const auto len = detail::get_u64(is);
  if (len > (1ull << 30)) throw ArchiveError("implausible header length in " + path.string());
  std::string text(len, '\0');
  if (!is.read(text.data(), static_cast<std::streamsize>(len))) throw ArchiveError("archive truncated");
  const auto header = nlohmann::ordered_json::parse(text);
  ar.meta = header.at("meta");
  const auto payload_start = is.tellg();
  for (const auto& [name, entry] : header.at("tensors").items()) {
    ArchiveTensor t;
    t.shape = entry.at("shape").get<std::vector<std::size_t>>();
    const auto offset = entry.at("offset").get<std::uint64_t>();
    const auto count = entry.at("count").get<std::uint64_t>();
    t.values.resize(count);
    is.seekg(payload_start + static_cast<std::streamoff>(offset * sizeof(float)));
    if (!is.read(reinterpret_cast<char*>(t.values.data()), static_cast<std::streamsize>(count * sizeof(float))))
      throw ArchiveError("archive payload truncated: " + name);
    ar.tensors.emplace(name, std::move(t));
  }
  return ar;
}

/// 64-bit FNV-1a, used for cache keys.
class Fnv1a {
 public:
  void update(std::span<const std::byte> bytes) noexcept {
    for (auto b : bytes) {
      hash_ ^= static_cast<std::uint64_t>(b);
      hash_ *= 0x100000001B3ull;
    }
  }
  void update(const std::string& s) noexcept {
    update(std::as_bytes(std::span(s.data(), s.size())));
    const char sep = '\0';
    update(std::as_bytes(std::span(&sep, 1)));
  }
  void update_file(const std::filesystem::path& p) {
    std::ifstream is(p, std::ios::binary);
    if (!is) throw ArchiveError("cannot hash " + p.string());
    std::vector<char> buf(1 << 16);
    while (is.read(buf.data(), static_cast<std::streamsize>(buf.size())) || is.gcount() > 0)
      update(std::as_bytes(std::span(buf.data(), static_cast<std::size_t>(is.gcount()))));
  }
  std::uint64_t digest() const noexcept { return hash_; }
  std::string hex() const {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash_));
    return buf;
  }

 private:
  std::uint64_t hash_ = 0xCBF29CE484222325ull;
};

}  // namespace dgd
