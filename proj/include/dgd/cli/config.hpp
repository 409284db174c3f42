// SPDX-License-Identifier: Apache-2.0
//
// Flat `key = value` run configuration. Later sources override earlier ones:
// built-in defaults, then the file named by DGD_CONFIG, then --config, then
// individual command-line flags.
#pragma once

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "dgd/error.hpp"
#include "dgd/gan_model.hpp"

namespace dgd::cli {

struct RunConfig {
  TrainConfig train;

  // Architecture.
  std::size_t base_width = 64;
  std::size_t depth = 8;
  std::size_t dru_blocks_per_skip = 1;
  std::size_t disc_base_width = 64;
  double dropout_rate = 0.5;

  // Data and artifacts.
  std::string dataset_root;
  std::string cache_dir = "cache";
  std::string prepared_dir;
  std::string output_dir = "runs";
  std::string checkpoint;
  std::size_t resolution = 256;
  bool quadrisect = true;
  std::string created_at;

  bool resume = false;

  ModelConfig model() const {
    auto m = ModelConfig::uniform(base_width, depth, disc_base_width, dru_blocks_per_skip);
    m.g1.dropout_rate = dropout_rate;
    m.g2.dropout_rate = dropout_rate;
    return m;
  }
};

class ConfigError : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(const std::string& v) {
  T out{};
  const auto* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc{} || ptr != end) throw ConfigError("not a valid number: '" + v + "'");
  return out;
}

inline double parse_double(const std::string& v) {
  std::size_t used = 0;
  double out = 0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    throw ConfigError("not a valid number: '" + v + "'");
  }
  if (used != v.size()) throw ConfigError("not a valid number: '" + v + "'");
  return out;
}

inline bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("not a boolean: '" + v + "'");
}

inline std::string fmt_double(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

}  // namespace detail

struct ConfigKey {
  std::string name;
  std::string help;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

inline const std::vector<ConfigKey>& config_keys() {
  using namespace detail;
  auto size_key = [](std::string name, std::string help, std::size_t RunConfig::*f) {
    return ConfigKey{std::move(name), std::move(help),
                     [f](RunConfig& c, const std::string& v) { c.*f = parse_number<std::size_t>(v); },
                     [f](const RunConfig& c) { return std::to_string(c.*f); }};
  };
  auto train_size = [](std::string name, std::string help, std::size_t TrainConfig::*f) {
    return ConfigKey{std::move(name), std::move(help),
                     [f](RunConfig& c, const std::string& v) { c.train.*f = parse_number<std::size_t>(v); },
                     [f](const RunConfig& c) { return std::to_string(c.train.*f); }};
  };
  auto train_double = [](std::string name, std::string help, double TrainConfig::*f) {
    return ConfigKey{std::move(name), std::move(help),
                     [f](RunConfig& c, const std::string& v) { c.train.*f = parse_double(v); },
                     [f](const RunConfig& c) { return fmt_double(c.train.*f); }};
  };
  auto str_key = [](std::string name, std::string help, std::string RunConfig::*f) {
    return ConfigKey{std::move(name), std::move(help), [f](RunConfig& c, const std::string& v) { c.*f = v; },
                     [f](const RunConfig& c) { return c.*f; }};
  };
  auto bool_key = [](std::string name, std::string help, bool RunConfig::*f) {
    return ConfigKey{std::move(name), std::move(help),
                     [f](RunConfig& c, const std::string& v) { c.*f = parse_bool(v); },
                     [f](const RunConfig& c) { return std::string(c.*f ? "true" : "false"); }};
  };

  static const std::vector<ConfigKey> keys = {
      ConfigKey{"seed", "master seed for splits, initialisation, augmentation and dropout",
                [](RunConfig& c, const std::string& v) { c.train.seed = parse_number<std::uint64_t>(v); },
                [](const RunConfig& c) { return std::to_string(c.train.seed); }},
      train_double("lr", "Adam learning rate", &TrainConfig::lr),
      train_double("beta1", "Adam first-moment decay", &TrainConfig::beta1),
      train_double("beta2", "Adam second-moment decay", &TrainConfig::beta2),
      train_size("batch_size", "mini-batch size", &TrainConfig::batch_size),
      train_size("epochs", "training epochs (0 writes the initial checkpoint only)", &TrainConfig::epochs),
      train_double("lambda1", "weight of the G1 L1 loss", &TrainConfig::lambda1),
      train_double("lambda2", "weight of the G2 recomposition loss (0 freezes G2)", &TrainConfig::lambda2),
      train_size("checkpoint_every", "checkpoint interval in epochs", &TrainConfig::checkpoint_every),
      ConfigKey{"detach_g1_in_l2", "stop the recomposition loss gradient at G1's output",
                [](RunConfig& c, const std::string& v) { c.train.detach_g1_in_l2 = parse_bool(v); },
                [](const RunConfig& c) { return std::string(c.train.detach_g1_in_l2 ? "true" : "false"); }},
      size_key("base_width", "generator channel width at the first level", &RunConfig::base_width),
      size_key("depth", "number of U-Net down-sampling levels", &RunConfig::depth),
      size_key("dru_blocks_per_skip", "residual units on every skip connection", &RunConfig::dru_blocks_per_skip),
      size_key("disc_base_width", "discriminator channel width at the first layer", &RunConfig::disc_base_width),
      ConfigKey{"dropout_rate", "decoder dropout probability",
                [](RunConfig& c, const std::string& v) { c.dropout_rate = parse_double(v); },
                [](const RunConfig& c) { return fmt_double(c.dropout_rate); }},
      str_key("dataset_root", "dataset root holding <category>/underwater and <category>/reference",
              &RunConfig::dataset_root),
      str_key("cache_dir", "directory holding prepared sample caches", &RunConfig::cache_dir),
      str_key("prepared_dir", "explicit prepared cache (overrides dataset_root lookup)", &RunConfig::prepared_dir),
      str_key("output_dir", "directory for checkpoints, history and outputs", &RunConfig::output_dir),
      str_key("checkpoint", "checkpoint file used by dewater", &RunConfig::checkpoint),
      size_key("resolution", "side length samples are resized to", &RunConfig::resolution),
      bool_key("quadrisect", "split every source pair into four quadrants", &RunConfig::quadrisect),
      str_key("created_at", "timestamp recorded in the split manifest", &RunConfig::created_at),
      bool_key("resume", "continue training from the latest checkpoint in output_dir", &RunConfig::resume),
  };
  return keys;
}

inline const ConfigKey* find_key(const std::string& name) {
  for (const auto& k : config_keys())
    if (k.name == name) return &k;
  return nullptr;
}

/// Sets one key. Throws ConfigError for unknown keys or malformed values.
inline void set_key(RunConfig& cfg, const std::string& name, const std::string& value) {
  const auto* key = find_key(name);
  if (!key) throw ConfigError("unknown config key '" + name + "'");
  try {
    key->set(cfg, value);
  } catch (const ConfigError& e) {
    throw ConfigError(name + ": " + e.what());
  }
}

/// Applies `key = value` lines. Blank lines and `#` comments are ignored.
inline void apply_config_text(RunConfig& cfg, std::string_view text, const std::string& source) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    const auto raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    std::string line = detail::trim(raw.substr(0, raw.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = source + ":" + std::to_string(line_no);
    if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value'");
    try {
      set_key(cfg, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(where + ": " + e.what());
    }
  }
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

inline void apply_config_file(RunConfig& cfg, const std::filesystem::path& path) {
  apply_config_text(cfg, read_text_file(path), path.string());
}

/// Defaults, then $DGD_CONFIG, then `explicit_path` when non-empty.
inline RunConfig load_run_config(const std::filesystem::path& explicit_path = {}) {
  RunConfig cfg;
  if (const char* env = std::getenv("DGD_CONFIG"); env && *env) apply_config_file(cfg, env);
  if (!explicit_path.empty()) apply_config_file(cfg, explicit_path);
  return cfg;
}

/// One line per key with its default, for --help.
inline std::string describe_keys() {
  const RunConfig defaults;
  std::ostringstream os;
  os << "Config keys (`key = value`, one per line):\n";
  for (const auto& k : config_keys()) {
    std::string def = k.get(defaults);
    if (def.empty()) def = "\"\"";
    os << "  " << k.name << " (default " << def << ")\n      " << k.help << '\n';
  }
  return os.str();
}

}  // namespace dgd::cli
