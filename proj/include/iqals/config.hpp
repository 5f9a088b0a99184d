#ifndef IQALS_CONFIG_HPP
#define IQALS_CONFIG_HPP

// Run configuration: defaults, an optional "key = value" file, then
// command-line overrides (flags > file > defaults).

#include <array>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "iqals/digest.hpp"
#include "iqals/error.hpp"
#include "iqals/nn/labels.hpp"
#include "iqals/nn/network.hpp"
#include "iqals/nn/sgd.hpp"
#include "iqals/trainer.hpp"

namespace iqals {

inline constexpr const char* kVersion = "iqals 1.0.0";
inline constexpr const char* kDataEnvVar = "IQALS_DATA";

struct RunConfig {
  std::string data_dir;
  std::string out_dir = "iqals-out";
  std::vector<int> strategies = {1};
  std::uint64_t seed = 0;
  std::uint64_t test_seed = kTestSetSeed;
  std::string preset = "full";  // full | desk
  nn::TrainingConfig training;
  std::array<double, 4> mixture_ratios = {0.60, 0.15, 0.15, 0.10};
  int checkpoint_every = 50;
  std::size_t probe_count = 100;
  std::size_t train_limit = 0;  // 0 = whole set
  std::size_t test_limit = 0;
  std::vector<std::string> formats = {"csv", "markdown"};
  unsigned workers = 0;

  // Keys that may appear in a config file or as overrides.
  static const std::set<std::string>& keys() {
    static const std::set<std::string> k = {
        "data_dir",      "out_dir",      "strategies",   "seed",        "test_seed",
        "preset",        "batch_size",   "epochs",       "learning_rate", "decay_factor",
        "decay_every",   "weight_decay", "momentum",     "loss",        "mixture_ratios",
        "checkpoint_every", "probe_count", "train_limit", "test_limit", "formats",
        "workers"};
    return k;
  }

  void set(const std::string& key, const std::string& value);

  void validate() const {
    for (int s : strategies) Strategy::from_id(s);
    if (strategies.empty()) throw ConfigError("no strategy selected");
    training.validate();
    MixturePlan plan;
    plan.ratios = mixture_ratios;
    plan.kinds = {DistortionKind::kBlur};
    plan.validate();
    if (checkpoint_every <= 0) throw ConfigError("checkpoint_every must be positive");
    for (const auto& f : formats)
      if (f != "csv" && f != "markdown") throw ConfigError("unknown report format '" + f + "'");
  }

  // Settings that determine a training trajectory (excluding the epoch
  // budget, so a finished run can be extended).
  std::string training_signature(int strategy) const {
    char buf[512];
    std::snprintf(buf, sizeof buf,
                  "strategy=%d seed=%llu batch_size=%d learning_rate=%.17g decay_factor=%.17g "
                  "decay_every=%d weight_decay=%.17g momentum=%.17g loss=%s "
                  "mixture_ratios=%.17g,%.17g,%.17g,%.17g train_limit=%zu",
                  strategy, static_cast<unsigned long long>(seed), training.batch_size,
                  training.initial_learning_rate, training.decay_factor, training.decay_every,
                  training.weight_decay, training.momentum,
                  std::string(nn::to_string(training.loss)).c_str(), mixture_ratios[0],
                  mixture_ratios[1], mixture_ratios[2], mixture_ratios[3], train_limit);
    return buf;
  }

  std::map<std::string, std::string> rendered() const {
    auto join = [](const auto& items) {
      std::ostringstream s;
      for (std::size_t i = 0; i < items.size(); ++i) s << (i ? "," : "") << items[i];
      return s.str();
    };
    auto num = [](double v) {
      char buf[40];
      std::snprintf(buf, sizeof buf, "%.10g", v);
      return std::string(buf);
    };
    return {{"data_dir", data_dir},
            {"out_dir", out_dir},
            {"strategies", join(strategies)},
            {"seed", std::to_string(seed)},
            {"test_seed", std::to_string(test_seed)},
            {"preset", preset},
            {"batch_size", std::to_string(training.batch_size)},
            {"epochs", std::to_string(training.epochs)},
            {"learning_rate", num(training.initial_learning_rate)},
            {"decay_factor", num(training.decay_factor)},
            {"decay_every", std::to_string(training.decay_every)},
            {"weight_decay", num(training.weight_decay)},
            {"momentum", num(training.momentum)},
            {"loss", std::string(nn::to_string(training.loss))},
            {"mixture_ratios", num(mixture_ratios[0]) + "," + num(mixture_ratios[1]) + "," +
                                   num(mixture_ratios[2]) + "," + num(mixture_ratios[3])},
            {"checkpoint_every", std::to_string(checkpoint_every)},
            {"probe_count", std::to_string(probe_count)},
            {"train_limit", std::to_string(train_limit)},
            {"test_limit", std::to_string(test_limit)},
            {"formats", join(formats)},
            {"workers", std::to_string(workers)}};
  }

  // Everything except paths, as one line; hashed into report provenance.
  std::string canonical() const {
    std::string out;
    for (const auto& [k, v] : rendered()) {
      if (k == "data_dir" || k == "out_dir" || k == "workers") continue;
      out += k + "=" + v + ";";
    }
    return out;
  }

  std::string hash() const { return hex64(fnv1a64(canonical())); }
};

namespace detail {

inline std::string trim_copy(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  const auto e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  std::istringstream in(value);
  T v{};
  in >> v;
  if (!in || !(in >> std::ws).eof()) {
    throw ConfigError("invalid value '" + value + "' for " + key);
  }
  return v;
}

inline std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::istringstream in(value);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim_copy(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace detail

inline void RunConfig::set(const std::string& key, const std::string& value) {
  using detail::parse_number;
  static const std::set<std::string> kRejected = {"contrast", "brightness", "saturation", "hue",
                                                  "flip", "crop", "augment", "augmentation"};
  if (kRejected.count(key) || key.starts_with("augment")) {
    throw ConfigError("'" + key +
                      "': extra data augmentation is not permitted; only the distortion "
                      "mixtures are applied");
  }
  if (!keys().count(key)) throw ConfigError("unknown configuration key '" + key + "'");

  if (key == "data_dir") {
    data_dir = value;
  } else if (key == "out_dir") {
    out_dir = value;
  } else if (key == "strategies") {
    strategies.clear();
    for (const auto& s : detail::split_list(value)) strategies.push_back(parse_number<int>(key, s));
  } else if (key == "seed") {
    seed = parse_number<std::uint64_t>(key, value);
  } else if (key == "test_seed") {
    test_seed = parse_number<std::uint64_t>(key, value);
  } else if (key == "preset") {
    if (value == "full") {
      training.epochs = 2000;
      training.decay_every = 350;
    } else if (value == "desk") {
      const auto d = nn::TrainingConfig::desk_scale();
      training.epochs = d.epochs;
      training.decay_every = d.decay_every;
    } else {
      throw ConfigError("unknown preset '" + value + "' (full|desk)");
    }
    preset = value;
  } else if (key == "batch_size") {
    training.batch_size = parse_number<int>(key, value);
  } else if (key == "epochs") {
    training.epochs = parse_number<int>(key, value);
  } else if (key == "learning_rate") {
    training.initial_learning_rate = parse_number<double>(key, value);
  } else if (key == "decay_factor") {
    training.decay_factor = parse_number<double>(key, value);
  } else if (key == "decay_every") {
    training.decay_every = parse_number<int>(key, value);
  } else if (key == "weight_decay") {
    training.weight_decay = parse_number<double>(key, value);
  } else if (key == "momentum") {
    training.momentum = parse_number<double>(key, value);
  } else if (key == "loss") {
    training.loss = nn::parse_loss_kind(value);
  } else if (key == "mixture_ratios") {
    const auto parts = detail::split_list(value);
    if (parts.size() != 4) throw ConfigError("mixture_ratios needs four comma-separated values");
    for (std::size_t i = 0; i < 4; ++i) mixture_ratios[i] = parse_number<double>(key, parts[i]);
  } else if (key == "checkpoint_every") {
    checkpoint_every = parse_number<int>(key, value);
  } else if (key == "probe_count") {
    probe_count = parse_number<std::size_t>(key, value);
  } else if (key == "train_limit") {
    train_limit = parse_number<std::size_t>(key, value);
  } else if (key == "test_limit") {
    test_limit = parse_number<std::size_t>(key, value);
  } else if (key == "formats") {
    formats = detail::split_list(value);
  } else if (key == "workers") {
    workers = parse_number<unsigned>(key, value);
  }
}

// Parses "key = value" lines; '#' starts a comment.
inline std::vector<std::pair<std::string, std::string>> read_config_file(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::vector<std::pair<std::string, std::string>> entries;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim_copy(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected key = value");
    }
    entries.emplace_back(detail::trim_copy(line.substr(0, eq)),
                         detail::trim_copy(line.substr(eq + 1)));
  }
  return entries;
}

// Applies the file and then the overrides. "preset" is applied first within
// each layer so explicit epoch settings win over it.
inline RunConfig resolve_config(const std::filesystem::path& file,
                                const std::vector<std::pair<std::string, std::string>>& overrides) {
  RunConfig cfg;
  auto apply_layer = [&](const std::vector<std::pair<std::string, std::string>>& layer) {
    for (const auto& [k, v] : layer)
      if (k == "preset") cfg.set(k, v);
    for (const auto& [k, v] : layer)
      if (k != "preset") cfg.set(k, v);
  };
  if (!file.empty()) apply_layer(read_config_file(file));
  apply_layer(overrides);
  cfg.validate();
  return cfg;
}

}  // namespace iqals

#endif  // IQALS_CONFIG_HPP
