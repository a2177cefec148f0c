#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "gabornet/network.hpp"
#include "gabornet/optim.hpp"

namespace gabornet {

/// Bad config file or value. key() names the offending key when there is one.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& message)
      : std::runtime_error(key.empty() ? message : "config key '" + key + "': " + message),
        key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

inline constexpr int kConfigVersion = 1;

/// One experiment. The on-disk form is a flat `key = value` text file; see
/// parse_config() for the key list.
struct ExperimentConfig {
  int config_version = kConfigVersion;
  std::uint64_t seed = 0;
  int epochs = 100;
  int batch_size = 64;

  std::string optimizer = "adam";  // adam | sgd
  AdamHyper adam;                  // adam.lr doubles as the sgd learning rate
  std::vector<std::pair<int, double>> lr_decay;

  std::filesystem::path train_dir;
  std::filesystem::path val_dir;  // empty: split train_dir by val_fraction
  double val_fraction = 0.3;
  int image_size = 32;
  int channels = 1;
  bool normalize = true;

  double flip_prob = 0.0;
  int crop_padding = 0;

  std::string layers;  // empty: default GCNN architecture
  std::filesystem::path output_dir = "runs";
  double threshold = 0.9;
  bool record_wall_time = true;
};

/// Parses the text form. Unknown keys, malformed values and a missing or
/// unsupported config_version raise ConfigError.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Every key with its resolved value, in parse_config() syntax.
std::string format_config(const ExperimentConfig& config);

/// Network spec for this config and dataset geometry.
NetworkSpec network_spec(const ExperimentConfig& config, int classes);

}  // namespace gabornet
