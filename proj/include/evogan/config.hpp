#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "evogan/ga_engine.hpp"
#include "evogan/networks.hpp"
#include "evogan/nn/adam.hpp"

namespace evogan {

enum class Variant { baseline_infogan, infogan_ga_woc, infogan_ga_wc };

std::string to_string(Variant v);
/// Throws ConfigError for anything but the three variant names.
Variant parse_variant(const std::string &name);

class ConfigError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Complete description of one experiment.
struct TrainingConfig {
  Variant variant = Variant::infogan_ga_wc;
  int epochs = 3000;
  int batch_size = 64;
  std::uint64_t seed = 0;
  std::string dataset;
  int checkpoint_interval = 100;
  int fid_interval = 1;
  int fid_samples = 1024;
  std::string embedder = "toy_conv";
  std::uint64_t eval_seed = 1234;
  double lambda_categorical = 1.0;
  double lambda_continuous = 0.1;
  int convergence_window = 50;
  double convergence_tolerance = 0.05;

  nn::AdamSettings g_optimizer{};
  nn::AdamSettings d_optimizer{};
  GAConfig ga{};
  NetworkSpec network{};

  [[nodiscard]] bool uses_ga() const { return variant != Variant::baseline_infogan; }
  /// GA settings with crossover_enabled derived from the variant.
  [[nodiscard]] GAConfig ga_config() const;

  void validate() const;
};

/// Every settable key, in the dotted form accepted by --set (section.key).
std::vector<std::string> config_keys();

/// Applies one "key=value" assignment.
void apply_override(TrainingConfig &config, const std::string &assignment);
void set_config_value(TrainingConfig &config, const std::string &key, const std::string &value);
std::string get_config_value(const TrainingConfig &config, const std::string &key);

/// Parses INI-style text: top-level keys plus [optimizer], [ga], [latent]
/// and [network] sections.
TrainingConfig parse_config(const std::string &text);
TrainingConfig load_config(const std::filesystem::path &path, const std::vector<std::string> &overrides = {});

/// Full resolved configuration in the same INI format; parse_config of the
/// result reproduces the config exactly.
std::string to_ini(const TrainingConfig &config);

} // namespace evogan
