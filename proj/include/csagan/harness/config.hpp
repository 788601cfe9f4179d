#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "csagan/model/discriminator.hpp"
#include "csagan/model/generator.hpp"
#include "csagan/train/losses.hpp"
#include "csagan/train/trainer.hpp"

namespace csagan {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DataConfig {
  std::string source = "toy";  // toy | pairs
  std::string pairs;           // preprocessed directory (source = pairs)
  double tau = 0.3;
  int lmin = 10;
  double split = 0.8;
  int toy_count = 256;
  double toy_tau_min = 0.3;
  double toy_tau_max = 0.3;

  bool operator==(const DataConfig&) const = default;
};

struct RunConfig {
  uint64_t seed = 0;
  int image_side = 64;
  int batch_size = 8;
  GeneratorConfig generator;
  DiscriminatorConfig discriminator;  // image_side is taken from the run
  std::array<StagePlan, 3> stages = {StagePlan::desk_default(1), StagePlan::desk_default(2),
                                     StagePlan::desk_default(3)};
  LossWeights loss;
  DataConfig data;

  // Copies image_side into both networks.
  GeneratorConfig generator_config() const;
  DiscriminatorConfig discriminator_config() const;
  // Throws ConfigError naming the offending key.
  void validate() const;

  bool operator==(const RunConfig&) const = default;
};

// Flat "section.key = value" lines; '#' starts a comment line.
std::string serialize_config(const RunConfig& config);
// Unset keys keep their defaults. Unknown keys, malformed lines and
// unparsable values throw ConfigError naming the key.
RunConfig parse_config(const std::string& text, RunConfig base = {});
RunConfig load_config(const std::filesystem::path& path, RunConfig base = {});

// Applies one "key=value" override.
void set_config_value(RunConfig& config, const std::string& key, const std::string& value);
std::vector<std::string> config_keys();

}  // namespace csagan
