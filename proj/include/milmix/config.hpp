#ifndef MILMIX_CONFIG_HPP
#define MILMIX_CONFIG_HPP

#include <cstdint>
#include <map>
#include <string>

#include "milmix/augment.hpp"
#include "milmix/models.hpp"

namespace milmix {

/// Full experiment protocol. Serializes to a plain key=value text file;
/// dotted keys address subsections (augment.mode, augment.beta).
struct ExperimentConfig {
  std::string dataset;              // path to a bag dataset directory
  ModelKind model = ModelKind::kAbmil;
  AugmentConfig augment;
  std::size_t epochs = 200;
  double lr = 2e-4;
  std::size_t repeats = 32;
  double train_fraction = 0.8;
  std::uint64_t base_seed = 1;
  std::size_t bags_per_class = 0;   // 0 = use every bag
  std::size_t patches_per_bag = 0;  // 0 = use every patch
  std::string output;               // results path; empty = stdout
};

/// Throws ValidationError when an invariant fails (epochs >= 1,
/// 0 < train_fraction < 1, repeats >= 1, beta in [0,1]).
void validate_config(const ExperimentConfig& cfg);

/// Shortest decimal string that parses back to exactly v. Shared by the
/// config echo and the results CSV so outputs stay byte-stable.
std::string compact_double(double v);

/// Key=value lines in a fixed order, suitable for parse_config round-trips
/// and for echoing into result headers.
std::string config_text(const ExperimentConfig& cfg);

/// Applies one key=value assignment on top of cfg. Unknown key or
/// unparsable value throws ValidationError.
void apply_config_entry(ExperimentConfig& cfg, const std::string& key,
                        const std::string& value);

/// Parses config text: one key=value per line, '#' starts a comment,
/// blank lines ignored, later keys override earlier ones.
ExperimentConfig parse_config(const std::string& text);

ExperimentConfig load_config(const std::string& path);

}  // namespace milmix

#endif  // MILMIX_CONFIG_HPP
