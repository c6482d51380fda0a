#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "pdkf/selection.hpp"
#include "pdkf/statespace.hpp"

namespace pdkf {

/// Environment variable that, when set, replaces the configured master seed.
inline constexpr const char* kSeedEnvVar = "PDKF_SEED";

/// Experiment description. Loaded from a flat `key = value` file; lists are
/// whitespace or comma separated, groups within a list are separated by
/// `|`, matrices are row-major. See README for the key reference.
struct ExperimentConfig {
  std::string preset = "paper-sec4";
  StateSpaceModel model = paper_model();
  double f_scale = 1.0;
  std::optional<Eigen::VectorXd> initial_state;

  int nodes = 10;
  double avg_degree = 2.0;
  bool require_connected = true;
  std::optional<std::vector<std::pair<int, int>>> edges;

  std::string sensor_rule = "paper-sec4";  // or "explicit"
  double noise_min = 0.0;
  double noise_max = 0.5;
  std::vector<SensorModel> explicit_sensors;

  std::vector<Scheme> schemes{Scheme::kSequential, Scheme::kStochastic};
  std::vector<int> L_values{0, 1, 2, 4};
  bool shared_masks = true;
  std::optional<std::vector<std::vector<int>>> partition;
  bool dkf_baseline = false;

  int runs = 200;
  long horizon = 5000;
  long window = 1000;
  int threads = 0;  // 0 = hardware concurrency
  std::uint64_t seed = 1;

  double riccati_tol = 1e-10;
  int riccati_max_iter = 20000;

  /// Raw key/value pairs as read, for echoing into reports.
  std::map<std::string, std::string> raw;

  /// Model with f_scale applied.
  StateSpaceModel effective_model() const;

  /// Throws ConfigError on any inconsistency.
  void validate() const;
};

/// Parses configuration text. Unknown keys are rejected. The seed
/// environment override is not applied here.
ExperimentConfig parse_config(std::string_view text);

/// Reads and parses a file, applies the PDKF_SEED override and validates.
ExperimentConfig load_config(const std::string& path);

/// Applies the PDKF_SEED environment override, if set.
void apply_seed_override(ExperimentConfig& config);

}  // namespace pdkf
