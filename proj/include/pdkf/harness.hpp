#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pdkf/analysis.hpp"
#include "pdkf/config.hpp"
#include "pdkf/filters.hpp"
#include "pdkf/network.hpp"
#include "pdkf/random.hpp"

namespace pdkf {

struct SensorAssignment {
  std::vector<SensorModel> sensors;
  std::vector<int> types;  // observation pattern per node (paper_sensor type)
  std::vector<double> noise_variances;
};

/// Random observation patterns such that every neighborhood holds both
/// patterns, with R_k = s_k I and s_k ~ U[noise_min, noise_max). Throws
/// ConfigError when no valid assignment is found within max_attempts.
SensorAssignment assign_sensors(const Topology& topology, double noise_min, double noise_max, Rng& rng,
                                int max_attempts = 100000);

/// Network, weights and sensors derived from a configuration and its seed.
struct ExperimentSetup {
  Topology topology;
  CombinationWeights weights;
  SensorAssignment sensors;
};

ExperimentSetup build_setup(const ExperimentConfig& config);

/// One curve of the report.
struct Variant {
  std::string scheme;  // "sequential", "stochastic" or "dkf"
  int L = 0;
  FilterMode mode = FilterMode::kPartialDiffusion;
  std::optional<Scheme> selection;
};

std::vector<Variant> experiment_variants(const ExperimentConfig& config);

/// Selection schedule for a variant; the seed only matters for the
/// stochastic scheme.
SelectionSchedule make_schedule(const ExperimentConfig& config, const Variant& variant, std::uint64_t seed);

struct TheoryEntry {
  std::string status;  // "ok", or a reason the closed form does not apply
  std::optional<MsdTheory> theory;
  double rho_F = 0.0;
  double rho_loop = 0.0;  // NaN when not computed
};

/// Closed-form steady-state MSD for every variant, in experiment_variants
/// order. Never throws for inapplicable configurations; the status says why.
std::vector<TheoryEntry> evaluate_theory(const ExperimentConfig& config, const ExperimentSetup& setup);

struct VariantResult {
  Variant variant;
  std::vector<double> network_msd;            // per iteration, linear scale
  std::vector<std::vector<double>> node_msd;  // [k][i], linear scale
  Eigen::VectorXd steady_node_msd;            // mean of the last W iterations
  double steady_network_msd = 0.0;
  std::vector<double> run_steady_msd;  // per run, steady network MSD
  double ci_halfwidth = 0.0;           // 95% half-width of steady_network_msd
  std::vector<Eigen::VectorXd> final_mean_error;  // per node, ensemble mean at the last iteration
  long scalars_per_iteration = 0;
  TheoryEntry theory;
};

struct MsdReport {
  ExperimentConfig config;
  ExperimentSetup setup;
  std::vector<VariantResult> variants;
  double elapsed_seconds = 0.0;
};

/// Monte-Carlo ensemble over config.runs independent trajectories. Every
/// variant consumes the same trajectory within a run. Aggregation is in
/// fixed run-chunk order, so results do not depend on the thread count.
MsdReport run_experiment(const ExperimentConfig& config);

/// 10 log10(msd).
double to_db(double msd);

/// Writes curves.csv, steady.csv and meta.json into `directory` (created if
/// missing). Throws IoError naming the path on failure.
void emit_report(const MsdReport& report, const std::string& directory);

/// Shortest round-trippable decimal form (17 significant digits).
std::string format_double(double v);

}  // namespace pdkf
