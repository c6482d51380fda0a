#include "pdkf/harness.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <map>
#include <mutex>
#include <thread>

#include "pdkf/errors.hpp"

namespace pdkf {

SensorAssignment assign_sensors(const Topology& topology, double noise_min, double noise_max, Rng& rng,
                                int max_attempts) {
  if (!(noise_min >= 0.0) || !(noise_max > noise_min))
    throw ConfigError("assign_sensors: noise range must satisfy 0 <= min < max");
  const int n = topology.size();
  SensorAssignment out;
  std::bernoulli_distribution coin(0.5);
  bool found = false;
  for (int attempt = 0; attempt < max_attempts && !found; ++attempt) {
    out.types.assign(n, 0);
    for (int k = 0; k < n; ++k) out.types[k] = coin(rng) ? 1 : 0;
    found = true;
    for (int k = 0; k < n && found; ++k) {
      bool seen[2] = {false, false};
      for (int l : topology.neighborhood(k)) seen[out.types[l]] = true;
      found = seen[0] && seen[1];
    }
  }
  if (!found)
    throw ConfigError("assign_sensors: no assignment gives every neighborhood both observation types after " +
                      std::to_string(max_attempts) + " attempts");
  std::uniform_real_distribution<double> variance(noise_min, noise_max);
  for (int k = 0; k < n; ++k) {
    out.noise_variances.push_back(variance(rng));
    out.sensors.push_back(paper_sensor(out.types[k], out.noise_variances.back()));
  }
  return out;
}

ExperimentSetup build_setup(const ExperimentConfig& config) {
  Topology topology = config.edges
                          ? Topology::from_edges(config.nodes, *config.edges)
                          : generate_topology(config.nodes, config.avg_degree,
                                              derive_seed(config.seed, SeedStream::kTopology),
                                              config.require_connected);
  if (config.edges && config.require_connected && !topology.connected())
    throw ConfigError("network.edges: graph is not connected");
  CombinationWeights weights = uniform_weights(topology);
  SensorAssignment sensors;
  if (config.sensor_rule == "paper-sec4") {
    Rng rng(derive_seed(config.seed, SeedStream::kSensors));
    sensors = assign_sensors(topology, config.noise_min, config.noise_max, rng);
  } else {
    sensors.sensors = config.explicit_sensors;
    sensors.types.assign(config.nodes, -1);
    for (const auto& s : sensors.sensors) sensors.noise_variances.push_back(s.R.trace() / s.R.rows());
  }
  return {std::move(topology), std::move(weights), std::move(sensors)};
}

std::vector<Variant> experiment_variants(const ExperimentConfig& config) {
  std::vector<Variant> out;
  for (Scheme s : config.schemes)
    for (int L : config.L_values) out.push_back({to_string(s), L, FilterMode::kPartialDiffusion, s});
  if (config.dkf_baseline)
    out.push_back({"dkf", static_cast<int>(config.model.dim()), FilterMode::kDiffusion, std::nullopt});
  return out;
}

namespace {

Partition variant_partition(const ExperimentConfig& config, int L) {
  const int m = static_cast<int>(config.model.dim());
  if (config.partition && L > 0) return explicit_partition(m, L, *config.partition);
  return build_partition(m, L);
}

double sample_sd(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace

SelectionSchedule make_schedule(const ExperimentConfig& config, const Variant& variant, std::uint64_t seed) {
  const Scheme scheme = variant.selection.value_or(Scheme::kSequential);
  return SelectionSchedule(scheme, variant_partition(config, variant.L), config.shared_masks, seed);
}

std::vector<TheoryEntry> evaluate_theory(const ExperimentConfig& config, const ExperimentSetup& setup) {
  const StateSpaceModel model = config.effective_model();
  const auto variants = experiment_variants(config);
  const double rho_F = model.spectral_radius();
  const double nan = std::numeric_limits<double>::quiet_NaN();

  std::optional<SteadyState> steady;
  struct Loop {
    Eigen::MatrixXd bfrak;
    double rho = 0.0;
  };
  std::map<int, Loop> loops;  // keyed by L; the mean operator is scheme-independent

  std::vector<TheoryEntry> out;
  for (const auto& v : variants) {
    TheoryEntry entry{"", std::nullopt, rho_F, nan};
    if (v.mode != FilterMode::kPartialDiffusion) {
      entry.status = "not modeled: diffusion baseline";
      out.push_back(std::move(entry));
      continue;
    }
    if (v.selection == Scheme::kStochastic && !config.shared_masks) {
      entry.status = "not modeled: per-node stochastic selection";
      out.push_back(std::move(entry));
      continue;
    }
    if (!steady)
      steady = steady_state(model, setup.sensors.sensors, setup.topology, RiccatiMode::kOwnData,
                            config.riccati_tol, config.riccati_max_iter, false);
    auto it = loops.find(v.L);
    if (it == loops.end()) {
      const auto patterns = build_b_patterns(setup.topology, setup.weights, variant_partition(config, v.L));
      Loop loop;
      loop.bfrak = expected_b_kron(patterns, *v.selection);
      loop.rho = loop_spectral_radius(*steady, loop.bfrak);
      it = loops.emplace(v.L, std::move(loop)).first;
    }
    entry.rho_loop = it->second.rho;
    if (!steady->converged) {
      entry.status = "inapplicable: Riccati iteration did not converge";
    } else if (!(entry.rho_loop < 1.0 - kStabilityMargin)) {
      entry.status = "inapplicable: rho_loop >= 1";
    } else {
      try {
        entry.theory = theoretical_network_msd(*steady, it->second.bfrak, model, setup.sensors.sensors);
        entry.status = "ok";
      } catch (const NumericError& e) {
        entry.status = std::string("inapplicable: ") + e.what();
      }
    }
    out.push_back(std::move(entry));
  }
  return out;
}

namespace {

struct ChunkAccumulator {
  std::vector<std::vector<double>> node_sq;                 // [variant][k * T + i]
  std::vector<std::vector<Eigen::VectorXd>> final_errors;  // [variant][k]
};

}  // namespace

MsdReport run_experiment(const ExperimentConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  config.validate();
  MsdReport report{config, build_setup(config), {}, 0.0};
  const ExperimentSetup& setup = report.setup;
  const StateSpaceModel model = config.effective_model();
  const auto variants = experiment_variants(config);
  const auto theory = evaluate_theory(config, setup);

  const int n = setup.topology.size();
  const Eigen::Index m = model.dim();
  const long T = config.horizon;
  const long W = config.window;
  const int R = config.runs;
  const std::size_t V = variants.size();
  const TrajectorySampler sampler(model, setup.sensors.sensors);

  const int chunks = std::min(R, 16);
  std::vector<ChunkAccumulator> acc(chunks);
  std::vector<std::vector<double>> run_steady(V, std::vector<double>(R, 0.0));

  auto process_chunk = [&](int c) {
    ChunkAccumulator& a = acc[c];
    a.node_sq.assign(V, std::vector<double>(static_cast<std::size_t>(n) * T, 0.0));
    a.final_errors.assign(V, std::vector<Eigen::VectorXd>(n, Eigen::VectorXd::Zero(m)));
    const int first = static_cast<int>(static_cast<long>(R) * c / chunks);
    const int last = static_cast<int>(static_cast<long>(R) * (c + 1) / chunks);
    for (int r = first; r < last; ++r) {
      const Trajectory traj =
          sampler.sample(T - 1, derive_seed(config.seed, SeedStream::kTrajectory, r), config.initial_state);
      std::vector<std::vector<Eigen::VectorXd>> by_time(T, std::vector<Eigen::VectorXd>(n));
      for (int k = 0; k < n; ++k)
        for (long i = 0; i < T; ++i) by_time[i][k] = traj.observations[k][i];

      for (std::size_t v = 0; v < V; ++v) {
        NetworkFilter filter(model, setup.sensors.sensors, setup.topology, setup.weights,
                             make_schedule(config, variants[v], derive_seed(config.seed, SeedStream::kSchedule, r)),
                             variants[v].mode);
        double steady = 0.0;
        auto& sq = a.node_sq[v];
        for (long i = 0; i < T; ++i) {
          filter.step(i, by_time[i]);
          const Eigen::VectorXd& truth = traj.states[i];
          for (int k = 0; k < n; ++k) {
            const double e2 = (truth - filter.node(k).x_filt).squaredNorm();
            sq[static_cast<std::size_t>(k) * T + i] += e2;
            if (i >= T - W) steady += e2;
          }
        }
        for (int k = 0; k < n; ++k) a.final_errors[v][k] += traj.states[T - 1] - filter.node(k).x_filt;
        run_steady[v][r] = steady / static_cast<double>(W * n);
      }
    }
  };

  const int threads = std::max(1, std::min(chunks, config.threads > 0
                                                       ? config.threads
                                                       : static_cast<int>(std::thread::hardware_concurrency())));
  if (threads == 1) {
    for (int c = 0; c < chunks; ++c) process_chunk(c);
  } else {
    std::atomic<int> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (int c = next++; c < chunks; c = next++) {
          try {
            process_chunk(c);
          } catch (...) {
            std::lock_guard<std::mutex> lock(failure_mutex);
            if (!failure) failure = std::current_exception();
            next = chunks;
          }
        }
      });
    }
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
  }

  for (std::size_t v = 0; v < V; ++v) {
    VariantResult res;
    res.variant = variants[v];
    res.theory = theory[v];
    res.node_msd.assign(n, std::vector<double>(T, 0.0));
    res.final_mean_error.assign(n, Eigen::VectorXd::Zero(m));
    for (int c = 0; c < chunks; ++c) {
      for (int k = 0; k < n; ++k) {
        for (long i = 0; i < T; ++i) res.node_msd[k][i] += acc[c].node_sq[v][static_cast<std::size_t>(k) * T + i];
        res.final_mean_error[k] += acc[c].final_errors[v][k];
      }
    }
    res.network_msd.assign(T, 0.0);
    res.steady_node_msd = Eigen::VectorXd::Zero(n);
    for (int k = 0; k < n; ++k) {
      res.final_mean_error[k] /= static_cast<double>(R);
      for (long i = 0; i < T; ++i) {
        res.node_msd[k][i] /= static_cast<double>(R);
        res.network_msd[i] += res.node_msd[k][i] / n;
        if (i >= T - W) res.steady_node_msd(k) += res.node_msd[k][i];
      }
      res.steady_node_msd(k) /= static_cast<double>(W);
    }
    res.steady_network_msd = res.steady_node_msd.mean();
    res.run_steady_msd = std::move(run_steady[v]);
    res.ci_halfwidth = 1.96 * sample_sd(res.run_steady_msd) / std::sqrt(static_cast<double>(R));
    res.scalars_per_iteration =
        NetworkFilter(model, setup.sensors.sensors, setup.topology, setup.weights, make_schedule(config, variants[v], 0),
                      variants[v].mode)
            .scalars_per_iteration();
    report.variants.push_back(std::move(res));
  }
  report.elapsed_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

double to_db(double msd) {
  return 10.0 * std::log10(msd);
}

}  // namespace pdkf
