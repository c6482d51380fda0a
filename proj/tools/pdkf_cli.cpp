// Command-line front end: run Monte-Carlo experiments, print closed-form
// steady-state MSD, or check a configuration file.

#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "pdkf/errors.hpp"
#include "pdkf/harness.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

void print_theory(const pdkf::ExperimentConfig& config, const pdkf::ExperimentSetup& setup) {
  const auto variants = pdkf::experiment_variants(config);
  const auto theory = pdkf::evaluate_theory(config, setup);
  for (std::size_t v = 0; v < variants.size(); ++v) {
    const auto& t = theory[v];
    std::cout << variants[v].scheme << " L=" << variants[v].L << "  rho_F=" << pdkf::format_double(t.rho_F)
              << "  rho_loop=" << pdkf::format_double(t.rho_loop) << "  status=" << t.status << '\n';
    if (!t.theory) continue;
    std::cout << "  network_msd_db=" << pdkf::format_double(pdkf::to_db(t.theory->msd_network)) << '\n';
    for (Eigen::Index k = 0; k < t.theory->msd_per_node.size(); ++k)
      std::cout << "  node " << k << " msd_db=" << pdkf::format_double(pdkf::to_db(t.theory->msd_per_node(k)))
                << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Partial-diffusion Kalman filter experiments"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;

  auto* run = app.add_subcommand("run", "Run the Monte-Carlo experiment and write CSV reports");
  run->add_option("--config", config_path, "Experiment configuration file")->required();
  run->add_option("--out", out_dir, "Output directory")->required();

  auto* theory = app.add_subcommand("theory", "Print closed-form steady-state MSD without simulating");
  theory->add_option("--config", config_path, "Experiment configuration file")->required();

  auto* validate = app.add_subcommand("validate", "Check a configuration file");
  validate->add_option("--config", config_path, "Experiment configuration file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    const pdkf::ExperimentConfig config = pdkf::load_config(config_path);
    if (*validate) {
      const auto setup = pdkf::build_setup(config);
      std::cout << "ok: " << setup.topology.size() << " nodes, " << setup.topology.edge_count() << " edges, "
                << pdkf::experiment_variants(config).size() << " variants\n";
    } else if (*theory) {
      print_theory(config, pdkf::build_setup(config));
    } else {
      const auto report = pdkf::run_experiment(config);
      pdkf::emit_report(report, out_dir);
      for (const auto& v : report.variants)
        std::cout << v.variant.scheme << " L=" << v.variant.L
                  << "  steady_msd_db=" << pdkf::format_double(pdkf::to_db(v.steady_network_msd))
                  << "  scalars/iter=" << v.scalars_per_iteration << "  theory=" << v.theory.status << '\n';
      std::cout << "wrote " << out_dir << "/{curves.csv,steady.csv,meta.json} in " << report.elapsed_seconds
                << " s\n";
    }
  } catch (const pdkf::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const pdkf::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const pdkf::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
