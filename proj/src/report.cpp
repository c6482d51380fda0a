#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "pdkf/errors.hpp"
#include "pdkf/harness.hpp"

namespace pdkf {
namespace {

using nlohmann::json;

json number_or_null(double v) {
  return std::isfinite(v) ? json(v) : json(nullptr);
}

std::ofstream open_for_write(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

json matrix_json(const Eigen::MatrixXd& A) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < A.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < A.cols(); ++c) row.push_back(A(r, c));
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(std::numeric_limits<double>::max_digits10) << v;
  return os.str();
}

void emit_report(const MsdReport& report, const std::string& directory) {
  namespace fs = std::filesystem;
  const fs::path dir(directory);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory '" + dir.string() + "': " + ec.message());

  const fs::path curves_path = dir / "curves.csv";
  {
    auto out = open_for_write(curves_path);
    out << "scheme,L,iteration,msd_db\n";
    for (const auto& v : report.variants)
      for (std::size_t i = 0; i < v.network_msd.size(); ++i)
        out << v.variant.scheme << ',' << v.variant.L << ',' << i << ',' << format_double(to_db(v.network_msd[i]))
            << '\n';
    finish(out, curves_path);
  }

  const fs::path steady_path = dir / "steady.csv";
  {
    auto out = open_for_write(steady_path);
    out << "scheme,L,node,msd_emp_db,msd_theory_db\n";
    for (const auto& v : report.variants) {
      for (Eigen::Index k = 0; k < v.steady_node_msd.size(); ++k) {
        out << v.variant.scheme << ',' << v.variant.L << ',' << k << ','
            << format_double(to_db(v.steady_node_msd(k))) << ',';
        if (v.theory.theory)
          out << format_double(to_db(v.theory.theory->msd_per_node(k)));
        else
          out << "inapplicable";
        out << '\n';
      }
    }
    finish(out, steady_path);
  }

  const fs::path meta_path = dir / "meta.json";
  {
    const ExperimentConfig& c = report.config;
    json meta;
    meta["config"] = c.raw;
    meta["effective"] = {
        {"preset", c.preset},
        {"nodes", c.nodes},
        {"runs", c.runs},
        {"horizon", c.horizon},
        {"window", c.window},
        {"seed", c.seed},
        {"F", matrix_json(c.effective_model().F)},
        {"shared_masks", c.shared_masks},
    };
    json edges = json::array();
    for (const auto& [l, k] : report.setup.topology.edges()) edges.push_back({l, k});
    meta["topology"] = {{"nodes", report.setup.topology.size()},
                        {"edges", edges},
                        {"mean_degree", report.setup.topology.mean_degree()}};
    meta["sensors"] = {{"types", report.setup.sensors.types},
                       {"noise_variances", report.setup.sensors.noise_variances}};
    json variants = json::array();
    for (const auto& v : report.variants) {
      json item = {
          {"scheme", v.variant.scheme},
          {"L", v.variant.L},
          {"mode", to_string(v.variant.mode)},
          {"scalars_per_iteration", v.scalars_per_iteration},
          {"steady_network_msd", v.steady_network_msd},
          {"steady_network_msd_db", number_or_null(to_db(v.steady_network_msd))},
          {"steady_network_msd_ci95", v.ci_halfwidth},
          {"theory_status", v.theory.status},
          {"rho_F", number_or_null(v.theory.rho_F)},
          {"rho_loop", number_or_null(v.theory.rho_loop)},
      };
      if (v.theory.theory) {
        item["theory_network_msd"] = v.theory.theory->msd_network;
        item["theory_network_msd_db"] = number_or_null(to_db(v.theory.theory->msd_network));
      }
      variants.push_back(std::move(item));
    }
    meta["variants"] = std::move(variants);
    meta["elapsed_seconds"] = report.elapsed_seconds;
    auto out = open_for_write(meta_path);
    out << meta.dump(2) << '\n';
    finish(out, meta_path);
  }
}

}  // namespace pdkf
