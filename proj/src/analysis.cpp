#include "pdkf/analysis.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include <unsupported/Eigen/KroneckerProduct>

#include "pdkf/errors.hpp"
#include "pdkf/filters.hpp"

namespace pdkf {
namespace {

// Above this network dimension MN the (MN)^2 system is no longer factorized.
constexpr Eigen::Index kDirectSolveLimit = 64;

Eigen::MatrixXd block_diagonal(const std::vector<Eigen::MatrixXd>& blocks) {
  Eigen::Index rows = 0, cols = 0;
  for (const auto& b : blocks) {
    rows += b.rows();
    cols += b.cols();
  }
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(rows, cols);
  Eigen::Index r = 0, c = 0;
  for (const auto& b : blocks) {
    out.block(r, c, b.rows(), b.cols()) = b;
    r += b.rows();
    c += b.cols();
  }
  return out;
}

Eigen::MatrixXd kron_identity(int n, const Eigen::MatrixXd& A) {
  return Eigen::kroneckerProduct(Eigen::MatrixXd::Identity(n, n), A).eval();
}

Eigen::MatrixXd unvec(const Eigen::VectorXd& v, Eigen::Index n) {
  return Eigen::Map<const Eigen::MatrixXd>(v.data(), n, n);
}

Eigen::VectorXd vec(const Eigen::MatrixXd& A) {
  return Eigen::Map<const Eigen::VectorXd>(A.data(), A.size());
}

// Spectral radius of x -> Bfrak^T vec(Fcal X Fcal^T) by power iteration,
// for operators too large to form densely.
double power_radius(const Eigen::MatrixXd& fcal, const Eigen::MatrixXd& bfrak, int iterations = 4000) {
  const Eigen::Index n = fcal.rows();
  Eigen::VectorXd v = Eigen::VectorXd::Ones(n * n).normalized();
  double log_growth = 0.0;
  const int burn_in = iterations / 2;
  for (int it = 0; it < iterations; ++it) {
    const Eigen::MatrixXd W = unvec(v, n);
    Eigen::VectorXd next = bfrak.transpose() * vec(fcal * W * fcal.transpose());
    const double norm = next.norm();
    if (norm == 0.0) return 0.0;
    if (it >= burn_in) log_growth += std::log(norm);
    v = next / norm;
  }
  return std::exp(log_growth / (iterations - burn_in));
}

}  // namespace

RiccatiResult iterate_riccati(const StateSpaceModel& model, std::span<const SensorModel> sensors, double tol,
                              int max_iter) {
  require(tol > 0.0, "solve_riccati: tol must be positive");
  require(max_iter >= 1, "solve_riccati: max_iter must be >= 1");
  const Eigen::MatrixXd process = model.G * model.Q * model.G.transpose();
  auto measure = [&](Eigen::MatrixXd P) {
    for (const auto& s : sensors) P = covariance_update(P, s);
    return P;
  };
  RiccatiResult r;
  r.P_pred = model.Pi0;
  for (int it = 1; it <= max_iter; ++it) {
    const Eigen::MatrixXd P = measure(r.P_pred);
    Eigen::MatrixXd next = model.F * P * model.F.transpose() + process;
    next = 0.5 * (next + next.transpose()).eval();
    r.last_delta = (next - r.P_pred).norm();
    r.P_pred = std::move(next);
    r.iterations = it;
    if (r.last_delta < tol) {
      r.converged = true;
      break;
    }
  }
  r.P_filt = measure(r.P_pred);
  return r;
}

RiccatiResult solve_riccati(const StateSpaceModel& model, std::span<const SensorModel> sensors, double tol,
                            int max_iter) {
  RiccatiResult r = iterate_riccati(model, sensors, tol, max_iter);
  if (!r.converged) {
    std::ostringstream os;
    os << "Riccati iteration did not converge in " << max_iter << " steps (last delta " << r.last_delta
       << "); the local filter has no steady state for this configuration";
    throw NumericError(os.str());
  }
  return r;
}

namespace {

std::vector<SensorModel> riccati_sensors(std::span<const SensorModel> sensors, const Topology& topology, int k,
                                         RiccatiMode mode) {
  if (mode == RiccatiMode::kOwnData) return {sensors[k]};
  std::vector<SensorModel> out;
  for (int l : topology.neighborhood(k)) out.push_back(sensors[l]);
  return out;
}

}  // namespace

RiccatiResult solve_riccati(const StateSpaceModel& model, std::span<const SensorModel> sensors,
                            const Topology& topology, int k, RiccatiMode mode, double tol, int max_iter) {
  require(static_cast<int>(sensors.size()) == topology.size(), "solve_riccati: one sensor per node required");
  require(k >= 0 && k < topology.size(), "solve_riccati: node index out of range");
  const auto used = riccati_sensors(sensors, topology, k, mode);
  return solve_riccati(model, used, tol, max_iter);
}

SteadyState steady_state(const StateSpaceModel& model, std::span<const SensorModel> sensors,
                         const Topology& topology, RiccatiMode mode, double tol, int max_iter,
                         bool require_convergence) {
  const int n = topology.size();
  require(static_cast<int>(sensors.size()) == n, "steady_state: one sensor per node required");
  const Eigen::Index m = model.dim();
  SteadyState ss;
  std::vector<Eigen::MatrixXd> H, R, Re_inv_H;
  for (int k = 0; k < n; ++k) {
    const auto used = riccati_sensors(sensors, topology, k, mode);
    RiccatiResult r = require_convergence ? solve_riccati(model, used, tol, max_iter)
                                          : iterate_riccati(model, used, tol, max_iter);
    ss.converged = ss.converged && r.converged;
    ss.worst_delta = std::max(ss.worst_delta, r.last_delta);
    const SensorModel& s = sensors[k];
    const Eigen::MatrixXd Re = s.R + s.H * r.P_pred * s.H.transpose();
    const Eigen::MatrixXd Re_inv = Re.llt().solve(Eigen::MatrixXd::Identity(Re.rows(), Re.cols()));
    ss.S.push_back(s.H.transpose() * Re_inv * s.H);
    ss.gain.push_back(r.P_pred * s.H.transpose() * Re_inv);
    ss.P_pred.push_back(std::move(r.P_pred));
    ss.P_filt.push_back(std::move(r.P_filt));
    H.push_back(s.H);
    R.push_back(s.R);
  }
  ss.Pcal = block_diagonal(ss.P_filt);
  ss.Pcal_pred = block_diagonal(ss.P_pred);
  ss.Scal = block_diagonal(ss.S);
  ss.Hcal = block_diagonal(H);
  ss.Rcal = block_diagonal(R);
  const Eigen::MatrixXd closed = Eigen::MatrixXd::Identity(n * m, n * m) - ss.Pcal_pred * ss.Scal;
  ss.Fcal = closed * kron_identity(n, model.F);
  ss.Gcal = closed * kron_identity(n, model.G);
  ss.Dcal = block_diagonal(ss.gain);
  return ss;
}

std::vector<Eigen::MatrixXd> build_b_patterns(const Topology& topology, const CombinationWeights& weights,
                                              const Partition& partition) {
  const int n = topology.size();
  const int m = partition.M;
  std::vector<Eigen::MatrixXd> patterns;
  for (const auto& subset : partition.subsets) {
    const Eigen::MatrixXd T = SelectionMask::from_subset(m, subset).as_matrix();
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(n * m, n * m);
    for (int p = 0; p < n; ++p) {
      Eigen::MatrixXd diag = Eigen::MatrixXd::Identity(m, m);
      for (int q : topology.neighborhood(p)) {
        if (q == p) continue;
        diag -= weights(q, p) * T;
        B.block(p * m, q * m, m, m) = weights(q, p) * T;
      }
      B.block(p * m, p * m, m, m) = diag;
    }
    patterns.push_back(std::move(B));
  }
  return patterns;
}

Eigen::MatrixXd expected_b_kron(std::span<const Eigen::MatrixXd> patterns, Scheme /*scheme*/) {
  require(!patterns.empty(), "expected_b_kron: no patterns");
  const Eigen::Index n = patterns.front().rows();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n * n, n * n);
  for (const auto& B : patterns) out += Eigen::kroneckerProduct(B.transpose(), B.transpose()).eval();
  return out / static_cast<double>(patterns.size());
}

double loop_spectral_radius(const SteadyState& steady, const Eigen::MatrixXd& bfrak) {
  const Eigen::Index n = steady.Fcal.rows();
  require(bfrak.rows() == n * n && bfrak.cols() == n * n, "loop_spectral_radius: Bfrak has wrong size");
  if (n > kDirectSolveLimit) return power_radius(steady.Fcal, bfrak);
  const Eigen::MatrixXd Ft = steady.Fcal.transpose();
  const Eigen::MatrixXd A = bfrak * Eigen::kroneckerProduct(Ft, Ft).eval();
  Eigen::EigenSolver<Eigen::MatrixXd> es(A, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

StabilityReport stability_report(const SteadyState& steady, const Eigen::MatrixXd& bfrak,
                                 const StateSpaceModel& model) {
  StabilityReport r;
  r.rho_F = model.spectral_radius();
  r.rho_loop = loop_spectral_radius(steady, bfrak);
  r.stable = r.rho_F < 1.0 - kStabilityMargin && r.rho_loop < 1.0 - kStabilityMargin;
  return r;
}

MsdTheory theoretical_network_msd(const SteadyState& steady, const Eigen::MatrixXd& bfrak,
                                  const StateSpaceModel& model, std::span<const SensorModel> sensors,
                                  MsdSolver solver) {
  const int nodes = steady.nodes();
  const Eigen::Index m = steady.state_dim();
  const Eigen::Index n = nodes * m;
  require(static_cast<int>(sensors.size()) == nodes, "theoretical_network_msd: one sensor per node required");
  require(bfrak.rows() == n * n && bfrak.cols() == n * n, "theoretical_network_msd: Bfrak has wrong size");
  require(model.dim() == m, "theoretical_network_msd: model dimension mismatch");

  MsdTheory t;
  t.K = steady.Dcal * steady.Rcal * steady.Dcal.transpose();
  const Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(nodes, nodes);
  t.Lmat = steady.Gcal * Eigen::kroneckerProduct(ones, model.Q).eval() * steady.Gcal.transpose();

  t.spectral_radius = loop_spectral_radius(steady, bfrak);
  if (!(t.spectral_radius < 1.0 - kStabilityMargin)) {
    std::ostringstream os;
    os << "mean-square error recursion is not stable (spectral radius " << t.spectral_radius << ")";
    throw NumericError(os.str());
  }

  // w^T = vec(K+L)^T Bfrak (I - (Fcal^T (x) Fcal^T) Bfrak)^-1, so MSD_k is w
  // weighted by the selector of node k's diagonal block.
  const Eigen::VectorXd rhs = bfrak.transpose() * vec(t.K + t.Lmat);
  Eigen::VectorXd w;
  const bool direct = solver == MsdSolver::kDirect || (solver == MsdSolver::kAuto && n <= kDirectSolveLimit);
  if (direct) {
    const Eigen::MatrixXd Ft = steady.Fcal.transpose();
    Eigen::MatrixXd system = -(Eigen::kroneckerProduct(Ft, Ft).eval() * bfrak).transpose();
    system.diagonal().array() += 1.0;
    const Eigen::PartialPivLU<Eigen::MatrixXd> lu(system);
    w = lu.solve(rhs);
    if (!w.allFinite() || (system * w - rhs).norm() > 1e-8 * std::max(1.0, rhs.norm()))
      throw NumericError("mean-square steady-state solve failed");
  } else {
    // w = sum_j (A^T)^j rhs with A^T w = Bfrak^T vec(Fcal W Fcal^T).
    w = rhs;
    Eigen::VectorXd term = rhs;
    for (int it = 0; it < 1000000; ++it) {
      term = bfrak.transpose() * vec(steady.Fcal * unvec(term, n) * steady.Fcal.transpose());
      w += term;
      if (term.norm() <= 1e-15 * w.norm()) break;
      if (!term.allFinite()) throw NumericError("mean-square steady-state series diverged");
    }
  }

  t.msd_per_node.resize(nodes);
  for (int k = 0; k < nodes; ++k) {
    double acc = 0.0;
    for (Eigen::Index j = k * m; j < (k + 1) * m; ++j) acc += w(j * n + j);
    t.msd_per_node(k) = acc;
  }
  t.msd_network = t.msd_per_node.mean();
  return t;
}

}  // namespace pdkf
