#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "pdkf/network.hpp"
#include "pdkf/selection.hpp"
#include "pdkf/statespace.hpp"

namespace pdkf {

enum class RiccatiMode {
  kOwnData,       // one measurement update per step with the node's own sensor
  kNeighborhood,  // sequential updates over every sensor in N_k
};

struct RiccatiResult {
  Eigen::MatrixXd P_pred;  // limit of P_{k,i|i-1}
  Eigen::MatrixXd P_filt;  // limit of P_{k,i|i}
  int iterations = 0;
  double last_delta = 0.0;  // ||P_{i+1|i} - P_{i|i-1}||_F at exit
  bool converged = false;
};

/// Iterates the filter covariance recursion from Pi0, applying the given
/// sensors in order at every step, until successive predicted covariances
/// differ by less than tol in Frobenius norm. Never throws on
/// non-convergence; see `converged`.
RiccatiResult iterate_riccati(const StateSpaceModel& model, std::span<const SensorModel> sensors, double tol,
                              int max_iter);

/// As iterate_riccati, but a missing fixed point is a NumericError carrying
/// the last delta.
RiccatiResult solve_riccati(const StateSpaceModel& model, std::span<const SensorModel> sensors, double tol,
                            int max_iter);

/// Riccati fixed point of node k under the given data mode.
RiccatiResult solve_riccati(const StateSpaceModel& model, std::span<const SensorModel> sensors,
                            const Topology& topology, int k, RiccatiMode mode, double tol, int max_iter);

/// Steady-state network operators of the partial-diffusion error recursion
///   X_i = B_i (Fcal X_{i-1} + Gcal (1 (x) n_{i-1}) - Dcal v_i).
struct SteadyState {
  std::vector<Eigen::MatrixXd> P_pred;  // per node
  std::vector<Eigen::MatrixXd> P_filt;
  std::vector<Eigen::MatrixXd> S;     // H^T Re^-1 H with Re = R + H P_pred H^T
  std::vector<Eigen::MatrixXd> gain;  // P_pred H^T Re^-1
  Eigen::MatrixXd Pcal;               // blockdiag(P_filt)
  Eigen::MatrixXd Pcal_pred;          // blockdiag(P_pred)
  Eigen::MatrixXd Scal;               // blockdiag(S)
  Eigen::MatrixXd Hcal;               // blockdiag(H)
  Eigen::MatrixXd Rcal;               // blockdiag(R)
  Eigen::MatrixXd Fcal;               // (I - Pcal_pred Scal)(I_N (x) F)
  Eigen::MatrixXd Gcal;               // (I - Pcal_pred Scal)(I_N (x) G)
  Eigen::MatrixXd Dcal;               // Pcal_pred Hcal^T Re^-1 = Pcal Hcal^T Rcal^-1
  bool converged = true;              // every node's Riccati iteration converged
  double worst_delta = 0.0;

  int nodes() const { return static_cast<int>(P_pred.size()); }
  Eigen::Index state_dim() const { return P_pred.front().rows(); }
};

/// Per-node Riccati fixed points and the assembled block operators. With
/// require_convergence = false a non-convergent node keeps its last iterate
/// and `converged` is cleared.
SteadyState steady_state(const StateSpaceModel& model, std::span<const SensorModel> sensors,
                         const Topology& topology, RiccatiMode mode, double tol, int max_iter,
                         bool require_convergence = true);

/// Combination matrix B(tau) of the error recursion for each subset tau, all
/// nodes sharing the subset. Block (p, q) is I - sum_{l in N_p\p} c_lp T(tau)
/// on the diagonal, c_qp T(tau) for neighbors q, zero otherwise.
std::vector<Eigen::MatrixXd> build_b_patterns(const Topology& topology, const CombinationWeights& weights,
                                              const Partition& partition);

/// E[B^T (x) B^T]. Both schemes visit every subset with frequency 1/Omega in
/// the long run, so both give the plain mean over the patterns.
Eigen::MatrixXd expected_b_kron(std::span<const Eigen::MatrixXd> patterns, Scheme scheme);

struct MsdTheory {
  Eigen::MatrixXd K;     // Dcal Rcal Dcal^T
  Eigen::MatrixXd Lmat;  // Gcal (11^T (x) Q) Gcal^T
  double msd_network = 0.0;
  Eigen::VectorXd msd_per_node;
  double spectral_radius = 0.0;  // rho of the mean-square recursion
};

enum class MsdSolver {
  kAuto,    // direct for MN <= 64, series otherwise
  kDirect,  // LU factorization of the (MN)^2 system
  kSeries,  // truncated Neumann series, matrix-free in Fcal
};

/// Closed-form steady-state MSD. Throws NumericError when the mean-square
/// recursion is not strictly stable or the linear solve fails.
MsdTheory theoretical_network_msd(const SteadyState& steady, const Eigen::MatrixXd& bfrak,
                                  const StateSpaceModel& model, std::span<const SensorModel> sensors,
                                  MsdSolver solver = MsdSolver::kAuto);

struct StabilityReport {
  double rho_F = 0.0;
  double rho_loop = 0.0;
  bool stable = false;
};

/// Spectral radii of F and of Bfrak (Fcal^T (x) Fcal^T). A radius counts as
/// stable only when it is below 1 - 1e-10.
StabilityReport stability_report(const SteadyState& steady, const Eigen::MatrixXd& bfrak,
                                 const StateSpaceModel& model);

/// Spectral radius of the mean-square recursion matrix alone.
double loop_spectral_radius(const SteadyState& steady, const Eigen::MatrixXd& bfrak);

inline constexpr double kStabilityMargin = 1e-10;

}  // namespace pdkf
