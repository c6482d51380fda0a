#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pdkf/network.hpp"
#include "pdkf/selection.hpp"
#include "pdkf/statespace.hpp"

namespace pdkf {

/// Estimate with its error covariance.
struct Estimate {
  Eigen::VectorXd x;
  Eigen::MatrixXd P;
};

/// Per-node recursion state.
struct NodeFilterState {
  Eigen::VectorXd x_pred;  // x_{k,i|i-1}
  Eigen::MatrixXd P_pred;  // P_{k,i|i-1}
  Eigen::VectorXd psi;     // intermediate estimate after the measurement step
  Eigen::MatrixXd P_filt;  // P_{k,i|i}
  Eigen::VectorXd x_filt;  // x_{k,i|i}
};

/// One Kalman measurement update:
///   Re = R + H P H^T,  psi' = psi + P H^T Re^-1 (y - H psi),
///   P' = P - P H^T Re^-1 H P  (symmetrized).
/// Throws NumericError when Re is numerically singular.
Estimate measurement_update(const Eigen::VectorXd& psi, const Eigen::MatrixXd& P, const Eigen::VectorXd& y,
                            const SensorModel& sensor);

/// Covariance half of measurement_update; it never looks at data.
Eigen::MatrixXd covariance_update(const Eigen::MatrixXd& P, const SensorModel& sensor);

/// Gain P H^T Re^-1 for prior covariance P.
Eigen::MatrixXd kalman_gain(const Eigen::MatrixXd& P, const SensorModel& sensor);

struct Measurement {
  const Eigen::VectorXd* y;
  const SensorModel* sensor;
};

/// Sequential measurement updates over the neighborhood data, in the order
/// given (callers pass ascending node index), starting from the prediction.
Estimate dkf_incremental(const Eigen::VectorXd& x_pred, const Eigen::MatrixXd& P_pred,
                         std::span<const Measurement> neighborhood);

/// A single measurement update with the node's own data only.
Estimate pdkf_adaptation(const Eigen::VectorXd& x_pred, const Eigen::MatrixXd& P_pred, const Eigen::VectorXd& y,
                         const SensorModel& sensor);

/// sum_{l in N_k} c_lk psi_l
Eigen::VectorXd combine_dkf(int k, std::span<const Eigen::VectorXd> psi, const Topology& topology,
                            const CombinationWeights& weights);

/// psi_k + sum_{l in N_k \ {k}} c_lk T_l (psi_l - psi_k). masks[l] is the
/// selection node l used at this iteration.
Eigen::VectorXd combine_pdkf(int k, std::span<const Eigen::VectorXd> psi, std::span<const SelectionMask> masks,
                             const Topology& topology, const CombinationWeights& weights);

/// x' = F x,  P' = F P F^T + G Q G^T  (symmetrized).
Estimate time_update(const Eigen::VectorXd& x_filt, const Eigen::MatrixXd& P_filt, const StateSpaceModel& model);

enum class FilterMode {
  kDiffusion,         // exchange data and full estimates
  kPartialDiffusion,  // own-data adaptation, masked combination
  kNonCooperative,    // own-data adaptation, no combination
  kOwnDataDiffusion,  // own-data adaptation, full convex combination
};

std::string to_string(FilterMode mode);

/// All nodes of one network advancing in lockstep.
class NetworkFilter {
 public:
  NetworkFilter(StateSpaceModel model, std::vector<SensorModel> sensors, Topology topology,
                CombinationWeights weights, SelectionSchedule schedule, FilterMode mode);

  /// Runs the measurement step, the combination and the time update for
  /// every node. `iteration` must equal iteration(); observations[k] is
  /// y_{k,i}. NumericErrors are rethrown with node and iteration context.
  void step(long iteration, std::span<const Eigen::VectorXd> observations);

  long iteration() const { return iteration_; }
  int size() const { return static_cast<int>(nodes_.size()); }
  FilterMode mode() const { return mode_; }
  const NodeFilterState& node(int k) const { return nodes_[k]; }
  const std::vector<NodeFilterState>& nodes() const { return nodes_; }
  const SelectionSchedule& schedule() const { return schedule_; }

  /// Estimate-vector scalars received over all links in one iteration:
  /// L * sum_k |N_k \ {k}| for partial diffusion, M per link for full
  /// diffusion, zero without cooperation.
  long scalars_per_iteration() const;

 private:
  StateSpaceModel model_;
  std::vector<SensorModel> sensors_;
  Topology topology_;
  CombinationWeights weights_;
  SelectionSchedule schedule_;
  FilterMode mode_;
  Eigen::MatrixXd process_cov_;  // G Q G^T
  std::vector<NodeFilterState> nodes_;
  std::vector<Eigen::VectorXd> psi_;
  std::vector<SelectionMask> masks_;
  long iteration_ = 0;
};

struct StepOutput {
  std::vector<Eigen::VectorXd> estimates;  // x_{k,i|i}
  std::vector<Eigen::VectorXd> errors;     // x_i - x_{k,i|i}
};

/// One synchronized step followed by the per-node estimation errors.
StepOutput network_step(NetworkFilter& filter, long iteration, std::span<const Eigen::VectorXd> observations,
                        const Eigen::VectorXd& truth);

}  // namespace pdkf
