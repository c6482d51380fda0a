#include "pdkf/filters.hpp"

#include <limits>

#include "pdkf/errors.hpp"

namespace pdkf {
namespace {

void symmetrize(Eigen::MatrixXd& P) {
  P = 0.5 * (P + P.transpose()).eval();
}

// Returns Re^-1 applied from the right to P H^T, i.e. the gain.
Eigen::MatrixXd gain_from(const Eigen::MatrixXd& PHt, const SensorModel& sensor) {
  const Eigen::MatrixXd Re = sensor.R + sensor.H * PHt;
  const Eigen::LLT<Eigen::MatrixXd> llt(Re);
  if (llt.info() != Eigen::Success || !(llt.rcond() > 64 * std::numeric_limits<double>::epsilon()))
    throw NumericError("innovation covariance is numerically singular");
  return llt.solve(PHt.transpose()).transpose();
}

void check_sensor(const Eigen::MatrixXd& P, const SensorModel& sensor) {
  require(P.rows() == P.cols() && P.rows() == sensor.state_dim(),
          "measurement update: covariance is " + std::to_string(P.rows()) + "x" + std::to_string(P.cols()) +
              " but H has " + std::to_string(sensor.state_dim()) + " columns");
  require(sensor.R.rows() == sensor.obs_dim() && sensor.R.cols() == sensor.obs_dim(),
          "measurement update: R does not match H");
}

}  // namespace

Eigen::MatrixXd kalman_gain(const Eigen::MatrixXd& P, const SensorModel& sensor) {
  check_sensor(P, sensor);
  return gain_from(P * sensor.H.transpose(), sensor);
}

Estimate measurement_update(const Eigen::VectorXd& psi, const Eigen::MatrixXd& P, const Eigen::VectorXd& y,
                            const SensorModel& sensor) {
  check_sensor(P, sensor);
  require(psi.size() == P.rows(), "measurement update: estimate length does not match covariance");
  require(y.size() == sensor.obs_dim(), "measurement update: observation length does not match H");
  const Eigen::MatrixXd PHt = P * sensor.H.transpose();
  const Eigen::MatrixXd K = gain_from(PHt, sensor);
  Estimate out{psi + K * (y - sensor.H * psi), P - K * PHt.transpose()};
  symmetrize(out.P);
  return out;
}

Eigen::MatrixXd covariance_update(const Eigen::MatrixXd& P, const SensorModel& sensor) {
  check_sensor(P, sensor);
  const Eigen::MatrixXd PHt = P * sensor.H.transpose();
  Eigen::MatrixXd out = P - gain_from(PHt, sensor) * PHt.transpose();
  symmetrize(out);
  return out;
}

Estimate dkf_incremental(const Eigen::VectorXd& x_pred, const Eigen::MatrixXd& P_pred,
                         std::span<const Measurement> neighborhood) {
  Estimate est{x_pred, P_pred};
  for (const auto& m : neighborhood) est = measurement_update(est.x, est.P, *m.y, *m.sensor);
  return est;
}

Estimate pdkf_adaptation(const Eigen::VectorXd& x_pred, const Eigen::MatrixXd& P_pred, const Eigen::VectorXd& y,
                         const SensorModel& sensor) {
  return measurement_update(x_pred, P_pred, y, sensor);
}

Eigen::VectorXd combine_dkf(int k, std::span<const Eigen::VectorXd> psi, const Topology& topology,
                            const CombinationWeights& weights) {
  require(static_cast<int>(psi.size()) == topology.size(), "combine_dkf: one estimate per node required");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(psi[k].size());
  for (int l : topology.neighborhood(k)) out += weights(l, k) * psi[l];
  return out;
}

Eigen::VectorXd combine_pdkf(int k, std::span<const Eigen::VectorXd> psi, std::span<const SelectionMask> masks,
                             const Topology& topology, const CombinationWeights& weights) {
  require(static_cast<int>(psi.size()) == topology.size() && masks.size() == psi.size(),
          "combine_pdkf: one estimate and one mask per node required");
  require(weights.C.rows() == topology.size() && weights.C.cols() == topology.size(),
          "combine_pdkf: weight matrix does not match topology");
  const Eigen::VectorXd& own = psi[k];
  Eigen::VectorXd out = own;
  for (int l : topology.neighborhood(k)) {
    if (l == k) continue;
    const SelectionMask& T = masks[l];
    require(T.size() == own.size(), "combine_pdkf: mask length does not match estimate");
    const double c = weights(l, k);
    for (int j = 0; j < T.size(); ++j)
      if (T[j]) out(j) += c * (psi[l](j) - own(j));
  }
  return out;
}

Estimate time_update(const Eigen::VectorXd& x_filt, const Eigen::MatrixXd& P_filt, const StateSpaceModel& model) {
  require(x_filt.size() == model.dim() && P_filt.rows() == model.dim() && P_filt.cols() == model.dim(),
          "time_update: dimensions do not match the model");
  Estimate out{model.F * x_filt,
               model.F * P_filt * model.F.transpose() + model.G * model.Q * model.G.transpose()};
  symmetrize(out.P);
  return out;
}

std::string to_string(FilterMode mode) {
  switch (mode) {
    case FilterMode::kDiffusion: return "dkf";
    case FilterMode::kPartialDiffusion: return "pdkf";
    case FilterMode::kNonCooperative: return "noncooperative";
    case FilterMode::kOwnDataDiffusion: return "own-data-diffusion";
  }
  return "unknown";
}

NetworkFilter::NetworkFilter(StateSpaceModel model, std::vector<SensorModel> sensors, Topology topology,
                             CombinationWeights weights, SelectionSchedule schedule, FilterMode mode)
    : model_(std::move(model)),
      sensors_(std::move(sensors)),
      topology_(std::move(topology)),
      weights_(std::move(weights)),
      schedule_(std::move(schedule)),
      mode_(mode) {
  const int n = topology_.size();
  const Eigen::Index m = model_.dim();
  require(static_cast<int>(sensors_.size()) == n, "NetworkFilter: one sensor per node required");
  require(weights_.C.rows() == n && weights_.C.cols() == n, "NetworkFilter: weights do not match topology");
  require(schedule_.partition().M == m, "NetworkFilter: partition size does not match state dimension");
  for (const auto& s : sensors_) require(s.state_dim() == m, "NetworkFilter: sensor/state dimension mismatch");
  process_cov_ = model_.G * model_.Q * model_.G.transpose();
  NodeFilterState init{Eigen::VectorXd::Zero(m), model_.Pi0, Eigen::VectorXd::Zero(m), model_.Pi0,
                       Eigen::VectorXd::Zero(m)};
  nodes_.assign(n, init);
  psi_.assign(n, Eigen::VectorXd::Zero(m));
  masks_.assign(n, SelectionMask());
}

void NetworkFilter::step(long iteration, std::span<const Eigen::VectorXd> observations) {
  require(iteration == iteration_, "NetworkFilter::step: expected iteration " + std::to_string(iteration_) +
                                       ", got " + std::to_string(iteration));
  const int n = size();
  require(static_cast<int>(observations.size()) == n, "NetworkFilter::step: one observation per node required");

  // Measurement step. Every psi is produced before any combination reads it.
  int k = 0;
  try {
    for (k = 0; k < n; ++k) {
      NodeFilterState& s = nodes_[k];
      Estimate est;
      if (mode_ == FilterMode::kDiffusion) {
        std::vector<Measurement> data;
        data.reserve(topology_.neighborhood(k).size());
        for (int l : topology_.neighborhood(k)) data.push_back({&observations[l], &sensors_[l]});
        est = dkf_incremental(s.x_pred, s.P_pred, data);
      } else {
        est = pdkf_adaptation(s.x_pred, s.P_pred, observations[k], sensors_[k]);
      }
      s.psi = est.x;
      s.P_filt = std::move(est.P);
      psi_[k] = std::move(est.x);
    }
  } catch (const NumericError& e) {
    throw NumericError("node " + std::to_string(k) + ", iteration " + std::to_string(iteration) + ": " + e.what());
  }

  if (mode_ == FilterMode::kPartialDiffusion)
    for (int l = 0; l < n; ++l) masks_[l] = schedule_.subset_mask(schedule_.subset_index(l, iteration));

  for (k = 0; k < n; ++k) {
    NodeFilterState& s = nodes_[k];
    switch (mode_) {
      case FilterMode::kPartialDiffusion:
        s.x_filt = combine_pdkf(k, psi_, masks_, topology_, weights_);
        break;
      case FilterMode::kDiffusion:
      case FilterMode::kOwnDataDiffusion:
        s.x_filt = combine_dkf(k, psi_, topology_, weights_);
        break;
      case FilterMode::kNonCooperative:
        s.x_filt = psi_[k];
        break;
    }
    s.x_pred = model_.F * s.x_filt;
    s.P_pred = model_.F * s.P_filt * model_.F.transpose() + process_cov_;
    s.P_pred = 0.5 * (s.P_pred + s.P_pred.transpose()).eval();
  }
  ++iteration_;
}

long NetworkFilter::scalars_per_iteration() const {
  long links = 0;
  for (int k = 0; k < size(); ++k) links += topology_.degree(k);
  switch (mode_) {
    case FilterMode::kPartialDiffusion: return links * schedule_.partition().L;
    case FilterMode::kDiffusion:
    case FilterMode::kOwnDataDiffusion: return links * model_.dim();
    case FilterMode::kNonCooperative: return 0;
  }
  return 0;
}

StepOutput network_step(NetworkFilter& filter, long iteration, std::span<const Eigen::VectorXd> observations,
                        const Eigen::VectorXd& truth) {
  filter.step(iteration, observations);
  StepOutput out;
  for (const auto& s : filter.nodes()) {
    out.estimates.push_back(s.x_filt);
    out.errors.push_back(truth - s.x_filt);
  }
  return out;
}

}  // namespace pdkf
