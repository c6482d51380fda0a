#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "pdkf/random.hpp"

namespace pdkf {

/// Time-invariant linear dynamics x_{i+1} = F x_i + G n_i with
/// n_i ~ N(0, Q) and x_0 ~ N(0, Pi0).
struct StateSpaceModel {
  Eigen::MatrixXd F;
  Eigen::MatrixXd G;
  Eigen::MatrixXd Q;
  Eigen::MatrixXd Pi0;

  Eigen::Index dim() const { return F.rows(); }

  /// Throws ConfigError on inconsistent shapes, asymmetric Q/Pi0, Q not PSD or
  /// Pi0 not PD.
  void validate() const;

  double spectral_radius() const;
};

/// Observation model of one node: y = H x + v, v ~ N(0, R).
struct SensorModel {
  Eigen::MatrixXd H;
  Eigen::MatrixXd R;

  Eigen::Index obs_dim() const { return H.rows(); }
  Eigen::Index state_dim() const { return H.cols(); }

  /// Throws ConfigError unless R is symmetric positive definite and shapes agree.
  void validate() const;
};

/// Constant-velocity tracking model used by the "paper-sec4" preset.
StateSpaceModel paper_model();

/// One of the two 3x4 observation patterns of the "paper-sec4" preset
/// (type 0 reads entries 2 and 3, type 1 reads entries 2 and 4), with
/// R = noise_variance * I_3.
SensorModel paper_sensor(int type, double noise_variance);

/// Zero-mean Gaussian source with a fixed covariance. The symmetric square
/// root is computed once at construction; PSD (singular) covariances are
/// accepted.
class GaussianNoise {
 public:
  explicit GaussianNoise(const Eigen::MatrixXd& covariance);

  Eigen::VectorXd draw(Rng& rng) const;
  Eigen::Index dim() const { return factor_.rows(); }

 private:
  Eigen::MatrixXd factor_;
};

struct Trajectory {
  std::vector<Eigen::VectorXd> states;       // x_0 .. x_T
  std::vector<Eigen::VectorXd> state_noise;  // n_0 .. n_{T-1}
  /// observations[k][i] = y_{k,i}, i = 0 .. T.
  std::vector<std::vector<Eigen::VectorXd>> observations;
  std::uint64_t seed = 0;

  long horizon() const { return static_cast<long>(state_noise.size()); }
};

/// F x + G n with n ~ N(0, Q).
Eigen::VectorXd simulate_step(const StateSpaceModel& model, const Eigen::VectorXd& x, Rng& rng);

/// H x + v with v ~ N(0, R).
Eigen::VectorXd observe(const SensorModel& sensor, const Eigen::VectorXd& x, Rng& rng);

/// Reusable generator for many trajectories of the same model and sensors.
class TrajectorySampler {
 public:
  TrajectorySampler(StateSpaceModel model, std::vector<SensorModel> sensors);

  /// Draw order: x_0 (unless overridden), then for each i the node
  /// observations y_{1,i}..y_{N,i} followed by n_i.
  Trajectory sample(long horizon, std::uint64_t seed,
                    const std::optional<Eigen::VectorXd>& x0 = std::nullopt) const;

 private:
  StateSpaceModel model_;
  std::vector<SensorModel> sensors_;
  GaussianNoise initial_;
  GaussianNoise process_;
  std::vector<GaussianNoise> measurement_;
};

Trajectory sample_trajectory(const StateSpaceModel& model, std::span<const SensorModel> sensors,
                             long horizon, std::uint64_t seed,
                             const std::optional<Eigen::VectorXd>& x0 = std::nullopt);

}  // namespace pdkf
