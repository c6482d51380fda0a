#include "pdkf/statespace.hpp"

#include <cmath>
#include <sstream>
#include <string>

#include "pdkf/errors.hpp"

namespace pdkf {
namespace {

constexpr double kSymmetryTol = 1e-12;

bool is_symmetric(const Eigen::MatrixXd& A) {
  if (A.rows() != A.cols()) return false;
  const double scale = std::max(1.0, A.cwiseAbs().maxCoeff());
  return (A - A.transpose()).cwiseAbs().maxCoeff() <= kSymmetryTol * scale;
}

double min_eigenvalue(const Eigen::MatrixXd& A) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

std::string shape(const Eigen::MatrixXd& A) {
  std::ostringstream os;
  os << A.rows() << "x" << A.cols();
  return os.str();
}

}  // namespace

void StateSpaceModel::validate() const {
  const Eigen::Index m = F.rows();
  if (m < 1 || F.cols() != m) throw ConfigError("model: F must be square and non-empty, got " + shape(F));
  if (G.rows() != m || G.cols() != m) throw ConfigError("model: G must be " + shape(F) + ", got " + shape(G));
  if (Q.rows() != m || Q.cols() != m) throw ConfigError("model: Q must be " + shape(F) + ", got " + shape(Q));
  if (Pi0.rows() != m || Pi0.cols() != m) throw ConfigError("model: Pi0 must be " + shape(F) + ", got " + shape(Pi0));
  if (!is_symmetric(Q)) throw ConfigError("model: Q is not symmetric");
  if (!is_symmetric(Pi0)) throw ConfigError("model: Pi0 is not symmetric");
  const double scale_q = std::max(1.0, Q.cwiseAbs().maxCoeff());
  if (min_eigenvalue(Q) < -1e-12 * scale_q) throw ConfigError("model: Q is not positive semi-definite");
  if (min_eigenvalue(Pi0) <= 0.0) throw ConfigError("model: Pi0 is not positive definite");
}

double StateSpaceModel::spectral_radius() const {
  Eigen::EigenSolver<Eigen::MatrixXd> es(F, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

void SensorModel::validate() const {
  if (H.rows() < 1 || H.cols() < 1) throw ConfigError("sensor: H is empty");
  if (R.rows() != H.rows() || R.cols() != H.rows())
    throw ConfigError("sensor: R must be " + std::to_string(H.rows()) + "x" + std::to_string(H.rows()) +
                      ", got " + shape(R));
  if (!is_symmetric(R)) throw ConfigError("sensor: R is not symmetric");
  if (min_eigenvalue(R) <= 0.0) throw ConfigError("sensor: R is not positive definite");
}

StateSpaceModel paper_model() {
  StateSpaceModel m;
  m.F.resize(4, 4);
  m.F << 1, 0, 0.1, 0,
         0, 1, 0, 0.1,
         0, 0, 1, 0,
         0, 0, 0, 1;
  m.G = 0.625 * Eigen::MatrixXd::Identity(4, 4);
  m.Q = 0.001 * Eigen::MatrixXd::Identity(4, 4);
  m.Pi0 = Eigen::MatrixXd::Identity(4, 4);
  return m;
}

SensorModel paper_sensor(int type, double noise_variance) {
  SensorModel s;
  s.H = Eigen::MatrixXd::Zero(3, 4);
  s.H(0, 1) = 1.0;
  if (type == 0) {
    s.H(1, 2) = 1.0;
  } else if (type == 1) {
    s.H(2, 3) = 1.0;
  } else {
    throw ContractViolation("paper_sensor: type must be 0 or 1");
  }
  s.R = noise_variance * Eigen::MatrixXd::Identity(3, 3);
  return s;
}

GaussianNoise::GaussianNoise(const Eigen::MatrixXd& covariance) {
  require(covariance.rows() == covariance.cols(), "GaussianNoise: covariance must be square");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(covariance);
  const Eigen::VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  factor_ = es.eigenvectors() * root.asDiagonal();
}

Eigen::VectorXd GaussianNoise::draw(Rng& rng) const {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd z(factor_.cols());
  for (Eigen::Index j = 0; j < z.size(); ++j) z(j) = normal(rng);
  return factor_ * z;
}

Eigen::VectorXd simulate_step(const StateSpaceModel& model, const Eigen::VectorXd& x, Rng& rng) {
  require(x.size() == model.dim(), "simulate_step: state has length " + std::to_string(x.size()) +
                                       ", model expects " + std::to_string(model.dim()));
  const GaussianNoise noise(model.Q);
  return model.F * x + model.G * noise.draw(rng);
}

Eigen::VectorXd observe(const SensorModel& sensor, const Eigen::VectorXd& x, Rng& rng) {
  require(x.size() == sensor.state_dim(), "observe: state has length " + std::to_string(x.size()) +
                                              ", H has " + std::to_string(sensor.state_dim()) + " columns");
  require(sensor.R.rows() == sensor.obs_dim() && sensor.R.cols() == sensor.obs_dim(),
          "observe: R does not match H");
  const GaussianNoise noise(sensor.R);
  return sensor.H * x + noise.draw(rng);
}

TrajectorySampler::TrajectorySampler(StateSpaceModel model, std::vector<SensorModel> sensors)
    : model_(std::move(model)),
      sensors_(std::move(sensors)),
      initial_(model_.Pi0),
      process_(model_.Q) {
  measurement_.reserve(sensors_.size());
  for (std::size_t k = 0; k < sensors_.size(); ++k) {
    const auto& s = sensors_[k];
    require(s.state_dim() == model_.dim(),
            "TrajectorySampler: sensor " + std::to_string(k) + " has wrong state dimension");
    require(s.R.rows() == s.obs_dim() && s.R.cols() == s.obs_dim(),
            "TrajectorySampler: sensor " + std::to_string(k) + " has R inconsistent with H");
    measurement_.emplace_back(s.R);
  }
}

Trajectory TrajectorySampler::sample(long horizon, std::uint64_t seed,
                                     const std::optional<Eigen::VectorXd>& x0) const {
  require(horizon >= 1, "sample_trajectory: horizon must be >= 1");
  Rng rng(seed);
  Trajectory t;
  t.seed = seed;
  t.states.reserve(horizon + 1);
  t.state_noise.reserve(horizon);
  t.observations.assign(sensors_.size(), {});
  for (auto& obs : t.observations) obs.reserve(horizon + 1);

  if (x0) {
    require(x0->size() == model_.dim(), "sample_trajectory: x0 override has wrong length");
    t.states.push_back(*x0);
  } else {
    t.states.push_back(initial_.draw(rng));
  }
  for (long i = 0; i <= horizon; ++i) {
    const Eigen::VectorXd& x = t.states.back();
    for (std::size_t k = 0; k < sensors_.size(); ++k)
      t.observations[k].push_back(sensors_[k].H * x + measurement_[k].draw(rng));
    if (i == horizon) break;
    Eigen::VectorXd n = process_.draw(rng);
    Eigen::VectorXd next = model_.F * x + model_.G * n;
    t.state_noise.push_back(std::move(n));
    t.states.push_back(std::move(next));
  }
  return t;
}

Trajectory sample_trajectory(const StateSpaceModel& model, std::span<const SensorModel> sensors,
                             long horizon, std::uint64_t seed, const std::optional<Eigen::VectorXd>& x0) {
  return TrajectorySampler(model, {sensors.begin(), sensors.end()}).sample(horizon, seed, x0);
}

}  // namespace pdkf
