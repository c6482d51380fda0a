#include <cmath>
#include <limits>
#include <string>

#include <doctest.h>
#include <unsupported/Eigen/KroneckerProduct>

#include "oracles.hpp"
#include "pdkf/analysis.hpp"
#include "pdkf/errors.hpp"
#include "pdkf/filters.hpp"

using namespace pdkf;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

StateSpaceModel scalar_model(double f, double g, double q) {
  return {MatrixXd::Constant(1, 1, f), MatrixXd::Constant(1, 1, g), MatrixXd::Constant(1, 1, q),
          MatrixXd::Identity(1, 1)};
}

SensorModel scalar_sensor(double h, double r) { return {MatrixXd::Constant(1, 1, h), MatrixXd::Constant(1, 1, r)}; }

StateSpaceModel stable_tracking() {
  auto model = paper_model();
  model.F *= 0.95;
  return model;
}

// Two nodes on one link, two state entries, each node seeing one entry.
struct Toy {
  StateSpaceModel model;
  Topology topology = Topology::from_edges(2, {{0, 1}});
  CombinationWeights weights = uniform_weights(topology);
  std::vector<SensorModel> sensors;

  Toy() {
    MatrixXd F(2, 2);
    F << 0.9, 0.1, 0.0, 0.8;
    model = {F, MatrixXd::Identity(2, 2), 0.05 * MatrixXd::Identity(2, 2), MatrixXd::Identity(2, 2)};
    sensors.push_back({(MatrixXd(1, 2) << 1, 0).finished(), MatrixXd::Constant(1, 1, 0.1)});
    sensors.push_back({(MatrixXd(1, 2) << 0, 1).finished(), MatrixXd::Constant(1, 1, 0.3)});
  }
};

// Five-node tracking network with alternating sensor types.
struct Five {
  StateSpaceModel model = stable_tracking();
  Topology topology = Topology::from_edges(5, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {0, 2}});
  CombinationWeights weights = uniform_weights(topology);
  std::vector<SensorModel> sensors;

  Five() {
    for (int k = 0; k < 5; ++k) sensors.push_back(paper_sensor(k % 2, 0.1 + 0.08 * k));
  }
  SteadyState steady() const { return steady_state(model, sensors, topology, RiccatiMode::kOwnData, 1e-12, 100000); }
  MatrixXd bfrak(int L) const {
    const auto patterns = build_b_patterns(topology, weights, build_partition(4, L));
    return expected_b_kron(patterns, Scheme::kSequential);
  }
};

}  // namespace

TEST_CASE("scalar Riccati fixed point") {
  const std::vector<SensorModel> s{scalar_sensor(1, 1)};
  const auto r = solve_riccati(scalar_model(0.5, 1, 1), s, 1e-13, 10000);
  const double root = oracle::scalar_dare(0.5, 1, 1, 1, 1);
  CHECK(std::abs(root - (0.25 + std::sqrt(4.0625)) / 2) < 1e-15);
  CHECK(std::abs(r.P_pred(0, 0) - root) < 1e-9);
  CHECK(r.converged);
  // Filtered variance p r / (p + r).
  CHECK(r.P_filt(0, 0) == doctest::Approx(root / (root + 1)).epsilon(1e-9));
}

TEST_CASE("Riccati without excitation contracts to zero") {
  const std::vector<SensorModel> s{scalar_sensor(0, 1)};
  const auto r = solve_riccati(scalar_model(0.5, 1, 0), s, 1e-14, 10000);
  CHECK(r.P_pred(0, 0) < 1e-13);
}

TEST_CASE("Riccati fixed point is invariant under one more step") {
  const auto model = stable_tracking();
  const std::vector<SensorModel> s{paper_sensor(1, 0.2)};
  const auto r = solve_riccati(model, s, 1e-12, 100000);
  const MatrixXd filt = covariance_update(r.P_pred, s[0]);
  const MatrixXd pred = model.F * filt * model.F.transpose() + model.G * model.Q * model.G.transpose();
  CHECK((pred - r.P_pred).norm() < 1e-10);
  CHECK((filt - r.P_filt).norm() < 1e-10);
}

TEST_CASE("Riccati traces settle monotonically") {
  const auto model = stable_tracking();
  const SensorModel s = paper_sensor(0, 0.3);
  MatrixXd P = model.Pi0;
  std::vector<double> deltas;
  for (int i = 0; i < 400; ++i) {
    const MatrixXd next = model.F * covariance_update(P, s) * model.F.transpose() + model.G * model.Q * model.G.transpose();
    deltas.push_back(std::abs(next.trace() - P.trace()));
    P = next;
  }
  for (std::size_t i = 50; i + 1 < deltas.size(); ++i) CHECK(deltas[i + 1] <= deltas[i] * (1 + 1e-9) + 1e-15);
}

TEST_CASE("tracking model with a single own sensor has no fixed point") {
  // The first state entry is not observed by either sensor type and F has a
  // unit eigenvalue on it, so its error variance grows without bound.
  const auto model = paper_model();
  const std::vector<SensorModel> s{paper_sensor(0, 0.2)};
  const auto r = iterate_riccati(model, s, 1e-10, 5000);
  CHECK_FALSE(r.converged);
  CHECK(r.last_delta > 0);
  std::string message;
  try {
    solve_riccati(model, s, 1e-10, 5000);
  } catch (const NumericError& e) {
    message = e.what();
  }
  CHECK(message.find("last delta") != std::string::npos);
}

TEST_CASE("neighborhood Riccati mode uses every neighbor's sensor") {
  Toy toy;
  const auto own = solve_riccati(toy.model, toy.sensors, toy.topology, 0, RiccatiMode::kOwnData, 1e-13, 100000);
  const auto hood = solve_riccati(toy.model, toy.sensors, toy.topology, 0, RiccatiMode::kNeighborhood, 1e-13, 100000);
  const auto direct = solve_riccati(toy.model, toy.sensors, 1e-13, 100000);
  CHECK((hood.P_pred - direct.P_pred).norm() < 1e-11);
  CHECK(hood.P_pred.trace() < own.P_pred.trace());
}

TEST_CASE("combination patterns") {
  const auto topo = generate_topology(6, 3.0, 12);
  const auto w = uniform_weights(topo);
  const int M = 4;

  SUBCASE("everything shared") {
    const auto B = build_b_patterns(topo, w, build_partition(M, M));
    REQUIRE(B.size() == 1);
    const MatrixXd expect = Eigen::kroneckerProduct(w.C.transpose(), MatrixXd::Identity(M, M));
    CHECK((B[0] - expect).norm() < 1e-15);
    const auto bk = expected_b_kron(B, Scheme::kSequential);
    const MatrixXd Bt = B[0].transpose();
    CHECK((bk - Eigen::kroneckerProduct(Bt, Bt).eval()).norm() < 1e-15);
  }
  SUBCASE("nothing shared") {
    const auto B = build_b_patterns(topo, w, build_partition(M, 0));
    REQUIRE(B.size() == 1);
    CHECK(B[0] == MatrixXd::Identity(6 * M, 6 * M));
    CHECK(expected_b_kron(B, Scheme::kStochastic) == MatrixXd::Identity(36 * M * M, 36 * M * M));
  }
  SUBCASE("block rows sum to the identity") {
    for (int L = 0; L <= M; ++L) {
      for (const auto& B : build_b_patterns(topo, w, build_partition(M, L))) {
        for (int p = 0; p < 6; ++p) {
          MatrixXd sum = MatrixXd::Zero(M, M);
          for (int q = 0; q < 6; ++q) sum += B.block(p * M, q * M, M, M);
          CHECK((sum - MatrixXd::Identity(M, M)).norm() < 1e-15);
        }
      }
    }
  }
  SUBCASE("two-node line, one entry per pattern") {
    const auto line = Topology::from_edges(2, {{0, 1}});
    const auto B = build_b_patterns(line, uniform_weights(line), build_partition(2, 1));
    REQUIRE(B.size() == 2);
    const double c = 0.5;
    MatrixXd expect(4, 4);
    expect << 1 - c, 0, c, 0,
              0,     1, 0, 0,
              c,     0, 1 - c, 0,
              0,     0, 0, 1;
    CHECK((B[0] - expect).norm() < 1e-15);
    const auto bk = expected_b_kron(B, Scheme::kSequential);
    MatrixXd mean = MatrixXd::Zero(16, 16);
    for (const auto& b : B) mean += Eigen::kroneckerProduct(MatrixXd(b.transpose()), MatrixXd(b.transpose())).eval();
    CHECK((bk - mean / 2).norm() < 1e-15);
    CHECK(expected_b_kron(B, Scheme::kStochastic) == bk);
  }
}

TEST_CASE("closed-form MSD") {
  SUBCASE("single node equals the steady-state filtered covariance trace") {
    const auto model = stable_tracking();
    const std::vector<SensorModel> s{paper_sensor(0, 0.2)};
    const Topology topo(1);
    const auto ss = steady_state(model, s, topo, RiccatiMode::kOwnData, 1e-13, 100000);
    const auto B = build_b_patterns(topo, uniform_weights(topo), build_partition(4, 2));
    const auto theory = theoretical_network_msd(ss, expected_b_kron(B, Scheme::kSequential), model, s);
    const auto ric = solve_riccati(model, s, 1e-13, 100000);
    CHECK(theory.msd_network == doctest::Approx(ric.P_filt.trace()).epsilon(1e-9));
  }

  SUBCASE("noiseless limit") {
    Toy toy;
    toy.model.Q.setZero();
    for (auto& s : toy.sensors) s.R *= 1e-12;
    const auto ss = steady_state(toy.model, toy.sensors, toy.topology, RiccatiMode::kOwnData, 1e-14, 100000);
    const auto B = build_b_patterns(toy.topology, toy.weights, build_partition(2, 1));
    const auto theory = theoretical_network_msd(ss, expected_b_kron(B, Scheme::kSequential), toy.model, toy.sensors);
    CHECK(theory.msd_network >= 0);
    CHECK(theory.msd_network < 1e-9);
  }

  SUBCASE("agrees with the matrix-form covariance recursion") {
    Five net;
    const auto ss = net.steady();
    for (int L : {0, 1, 2, 4}) {
      const auto patterns = build_b_patterns(net.topology, net.weights, build_partition(4, L));
      const auto theory = theoretical_network_msd(ss, expected_b_kron(patterns, Scheme::kSequential), net.model,
                                                  net.sensors);
      const VectorXd ref = oracle::covariance_recursion_msd(patterns, ss.Fcal, theory.K + theory.Lmat, 5);
      CHECK((theory.msd_per_node - ref).norm() <= 1e-8 * ref.norm());
      CHECK(theory.msd_network == doctest::Approx(theory.msd_per_node.mean()).epsilon(1e-14));
    }
  }

  SUBCASE("series and direct solvers agree") {
    Five net;
    const auto ss = net.steady();
    const MatrixXd bk = net.bfrak(2);
    const auto direct = theoretical_network_msd(ss, bk, net.model, net.sensors, MsdSolver::kDirect);
    const auto series = theoretical_network_msd(ss, bk, net.model, net.sensors, MsdSolver::kSeries);
    CHECK((direct.msd_per_node - series.msd_per_node).norm() <= 1e-9 * direct.msd_per_node.norm());
  }

  SUBCASE("no sharing gives each node its own filter") {
    Five net;
    const auto ss = net.steady();
    const auto theory = theoretical_network_msd(ss, net.bfrak(0), net.model, net.sensors);
    for (int k = 0; k < 5; ++k) CHECK(theory.msd_per_node(k) == doctest::Approx(ss.P_filt[k].trace()).epsilon(1e-9));
  }

  SUBCASE("sharing more entries does not hurt on this network") {
    Five net;
    const auto ss = net.steady();
    double previous = std::numeric_limits<double>::infinity();
    for (int L : {0, 1, 2, 4}) {
      const double v = theoretical_network_msd(ss, net.bfrak(L), net.model, net.sensors).msd_network;
      CHECK(v <= previous);
      previous = v;
    }
  }

  SUBCASE("mean pattern approximates the periodic steady state of sequential selection") {
    Five net;
    const auto ss = net.steady();
    const auto patterns = build_b_patterns(net.topology, net.weights, build_partition(4, 1));
    const auto theory = theoretical_network_msd(ss, expected_b_kron(patterns, Scheme::kSequential), net.model,
                                                net.sensors);
    const VectorXd periodic = oracle::periodic_recursion_msd(patterns, ss.Fcal, theory.K + theory.Lmat, 5, 2000);
    for (int k = 0; k < 5; ++k)
      CHECK(std::abs(10 * std::log10(theory.msd_per_node(k) / periodic(k))) < 0.25);
  }

  SUBCASE("unstable recursion is rejected") {
    const std::vector<SensorModel> s{paper_sensor(0, 0.2)};
    const Topology topo(1);
    const auto ss = steady_state(paper_model(), s, topo, RiccatiMode::kOwnData, 1e-10, 2000, false);
    CHECK_FALSE(ss.converged);
    const auto B = build_b_patterns(topo, uniform_weights(topo), build_partition(4, 1));
    CHECK_THROWS_AS(theoretical_network_msd(ss, expected_b_kron(B, Scheme::kSequential), paper_model(), s),
                    NumericError);
    CHECK_THROWS_AS(steady_state(paper_model(), s, topo, RiccatiMode::kOwnData, 1e-10, 2000), NumericError);
  }
}

TEST_CASE("stability report") {
  SUBCASE("contracting dynamics") {
    Toy toy;
    toy.model.F = 0.5 * MatrixXd::Identity(2, 2);
    const auto ss = steady_state(toy.model, toy.sensors, toy.topology, RiccatiMode::kOwnData, 1e-13, 10000);
    const auto B = build_b_patterns(toy.topology, toy.weights, build_partition(2, 0));
    const auto rep = stability_report(ss, expected_b_kron(B, Scheme::kSequential), toy.model);
    CHECK(rep.rho_F == doctest::Approx(0.5));
    const double rho_f = Eigen::EigenSolver<MatrixXd>(ss.Fcal).eigenvalues().cwiseAbs().maxCoeff();
    CHECK(rep.rho_loop == doctest::Approx(rho_f * rho_f).epsilon(1e-10));
    CHECK(rep.stable);
  }
  SUBCASE("tracking model") {
    const std::vector<SensorModel> s{paper_sensor(0, 0.2), paper_sensor(1, 0.2)};
    const auto topo = Topology::from_edges(2, {{0, 1}});
    const auto ss = steady_state(paper_model(), s, topo, RiccatiMode::kOwnData, 1e-10, 2000, false);
    const auto B = build_b_patterns(topo, uniform_weights(topo), build_partition(4, 2));
    const auto rep = stability_report(ss, expected_b_kron(B, Scheme::kSequential), paper_model());
    CHECK(rep.rho_F == doctest::Approx(1.0).epsilon(1e-12));
    CHECK_FALSE(rep.stable);
  }
  SUBCASE("power iteration agrees with the dense eigensolver") {
    Five big;  // MN = 20, dense path
    const auto ss = big.steady();
    const MatrixXd bk = big.bfrak(1);
    const MatrixXd Ft = ss.Fcal.transpose();
    const MatrixXd A = Eigen::kroneckerProduct(Ft, Ft).eval() * bk;
    const double dense = Eigen::EigenSolver<MatrixXd>(A).eigenvalues().cwiseAbs().maxCoeff();
    CHECK(loop_spectral_radius(ss, bk) == doctest::Approx(dense).epsilon(1e-8));
  }
}

TEST_CASE("toy network Monte Carlo matches the closed form") {
  Toy toy;
  const auto ss = steady_state(toy.model, toy.sensors, toy.topology, RiccatiMode::kOwnData, 1e-14, 100000);
  const auto partition = build_partition(2, 1);
  const auto patterns = build_b_patterns(toy.topology, toy.weights, partition);
  const double theory =
      theoretical_network_msd(ss, expected_b_kron(patterns, Scheme::kStochastic), toy.model, toy.sensors).msd_network;

  const int runs = 500;
  const long T = 10000, W = 1000;
  TrajectorySampler sampler(toy.model, toy.sensors);
  double acc_stoch = 0, acc_seq = 0;
  for (int r = 0; r < runs; ++r) {
    const auto traj = sampler.sample(T - 1, derive_seed(17, SeedStream::kTrajectory, r));
    NetworkFilter stoch(toy.model, toy.sensors, toy.topology, toy.weights,
                        SelectionSchedule(Scheme::kStochastic, partition, true, derive_seed(17, SeedStream::kSchedule, r)),
                        FilterMode::kPartialDiffusion);
    NetworkFilter seq(toy.model, toy.sensors, toy.topology, toy.weights,
                      SelectionSchedule(Scheme::kSequential, partition), FilterMode::kPartialDiffusion);
    std::vector<VectorXd> obs(2);
    for (long i = 0; i < T; ++i) {
      for (int k = 0; k < 2; ++k) obs[k] = traj.observations[k][i];
      stoch.step(i, obs);
      seq.step(i, obs);
      if (i >= T - W) {
        for (int k = 0; k < 2; ++k) {
          acc_stoch += (traj.states[i] - stoch.node(k).x_filt).squaredNorm();
          acc_seq += (traj.states[i] - seq.node(k).x_filt).squaredNorm();
        }
      }
    }
  }
  const double emp_stoch = acc_stoch / (runs * W * 2.0);
  const double emp_seq = acc_seq / (runs * W * 2.0);
  MESSAGE("theory " << theory << ", stochastic " << emp_stoch << ", sequential " << emp_seq);
  CHECK(std::abs(emp_stoch / theory - 1) < 0.05);
  CHECK(std::abs(emp_seq / theory - 1) < 0.05);
}
