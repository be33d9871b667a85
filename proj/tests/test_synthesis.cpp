#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "declqr/synthesis.hpp"
#include "test_support.hpp"

using namespace declqr;

namespace {

Matrix m1(double v) {
  Matrix M(1, 1);
  M << v;
  return M;
}

// Two-node cascade: node 1 feeds node 2 through both dynamics and (for
// beta != 0) the input matrix; rho couples the input weights.
PartitionedPlant two_node(double beta, double rho) {
  Dag d;
  d.node_count = 2;
  d.edges = {{1, 2}};
  d.state_sizes = {1, 1};
  d.input_sizes = {1, 1};
  Matrix A(2, 2), B(2, 2), Q(2, 2), R(2, 2);
  A << 1, 0, 1, 1;
  B << 1, 0, beta, 1;
  Q << 3, 1, 1, 3;
  R << 100, rho, rho, 100;
  return make_partitioned_plant(d, A, B, Q, R);
}

PartitionedPlant diamond_plant(unsigned seed) {
  std::mt19937_64 rng(seed);
  Dag d;
  d.node_count = 4;
  d.edges = {{1, 2}, {1, 3}, {2, 4}, {3, 4}};
  d.state_sizes = {1, 1, 1, 1};
  d.input_sizes = {1, 1, 1, 1};
  const ClosureTable c = transitive_closure(d);
  Matrix A = Matrix::Zero(4, 4);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      if (c.S(i, j) == 1) A(i, j) = testsup::uni(rng, -1.0, 1.0);
  Matrix B = Matrix::Zero(4, 4);
  for (int i = 0; i < 4; ++i) B(i, i) = testsup::uni(rng, 0.5, 1.5);
  const Matrix M = testsup::rand_matrix(rng, 4, 4);
  const Matrix Q = M.transpose() * M + 0.5 * Matrix::Identity(4, 4);
  Matrix R = Matrix::Zero(4, 4);
  for (int i = 0; i < 4; ++i) R(i, i) = testsup::uni(rng, 0.5, 2.0);
  return make_partitioned_plant(d, A, B, Q, R);
}

}  // namespace

TEST_CASE("plant construction validates structure and hypotheses") {
  const PartitionedPlant ok = two_node(0.5, 10.0);
  REQUIRE(ok.state_dim() == 2);
  REQUIRE(ok.input_dim() == 2);
  REQUIRE(ok.node_count() == 2);

  Dag d;
  d.node_count = 2;
  d.edges = {{1, 2}};
  d.state_sizes = {1, 1};
  d.input_sizes = {1, 1};
  Matrix A(2, 2), B(2, 2), Q(2, 2), R(2, 2);
  A << 1, 0.3, 1, 1;  // (row node 1, col node 2) is unreachable: forbidden
  B.setIdentity();
  Q.setIdentity();
  R.setIdentity();
  REQUIRE_THROWS_WITH(make_partitioned_plant(d, A, B, Q, R),
                      Catch::Matchers::ContainsSubstring("(1, 2)"));

  A << 1, 0, 1, 1;
  B << 1, 0.3, 0, 1;
  REQUIRE_THROWS_WITH(make_partitioned_plant(d, A, B, Q, R),
                      Catch::Matchers::ContainsSubstring("B block"));

  B.setIdentity();
  Matrix Rbad(2, 2);
  Rbad << 1, 2, 2, 1;
  REQUIRE_THROWS_AS(make_partitioned_plant(d, A, B, Q, Rbad), std::invalid_argument);

  Matrix Qbad(2, 2);
  Qbad << 1, 0.5, 0, 1;
  REQUIRE_THROWS_AS(make_partitioned_plant(d, A, B, Qbad, R), std::invalid_argument);
}

TEST_CASE("plant construction names the node that breaks well-posedness") {
  Dag d;
  d.node_count = 2;
  d.state_sizes = {1, 1};
  d.input_sizes = {1, 1};
  Matrix A = Matrix::Identity(2, 2);  // both nodes unstable, no coupling
  Matrix B = Matrix::Zero(2, 2);
  B(0, 0) = 1.0;  // node 2 has no actuation
  REQUIRE_THROWS_WITH(
      make_partitioned_plant(d, A, B, Matrix::Identity(2, 2), Matrix::Identity(2, 2)),
      Catch::Matchers::ContainsSubstring("node 2"));

  Matrix Q = Matrix::Zero(2, 2);
  Q(0, 0) = 1.0;  // node 2's unstable state carries no cost: undetectable
  REQUIRE_THROWS_WITH(
      make_partitioned_plant(d, A, Matrix::Identity(2, 2), Q, Matrix::Identity(2, 2)),
      Catch::Matchers::ContainsSubstring("node 2"));
}

TEST_CASE("descendant subsystems pick the reachable block structure") {
  const PartitionedPlant plant = diamond_plant(5);
  const NodeSubsystem sub = descendant_subsystem(plant, 2);
  REQUIRE(sub.nodes == std::vector<int>{2, 4});
  Matrix expectA(2, 2);
  expectA << plant.A(1, 1), 0, plant.A(3, 1), plant.A(3, 3);
  REQUIRE((sub.A - expectA).norm() == 0.0);
  REQUIRE(sub.B(0, 0) == plant.B(1, 1));
  REQUIRE(sub.B(1, 1) == plant.B(3, 3));
  REQUIRE(sub.Q(0, 0) == plant.Q(1, 1));
  REQUIRE(sub.Q(0, 1) == plant.Q(1, 3));
  REQUIRE(sub.R(1, 1) == plant.R(3, 3));

  const NodeSubsystem leaf = descendant_subsystem(plant, 4);
  REQUIRE(leaf.nodes == std::vector<int>{4});
  REQUIRE(leaf.A(0, 0) == plant.A(3, 3));
}

TEST_CASE("single-node synthesis reduces to the centralized regulator") {
  std::mt19937_64 rng(42);
  const testsup::Instance ins = testsup::random_instance(rng, 3, 2);
  Dag d;
  d.node_count = 1;
  d.state_sizes = {static_cast<int>(ins.A.rows())};
  d.input_sizes = {static_cast<int>(ins.B.cols())};
  const PartitionedPlant plant = make_partitioned_plant(d, ins.A, ins.B, ins.Q, ins.R);
  const DecentralizedController ctrl = synthesize(plant);
  const CareSolution direct = solve_care(ins.A, ins.B, ins.Q, ins.R);

  REQUIRE(ctrl.internal_dim() == 0);
  REQUIRE(ctrl.A_K.rows() == 0);
  REQUIRE((ctrl.D_K - direct.F).norm() <= 1e-12 * std::max(1.0, direct.F.norm()));
  REQUIRE((closed_loop_state_matrix(plant, ctrl) - (ins.A + ins.B * direct.F)).norm() <=
          1e-12 * std::max(1.0, ins.A.norm()));

  const StateSpaceModel L = loop_gain_dec(plant, ctrl);
  const StateSpaceModel Lc = lqr_loop_gain(ins.A, ins.B, direct.F);
  for (double w : {0.0, 0.1, 1.0, 10.0}) {
    const Complex s(0, w);
    REQUIRE((L.evaluate(s) - Lc.evaluate(s)).norm() <=
            1e-10 * std::max(1.0, Lc.evaluate(s).norm()));
  }
}

TEST_CASE("two-node realization matches the eliminated formulas") {
  const PartitionedPlant plant = two_node(0.0, 0.0);
  const DecentralizedController ctrl = synthesize(plant);

  // Node 2's design is the scalar problem (1, 1, 3, 100).
  const double f2 = -(100.0 + std::sqrt(10300.0)) / 100.0;
  REQUIRE(ctrl.gains[1](0, 0) == Catch::Approx(f2).epsilon(1e-9));

  // Node 1's design is the full two-state problem.
  const CareSolution top = solve_care(plant.A, plant.B, plant.Q, plant.R);
  const Matrix F1 = ctrl.gains[0];
  REQUIRE((F1 - top.F).norm() <= 1e-9 * std::max(1.0, top.F.norm()));

  // Eliminating the prediction/correction variables by hand gives these
  // closed forms for the one-state realization (beta = 0).
  REQUIRE(ctrl.internal_dim() == 1);
  REQUIRE(ctrl.A_K(0, 0) == Catch::Approx(1.0 + F1(1, 1)).margin(1e-12));
  REQUIRE(ctrl.B_K(0, 0) == Catch::Approx(1.0 + F1(1, 0)).margin(1e-12));
  REQUIRE(ctrl.B_K(0, 1) == 0.0);
  REQUIRE(ctrl.C_K(0, 0) == Catch::Approx(F1(0, 1)).margin(1e-12));
  REQUIRE(ctrl.C_K(1, 0) == Catch::Approx(F1(1, 1) - f2).margin(1e-9));
  REQUIRE(ctrl.D_K(0, 0) == Catch::Approx(F1(0, 0)).margin(1e-12));
  REQUIRE(ctrl.D_K(0, 1) == 0.0);
  REQUIRE(ctrl.D_K(1, 0) == Catch::Approx(F1(1, 0)).margin(1e-12));
  REQUIRE(ctrl.D_K(1, 1) == Catch::Approx(f2).epsilon(1e-9));

  // The loop spectrum splits into the two nodes' designs.
  const Matrix acl = closed_loop_state_matrix(plant, ctrl);
  const Spectrum got = eigenvalues(acl);
  const Spectrum top_spec = eigenvalues(plant.A + plant.B * top.F);
  ComplexVector expected(3);
  expected << top_spec.values(0), top_spec.values(1), Complex(1.0 + f2, 0.0);
  REQUIRE(testsup::spectrum_multiset_gap(got.values, expected) < 1e-8);
}

TEST_CASE("per-node gain dimensions are enforced") {
  const PartitionedPlant plant = two_node(0.0, 0.0);
  std::vector<Matrix> gains(2);
  gains[0] = Matrix::Zero(2, 2);
  gains[1] = Matrix::Zero(2, 2);  // node 2's subsystem is 1x1
  REQUIRE_THROWS_WITH(assemble_controller(plant, gains),
                      Catch::Matchers::ContainsSubstring("node 2"));
  gains[1] = m1(std::numeric_limits<double>::quiet_NaN());
  REQUIRE_THROWS_AS(assemble_controller(plant, gains), std::invalid_argument);
  gains.pop_back();
  REQUIRE_THROWS_AS(assemble_controller(plant, gains), std::invalid_argument);
}

TEST_CASE("surrogate coordinates decouple the closed loop") {
  for (unsigned seed : {5u, 6u, 7u}) {
    const PartitionedPlant plant = diamond_plant(seed);
    const DecentralizedController ctrl = synthesize(plant);
    const int n = plant.state_dim();
    const int ne = ctrl.internal_dim();
    const Matrix acl = closed_loop_state_matrix(plant, ctrl);

    // Stack the per-node surrogate reads into one square change of basis T;
    // the closed loop must block-diagonalize: T acl = blkdiag(Mbar_j) T.
    Matrix T(n + ne, n + ne);
    Matrix blk = Matrix::Zero(n + ne, n + ne);
    int at = 0;
    ComplexVector expected(n + ne);
    int ei = 0;
    for (int j = 1; j <= plant.node_count(); ++j) {
      const NodeSubsystem sub = descendant_subsystem(plant, j);
      const Matrix closed = sub.A + sub.B * ctrl.gains[j - 1];
      const int nd = static_cast<int>(closed.rows());
      T.middleRows(at, nd) << ctrl.state_selector[j - 1], ctrl.internal_selector[j - 1];
      blk.block(at, at, nd, nd) = closed;
      const Spectrum sj = eigenvalues(closed);
      for (int k = 0; k < nd; ++k) expected(ei++) = sj.values(k);
      at += nd;
    }
    REQUIRE(at == n + ne);
    CAPTURE(seed);
    REQUIRE((T * acl - blk * T).norm() <= 1e-10 * std::max(1.0, acl.norm()));
    REQUIRE(Eigen::FullPivLU<Matrix>(T).isInvertible());

    // Consequently the loop spectrum is the union of the per-node designs.
    const Spectrum got = eigenvalues(acl);
    REQUIRE(testsup::spectrum_multiset_gap(got.values, expected) <=
            1e-7 * std::max(1.0, acl.norm()));
    REQUIRE(is_hurwitz(acl));
  }
}

TEST_CASE("simulated surrogate trajectories follow their own dynamics") {
  const PartitionedPlant plant = diamond_plant(9);
  const DecentralizedController ctrl = synthesize(plant);
  const int n = plant.state_dim();
  const int ne = ctrl.internal_dim();
  const Matrix acl = closed_loop_state_matrix(plant, ctrl);

  // Integrate z' = acl z with RK4 and store the trajectory.
  const double h = 1e-3;
  const int steps = 1000;
  std::mt19937_64 rng(17);
  Matrix z = testsup::rand_matrix(rng, n + ne, 1);
  std::vector<Matrix> traj;
  traj.reserve(steps + 1);
  traj.push_back(z);
  for (int s = 0; s < steps; ++s) {
    const Matrix k1 = acl * z;
    const Matrix k2 = acl * (z + 0.5 * h * k1);
    const Matrix k3 = acl * (z + 0.5 * h * k2);
    const Matrix k4 = acl * (z + h * k3);
    z += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    traj.push_back(z);
  }

  // At interior samples, a fourth-order central difference of xi_j must
  // match Mbar_j xi_j: each surrogate evolves autonomously.
  for (int j = 1; j <= plant.node_count(); ++j) {
    const NodeSubsystem sub = descendant_subsystem(plant, j);
    const Matrix closed = sub.A + sub.B * ctrl.gains[j - 1];
    auto xi = [&](int k) -> Matrix {
      const Matrix& zk = traj[k];
      return ctrl.state_selector[j - 1] * zk.topRows(n) +
             ctrl.internal_selector[j - 1] * zk.bottomRows(ne);
    };
    for (int k : {200, 500, 900}) {
      const Matrix deriv =
          (xi(k - 2) - 8.0 * xi(k - 1) + 8.0 * xi(k + 1) - xi(k + 2)) / (12.0 * h);
      const Matrix expect = closed * xi(k);
      CAPTURE(j, k);
      REQUIRE((deriv - expect).norm() <= 1e-8 * std::max(1.0, expect.norm()));
    }
  }
}

TEST_CASE("loop gain closes back to the closed loop") {
  const PartitionedPlant plant = diamond_plant(5);
  const DecentralizedController ctrl = synthesize(plant);
  const StateSpaceModel L = loop_gain_dec(plant, ctrl);
  // Unit positive feedback around L: A + B C reproduces the closed-loop
  // state matrix in the same coordinates.
  const Matrix closed_again = L.A + L.B * L.C;
  REQUIRE((closed_again - closed_loop_state_matrix(plant, ctrl)).norm() <=
          1e-12 * std::max(1.0, closed_again.norm()));
}

TEST_CASE("controller and loop maps respect the information constraint") {
  const PartitionedPlant plant = diamond_plant(5);
  const DecentralizedController ctrl = synthesize(plant);
  const FrequencyGrid grid = FrequencyGrid::standard(50);

  const InfoConstraintReport k_rep = verify_information_constraint(
      ctrl.realization(), plant.closure, plant.input_part, plant.state_part, grid);
  REQUIRE(k_rep.conformant());

  const InfoConstraintReport l_rep = verify_information_constraint(
      loop_gain_dec(plant, ctrl), plant.closure, plant.input_part, plant.input_part, grid);
  REQUIRE(l_rep.conformant());

  const InfoConstraintReport h_rep = verify_information_constraint(
      closed_loop_input_map(plant, ctrl), plant.closure, plant.input_part, plant.input_part,
      grid);
  REQUIRE(h_rep.conformant());

  // A dense centralized design is not conformant and must be flagged.
  const CareSolution central = solve_care(plant.A, plant.B, plant.Q, plant.R);
  const StateSpaceModel Hc = lqr_closed_loop_map(plant.A, plant.B, central.F);
  const InfoConstraintReport c_rep = verify_information_constraint(
      Hc, plant.closure, plant.input_part, plant.input_part, grid);
  REQUIRE_FALSE(c_rep.conformant());
}

TEST_CASE("information check skips pole frequencies") {
  Dag d;
  d.node_count = 2;
  d.state_sizes = {1, 1};
  d.input_sizes = {1, 1};
  const ClosureTable c = transitive_closure(d);
  Matrix A(2, 2);
  A << 0, 1, -1, 0;  // poles exactly at +-j
  const StateSpaceModel G = StateSpaceModel::make(A, Matrix::Identity(2, 2),
                                                  Matrix::Identity(2, 2), Matrix::Zero(2, 2));
  const BlockPartition p = BlockPartition::from_sizes({1, 1});
  const InfoConstraintReport rep =
      verify_information_constraint(G, c, p, p, FrequencyGrid::from_points({1.0}));
  REQUIRE(rep.skipped == std::vector<double>{1.0});
  REQUIRE(rep.conformant());  // the only offending sample was skipped
  const InfoConstraintReport rep2 =
      verify_information_constraint(G, c, p, p, FrequencyGrid::from_points({0.5, 1.0}));
  REQUIRE_FALSE(rep2.conformant());  // the resolvent of this A is dense
}

TEST_CASE("quadratic cost rate on closed forms") {
  Dag d;
  d.node_count = 1;
  d.state_sizes = {1};
  d.input_sizes = {1};
  const PartitionedPlant plant =
      make_partitioned_plant(d, m1(0), m1(1), m1(1), m1(1));
  const DecentralizedController ctrl = synthesize(plant);
  const NoiseSpec noise = unit_noise(plant.state_part);
  // Closed loop x' = -x + w: variance 1/2, cost = q var + r f^2 var = 1.
  REQUIRE(h2_cost(plant, ctrl, noise) == Catch::Approx(1.0).epsilon(1e-9));
  REQUIRE(h2_cost(plant, m1(-1.0), noise) == Catch::Approx(1.0).epsilon(1e-9));
  const NoiseSpec none = make_noise_spec(plant.state_part, Matrix::Zero(1, 1));
  REQUIRE(h2_cost(plant, ctrl, none) == 0.0);

  // An unstable static gain has no finite cost rate.
  REQUIRE_THROWS_AS(h2_cost(plant, m1(0.5), noise), std::runtime_error);
}

TEST_CASE("noise intensities must be block diagonal") {
  const BlockPartition p = BlockPartition::from_sizes({1, 1});
  Matrix W(2, 2);
  W << 1, 0.2, 0.2, 1;
  REQUIRE_THROWS_WITH(make_noise_spec(p, W),
                      Catch::Matchers::ContainsSubstring("block"));
  REQUIRE((unit_noise(p).W - Matrix::Identity(2, 2)).norm() == 0.0);
  Matrix neg(2, 2);
  neg << -1, 0, 0, 1;
  REQUIRE_THROWS_AS(make_noise_spec(p, neg), std::invalid_argument);
}

TEST_CASE("decentralized cost sits between the centralized bound and detuned gains") {
  const PartitionedPlant plant = two_node(0.0, 0.0);
  const DecentralizedController ctrl = synthesize(plant);
  const NoiseSpec noise = unit_noise(plant.state_part);
  const double dec = h2_cost(plant, ctrl, noise);

  const CareSolution central = solve_care(plant.A, plant.B, plant.Q, plant.R);
  const double cen = h2_cost(plant, central.F, noise);
  REQUIRE(dec >= cen - 1e-9);

  // A slightly detuned but structure-respecting static gain cannot beat the
  // synthesized controller.
  Matrix F = Matrix::Zero(2, 2);
  F(0, 0) = central.F(0, 0) * 1.05;
  F(1, 0) = central.F(1, 0);
  F(1, 1) = central.F(1, 1) * 0.95;
  if (is_hurwitz(plant.A + plant.B * F)) REQUIRE(dec <= h2_cost(plant, F, noise) + 1e-12);
}
