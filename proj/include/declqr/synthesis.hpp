#pragma once

#include <algorithm>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "declqr/plant.hpp"

namespace declqr {

// Decentralized state-feedback controller over a DAG. Each node j runs the
// optimal regulator of its descendant subsystem on a surrogate state
// xi_j = [c_j; eta_j]: eta_j simulates the strict-descendant states forward
// under that regulator (prediction), and c_j = x_j - sum of the ancestors'
// predictions of x_j (correction), so each node only reads its own state and
// internal variables received from its ancestors.
//
// Eliminating the definitions gives an LTI realization
//   eta' = A_K eta + B_K x,   u = C_K eta + D_K x
// whose transfer matrix is conformant to the reachability structure.
struct DecentralizedController {
  std::vector<std::vector<int>> des_sets;    // descendant set per node
  std::vector<Matrix> gains;                 // F_j for the subsystem of node j
  std::vector<Matrix> predictors;            // strict-descendant rows of A_j + B_j F_j
  std::vector<Matrix> state_selector;        // xi_j = state_selector[j] x + ...
  std::vector<Matrix> internal_selector;     //        ... + internal_selector[j] eta
  std::vector<CareSolution> node_solutions;  // filled by synthesize()
  BlockPartition eta_part;                   // per-node internal dimensions (may be 0)
  Matrix A_K, B_K, C_K, D_K;

  int internal_dim() const { return eta_part.total(); }
  StateSpaceModel realization() const { return StateSpaceModel::make(A_K, B_K, C_K, D_K); }
};

// Builds the realization for externally supplied per-node gains. Gain j must
// act on the descendant subsystem of node j (input rows, state columns).
inline DecentralizedController assemble_controller(const PartitionedPlant& plant,
                                                   std::vector<Matrix> gains) {
  const int N = plant.node_count();
  if (static_cast<int>(gains.size()) != N)
    throw std::invalid_argument("need one gain per node");

  DecentralizedController ctrl;
  ctrl.des_sets.resize(N);
  ctrl.predictors.resize(N);
  ctrl.state_selector.resize(N);
  ctrl.internal_selector.resize(N);

  std::vector<int> eta_sizes(N);
  std::vector<BlockPartition> xi_parts(N);
  for (int j = 1; j <= N; ++j) {
    ctrl.des_sets[j - 1] = descendants(plant.closure, j);
    xi_parts[j - 1] = sub_partition(ctrl.des_sets[j - 1], plant.state_part);
    eta_sizes[j - 1] = xi_parts[j - 1].total() - plant.state_part.size_of(j);
  }
  ctrl.eta_part = BlockPartition::from_sizes(eta_sizes);
  const int n = plant.state_dim();
  const int m = plant.input_dim();
  const int ne = ctrl.eta_part.total();

  ctrl.A_K = Matrix::Zero(ne, ne);
  ctrl.B_K = Matrix::Zero(ne, n);
  ctrl.C_K = Matrix::Zero(m, ne);
  ctrl.D_K = Matrix::Zero(m, n);

  for (int j = 1; j <= N; ++j) {
    const auto& des = ctrl.des_sets[j - 1];
    const BlockPartition& xp = xi_parts[j - 1];
    const NodeSubsystem sub = descendant_subsystem(plant, j);
    const int nd = xp.total();
    const int md = sub.R.rows();
    Matrix& F = gains[j - 1];
    if (F.rows() != md || F.cols() != nd)
      throw std::invalid_argument("gain for node " + std::to_string(j) + " must be " +
                                  std::to_string(md) + "x" + std::to_string(nd));
    if (!F.allFinite())
      throw std::invalid_argument("gain for node " + std::to_string(j) + " is not finite");

    const int nj = plant.state_part.size_of(j);
    const Matrix closed = sub.A + sub.B * F;
    ctrl.predictors[j - 1] = closed.bottomRows(nd - nj);

    // xi_j as a linear read of (x, eta). The first block of xi_j is
    // c_j = x_j - sum over strict ancestors' predictions of x_j; the rest
    // is this node's own eta block.
    Matrix Gx = Matrix::Zero(nd, n);
    Matrix Ge = Matrix::Zero(nd, ne);
    Gx.topLeftCorner(nj, n).middleCols(plant.state_part.offset_of(j), nj).setIdentity();
    for (int anc : strict_ancestors(plant.closure, j)) {
      // position of x_j inside eta_anc = stacked strict descendants of anc
      const std::vector<int> sdes = strict_descendants(plant.closure, anc);
      const BlockPartition sp = sub_partition(sdes, plant.state_part);
      const auto it = std::find(sdes.begin(), sdes.end(), j);
      const int pos = static_cast<int>(it - sdes.begin());
      Ge.block(0, ctrl.eta_part.offset_of(anc) + sp.offsets[pos], nj, nj) =
          -Matrix::Identity(nj, nj);
    }
    Ge.block(nj, ctrl.eta_part.offset_of(j), nd - nj, nd - nj).setIdentity();
    ctrl.state_selector[j - 1] = Gx;
    ctrl.internal_selector[j - 1] = Ge;

    // eta_j' = predictor_j xi_j, stacked over nodes
    const int eo = ctrl.eta_part.offset_of(j);
    const int es = ctrl.eta_part.size_of(j);
    ctrl.A_K.middleRows(eo, es) = ctrl.predictors[j - 1] * Ge;
    ctrl.B_K.middleRows(eo, es) = ctrl.predictors[j - 1] * Gx;

    // u += scatter(des_j) F_j xi_j
    const Matrix scatter = gather_selector(des, plant.input_part).transpose();
    ctrl.C_K += scatter * F * Ge;
    ctrl.D_K += scatter * F * Gx;
  }
  ctrl.gains = std::move(gains);
  return ctrl;
}

// Per-node Riccati design: node j applies the optimal regulator of its
// descendant subsystem to its surrogate state.
inline DecentralizedController synthesize(const PartitionedPlant& plant) {
  const int N = plant.node_count();
  std::vector<Matrix> gains(N);
  std::vector<CareSolution> sols(N);
  for (int j = 1; j <= N; ++j) {
    const NodeSubsystem sub = descendant_subsystem(plant, j);
    try {
      sols[j - 1] = solve_care(sub.A, sub.B, sub.Q, sub.R);
    } catch (const std::exception& e) {
      throw std::runtime_error("Riccati design for node " + std::to_string(j) +
                               " failed: " + e.what());
    }
    gains[j - 1] = sols[j - 1].F;
  }
  DecentralizedController ctrl = assemble_controller(plant, std::move(gains));
  ctrl.node_solutions = std::move(sols);
  return ctrl;
}

// Closed-loop state matrix [[A + B D_K, B C_K], [B_K, A_K]] on (x, eta).
inline Matrix closed_loop_state_matrix(const PartitionedPlant& plant,
                                       const DecentralizedController& ctrl) {
  const int n = plant.state_dim();
  const int ne = ctrl.internal_dim();
  Matrix acl(n + ne, n + ne);
  acl.topLeftCorner(n, n) = plant.A + plant.B * ctrl.D_K;
  acl.topRightCorner(n, ne) = plant.B * ctrl.C_K;
  acl.bottomLeftCorner(ne, n) = ctrl.B_K;
  acl.bottomRightCorner(ne, ne) = ctrl.A_K;
  return acl;
}

// Closed loop from process noise w (entering at x') to the performance
// output [Q^{1/2} x; R^{1/2} u]. Throws if the loop is not Hurwitz.
inline StateSpaceModel closed_loop(const PartitionedPlant& plant,
                                   const DecentralizedController& ctrl) {
  const int n = plant.state_dim();
  const int m = plant.input_dim();
  const int ne = ctrl.internal_dim();
  const Matrix acl = closed_loop_state_matrix(plant, ctrl);
  if (!is_hurwitz(acl)) throw std::runtime_error("closed loop is not Hurwitz");
  Matrix Bn = Matrix::Zero(n + ne, n);
  Bn.topRows(n).setIdentity();
  const Matrix qh = matrix_sqrt_psd(plant.Q);
  const Matrix rh = matrix_sqrt_psd(plant.R);
  Matrix Cp = Matrix::Zero(n + m, n + ne);
  Cp.topLeftCorner(n, n) = qh;
  Cp.bottomLeftCorner(m, n) = rh * ctrl.D_K;
  Cp.bottomRightCorner(m, ne) = rh * ctrl.C_K;
  return StateSpaceModel::make(acl, std::move(Bn), std::move(Cp), Matrix::Zero(n + m, n));
}

// Loop transfer matrix broken at the plant input: u -> plant -> controller.
// Closing it with unit positive feedback reproduces the closed loop.
inline StateSpaceModel loop_gain_dec(const PartitionedPlant& plant,
                                     const DecentralizedController& ctrl) {
  const int n = plant.state_dim();
  const StateSpaceModel state_map = StateSpaceModel::make(
      plant.A, plant.B, Matrix::Identity(n, n), Matrix::Zero(n, plant.input_dim()));
  return series(state_map, ctrl.realization());
}

// Closed-loop map from an injection at the plant input to the control
// signal; its gain from any input block to itself governs that channel's
// robustness to input-side perturbations.
inline StateSpaceModel closed_loop_input_map(const PartitionedPlant& plant,
                                             const DecentralizedController& ctrl) {
  const int n = plant.state_dim();
  const int ne = ctrl.internal_dim();
  const int m = plant.input_dim();
  const Matrix acl = closed_loop_state_matrix(plant, ctrl);
  if (!is_hurwitz(acl)) throw std::runtime_error("closed loop is not Hurwitz");
  Matrix Bi = Matrix::Zero(n + ne, m);
  Bi.topRows(n) = plant.B;
  Matrix Ci(m, n + ne);
  Ci << ctrl.D_K, ctrl.C_K;
  return StateSpaceModel::make(acl, std::move(Bi), std::move(Ci), Matrix::Zero(m, m));
}

struct InfoFlag {
  int row_node = 0;
  int col_node = 0;
  double omega = 0.0;
  double block_norm = 0.0;
};

struct InfoConstraintReport {
  std::vector<InfoFlag> flags;
  std::vector<double> skipped;  // grid points on poles of the map
  bool conformant() const { return flags.empty(); }
};

// Samples a transfer matrix over the grid and flags any block that the
// reachability structure says must vanish but whose norm exceeds tol.
inline InfoConstraintReport verify_information_constraint(
    const StateSpaceModel& G, const ClosureTable& closure, const BlockPartition& row_part,
    const BlockPartition& col_part, const FrequencyGrid& grid, double tol = 1e-8) {
  if (row_part.count() != closure.node_count || col_part.count() != closure.node_count)
    throw std::invalid_argument("partitions must have one block per closure node");
  if (G.outputs() != row_part.total() || G.inputs() != col_part.total())
    throw std::invalid_argument("transfer matrix dimensions do not match the partitions");

  InfoConstraintReport report;
  ComplexVector poles(0);
  double pole_tol = 0.0;
  if (G.order() > 0) {
    poles = eigenvalues(G.A).values;
    pole_tol = 1e-8 * std::max(1.0, G.A.norm());
  }
  for (double w : grid.points) {
    bool near_pole = false;
    for (int i = 0; i < poles.size(); ++i)
      if (std::abs(Complex(0, w) - poles(i)) < pole_tol) { near_pole = true; break; }
    if (near_pole) {
      report.skipped.push_back(w);
      continue;
    }
    const ComplexMatrix val = G.evaluate(Complex(0, w));
    for (int i = 1; i <= closure.node_count; ++i)
      for (int j = 1; j <= closure.node_count; ++j) {
        if (closure.S(i - 1, j - 1) != 0) continue;
        const double nrm =
            spectral_norm(ComplexMatrix(val.block(row_part.offset_of(i), col_part.offset_of(j),
                                                  row_part.size_of(i), col_part.size_of(j))));
        if (nrm > tol) report.flags.push_back({i, j, w, nrm});
      }
  }
  return report;
}

// Steady-state quadratic cost rate E[x'Qx + u'Ru] under white process noise
// of intensity W: trace of the performance output covariance.
inline double h2_cost(const PartitionedPlant& plant, const DecentralizedController& ctrl,
                      const NoiseSpec& noise) {
  const int n = plant.state_dim();
  const int ne = ctrl.internal_dim();
  if (noise.W.rows() != n) throw std::invalid_argument("noise intensity must match the state");
  const Matrix acl = closed_loop_state_matrix(plant, ctrl);
  if (!is_hurwitz(acl))
    throw std::runtime_error("closed loop is not Hurwitz; the cost rate diverges");
  Matrix Wfull = Matrix::Zero(n + ne, n + ne);
  Wfull.topLeftCorner(n, n) = noise.W;
  const Matrix P = solve_lyapunov(acl.transpose(), Wfull);
  Matrix U(plant.input_dim(), n + ne);
  U << ctrl.D_K, ctrl.C_K;
  const Matrix Pxx = P.topLeftCorner(n, n);
  return (plant.Q * Pxx).trace() + (plant.R * U * P * U.transpose()).trace();
}

// Same cost for a static full-information gain u = Fx (not necessarily
// conformant to the structure; used for comparisons).
inline double h2_cost(const PartitionedPlant& plant, const Eigen::Ref<const Matrix>& F,
                      const NoiseSpec& noise) {
  if (F.rows() != plant.input_dim() || F.cols() != plant.state_dim())
    throw std::invalid_argument("static gain must be inputs x states");
  if (noise.W.rows() != plant.state_dim())
    throw std::invalid_argument("noise intensity must match the state");
  const Matrix acl = plant.A + plant.B * F;
  if (!is_hurwitz(acl))
    throw std::runtime_error("closed loop is not Hurwitz; the cost rate diverges");
  const Matrix P = solve_lyapunov(acl.transpose(), noise.W);
  return (plant.Q * P).trace() + (plant.R * F * P * F.transpose()).trace();
}

}  // namespace declqr
