#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "declqr/graph.hpp"
#include "declqr/lqr.hpp"

namespace declqr {

// LTI plant x' = Ax + Bu + w partitioned over a DAG. A and B are conformant
// to the reachability structure (block (i, j) may be nonzero only when node j
// reaches node i), Q is PSD, R is PD, and every descendant subsystem
// (A restricted to des(i), B likewise) is stabilizable with its cost
// detectable — the conditions under which per-node Riccati designs exist.
struct PartitionedPlant {
  Dag dag;
  ClosureTable closure;
  Matrix A, B, Q, R;
  BlockPartition state_part, input_part;

  int state_dim() const { return state_part.total(); }
  int input_dim() const { return input_part.total(); }
  int node_count() const { return closure.node_count; }
};

// The subsystem a node's controller reasons about: the plant restricted to
// the node's descendant set (which is closed under reachability).
struct NodeSubsystem {
  int node = 0;
  std::vector<int> nodes;
  Matrix A, B, Q, R;
};

inline NodeSubsystem descendant_subsystem(const PartitionedPlant& plant, int node) {
  NodeSubsystem sub;
  sub.node = node;
  sub.nodes = descendants(plant.closure, node);
  sub.A = extract_submatrix(plant.A, sub.nodes, sub.nodes, plant.state_part, plant.state_part);
  sub.B = extract_submatrix(plant.B, sub.nodes, sub.nodes, plant.state_part, plant.input_part);
  sub.Q = extract_submatrix(plant.Q, sub.nodes, sub.nodes, plant.state_part, plant.state_part);
  sub.R = extract_submatrix(plant.R, sub.nodes, sub.nodes, plant.input_part, plant.input_part);
  return sub;
}

inline PartitionedPlant make_partitioned_plant(const Dag& dag, Matrix A, Matrix B, Matrix Q,
                                               Matrix R, double sparsity_tol = 1e-9) {
  PartitionedPlant plant;
  plant.dag = dag;
  plant.closure = transitive_closure(dag);
  plant.state_part = BlockPartition::from_sizes(dag.state_sizes);
  plant.input_part = BlockPartition::from_sizes(dag.input_sizes);
  const int n = plant.state_part.total();
  const int m = plant.input_part.total();
  if (A.rows() != n || A.cols() != n)
    throw std::invalid_argument("A must be " + std::to_string(n) + "x" + std::to_string(n));
  if (B.rows() != n || B.cols() != m)
    throw std::invalid_argument("B must be " + std::to_string(n) + "x" + std::to_string(m));
  if (Q.rows() != n || Q.cols() != n)
    throw std::invalid_argument("Q must be " + std::to_string(n) + "x" + std::to_string(n));
  if (R.rows() != m || R.cols() != m)
    throw std::invalid_argument("R must be " + std::to_string(m) + "x" + std::to_string(m));
  detail::require_symmetric_psd(Q, "Q");
  detail::require_symmetric_pd(R, "R");

  const SparsityReport ra =
      validate_sparsity(A, plant.closure, plant.state_part, plant.state_part, sparsity_tol);
  if (!ra.conformant())
    throw std::invalid_argument(
        "A block (" + std::to_string(ra.violations[0].row_node) + ", " +
        std::to_string(ra.violations[0].col_node) + ") violates the reachability structure");
  const SparsityReport rb =
      validate_sparsity(B, plant.closure, plant.state_part, plant.input_part, sparsity_tol);
  if (!rb.conformant())
    throw std::invalid_argument(
        "B block (" + std::to_string(rb.violations[0].row_node) + ", " +
        std::to_string(rb.violations[0].col_node) + ") violates the reachability structure");

  plant.A = std::move(A);
  plant.B = std::move(B);
  plant.Q = std::move(Q);
  plant.R = std::move(R);

  for (int i = 1; i <= plant.node_count(); ++i) {
    const NodeSubsystem sub = descendant_subsystem(plant, i);
    if (!detail::pbh_stabilizable(sub.A, sub.B))
      throw std::invalid_argument("descendant subsystem of node " + std::to_string(i) +
                                  " is not stabilizable");
    if (!detail::pbh_detectable(sub.Q, sub.A))
      throw std::invalid_argument("descendant subsystem of node " + std::to_string(i) +
                                  " has undetectable cost");
  }
  return plant;
}

// Process-noise intensity, block-diagonal over the state partition.
struct NoiseSpec {
  Matrix W;
};

inline NoiseSpec make_noise_spec(const BlockPartition& state_part, Matrix W) {
  const int n = state_part.total();
  if (W.rows() != n || W.cols() != n)
    throw std::invalid_argument("W must be " + std::to_string(n) + "x" + std::to_string(n));
  detail::require_symmetric_psd(W, "W");
  const double scale = std::max(1.0, W.norm());
  for (int i = 1; i <= state_part.count(); ++i)
    for (int j = 1; j <= state_part.count(); ++j) {
      if (i == j) continue;
      const double nrm = W.block(state_part.offset_of(i), state_part.offset_of(j),
                                 state_part.size_of(i), state_part.size_of(j))
                             .norm();
      if (nrm > 1e-12 * scale)
        throw std::invalid_argument("noise intensity couples nodes " + std::to_string(i) +
                                    " and " + std::to_string(j) +
                                    "; W must be block-diagonal");
    }
  return NoiseSpec{std::move(W)};
}

inline NoiseSpec unit_noise(const BlockPartition& state_part) {
  return NoiseSpec{Matrix::Identity(state_part.total(), state_part.total())};
}

}  // namespace declqr
