#pragma once

#include <algorithm>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "declqr/linalg.hpp"

namespace declqr {

// Block partition of a dimension: per-node sizes plus cumulative offsets.
// Node indices are 1-based throughout the public interface.
struct BlockPartition {
  std::vector<int> sizes;
  std::vector<int> offsets;

  static BlockPartition from_sizes(std::vector<int> s) {
    BlockPartition p;
    p.offsets.reserve(s.size());
    int at = 0;
    for (int v : s) {
      if (v < 0) throw std::invalid_argument("block sizes must be non-negative");
      p.offsets.push_back(at);
      at += v;
    }
    p.sizes = std::move(s);
    return p;
  }

  int count() const { return static_cast<int>(sizes.size()); }
  int total() const { return sizes.empty() ? 0 : offsets.back() + sizes.back(); }
  int size_of(int node) const { return sizes[check(node)]; }
  int offset_of(int node) const { return offsets[check(node)]; }

 private:
  int check(int node) const {
    if (node < 1 || node > count())
      throw std::invalid_argument("node index " + std::to_string(node) + " out of range 1.." +
                                  std::to_string(count()));
    return node - 1;
  }
};

// Directed acyclic graph on nodes 1..N with per-node state and input block
// dimensions. Node labels must already be topological: every edge (j, i)
// needs j < i, which keeps reachability matrices lower triangular.
struct Dag {
  int node_count = 0;
  std::vector<std::pair<int, int>> edges;  // (from, to)
  std::vector<int> state_sizes;
  std::vector<int> input_sizes;
};

// Reflexive-transitive reachability of a Dag. S(i-1, j-1) == 1 iff node j
// reaches node i (including i == j). ancestors(i) = { j : S_ij = 1 } and
// descendants(i) = { j : S_ji = 1 } are sorted ascending and contain i.
struct ClosureTable {
  int node_count = 0;
  Eigen::MatrixXi S;
  std::vector<std::vector<int>> anc;
  std::vector<std::vector<int>> des;
};

inline ClosureTable transitive_closure(const Dag& dag) {
  const int n = dag.node_count;
  if (n < 1) throw std::invalid_argument("Dag needs at least one node");
  if (static_cast<int>(dag.state_sizes.size()) != n ||
      static_cast<int>(dag.input_sizes.size()) != n)
    throw std::invalid_argument("state_sizes/input_sizes must list one entry per node");
  for (int v : dag.state_sizes)
    if (v < 1) throw std::invalid_argument("every node needs state dimension >= 1");
  for (int v : dag.input_sizes)
    if (v < 1) throw std::invalid_argument("every node needs input dimension >= 1");

  ClosureTable c;
  c.node_count = n;
  c.S = Eigen::MatrixXi::Identity(n, n);
  for (auto [from, to] : dag.edges) {
    if (from < 1 || from > n || to < 1 || to > n)
      throw std::invalid_argument("edge (" + std::to_string(from) + ", " + std::to_string(to) +
                                  ") references a node outside 1.." + std::to_string(n));
    if (from >= to)
      throw std::invalid_argument("edge (" + std::to_string(from) + ", " + std::to_string(to) +
                                  ") violates topological labeling (need from < to)");
    c.S(to - 1, from - 1) = 1;
  }
  // Nodes are topologically labeled, so one ascending pass closes all paths:
  // when processing i, reachability into every j < i is already complete.
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < i; ++j)
      if (c.S(i, j) == 1)
        for (int k = 0; k < j; ++k)
          if (c.S(j, k) == 1) c.S(i, k) = 1;

  c.anc.resize(n);
  c.des.resize(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (c.S(i, j) == 1) {
        c.anc[i].push_back(j + 1);
        c.des[j].push_back(i + 1);
      }
  return c;
}

namespace detail {

inline int closure_check_node(const ClosureTable& c, int node) {
  if (node < 1 || node > c.node_count)
    throw std::invalid_argument("node index " + std::to_string(node) + " out of range 1.." +
                                std::to_string(c.node_count));
  return node - 1;
}

}  // namespace detail

// Ancestor set of a node (nodes that reach it), ascending, includes the node.
inline const std::vector<int>& ancestors(const ClosureTable& c, int node) {
  return c.anc[detail::closure_check_node(c, node)];
}

// Descendant set of a node (nodes it reaches), ascending, includes the node.
inline const std::vector<int>& descendants(const ClosureTable& c, int node) {
  return c.des[detail::closure_check_node(c, node)];
}

// Strict descendants: descendants(node) with the node itself removed.
inline std::vector<int> strict_descendants(const ClosureTable& c, int node) {
  std::vector<int> out = descendants(c, node);
  out.erase(std::remove(out.begin(), out.end(), node), out.end());
  return out;
}

inline std::vector<int> strict_ancestors(const ClosureTable& c, int node) {
  std::vector<int> out = ancestors(c, node);
  out.erase(std::remove(out.begin(), out.end(), node), out.end());
  return out;
}

namespace detail {

inline void check_node_set(const std::vector<int>& nodes, const BlockPartition& part) {
  if (nodes.empty()) throw std::invalid_argument("node set must be non-empty");
  for (size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i] < 1 || nodes[i] > part.count())
      throw std::invalid_argument("node " + std::to_string(nodes[i]) + " out of range 1.." +
                                  std::to_string(part.count()));
    if (i > 0 && nodes[i] <= nodes[i - 1])
      throw std::invalid_argument("node set must be strictly ascending");
  }
}

}  // namespace detail

// Partition induced on a node subset: block k has the size of nodes[k].
inline BlockPartition sub_partition(const std::vector<int>& nodes, const BlockPartition& part) {
  detail::check_node_set(nodes, part);
  std::vector<int> sizes;
  sizes.reserve(nodes.size());
  for (int v : nodes) sizes.push_back(part.size_of(v));
  return BlockPartition::from_sizes(std::move(sizes));
}

// Block rows/columns of M restricted to the given node subsets.
inline Matrix extract_submatrix(const Eigen::Ref<const Matrix>& M,
                                const std::vector<int>& row_nodes,
                                const std::vector<int>& col_nodes,
                                const BlockPartition& row_part,
                                const BlockPartition& col_part) {
  detail::check_node_set(row_nodes, row_part);
  detail::check_node_set(col_nodes, col_part);
  if (M.rows() != row_part.total() || M.cols() != col_part.total())
    throw std::invalid_argument("matrix is " + std::to_string(M.rows()) + "x" +
                                std::to_string(M.cols()) + " but partitions give " +
                                std::to_string(row_part.total()) + "x" +
                                std::to_string(col_part.total()));
  const BlockPartition rp = sub_partition(row_nodes, row_part);
  const BlockPartition cp = sub_partition(col_nodes, col_part);
  Matrix out(rp.total(), cp.total());
  for (size_t a = 0; a < row_nodes.size(); ++a)
    for (size_t b = 0; b < col_nodes.size(); ++b)
      out.block(rp.offsets[a], cp.offsets[b], rp.sizes[a], cp.sizes[b]) =
          M.block(row_part.offset_of(row_nodes[a]), col_part.offset_of(col_nodes[b]),
                  rp.sizes[a], cp.sizes[b]);
  return out;
}

// Selector E with E * v_subset = the components of `node` inside the stacked
// subset vector: size_of(node) x total(subset). Rows are rows of an identity.
inline Matrix embedding_selector(int node, const std::vector<int>& nodes,
                                 const BlockPartition& part) {
  detail::check_node_set(nodes, part);
  const auto it = std::find(nodes.begin(), nodes.end(), node);
  if (it == nodes.end())
    throw std::invalid_argument("node " + std::to_string(node) + " is not in the subset");
  const BlockPartition sp = sub_partition(nodes, part);
  const int idx = static_cast<int>(it - nodes.begin());
  Matrix E = Matrix::Zero(part.size_of(node), sp.total());
  E.middleCols(sp.offsets[idx], sp.sizes[idx]).setIdentity();
  return E;
}

// Gather G with G * v_full = stacked subset components: total(subset) x
// total(full). Its transpose scatters subset vectors back into full ones.
inline Matrix gather_selector(const std::vector<int>& nodes, const BlockPartition& part) {
  detail::check_node_set(nodes, part);
  const BlockPartition sp = sub_partition(nodes, part);
  Matrix G = Matrix::Zero(sp.total(), part.total());
  for (size_t a = 0; a < nodes.size(); ++a)
    G.block(sp.offsets[a], part.offset_of(nodes[a]), sp.sizes[a], sp.sizes[a]).setIdentity();
  return G;
}

struct SparsityViolation {
  int row_node = 0;
  int col_node = 0;
  double block_norm = 0.0;
};

struct SparsityReport {
  std::vector<SparsityViolation> violations;
  bool conformant() const { return violations.empty(); }
};

// Checks that every block M_ij with S_ij == 0 is (numerically) zero, using
// the spectral norm of each offending block against `tol`.
inline SparsityReport validate_sparsity(const Eigen::Ref<const Matrix>& M,
                                        const ClosureTable& closure,
                                        const BlockPartition& row_part,
                                        const BlockPartition& col_part, double tol = 1e-9) {
  if (row_part.count() != closure.node_count || col_part.count() != closure.node_count)
    throw std::invalid_argument("partitions must have one block per closure node");
  if (M.rows() != row_part.total() || M.cols() != col_part.total())
    throw std::invalid_argument("matrix is " + std::to_string(M.rows()) + "x" +
                                std::to_string(M.cols()) + " but partitions give " +
                                std::to_string(row_part.total()) + "x" +
                                std::to_string(col_part.total()));
  if (tol < 0) throw std::invalid_argument("tolerance must be non-negative");
  SparsityReport report;
  for (int i = 1; i <= closure.node_count; ++i)
    for (int j = 1; j <= closure.node_count; ++j) {
      if (closure.S(i - 1, j - 1) != 0) continue;
      const double nrm = spectral_norm(M.block(row_part.offset_of(i), col_part.offset_of(j),
                                               row_part.size_of(i), col_part.size_of(j)));
      if (nrm > tol) report.violations.push_back({i, j, nrm});
    }
  return report;
}

}  // namespace declqr
