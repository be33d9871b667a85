#pragma once

#include <algorithm>
#include <random>
#include <vector>

#include "declqr/declqr.hpp"

namespace testsup {

using declqr::Complex;
using declqr::ComplexVector;
using declqr::Matrix;

// Deterministic uniforms with an explicit bit mapping, so fixed seeds give
// identical suites on every platform.
inline double u01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}
inline double uni(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * u01(rng);
}
inline int uint_in(std::mt19937_64& rng, int lo, int hi) {  // inclusive
  return lo + static_cast<int>(u01(rng) * (hi - lo + 1)) % (hi - lo + 1);
}

inline Matrix rand_matrix(std::mt19937_64& rng, int r, int c, double lo = -1.0,
                          double hi = 1.0) {
  Matrix M(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) M(i, j) = uni(rng, lo, hi);
  return M;
}

struct Instance {
  Matrix A, B, Q, R;
};

// Random centralized design instance, resampled until the regulator problem
// is well posed.
inline Instance random_instance(std::mt19937_64& rng, int nmax = 8, int mmax = 3) {
  for (;;) {
    Instance ins;
    const int n = uint_in(rng, 1, nmax);
    const int m = uint_in(rng, 1, mmax);
    ins.A = rand_matrix(rng, n, n);
    ins.B = rand_matrix(rng, n, m);
    const Matrix C = rand_matrix(rng, n, n);
    ins.Q = C.transpose() * C;
    const Matrix D = rand_matrix(rng, m, m);
    ins.R = D.transpose() * D + 0.1 * Matrix::Identity(m, m);
    if (declqr::detail::pbh_stabilizable(ins.A, ins.B) &&
        declqr::detail::pbh_detectable(ins.Q, ins.A))
      return ins;
  }
}

// Random DAG plant with unit blocks and block-diagonal B and R (the
// structure the decentralized guarantees are stated for).
inline declqr::PartitionedPlant random_dag_plant(std::mt19937_64& rng, int nmax_nodes = 5) {
  const int N = uint_in(rng, 1, nmax_nodes);
  declqr::Dag dag;
  dag.node_count = N;
  dag.state_sizes.assign(N, 1);
  dag.input_sizes.assign(N, 1);
  for (int j = 1; j <= N; ++j)
    for (int i = j + 1; i <= N; ++i)
      if (u01(rng) < 0.5) dag.edges.push_back({j, i});
  const declqr::ClosureTable closure = declqr::transitive_closure(dag);
  Matrix A = Matrix::Zero(N, N);
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j)
      if (closure.S(i, j) == 1) A(i, j) = uni(rng, -1.0, 1.0);
  Matrix B = Matrix::Zero(N, N);
  for (int i = 0; i < N; ++i) B(i, i) = uni(rng, 0.5, 1.5);
  const Matrix M = rand_matrix(rng, N, N);
  const Matrix Q = M.transpose() * M + 0.5 * Matrix::Identity(N, N);
  Matrix R = Matrix::Zero(N, N);
  for (int i = 0; i < N; ++i) R(i, i) = uni(rng, 0.5, 2.0);
  return declqr::make_partitioned_plant(dag, A, B, Q, R);
}

// Greedy one-to-one matching: the largest distance from each needle
// eigenvalue to a distinct haystack eigenvalue.
inline double spectrum_containment_gap(const ComplexVector& needles,
                                       const ComplexVector& haystack) {
  std::vector<bool> used(haystack.size(), false);
  double worst = 0.0;
  for (int i = 0; i < needles.size(); ++i) {
    int best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (int j = 0; j < haystack.size(); ++j) {
      if (used[j]) continue;
      const double d = std::abs(needles(i) - haystack(j));
      if (d < best_d) {
        best_d = d;
        best = j;
      }
    }
    if (best < 0) return std::numeric_limits<double>::infinity();
    used[best] = true;
    worst = std::max(worst, best_d);
  }
  return worst;
}

// Distance between two spectra as multisets (both directions).
inline double spectrum_multiset_gap(const ComplexVector& a, const ComplexVector& b) {
  if (a.size() != b.size()) return std::numeric_limits<double>::infinity();
  return std::max(spectrum_containment_gap(a, b), spectrum_containment_gap(b, a));
}

}  // namespace testsup
