#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "declqr/synthesis.hpp"

namespace declqr {

enum class PerturbationKind { static_real, static_complex, lti };

// Multiplicative uncertainty at the plant input, block-diagonal over nodes:
// node i's input is scaled by k_i (static_real), by k_i e^{j phi_i}
// (static_complex), or filtered by an LTI block (lti).
struct PerturbationSpec {
  PerturbationKind kind = PerturbationKind::static_real;
  std::vector<double> gains;
  std::vector<double> phases_deg;        // static_complex only
  std::vector<StateSpaceModel> blocks;   // lti only
  int channel = 1;                       // node whose gain a sweep varies
};

// Per-node frequency-domain optimality margins: node i's own regulator loop
// F_i (sI - A_i)^{-1} B_i against its subsystem weight R_i.
inline std::vector<KalmanMargin> decentralized_kalman_check(const PartitionedPlant& plant,
                                                            const DecentralizedController& ctrl,
                                                            const FrequencyGrid& grid) {
  if (static_cast<int>(ctrl.gains.size()) != plant.node_count())
    throw std::invalid_argument("controller does not match the plant's node count");
  std::vector<KalmanMargin> out;
  out.reserve(plant.node_count());
  for (int i = 1; i <= plant.node_count(); ++i) {
    const NodeSubsystem sub = descendant_subsystem(plant, i);
    const StateSpaceModel loop = lqr_loop_gain(sub.A, sub.B, ctrl.gains[i - 1]);
    out.push_back(kalman_margin(loop, sub.R, grid));
  }
  return out;
}

namespace detail {

inline void require_block_diagonal(const Eigen::Ref<const Matrix>& M, const char* name,
                                   const BlockPartition& row_part,
                                   const BlockPartition& col_part) {
  if (row_part.count() != col_part.count())
    throw std::invalid_argument("partitions must have equal node counts");
  const double scale = std::max(1.0, M.norm());
  for (int i = 1; i <= row_part.count(); ++i)
    for (int j = 1; j <= col_part.count(); ++j) {
      if (i == j) continue;
      const double nrm = M.block(row_part.offset_of(i), col_part.offset_of(j),
                                 row_part.size_of(i), col_part.size_of(j))
                             .norm();
      if (nrm > 1e-12 * scale)
        throw std::invalid_argument(std::string(name) + " block (" + std::to_string(i) + ", " +
                                    std::to_string(j) + ") is nonzero; " + name +
                                    " must be block-diagonal for this certificate");
    }
}

inline Matrix node_input_block(const PartitionedPlant& plant, int i) {
  return plant.R.block(plant.input_part.offset_of(i), plant.input_part.offset_of(i),
                       plant.input_part.size_of(i), plant.input_part.size_of(i));
}

}  // namespace detail

// Structured-uncertainty certificate. node_peaks[i] is the H-infinity norm
// of the scaled diagonal interaction block M_ii seen by node i's
// perturbation; the guarantee chain needs every peak <= 1, so overall <= 1
// certifies the decentralized loop against all admissible perturbations.
struct MuCertificate {
  std::vector<double> node_peaks;
  std::vector<double> kalman_margins;
  double overall = 0.0;
};

// Computes the per-node diagonal interaction peaks
//   M_ii(s) = R_i^{1/2} E_i [ F_i (sI - A_i - B_i F_i)^{-1} B_i + I ] E_i' R_i^{-1/2}
// where E_i selects node i's inputs inside its descendant subsystem.
// Requires B and R block-diagonal over the node partitions (the structure
// under which the diagonal dominance argument is exact).
inline MuCertificate mu_upper_bound(const PartitionedPlant& plant,
                                    const DecentralizedController& ctrl,
                                    const FrequencyGrid& grid = FrequencyGrid::standard(),
                                    double rel_tol = 1e-10) {
  if (static_cast<int>(ctrl.gains.size()) != plant.node_count())
    throw std::invalid_argument("controller does not match the plant's node count");
  detail::require_block_diagonal(plant.B, "B", plant.state_part, plant.input_part);
  detail::require_block_diagonal(plant.R, "R", plant.input_part, plant.input_part);

  MuCertificate cert;
  for (int i = 1; i <= plant.node_count(); ++i) {
    const NodeSubsystem sub = descendant_subsystem(plant, i);
    const Matrix& F = ctrl.gains[i - 1];
    const Matrix acl = sub.A + sub.B * F;
    const Matrix Ri = detail::node_input_block(plant, i);
    const Matrix rih = matrix_sqrt_psd(Ri);
    const Matrix riih = detail::matrix_inv_sqrt_pd(Ri, "R node block");
    const BlockPartition sub_inputs = sub_partition(sub.nodes, plant.input_part);
    const Matrix E = embedding_selector(i, sub.nodes, plant.input_part);
    const int mi = plant.input_part.size_of(i);
    const StateSpaceModel Mii = StateSpaceModel::make(
        acl, sub.B * E.transpose() * riih, rih * E * F, Matrix::Identity(mi, mi));
    cert.node_peaks.push_back(hinf_norm(Mii, rel_tol));
  }
  cert.overall = *std::max_element(cert.node_peaks.begin(), cert.node_peaks.end());
  const std::vector<KalmanMargin> km = decentralized_kalman_check(plant, ctrl, grid);
  for (const KalmanMargin& k : km) cert.kalman_margins.push_back(k.margin);
  return cert;
}

// Admissibility of each node's perturbation against its weight R_i:
//   Delta_i(jw)* R_i + R_i Delta_i(jw) - R_i > 0 on the grid.
// For a static real gain this is k > 1/2; for k e^{j phi} it is
// 2 k cos(phi) > 1; LTI blocks are checked pointwise and must be stable.
inline std::vector<bool> perturbation_admissible(const PerturbationSpec& delta,
                                                 const std::vector<Matrix>& R_blocks,
                                                 const FrequencyGrid& grid) {
  const size_t N = R_blocks.size();
  if (N == 0) throw std::invalid_argument("need at least one node weight");
  std::vector<bool> ok(N, false);
  switch (delta.kind) {
    case PerturbationKind::static_real: {
      if (delta.gains.size() != N)
        throw std::invalid_argument("need one gain per node");
      for (size_t i = 0; i < N; ++i) ok[i] = delta.gains[i] > 0.5;
      return ok;
    }
    case PerturbationKind::static_complex: {
      if (delta.gains.size() != N || delta.phases_deg.size() != N)
        throw std::invalid_argument("need one gain and one phase per node");
      for (size_t i = 0; i < N; ++i) {
        const double phi = delta.phases_deg[i] * std::numbers::pi / 180.0;
        ok[i] = 2.0 * delta.gains[i] * std::cos(phi) > 1.0;
      }
      return ok;
    }
    case PerturbationKind::lti: {
      if (delta.blocks.size() != N)
        throw std::invalid_argument("need one LTI block per node");
      for (size_t i = 0; i < N; ++i) {
        const StateSpaceModel& blk = delta.blocks[i];
        const Matrix& R = R_blocks[i];
        detail::require_symmetric_pd(R, "R block");
        if (blk.inputs() != R.rows() || blk.outputs() != R.rows())
          throw std::invalid_argument("LTI block " + std::to_string(i + 1) +
                                      " must be square and match its weight");
        if (blk.order() > 0 && !is_hurwitz(blk.A)) { ok[i] = false; continue; }
        bool pass = true;
        const ComplexMatrix Rc = R.cast<Complex>();
        for (double w : grid.points) {
          const ComplexMatrix D = blk.evaluate(Complex(0, w));
          ComplexMatrix gap = D.adjoint() * Rc + Rc * D - Rc;
          gap = 0.5 * (gap + gap.adjoint()).eval();
          Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(gap, Eigen::EigenvaluesOnly);
          if (!(es.eigenvalues().minCoeff() > 0.0)) { pass = false; break; }
        }
        ok[i] = pass;
      }
      return ok;
    }
  }
  throw std::invalid_argument("unknown perturbation kind");
}

namespace detail {

// Block-diagonal input scaling K = blkdiag(k_i I_{m_i}).
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> input_scaling(
    const BlockPartition& input_part, const std::vector<Scalar>& gains) {
  if (static_cast<int>(gains.size()) != input_part.count())
    throw std::invalid_argument("need one gain per node");
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> K =
      Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>::Zero(input_part.total(),
                                                                  input_part.total());
  for (int i = 1; i <= input_part.count(); ++i)
    for (int r = 0; r < input_part.size_of(i); ++r)
      K(input_part.offset_of(i) + r, input_part.offset_of(i) + r) = gains[i - 1];
  return K;
}

}  // namespace detail

// Closed-loop state matrix when each node's input is scaled by k_i. The
// controller keeps predicting with the nominal model, so only the physical
// input path changes.
inline Matrix perturbed_closed_loop(const PartitionedPlant& plant,
                                    const DecentralizedController& ctrl,
                                    const std::vector<double>& gains) {
  const Matrix K = detail::input_scaling(plant.input_part, gains);
  const int n = plant.state_dim();
  const int ne = ctrl.internal_dim();
  Matrix acl(n + ne, n + ne);
  const Matrix BK = plant.B * K;
  acl.topLeftCorner(n, n) = plant.A + BK * ctrl.D_K;
  acl.topRightCorner(n, ne) = BK * ctrl.C_K;
  acl.bottomLeftCorner(ne, n) = ctrl.B_K;
  acl.bottomRightCorner(ne, ne) = ctrl.A_K;
  return acl;
}

// Complex-gain variant: stability of the complex state matrix (abscissa of
// its spectrum) decides stability of the underlying real loop with a phase
// perturbation on that node.
inline ComplexMatrix perturbed_closed_loop(const PartitionedPlant& plant,
                                           const DecentralizedController& ctrl,
                                           const std::vector<Complex>& gains) {
  const ComplexMatrix K = detail::input_scaling(plant.input_part, gains);
  const int n = plant.state_dim();
  const int ne = ctrl.internal_dim();
  ComplexMatrix acl(n + ne, n + ne);
  const ComplexMatrix BK = plant.B.cast<Complex>() * K;
  acl.topLeftCorner(n, n) = plant.A.cast<Complex>() + BK * ctrl.D_K.cast<Complex>();
  acl.topRightCorner(n, ne) = BK * ctrl.C_K.cast<Complex>();
  acl.bottomLeftCorner(ne, n) = ctrl.B_K.cast<Complex>();
  acl.bottomRightCorner(ne, ne) = ctrl.A_K.cast<Complex>();
  return acl;
}

// LTI perturbation: augments the loop with the block states z_i,
// u = Delta(controller output).
inline Matrix perturbed_closed_loop(const PartitionedPlant& plant,
                                    const DecentralizedController& ctrl,
                                    const std::vector<StateSpaceModel>& blocks) {
  const int N = plant.node_count();
  if (static_cast<int>(blocks.size()) != N)
    throw std::invalid_argument("need one LTI block per node");
  int nz = 0;
  for (int i = 1; i <= N; ++i) {
    if (blocks[i - 1].inputs() != plant.input_part.size_of(i) ||
        blocks[i - 1].outputs() != plant.input_part.size_of(i))
      throw std::invalid_argument("LTI block " + std::to_string(i) +
                                  " must match node input dimension");
    nz += blocks[i - 1].order();
  }
  const int n = plant.state_dim();
  const int ne = ctrl.internal_dim();
  const int m = plant.input_dim();
  Matrix Az = Matrix::Zero(nz, nz), Bz = Matrix::Zero(nz, m);
  Matrix Cz = Matrix::Zero(m, nz), Dz = Matrix::Zero(m, m);
  int zat = 0;
  for (int i = 1; i <= N; ++i) {
    const StateSpaceModel& blk = blocks[i - 1];
    const int mi = plant.input_part.size_of(i);
    const int off = plant.input_part.offset_of(i);
    Az.block(zat, zat, blk.order(), blk.order()) = blk.A;
    Bz.block(zat, off, blk.order(), mi) = blk.B;
    Cz.block(off, zat, mi, blk.order()) = blk.C;
    Dz.block(off, off, mi, mi) = blk.D;
    zat += blk.order();
  }
  Matrix acl = Matrix::Zero(n + ne + nz, n + ne + nz);
  const Matrix BDz = plant.B * Dz;
  acl.block(0, 0, n, n) = plant.A + BDz * ctrl.D_K;
  acl.block(0, n, n, ne) = BDz * ctrl.C_K;
  acl.block(0, n + ne, n, nz) = plant.B * Cz;
  acl.block(n, 0, ne, n) = ctrl.B_K;
  acl.block(n, n, ne, ne) = ctrl.A_K;
  acl.block(n + ne, 0, nz, n) = Bz * ctrl.D_K;
  acl.block(n + ne, n, nz, ne) = Bz * ctrl.C_K;
  acl.block(n + ne, n + ne, nz, nz) = Az;
  return acl;
}

namespace detail {

struct NyquistData {
  StateSpaceModel loop;
  ComplexMatrix delta;
  int rhp_poles = 0;
};

inline NyquistData nyquist_setup(const PartitionedPlant& plant,
                                 const DecentralizedController& ctrl, int channel, Complex c) {
  if (channel < 1 || channel > plant.node_count())
    throw std::invalid_argument("channel out of range");
  NyquistData d;
  d.loop = loop_gain_dec(plant, ctrl);
  const int m = plant.input_dim();
  d.delta = ComplexMatrix::Identity(m, m);
  const int off = plant.input_part.offset_of(channel);
  for (int r = 0; r < plant.input_part.size_of(channel); ++r) d.delta(off + r, off + r) = c;
  const double tol = 1e-8 * std::max(1.0, d.loop.A.norm());
  const Spectrum sp = eigenvalues(d.loop.A);
  for (int i = 0; i < sp.values.size(); ++i) {
    const double re = sp.values(i).real();
    if (std::abs(re) <= tol)
      throw std::invalid_argument("open-loop pole on the imaginary axis; the encirclement "
                                  "criterion does not apply");
    if (re > 0.0) ++d.rhp_poles;
  }
  return d;
}

inline Complex nyquist_point(const NyquistData& d, double w) {
  const int m = static_cast<int>(d.delta.rows());
  const ComplexMatrix val = d.loop.evaluate(Complex(0, w));
  return (ComplexMatrix::Identity(m, m) - val * d.delta).determinant();
}

inline double nyquist_arc(const NyquistData& d, double w1, Complex f1, double w2, Complex f2,
                          int depth) {
  const double dphi = std::arg(f2 * std::conj(f1));
  if (std::abs(dphi) <= 1.5 && std::abs(f1) > 0.0 && std::abs(f2) > 0.0) return dphi;
  if (depth <= 0)
    throw std::runtime_error("winding number resolution failed near omega = " +
                             std::to_string(w1));
  double wm;
  if (w1 != 0.0 && w2 != 0.0 && (w1 > 0) == (w2 > 0))
    wm = (w1 > 0) ? std::sqrt(w1 * w2) : -std::sqrt(w1 * w2);
  else
    wm = 0.5 * (w1 + w2);
  const Complex fm = nyquist_point(d, wm);
  return nyquist_arc(d, w1, f1, wm, fm, depth - 1) + nyquist_arc(d, wm, fm, w2, f2, depth - 1);
}

// Counterclockwise encirclements of the origin by det(I - L(jw) Delta) as w
// runs from -inf to +inf.
inline int nyquist_winding(const NyquistData& d, int points_per_side = 4000,
                           double w_lo = 1e-6, double w_hi = 1e6) {
  // Extend the outer radius until the loop contribution is negligible, so
  // the arcs closing at +/- infinity stay under the resolution threshold.
  double W = w_hi;
  for (int tries = 0;; ++tries) {
    const double tail = spectral_norm(ComplexMatrix(d.loop.evaluate(Complex(0, W)) * d.delta));
    if (tail < 5e-3) break;
    if (tries > 12) throw std::runtime_error("loop gain does not roll off");
    W *= 10.0;
  }
  const FrequencyGrid half = FrequencyGrid::logspace(w_lo, W, points_per_side);
  std::vector<double> ws;
  ws.reserve(2 * half.points.size() + 1);
  for (auto it = half.points.rbegin(); it != half.points.rend(); ++it) ws.push_back(-*it);
  ws.push_back(0.0);
  ws.insert(ws.end(), half.points.begin(), half.points.end());

  std::vector<Complex> fs(ws.size());
  for (size_t i = 0; i < ws.size(); ++i) fs[i] = nyquist_point(d, ws[i]);

  double total = std::arg(fs.front());        // from f(-inf) = 1
  total -= std::arg(fs.back());               // to f(+inf) = 1
  for (size_t i = 0; i + 1 < ws.size(); ++i)
    total += nyquist_arc(d, ws[i], fs[i], ws[i + 1], fs[i + 1], 44);

  const double revs = total / (2.0 * std::numbers::pi);
  const double rounded = std::round(revs);
  if (std::abs(revs - rounded) > 0.1)
    throw std::runtime_error("winding number did not resolve to an integer (" +
                             std::to_string(revs) + ")");
  return static_cast<int>(rounded);
}

}  // namespace detail

// Nyquist verdict for a complex gain c on one node's input: the perturbed
// loop is stable iff det(I - L(jw) Delta) encircles the origin
// counterclockwise once per open-loop right-half-plane pole.
inline bool complex_disk_stability(const PartitionedPlant& plant,
                                   const DecentralizedController& ctrl, int channel, Complex c) {
  const detail::NyquistData d = detail::nyquist_setup(plant, ctrl, channel, c);
  return detail::nyquist_winding(d) == d.rhp_poles;
}

// Stability margins for one node's input channel. Gain results are the
// certified-stable endpoints found by scan + bisection; phase results are
// the certified symmetric phase range from the complex-disk test.
struct MarginReport {
  int channel = 0;
  double gain_low = 1.0;
  double gain_high = 1.0;
  bool low_at_window_edge = false;
  bool high_at_window_edge = false;
  double abscissa_at_low = 0.0;
  double abscissa_at_high = 0.0;
  double phase_limit_deg = 0.0;
  bool phase_at_window_edge = false;
  std::string method;
};

inline double to_db(double k) { return 20.0 * std::log10(k); }

inline MarginReport gain_margin(const PartitionedPlant& plant,
                                const DecentralizedController& ctrl, int channel,
                                double window_lo = 1e-3, double window_hi = 1e3,
                                double tol = 1e-4) {
  if (channel < 1 || channel > plant.node_count())
    throw std::invalid_argument("channel out of range");
  if (!(window_lo < 1.0) || !(window_hi > 1.0) || !(window_lo > 0.0))
    throw std::invalid_argument("search window must straddle the nominal gain 1");
  if (!(tol > 0.0)) throw std::invalid_argument("tolerance must be positive");

  std::vector<double> gains(plant.node_count(), 1.0);
  auto abscissa_at = [&](double k) {
    gains[channel - 1] = k;
    return spectral_abscissa(perturbed_closed_loop(plant, ctrl, gains));
  };
  auto stable_at = [&](double k) { return abscissa_at(k) < 0.0; };
  if (!stable_at(1.0))
    throw std::invalid_argument("nominal closed loop is not stable; margins undefined");

  MarginReport rep;
  rep.channel = channel;
  rep.method = "eigenvalue_sweep";

  auto search = [&](double edge) -> std::pair<double, bool> {
    const int steps = 80;
    double prev = 1.0;
    double found_unstable = 0.0;
    for (int i = 1; i <= steps; ++i) {
      const double t = static_cast<double>(i) / steps;
      const double k = std::exp(std::log(1.0) * (1.0 - t) + std::log(edge) * t);
      if (!stable_at(k)) { found_unstable = k; break; }
      prev = k;
    }
    if (found_unstable == 0.0) return {edge, true};
    double a = prev, b = found_unstable;  // a stable, b unstable
    while (std::abs(b - a) > tol) {
      const double mid = 0.5 * (a + b);
      if (stable_at(mid))
        a = mid;
      else
        b = mid;
    }
    return {a, false};
  };

  auto [lo, lo_edge] = search(window_lo);
  rep.gain_low = lo;
  rep.low_at_window_edge = lo_edge;
  rep.abscissa_at_low = abscissa_at(lo);
  auto [hi, hi_edge] = search(window_hi);
  rep.gain_high = hi;
  rep.high_at_window_edge = hi_edge;
  rep.abscissa_at_high = abscissa_at(hi);
  return rep;
}

inline MarginReport phase_margin(const PartitionedPlant& plant,
                                 const DecentralizedController& ctrl, int channel,
                                 double tol_deg = 0.05, double max_deg = 179.0) {
  if (!(tol_deg > 0.0)) throw std::invalid_argument("tolerance must be positive");
  if (!(max_deg > 0.0) || max_deg >= 180.0)
    throw std::invalid_argument("phase window must lie inside (0, 180)");

  auto stable_at = [&](double deg, int sign) {
    const double phi = sign * deg * std::numbers::pi / 180.0;
    try {
      return complex_disk_stability(plant, ctrl, channel, std::polar(1.0, phi));
    } catch (const std::runtime_error&) {
      return false;  // unresolved winding: do not certify
    }
  };
  if (!stable_at(0.0, +1))
    throw std::invalid_argument("nominal closed loop is not stable; margins undefined");

  MarginReport rep;
  rep.channel = channel;
  rep.method = "nyquist_disk";
  rep.gain_low = rep.gain_high = 1.0;

  double limit = max_deg;
  bool at_edge = true;
  for (int sign : {+1, -1}) {
    double prev = 0.0, bad = 0.0;
    const double step = 5.0;
    for (double deg = step; deg < max_deg + step; deg += step) {
      const double probe = std::min(deg, max_deg);
      if (!stable_at(probe, sign)) { bad = probe; break; }
      prev = probe;
      if (probe >= max_deg) break;
    }
    double lim_s;
    bool edge_s;
    if (bad == 0.0) {
      lim_s = max_deg;
      edge_s = true;
    } else {
      double a = prev, b = bad;
      while (b - a > tol_deg) {
        const double mid = 0.5 * (a + b);
        if (stable_at(mid, sign))
          a = mid;
        else
          b = mid;
      }
      lim_s = a;
      edge_s = false;
    }
    if (lim_s < limit) {
      limit = lim_s;
      at_edge = edge_s;
    } else if (lim_s == limit) {
      at_edge = at_edge && edge_s;
    }
  }
  rep.phase_limit_deg = limit;
  rep.phase_at_window_edge = at_edge;
  return rep;
}

}  // namespace declqr
