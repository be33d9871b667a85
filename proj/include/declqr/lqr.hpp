#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "declqr/linalg.hpp"
#include "declqr/state_space.hpp"

namespace declqr {

namespace detail {

// PBH test: (A, B) is stabilizable iff [A - lambda I, B] has full row rank at
// every eigenvalue of A with non-negative real part.
inline bool pbh_stabilizable(const Eigen::Ref<const Matrix>& A, const Eigen::Ref<const Matrix>& B,
                             double tol = 1e-8) {
  const int n = static_cast<int>(A.rows());
  if (n == 0) return true;
  const double scale = std::max({1.0, A.norm(), B.norm()});
  const Spectrum sp = eigenvalues(A);
  for (int i = 0; i < sp.values.size(); ++i) {
    const Complex lam = sp.values(i);
    if (lam.real() < -tol) continue;
    ComplexMatrix pencil(n, n + B.cols());
    pencil << A.cast<Complex>(), B.cast<Complex>();
    pencil.leftCols(n).diagonal().array() -= lam;
    if (pencil.jacobiSvd().singularValues()(n - 1) <= tol * scale) return false;
  }
  return true;
}

// Dual test: (Q, A) is detectable iff [A - lambda I; Q] has full column rank
// at every eigenvalue with non-negative real part.
inline bool pbh_detectable(const Eigen::Ref<const Matrix>& Q, const Eigen::Ref<const Matrix>& A,
                           double tol = 1e-8) {
  const int n = static_cast<int>(A.rows());
  if (n == 0) return true;
  const double scale = std::max({1.0, A.norm(), Q.norm()});
  const Spectrum sp = eigenvalues(A);
  for (int i = 0; i < sp.values.size(); ++i) {
    const Complex lam = sp.values(i);
    if (lam.real() < -tol) continue;
    ComplexMatrix pencil(n + Q.rows(), n);
    pencil << A.cast<Complex>(), Q.cast<Complex>();
    pencil.topRows(n).diagonal().array() -= lam;
    if (pencil.jacobiSvd().singularValues()(n - 1) <= tol * scale) return false;
  }
  return true;
}

inline void require_symmetric_psd(const Eigen::Ref<const Matrix>& M, const char* name) {
  require_square(M, name);
  if (M.rows() == 0) return;
  if ((M - M.transpose()).cwiseAbs().maxCoeff() > 1e-10 * std::max(1.0, M.norm()))
    throw std::invalid_argument(std::string(name) + " must be symmetric");
  Eigen::SelfAdjointEigenSolver<Matrix> es(M, Eigen::EigenvaluesOnly);
  const double hi = std::max(0.0, es.eigenvalues().maxCoeff());
  if (es.eigenvalues().minCoeff() < -1e-10 * std::max(1.0, hi))
    throw std::invalid_argument(std::string(name) + " must be positive semidefinite");
}

}  // namespace detail

// Stabilizing solution of A'X + XA + Q - X B R^{-1} B' X = 0 and the optimal
// state feedback F = -R^{-1} B' X.
struct CareSolution {
  Matrix X;  // symmetric PSD
  Matrix F;
  double residual = 0.0;             // Frobenius norm of the equation residual
  double closed_loop_abscissa = 0.0; // spectral abscissa of A + BF (negative)
};

// Solves the continuous-time algebraic Riccati equation by projecting onto
// the stable invariant subspace of the Hamiltonian, then applies one Newton
// step (a Lyapunov solve on the closed-loop matrix) to sharpen the result.
inline CareSolution solve_care(const Eigen::Ref<const Matrix>& A, const Eigen::Ref<const Matrix>& B,
                               const Eigen::Ref<const Matrix>& Q,
                               const Eigen::Ref<const Matrix>& R) {
  detail::require_square(A, "A");
  const int n = static_cast<int>(A.rows());
  const int m = static_cast<int>(B.cols());
  if (B.rows() != n) throw std::invalid_argument("B must have as many rows as A");
  if (Q.rows() != n || Q.cols() != n) throw std::invalid_argument("Q must match A");
  if (R.rows() != m || R.cols() != m) throw std::invalid_argument("R must be inputs x inputs");
  if (!B.allFinite()) throw std::invalid_argument("B contains non-finite entries");
  detail::require_symmetric_psd(Q, "Q");
  detail::require_symmetric_pd(R, "R");
  if (m == 0) throw std::invalid_argument("need at least one input");
  if (!detail::pbh_stabilizable(A, B))
    throw std::invalid_argument("(A, B) is not stabilizable (PBH test failed)");
  if (!detail::pbh_detectable(Q, A))
    throw std::invalid_argument("(Q, A) is not detectable (PBH test failed)");

  Eigen::LLT<Matrix> rllt(R);
  if (rllt.info() != Eigen::Success) throw std::runtime_error("Cholesky of R failed");
  const Matrix G = B * rllt.solve(B.transpose());  // B R^{-1} B'

  Matrix ham(2 * n, 2 * n);
  ham << A, -G, -Q, -A.transpose();
  const Matrix basis = stable_invariant_subspace(ham);
  const Matrix U1 = basis.topRows(n);
  const Matrix U2 = basis.bottomRows(n);
  Eigen::FullPivLU<Matrix> lu(U1.transpose());
  if (!lu.isInvertible())
    throw std::runtime_error("stable subspace has singular state component; "
                             "no stabilizing solution");
  Matrix X = lu.solve(U2.transpose()).transpose();  // X = U2 U1^{-1}
  X = 0.5 * (X + X.transpose());

  auto residual_of = [&](const Matrix& Xc) -> Matrix {
    Matrix r = A.transpose() * Xc + Xc * A + Q - Xc * G * Xc;
    // Symmetric in exact arithmetic; enforce it so the refinement below can
    // feed the residual straight into the Lyapunov solver.
    return 0.5 * (r + r.transpose());
  };

  // Newton (Kleinman) refinement: with Acl = A - G X the correction D solves
  // Acl' D + D Acl + residual = 0. Ill-conditioned subspace bases can leave
  // several digits on the table, so iterate while the residual improves.
  Matrix res = residual_of(X);
  for (int it = 0; it < 15 && res.norm() > 0.0; ++it) {
    const Matrix acl_it = A - G * X;
    if (!is_hurwitz(acl_it)) break;
    bool improved = false;
    try {
      const Matrix delta = solve_lyapunov(acl_it, res);
      Matrix Xn = X + delta;
      Xn = 0.5 * (Xn + Xn.transpose());
      const Matrix resn = residual_of(Xn);
      if (resn.norm() < res.norm()) {
        X = Xn;
        res = resn;
        improved = true;
      }
    } catch (const std::exception&) {
      // refinement is best-effort; the current iterate stands
    }
    if (!improved) break;
  }

  CareSolution sol;
  sol.X = X;
  sol.F = -rllt.solve(B.transpose() * X);
  sol.residual = res.norm();
  const Matrix acl = A + B * sol.F;
  sol.closed_loop_abscissa = spectral_abscissa(acl);
  if (sol.closed_loop_abscissa >= 0.0)
    throw std::runtime_error("Riccati solution failed to stabilize the closed loop");

  const double scale =
      std::max({1.0, (A.transpose() * X).norm(), Q.norm(), (X * G * X).norm()});
  if (sol.residual > 1e-8 * scale)
    throw std::runtime_error("Riccati residual " + std::to_string(sol.residual) +
                             " exceeds quality tolerance");
  Eigen::SelfAdjointEigenSolver<Matrix> xe(sol.X, Eigen::EigenvaluesOnly);
  if (n > 0 &&
      xe.eigenvalues().minCoeff() < -1e-8 * std::max(1.0, xe.eigenvalues().maxCoeff()))
    throw std::runtime_error("Riccati solution is not positive semidefinite");
  return sol;
}

// Loop transfer function broken at the plant input: L(s) = F (sI - A)^{-1} B.
inline StateSpaceModel lqr_loop_gain(const Eigen::Ref<const Matrix>& A,
                                     const Eigen::Ref<const Matrix>& B,
                                     const Eigen::Ref<const Matrix>& F) {
  return StateSpaceModel::make(A, B, F, Matrix::Zero(F.rows(), B.cols()));
}

// Closed-loop map from an input-side injection to the control signal:
// H(s) = F (sI - A - BF)^{-1} B. Requires A + BF Hurwitz.
inline StateSpaceModel lqr_closed_loop_map(const Eigen::Ref<const Matrix>& A,
                                           const Eigen::Ref<const Matrix>& B,
                                           const Eigen::Ref<const Matrix>& F) {
  const Matrix acl = A + B * F;
  if (!is_hurwitz(acl))
    throw std::invalid_argument("A + BF is not Hurwitz; closed-loop map undefined");
  return StateSpaceModel::make(acl, B, F, Matrix::Zero(F.rows(), B.cols()));
}

// Frequency-domain optimality margin. For the LQR loop L the return
// difference satisfies (I - L)* R (I - L) >= R pointwise on the imaginary
// axis; the margin is the most negative eigenvalue of the left side minus R
// seen over the grid (>= 0 up to roundoff for a true LQR gain).
struct KalmanMargin {
  double margin = 0.0;
  std::vector<double> skipped;  // grid points too close to poles of L
};

inline KalmanMargin kalman_margin(const StateSpaceModel& L, const Eigen::Ref<const Matrix>& R,
                                  const FrequencyGrid& grid) {
  detail::require_symmetric_pd(R, "R");
  if (L.inputs() != R.rows() || L.outputs() != R.rows())
    throw std::invalid_argument("loop gain must be square and match R");
  KalmanMargin out;
  out.margin = std::numeric_limits<double>::infinity();
  ComplexVector poles(0);
  double pole_tol = 0.0;
  if (L.order() > 0) {
    poles = eigenvalues(L.A).values;
    pole_tol = 1e-8 * std::max(1.0, L.A.norm());
  }
  const ComplexMatrix Rc = R.cast<Complex>();
  bool evaluated = false;
  for (double w : grid.points) {
    bool near_pole = false;
    for (int i = 0; i < poles.size(); ++i)
      if (std::abs(Complex(0, w) - poles(i)) < pole_tol) { near_pole = true; break; }
    if (near_pole) {
      out.skipped.push_back(w);
      continue;
    }
    const ComplexMatrix T = ComplexMatrix::Identity(R.rows(), R.rows()) -
                            L.evaluate(Complex(0, w));
    ComplexMatrix gap = T.adjoint() * Rc * T - Rc;
    gap = 0.5 * (gap + gap.adjoint()).eval();
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(gap, Eigen::EigenvaluesOnly);
    out.margin = std::min(out.margin, es.eigenvalues().minCoeff());
    evaluated = true;
  }
  if (!evaluated)
    throw std::runtime_error("every grid point fell on a pole of the loop gain");
  return out;
}

// Similarity-scaled and shifted closed-loop map R^{1/2} (H(s) + I) R^{-1/2}.
// For an optimal LQR loop this is exactly the inverse return difference
// scaled to make the small-gain statement norm-1.
inline StateSpaceModel loop_shifted_map(const StateSpaceModel& H,
                                        const Eigen::Ref<const Matrix>& R) {
  if (H.inputs() != R.rows() || H.outputs() != R.rows())
    throw std::invalid_argument("map must be square and match R");
  if (H.order() > 0 && !is_hurwitz(H.A))
    throw std::invalid_argument("map must be stable");
  const Matrix rh = matrix_sqrt_psd(R);
  const Matrix rih = detail::matrix_inv_sqrt_pd(R, "R");
  Matrix D = rh * H.D * rih + Matrix::Identity(R.rows(), R.cols());
  return StateSpaceModel::make(H.A, H.B * rih, rh * H.C, std::move(D));
}

namespace detail {

// Bounded-real test: gamma exceeds the H-infinity norm iff sigma_max(D) <
// gamma and the associated Hamiltonian has no imaginary-axis eigenvalue.
// The Hamiltonian blows up like 1/(gamma^2 - sigma_max(D)^2), so close to
// the feedthrough limit a norm-scaled axis test miscounts eigenvalues that
// are genuinely off the axis. Near-axis eigenvalues are therefore only
// candidates: each proposed crossing frequency is confirmed by evaluating
// the transfer function there (and between consecutive candidates, where a
// gain lobe above gamma must show if the crossings are real).
inline bool hinf_gamma_exceeds(const StateSpaceModel& G, double gamma) {
  const double sd = spectral_norm(G.D);
  if (sd >= gamma * (1.0 - 1e-12)) return false;
  const int n = G.order();
  const int m = G.inputs();
  Matrix Rg = gamma * gamma * Matrix::Identity(m, m) - G.D.transpose() * G.D;
  Eigen::LLT<Matrix> llt(Rg);
  if (llt.info() != Eigen::Success) return false;
  const Matrix RiDtC = llt.solve(G.D.transpose() * G.C);
  const Matrix RiBt = llt.solve(G.B.transpose());
  const Matrix Ah = G.A + G.B * RiDtC;
  Matrix ham(2 * n, 2 * n);
  ham << Ah, G.B * RiBt,
      -(G.C.transpose() * G.C + (G.D.transpose() * G.C).transpose() * RiDtC),
      -Ah.transpose();
  const double scale = std::max(1.0, ham.norm());
  const Spectrum sp = eigenvalues(ham);
  std::vector<double> candidates;
  for (int i = 0; i < sp.values.size(); ++i) {
    const Complex lam = sp.values(i);
    const double tol =
        std::max(1e-6 * std::max(1.0, std::abs(lam)), 1e-8 * scale);
    if (std::abs(lam.real()) <= tol) candidates.push_back(std::abs(lam.imag()));
  }
  if (candidates.empty()) return true;
  std::sort(candidates.begin(), candidates.end());
  std::vector<double> probes = candidates;
  for (size_t i = 0; i + 1 < candidates.size(); ++i) {
    const double a = candidates[i], b = candidates[i + 1];
    probes.push_back(a > 0.0 ? std::sqrt(a * b) : 0.5 * b);
  }
  for (double w : probes)
    if (spectral_norm(G.evaluate(Complex(0.0, w))) > gamma) return false;
  return true;
}

}  // namespace detail

// H-infinity norm of a stable system by bisection on the bounded-real
// Hamiltonian, seeded with a frequency sweep. The result is the midpoint of
// the final bracket, whose width is rel_tol relative.
inline double hinf_norm(const StateSpaceModel& G, double rel_tol = 1e-6) {
  if (!(rel_tol > 0.0)) throw std::invalid_argument("rel_tol must be positive");
  if (G.order() > 0 && !is_hurwitz(G.A))
    throw std::invalid_argument("H-infinity norm requires a stable system");
  const double sd = spectral_norm(G.D);
  if (G.order() == 0 || G.inputs() == 0 || G.outputs() == 0 || G.B.norm() == 0.0 ||
      G.C.norm() == 0.0)
    return sd;

  double lo = sd;
  const FrequencyGrid grid = FrequencyGrid::standard();
  lo = std::max(lo, spectral_norm(G.evaluate(Complex(0, 0))));
  for (double w : grid.points)
    lo = std::max(lo, spectral_norm(G.evaluate(Complex(0, w))));

  double hi = std::max(2.0 * lo, 1e-8);
  int doublings = 0;
  while (!detail::hinf_gamma_exceeds(G, hi)) {
    hi *= 2.0;
    if (++doublings > 80) throw std::runtime_error("H-infinity upper bound search diverged");
  }
  for (int it = 0; it < 400 && hi - lo > rel_tol * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (detail::hinf_gamma_exceeds(G, mid))
      hi = mid;
    else
      lo = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace declqr
