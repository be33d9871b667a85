#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace declqr {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;

namespace detail {

inline void require_square(const Eigen::Ref<const Matrix>& M, const char* name) {
  if (M.rows() != M.cols())
    throw std::invalid_argument(std::string(name) + " must be square, got " +
                                std::to_string(M.rows()) + "x" + std::to_string(M.cols()));
  if (!M.allFinite())
    throw std::invalid_argument(std::string(name) + " contains non-finite entries");
}

}  // namespace detail

// Eigenvalues of a real square matrix together with the spectral abscissa
// max_i Re(lambda_i).
struct Spectrum {
  ComplexVector values;
  double abscissa = -std::numeric_limits<double>::infinity();
};

inline Spectrum eigenvalues(const Eigen::Ref<const Matrix>& M) {
  detail::require_square(M, "matrix");
  Spectrum s;
  if (M.rows() == 0) {
    s.values.resize(0);
    return s;
  }
  Eigen::EigenSolver<Matrix> es(M, /*computeEigenvectors=*/false);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("eigenvalue iteration failed to converge");
  s.values = es.eigenvalues();
  s.abscissa = s.values.real().maxCoeff();
  return s;
}

inline double spectral_abscissa(const Eigen::Ref<const Matrix>& M) {
  return eigenvalues(M).abscissa;
}

// True iff every eigenvalue satisfies Re(lambda) < -margin.
inline bool is_hurwitz(const Eigen::Ref<const Matrix>& M, double margin = 0.0) {
  if (M.rows() == 0) return true;
  return eigenvalues(M).abscissa < -margin;
}

// Largest singular value; zero-sized matrices have norm 0.
inline double spectral_norm(const Eigen::Ref<const Matrix>& M) {
  if (M.rows() == 0 || M.cols() == 0) return 0.0;
  return M.jacobiSvd().singularValues()(0);
}

inline double spectral_norm(const Eigen::Ref<const ComplexMatrix>& M) {
  if (M.rows() == 0 || M.cols() == 0) return 0.0;
  return M.jacobiSvd().singularValues()(0);
}

namespace detail {

// Reorders a complex Schur form (T, U) in place so that all eigenvalues with
// negative real part occupy the leading diagonal positions. Returns how many
// there are. Unitary similarity is maintained: M = U T U* throughout.
inline int reorder_stable_leading(ComplexMatrix& T, ComplexMatrix& U) {
  const int n = static_cast<int>(T.rows());
  int placed = 0;
  for (;;) {
    int next = -1;
    for (int k = placed; k < n; ++k) {
      if (T(k, k).real() < 0.0) { next = k; break; }
    }
    if (next < 0) break;
    for (int k = next; k > placed; --k) {
      // Swap the adjacent diagonal entries (k-1, k). The rotation maps the
      // eigenvector [T(k-1,k); T(k,k)-T(k-1,k-1)] of the trailing eigenvalue
      // onto e1, which brings that eigenvalue to position k-1.
      const Complex a = T(k - 1, k - 1);
      const Complex b = T(k - 1, k);
      const Complex c = T(k, k);
      Eigen::JacobiRotation<Complex> rot;
      rot.makeGivens(b, c - a);
      T.applyOnTheLeft(k - 1, k, rot.adjoint());
      T.applyOnTheRight(k - 1, k, rot);
      U.applyOnTheRight(k - 1, k, rot);
      T(k, k - 1) = Complex(0, 0);
    }
    ++placed;
  }
  return placed;
}

}  // namespace detail

// Orthonormal basis (2n x n when H is 2n x 2n) for the invariant subspace of
// H associated with its open-left-half-plane eigenvalues. Requires exactly
// half of the spectrum strictly stable and no eigenvalue within
// 1e-8 * ||H||_F of the imaginary axis.
inline Matrix stable_invariant_subspace(const Eigen::Ref<const Matrix>& H) {
  detail::require_square(H, "H");
  const int dim = static_cast<int>(H.rows());
  if (dim == 0 || dim % 2 != 0)
    throw std::invalid_argument("stable_invariant_subspace needs an even-dimensional matrix");
  const int n = dim / 2;
  const double scale = std::max(H.norm(), 1e-300);

  Eigen::ComplexSchur<Matrix> schur(H, /*computeU=*/true);
  if (schur.info() != Eigen::Success)
    throw std::runtime_error("Schur decomposition failed to converge");
  ComplexMatrix T = schur.matrixT();
  ComplexMatrix U = schur.matrixU();

  for (int k = 0; k < dim; ++k) {
    if (std::abs(T(k, k).real()) <= 1e-8 * scale)
      throw std::runtime_error("eigenvalue within tolerance of the imaginary axis; "
                               "stable/antistable splitting is ill-defined");
  }
  const int stable = detail::reorder_stable_leading(T, U);
  if (stable != n)
    throw std::runtime_error("expected " + std::to_string(n) + " stable eigenvalues, found " +
                             std::to_string(stable));

  // The leading n columns of U span the subspace over C; recover a real
  // orthonormal basis from the real and imaginary parts.
  Matrix stacked(dim, 2 * n);
  stacked << U.leftCols(n).real(), U.leftCols(n).imag();
  Eigen::ColPivHouseholderQR<Matrix> qr(stacked);
  Matrix basis = qr.householderQ() * Matrix::Identity(dim, n);

  const Matrix image = H * basis;
  const Matrix restriction = basis.transpose() * image;
  const double residual = (image - basis * restriction).norm();
  if (residual > 1e-8 * scale)
    throw std::runtime_error("stable subspace residual " + std::to_string(residual) +
                             " exceeds tolerance; matrix is too ill-conditioned");
  return basis;
}

// Solves A' P + P A + W = 0 for symmetric P. A must be Hurwitz and W
// symmetric. Bartels-Stewart on the complex Schur form of A.
inline Matrix solve_lyapunov(const Eigen::Ref<const Matrix>& A, const Eigen::Ref<const Matrix>& W) {
  detail::require_square(A, "A");
  detail::require_square(W, "W");
  if (A.rows() != W.rows())
    throw std::invalid_argument("A and W dimensions disagree");
  const int n = static_cast<int>(A.rows());
  if (n == 0) return Matrix(0, 0);
  if ((W - W.transpose()).cwiseAbs().maxCoeff() > 1e-10 * std::max(1.0, W.norm()))
    throw std::invalid_argument("W must be symmetric");
  if (!is_hurwitz(A))
    throw std::invalid_argument("A must be Hurwitz for the Lyapunov equation to have a "
                                "stabilizing solution");

  Eigen::ComplexSchur<Matrix> schur(A, /*computeU=*/true);
  if (schur.info() != Eigen::Success)
    throw std::runtime_error("Schur decomposition failed to converge");
  const ComplexMatrix& T = schur.matrixT();
  const ComplexMatrix& U = schur.matrixU();

  // Transformed equation: T* Y + Y T = C with C = -U* W U; solve column by
  // column, each a lower-triangular system in T* shifted by T(k,k).
  const ComplexMatrix C = -U.adjoint() * W.cast<Complex>() * U;
  ComplexMatrix Y = ComplexMatrix::Zero(n, n);
  for (int k = 0; k < n; ++k) {
    ComplexVector rhs = C.col(k);
    if (k > 0) rhs.noalias() -= Y.leftCols(k) * T.topRows(k).col(k);
    ComplexMatrix L = T.adjoint();
    L.diagonal().array() += T(k, k);
    Y.col(k) = L.triangularView<Eigen::Lower>().solve(rhs);
  }
  Matrix P = (U * Y * U.adjoint()).real();
  return 0.5 * (P + P.transpose());
}

}  // namespace declqr
