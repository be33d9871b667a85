#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "declqr/linalg.hpp"

namespace declqr {

// Continuous-time LTI system x' = Ax + Bu, y = Cx + Du. A zero-order system
// (n = 0) is a static gain y = Du.
struct StateSpaceModel {
  Matrix A, B, C, D;

  int order() const { return static_cast<int>(A.rows()); }
  int inputs() const { return static_cast<int>(D.cols()); }
  int outputs() const { return static_cast<int>(D.rows()); }

  static StateSpaceModel make(Matrix A, Matrix B, Matrix C, Matrix D) {
    if (A.rows() != A.cols()) throw std::invalid_argument("A must be square");
    if (B.rows() != A.rows()) throw std::invalid_argument("B must have as many rows as A");
    if (C.cols() != A.rows()) throw std::invalid_argument("C must have as many columns as A");
    if (D.rows() != C.rows() || D.cols() != B.cols())
      throw std::invalid_argument("D must be outputs() x inputs()");
    if (!A.allFinite() || !B.allFinite() || !C.allFinite() || !D.allFinite())
      throw std::invalid_argument("state-space data contains non-finite entries");
    return StateSpaceModel{std::move(A), std::move(B), std::move(C), std::move(D)};
  }

  static StateSpaceModel static_gain(Matrix D) {
    const int q = static_cast<int>(D.rows());
    const int m = static_cast<int>(D.cols());
    return make(Matrix(0, 0), Matrix(0, m), Matrix(q, 0), std::move(D));
  }

  // Transfer matrix value C (sI - A)^{-1} B + D.
  ComplexMatrix evaluate(Complex s) const {
    if (order() == 0) return D.cast<Complex>();
    ComplexMatrix shifted = (-A).cast<Complex>();
    shifted.diagonal().array() += s;
    Eigen::PartialPivLU<ComplexMatrix> lu(shifted);
    return C.cast<Complex>() * lu.solve(B.cast<Complex>()) + D.cast<Complex>();
  }
};

// Cascade: u -> first -> second -> y, i.e. the product second(s) * first(s).
inline StateSpaceModel series(const StateSpaceModel& first, const StateSpaceModel& second) {
  if (second.inputs() != first.outputs())
    throw std::invalid_argument("series: inner dimensions disagree");
  const int n1 = first.order(), n2 = second.order();
  Matrix A = Matrix::Zero(n1 + n2, n1 + n2);
  A.topLeftCorner(n1, n1) = first.A;
  A.bottomLeftCorner(n2, n1) = second.B * first.C;
  A.bottomRightCorner(n2, n2) = second.A;
  Matrix B(n1 + n2, first.inputs());
  B << first.B, second.B * first.D;
  Matrix C(second.outputs(), n1 + n2);
  C << second.D * first.C, second.C;
  return StateSpaceModel::make(std::move(A), std::move(B), std::move(C), second.D * first.D);
}

// Sorted non-negative frequency points for sweeps and margin checks.
struct FrequencyGrid {
  std::vector<double> points;

  static FrequencyGrid from_points(std::vector<double> pts) {
    if (pts.empty()) throw std::invalid_argument("frequency grid must be non-empty");
    for (size_t i = 0; i < pts.size(); ++i) {
      if (!(pts[i] >= 0.0) || !std::isfinite(pts[i]))
        throw std::invalid_argument("frequencies must be finite and non-negative");
      if (i > 0 && pts[i] <= pts[i - 1])
        throw std::invalid_argument("frequencies must be strictly increasing");
    }
    return FrequencyGrid{std::move(pts)};
  }

  static FrequencyGrid logspace(double lo, double hi, int count) {
    if (!(lo > 0.0) || !(hi > lo)) throw std::invalid_argument("need 0 < lo < hi");
    if (count < 2) throw std::invalid_argument("need at least two points");
    std::vector<double> pts(count);
    const double llo = std::log10(lo), lhi = std::log10(hi);
    for (int i = 0; i < count; ++i) {
      const double t = static_cast<double>(i) / (count - 1);
      pts[i] = std::pow(10.0, llo * (1.0 - t) + lhi * t);
    }
    pts.front() = lo;
    pts.back() = hi;
    return from_points(std::move(pts));
  }

  static FrequencyGrid standard(int count = 400, double lo = 1e-4, double hi = 1e4) {
    return logspace(lo, hi, count);
  }

  // Standard grid, with omega = 0 prepended when A is nonsingular (so the DC
  // value exists).
  static FrequencyGrid for_system(const Eigen::Ref<const Matrix>& A, int count = 400,
                                  double lo = 1e-4, double hi = 1e4) {
    FrequencyGrid g = standard(count, lo, hi);
    if (A.rows() == 0) return g;
    Eigen::FullPivLU<Matrix> lu(A);
    if (lu.isInvertible()) g.points.insert(g.points.begin(), 0.0);
    return g;
  }
};

// Symmetric PSD square root via eigendecomposition (negative eigenvalues
// within roundoff of zero are clamped).
inline Matrix matrix_sqrt_psd(const Eigen::Ref<const Matrix>& M) {
  detail::require_square(M, "matrix");
  if (M.rows() == 0) return Matrix(0, 0);
  if ((M - M.transpose()).cwiseAbs().maxCoeff() > 1e-10 * std::max(1.0, M.norm()))
    throw std::invalid_argument("matrix must be symmetric");
  Eigen::SelfAdjointEigenSolver<Matrix> es(M);
  if (es.info() != Eigen::Success) throw std::runtime_error("eigendecomposition failed");
  const double top = std::max(0.0, es.eigenvalues().maxCoeff());
  if (es.eigenvalues().minCoeff() < -1e-10 * std::max(1.0, top))
    throw std::invalid_argument("matrix is not positive semidefinite");
  Vector roots = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * roots.asDiagonal() * es.eigenvectors().transpose();
}

namespace detail {

inline void require_symmetric_pd(const Eigen::Ref<const Matrix>& M, const char* name) {
  require_square(M, name);
  if (M.rows() == 0) return;
  if ((M - M.transpose()).cwiseAbs().maxCoeff() > 1e-10 * std::max(1.0, M.norm()))
    throw std::invalid_argument(std::string(name) + " must be symmetric");
  Eigen::SelfAdjointEigenSolver<Matrix> es(M, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  if (lo <= 1e-12 * std::max(1.0, hi))
    throw std::invalid_argument(std::string(name) + " must be positive definite");
}

// Inverse PSD square root of a symmetric positive definite matrix.
inline Matrix matrix_inv_sqrt_pd(const Eigen::Ref<const Matrix>& M, const char* name) {
  require_symmetric_pd(M, name);
  Eigen::SelfAdjointEigenSolver<Matrix> es(M);
  Vector roots = es.eigenvalues().cwiseSqrt().cwiseInverse();
  return es.eigenvectors() * roots.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace detail

}  // namespace declqr
