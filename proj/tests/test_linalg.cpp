#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "declqr/linalg.hpp"
#include "test_support.hpp"

using namespace declqr;

TEST_CASE("eigenvalues of a rotation generator sit on the imaginary axis") {
  Matrix A(2, 2);
  A << 0, 1, -1, 0;
  const Spectrum s = eigenvalues(A);
  REQUIRE(s.values.size() == 2);
  REQUIRE(std::abs(s.abscissa) < 1e-12);
  ComplexVector expected(2);
  expected << Complex(0, 1), Complex(0, -1);
  REQUIRE(testsup::spectrum_multiset_gap(s.values, expected) < 1e-12);
  REQUIRE_FALSE(is_hurwitz(A));
}

TEST_CASE("eigenvalues of a triangular matrix are its diagonal") {
  Matrix A(2, 2);
  A << 1, 2, 0, 3;
  const Spectrum s = eigenvalues(A);
  ComplexVector expected(2);
  expected << Complex(1, 0), Complex(3, 0);
  REQUIRE(testsup::spectrum_multiset_gap(s.values, expected) < 1e-12);
  REQUIRE(s.abscissa == Catch::Approx(3.0));
}

TEST_CASE("eigenvalues reproduce trace and determinant") {
  std::mt19937_64 rng(404);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = testsup::uint_in(rng, 1, 20);
    const Matrix A = testsup::rand_matrix(rng, n, n);
    const Spectrum s = eigenvalues(A);
    Complex sum(0, 0), prod(1, 0);
    for (int i = 0; i < n; ++i) {
      sum += s.values(i);
      prod *= s.values(i);
    }
    const double det = A.determinant();
    CAPTURE(trial, n);
    REQUIRE(std::abs(sum - Complex(A.trace(), 0)) <= 1e-8 * std::max(1.0, std::abs(A.trace())));
    REQUIRE(std::abs(prod - Complex(det, 0)) <= 1e-8 * std::max(1.0, std::abs(det)));
  }
}

TEST_CASE("hurwitz checks honor the margin argument") {
  Matrix A(2, 2);
  A << -1, 0, 0, -2;
  REQUIRE(is_hurwitz(A));
  REQUIRE(is_hurwitz(A, 0.5));
  Matrix B(1, 1);
  B << -0.4;
  REQUIRE(is_hurwitz(B));
  REQUIRE_FALSE(is_hurwitz(B, 0.5));
  REQUIRE(is_hurwitz(Matrix::Zero(0, 0)));  // empty systems are vacuously stable
}

TEST_CASE("stable invariant subspace of a symmetric involution") {
  Matrix H(2, 2);
  H << 0, -1, -1, 0;  // eigenvalues +-1; stable half spanned by (1, 1)
  const Matrix basis = stable_invariant_subspace(H);
  REQUIRE(basis.rows() == 2);
  REQUIRE(basis.cols() == 1);
  REQUIRE(std::abs(std::abs(basis(0, 0)) - std::sqrt(0.5)) < 1e-12);
  REQUIRE(basis(0, 0) * basis(1, 0) > 0);  // same sign
  const Matrix reduced = basis.transpose() * H * basis;
  REQUIRE(reduced(0, 0) == Catch::Approx(-1.0));
}

TEST_CASE("stable invariant subspace encodes the scalar regulator solution") {
  // Scalar design (a=1, b=1, q=3, r=100) written as a 2x2 Hamiltonian.
  Matrix H(2, 2);
  H << 1, -0.01, -3, -1;
  const Matrix basis = stable_invariant_subspace(H);
  const double X = basis(1, 0) / basis(0, 0);
  REQUIRE(X == Catch::Approx(100.0 + std::sqrt(10300.0)).epsilon(1e-10));
  const Matrix reduced = basis.transpose() * H * basis;
  REQUIRE(reduced(0, 0) == Catch::Approx(-std::sqrt(1.03)).epsilon(1e-10));
}

TEST_CASE("stable invariant subspace rejects degenerate spectra") {
  Matrix rot(2, 2);
  rot << 0, 1, -1, 0;  // purely imaginary eigenvalues: no stable/unstable split
  REQUIRE_THROWS_AS(stable_invariant_subspace(rot), std::runtime_error);

  Matrix lopsided(2, 2);
  lopsided << -1, 0, 0, -2;  // two stable eigenvalues but room for only one
  REQUIRE_THROWS_AS(stable_invariant_subspace(lopsided), std::runtime_error);

  REQUIRE_THROWS_AS(stable_invariant_subspace(Matrix::Zero(3, 3)), std::invalid_argument);
}

TEST_CASE("stable invariant subspace is orthonormal and invariant") {
  std::mt19937_64 rng(555);
  for (int trial = 0; trial < 25; ++trial) {
    const testsup::Instance ins = testsup::random_instance(rng, 6, 3);
    const int n = static_cast<int>(ins.A.rows());
    const Matrix G = ins.B * ins.R.llt().solve(ins.B.transpose());
    Matrix H(2 * n, 2 * n);
    H.topLeftCorner(n, n) = ins.A;
    H.topRightCorner(n, n) = -G;
    H.bottomLeftCorner(n, n) = -ins.Q;
    H.bottomRightCorner(n, n) = -ins.A.transpose();
    const Matrix basis = stable_invariant_subspace(H);
    REQUIRE(basis.cols() == n);
    REQUIRE((basis.transpose() * basis - Matrix::Identity(n, n)).norm() < 1e-12);
    const Matrix reduced = basis.transpose() * H * basis;
    CAPTURE(trial, n);
    REQUIRE((H * basis - basis * reduced).norm() <= 1e-8 * H.norm());
    REQUIRE(spectral_abscissa(reduced) < 0.0);
  }
}

TEST_CASE("lyapunov solve matches closed forms") {
  Matrix A(1, 1), W(1, 1);
  A << -2;
  W << 4;
  const Matrix P = solve_lyapunov(A, W);
  REQUIRE(P(0, 0) == Catch::Approx(1.0));

  Matrix A2(2, 2), W2(2, 2);
  A2 << -1, 0, 0, -3;
  W2 << 2, 2, 2, 6;
  const Matrix P2 = solve_lyapunov(A2, W2);
  REQUIRE(P2(0, 0) == Catch::Approx(1.0));
  REQUIRE(P2(1, 1) == Catch::Approx(1.0));
  REQUIRE(P2(0, 1) == Catch::Approx(0.5));
  REQUIRE(P2(1, 0) == Catch::Approx(0.5));

  REQUIRE(solve_lyapunov(A2, Matrix::Zero(2, 2)).norm() == 0.0);
}

TEST_CASE("lyapunov solve validates its inputs") {
  Matrix unstableA(1, 1);
  unstableA << 0.1;
  Matrix W(1, 1);
  W << 1;
  REQUIRE_THROWS_AS(solve_lyapunov(unstableA, W), std::invalid_argument);

  Matrix A(2, 2);
  A << -1, 0, 0, -1;
  Matrix asym(2, 2);
  asym << 1, 2, 0, 1;
  REQUIRE_THROWS_AS(solve_lyapunov(A, asym), std::invalid_argument);
  REQUIRE_THROWS_AS(solve_lyapunov(A, W), std::invalid_argument);  // 2x2 vs 1x1
}

TEST_CASE("lyapunov residuals stay small on random stable systems") {
  std::mt19937_64 rng(808);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = testsup::uint_in(rng, 1, 8);
    Matrix A = testsup::rand_matrix(rng, n, n);
    A -= (spectral_abscissa(A) + 0.3 + testsup::u01(rng)) * Matrix::Identity(n, n);
    const Matrix C = testsup::rand_matrix(rng, n, n);
    const Matrix W = C.transpose() * C;
    const Matrix P = solve_lyapunov(A, W);
    const Matrix residual = A.transpose() * P + P * A + W;
    const double scale = std::max({1.0, W.norm(), (A.transpose() * P).norm()});
    CAPTURE(trial, n);
    REQUIRE(residual.norm() <= 1e-9 * scale);
    REQUIRE((P - P.transpose()).norm() <= 1e-12 * std::max(1.0, P.norm()));
    // Observability-Gramian-style solutions are positive semidefinite.
    Eigen::SelfAdjointEigenSolver<Matrix> es(P);
    REQUIRE(es.eigenvalues().minCoeff() >= -1e-9 * std::max(1.0, P.norm()));
  }
}

TEST_CASE("spectral norm handles real, complex, and empty inputs") {
  REQUIRE(spectral_norm(Matrix::Identity(3, 3)) == Catch::Approx(1.0));
  Matrix N(2, 2);
  N << 0, 2, 0, 0;
  REQUIRE(spectral_norm(N) == Catch::Approx(2.0));
  REQUIRE(spectral_norm(Matrix::Zero(0, 0)) == 0.0);

  ComplexMatrix C(2, 2);
  C << Complex(0, 0), Complex(0, 2), Complex(0, 0), Complex(0, 0);
  REQUIRE(spectral_norm(C) == Catch::Approx(2.0));
}

TEST_CASE("spectral norm never grows under submatrix extraction") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 100; ++trial) {
    const Matrix M = testsup::rand_matrix(rng, 6, 8);
    const int r0 = testsup::uint_in(rng, 0, 4);
    const int c0 = testsup::uint_in(rng, 0, 5);
    const int nr = testsup::uint_in(rng, 1, 6 - r0);
    const int nc = testsup::uint_in(rng, 1, 8 - c0);
    REQUIRE(spectral_norm(M.block(r0, c0, nr, nc)) <= spectral_norm(M) + 1e-12);
  }
}
