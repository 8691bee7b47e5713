#include <doctest.h>

#include <cmath>
#include <random>

#include "egpssm/kernels.hpp"

using namespace egpssm;
using doctest::Approx;

TEST_CASE("kernel_matrix examples") {
  const KernelParams se(KernelFamily::SquaredExponential, 1.0, Vector::Ones(1));
  const Matrix x0 = Matrix::Zero(1, 1), x1 = Matrix::Ones(1, 1);
  CHECK(kernel_matrix(se, x0, x0)(0, 0) == 1.0);
  CHECK(kernel_matrix(se, x0, x1)(0, 0) == Approx(0.6065307).epsilon(1e-7));
  const KernelParams m52(KernelFamily::Matern52, 2.0, Vector::Ones(1));
  CHECK(kernel_matrix(m52, x1, x1)(0, 0) == 2.0);
}

TEST_CASE("Matern-5/2 closed form at a non-zero distance") {
  const KernelParams k(KernelFamily::Matern52, 1.5, Vector::Constant(2, 0.5));
  Matrix a(1, 2), b(1, 2);
  a << 0.1, -0.3;
  b << 0.4, 0.2;
  const double r = std::sqrt(std::pow(0.3 / 0.5, 2) + std::pow(0.5 / 0.5, 2));
  const double expect = 1.5 * (1 + std::sqrt(5.0) * r + 5.0 * r * r / 3.0) * std::exp(-std::sqrt(5.0) * r);
  CHECK(kernel_matrix(k, a, b)(0, 0) == Approx(expect).epsilon(1e-14));
}

TEST_CASE("kernel_matrix rejects a dimension mismatch") {
  const KernelParams k(KernelFamily::SquaredExponential, 1.0, Vector::Ones(2));
  CHECK_THROWS_AS(kernel_matrix(k, Matrix::Zero(3, 1), Matrix::Zero(3, 1)), DimensionMismatch);
  CHECK_THROWS_AS(kernel_diag(k, Matrix::Zero(3, 3)), DimensionMismatch);
}

TEST_CASE("kernel_diag examples") {
  const KernelParams se3(KernelFamily::SquaredExponential, 3.0, Vector::Ones(2));
  // Variances are stored as logarithms, so equality holds to rounding.
  CHECK((kernel_diag(se3, Matrix::Random(4, 2)).array() - 3.0).abs().maxCoeff() < 1e-14);
  const KernelParams m1(KernelFamily::Matern52, 1.0, Vector::Ones(2));
  CHECK(kernel_diag(m1, Matrix::Random(1, 2)) == Vector::Ones(1));
  const KernelParams se05(KernelFamily::SquaredExponential, 0.5, Vector::Ones(2));
  CHECK((kernel_diag(se05, Matrix::Random(2, 2)).array() - 0.5).abs().maxCoeff() < 1e-15);
}

TEST_CASE("KernelParams validates positivity") {
  CHECK_THROWS(KernelParams(KernelFamily::Matern52, 0.0, Vector::Ones(1)));
  CHECK_THROWS(KernelParams(KernelFamily::Matern52, 1.0, Vector::Zero(1)));
  CHECK_THROWS(KernelParams(KernelFamily::Matern52, 1.0, Vector()));
}

TEST_CASE("kernel matrices: symmetry, PSD, diagonal and transpose properties") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-3, 3), pos(0.3, 2.0);
  for (KernelFamily fam : {KernelFamily::SquaredExponential, KernelFamily::Matern52}) {
    for (int t = 0; t < 10; ++t) {
      const Index n = 5 + 10 * t, d = 1 + t % 3;
      Vector ls(d);
      for (Index k = 0; k < d; ++k) ls[k] = pos(rng);
      const KernelParams kp(fam, pos(rng), ls);
      Matrix X(n, d), X2(7, d);
      for (Index i = 0; i < X.size(); ++i) X.data()[i] = u(rng);
      for (Index i = 0; i < X2.size(); ++i) X2.data()[i] = u(rng);
      const Matrix K = kernel_matrix(kp, X, X);
      CHECK(K == K.transpose());
      CHECK(K.diagonal() == kernel_diag(kp, X));
      const auto f = cholesky_jitter(SymMatrix(K), default_base_jitter(K), 6);
      CHECK(f.jitter_used <= 1e-4 * kp.variance());
      CHECK(kernel_matrix(kp, X2, X) == kernel_matrix(kp, X, X2).transpose());
    }
  }
}

TEST_CASE("kernel_profile derivative matches finite differences in r^2") {
  for (KernelFamily fam : {KernelFamily::SquaredExponential, KernelFamily::Matern52}) {
    for (double r2 : {0.01, 0.3, 1.0, 4.0}) {
      const double h = 1e-6;
      const double fd = (kernel_profile(fam, 1.3, r2 + h).value - kernel_profile(fam, 1.3, r2 - h).value) / (2 * h);
      CHECK(kernel_profile(fam, 1.3, r2).d_r2 == Approx(fd).epsilon(1e-6));
    }
  }
}

TEST_CASE("kernel family names round-trip") {
  for (KernelFamily fam : {KernelFamily::SquaredExponential, KernelFamily::Matern52}) {
    CHECK(kernel_family_from_string(to_string(fam)) == fam);
  }
  CHECK_THROWS(kernel_family_from_string("rbf2"));
}
