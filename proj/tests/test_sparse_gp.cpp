#include <doctest.h>

#include <cmath>
#include <random>

#include "egpssm/sparse_gp.hpp"

using namespace egpssm;
using doctest::Approx;

namespace {

Matrix random_points(Index n, Index d, std::mt19937_64& rng, double scale = 2.0) {
  std::normal_distribution<double> n01;
  Matrix X(n, d);
  for (Index i = 0; i < X.size(); ++i) X.data()[i] = scale * n01(rng);
  return X;
}

}  // namespace

TEST_CASE("conditional_moments examples") {
  std::mt19937_64 rng(1);
  const Matrix Z = random_points(6, 2, rng);
  const KernelParams m52(KernelFamily::Matern52, 1.4, Vector::Constant(2, 0.8));
  const InducingState prior =
      InducingState::from_covariance(Z, Vector::Zero(6), inducing_prior_covariance(m52, Z, 0.0));
  for (int i = 0; i < 10; ++i) {
    const Vector x = random_points(1, 2, rng).row(0).transpose();
    const auto mom = conditional_moments(prior, m52, x, 0.0);
    CHECK(std::abs(mom.mean) < 1e-10);
    CHECK(mom.var == Approx(1.4).epsilon(1e-10));
  }

  // One inducing point at x with k(z, z) = 1 and a degenerate q(u).
  const KernelParams se1(KernelFamily::SquaredExponential, 1.0, Vector::Ones(1));
  const Matrix z = Matrix::Constant(1, 1, 0.3);
  const InducingState point =
      InducingState::from_factor(z, Vector::Constant(1, 1.5), Matrix::Zero(1, 1));
  const auto mom = conditional_moments(point, se1, Vector::Constant(1, 0.3), 0.0);
  CHECK(mom.mean == Approx(1.5).epsilon(1e-12));
  CHECK(mom.var == Approx(0.0).epsilon(1e-12));

  const KernelParams se2(KernelFamily::SquaredExponential, 2.0, Vector::Constant(2, 1.1));
  const InducingState prior2 =
      InducingState::from_covariance(Z, Vector::Zero(6), inducing_prior_covariance(se2, Z));
  CHECK(conditional_moments(prior2, se2, Vector::Constant(2, 0.4)).var == Approx(2.0).epsilon(1e-10));
}

TEST_CASE("kl_inducing examples") {
  std::mt19937_64 rng(2);
  const Matrix Z = random_points(5, 3, rng);
  const KernelParams kp(KernelFamily::Matern52, 0.9, Vector::Ones(3));
  const InducingState prior =
      InducingState::from_covariance(Z, Vector::Zero(5), inducing_prior_covariance(kp, Z));
  CHECK(kl_inducing(prior, kp) == Approx(0.0).epsilon(1e-10));

  const Matrix z = Matrix::Zero(1, 1);
  const KernelParams k1(KernelFamily::SquaredExponential, 1.0, Vector::Ones(1));
  CHECK(kl_inducing(InducingState::from_factor(z, Vector::Ones(1), Matrix::Ones(1, 1)), k1, 0.0) ==
        Approx(0.5));
  const KernelParams k2(KernelFamily::SquaredExponential, 2.0, Vector::Ones(1));
  CHECK(kl_inducing(InducingState::from_covariance(z, Vector::Zero(1), Matrix::Constant(1, 1, 2.0)), k2,
                    0.0) == Approx(0.0).epsilon(1e-12));
}

TEST_CASE("kl_inducing agrees with the generic Gaussian KL") {
  std::mt19937_64 rng(3);
  const Matrix Z = random_points(4, 2, rng);
  const KernelParams kp(KernelFamily::Matern52, 1.2, Vector::Constant(2, 0.7));
  Matrix L = Matrix::Random(4, 4).triangularView<Eigen::Lower>();
  L.diagonal() = L.diagonal().cwiseAbs().array() + 0.2;
  const Vector m = Vector::Random(4);
  const InducingState q = InducingState::from_factor(Z, m, L);
  const Matrix K = inducing_prior_covariance(kp, Z);
  const double ref = gaussian_kl(m, CholFactor::from_lower(L), Vector::Zero(4),
                                 cholesky_jitter(SymMatrix(K), 1e-12, 1));
  CHECK(kl_inducing(q, kp) == Approx(ref).epsilon(1e-10));
}

TEST_CASE("exact_gp_posterior examples") {
  const KernelParams se(KernelFamily::SquaredExponential, 1.0, Vector::Ones(1));
  const auto one = exact_gp_posterior(se, Matrix::Constant(1, 1, 0.4), Vector::Constant(1, 2.0),
                                      Vector::Constant(1, 0.4));
  CHECK(one.mean == Approx(2.0));
  CHECK(one.var == Approx(0.0).epsilon(1e-12));

  Matrix X(2, 1);
  X << 0, 1;
  Vector f(2);
  f << 0, 1;
  const auto far = exact_gp_posterior(se, X, f, Vector::Constant(1, 40.0));
  CHECK(far.mean == Approx(0.0).epsilon(1e-12));
  CHECK(far.var == Approx(1.0).epsilon(1e-12));

  // Brute-force 2x2 solve at x* = 0.5.
  const double k01 = std::exp(-0.5), ks = std::exp(-0.125);
  const double det = 1 - k01 * k01;
  const double w0 = (ks - k01 * ks) / det, w1 = (ks - k01 * ks) / det;
  const auto mid = exact_gp_posterior(se, X, f, Vector::Constant(1, 0.5));
  CHECK(mid.mean == Approx(w1 * 1.0).epsilon(1e-12));
  CHECK(mid.var == Approx(1.0 - (w0 * ks + w1 * ks)).epsilon(1e-10));
}

TEST_CASE("sparse GP is exact when the inducing points cover the data") {
  std::mt19937_64 rng(4);
  const KernelParams kp(KernelFamily::SquaredExponential, 1.3, Vector::Constant(2, 0.9));
  const Matrix X = random_points(5, 2, rng, 1.0);
  Vector f(5);
  for (Index i = 0; i < 5; ++i) f[i] = std::sin(X(i, 0)) + X(i, 1);
  // Exact posterior at Z = X is (f, 0); give q(u) a tiny covariance instead
  // of exactly zero so that it stays a valid factor.
  const InducingState q = InducingState::from_factor(X, f, 1e-9 * Matrix::Identity(5, 5));
  for (int t = 0; t < 20; ++t) {
    const Vector xs = random_points(1, 2, rng, 1.0).row(0).transpose();
    const auto sp = conditional_moments(q, kp, xs, 0.0);
    const auto ex = exact_gp_posterior(kp, X, f, xs);
    CHECK(std::abs(sp.mean - ex.mean) < 1e-6);
    CHECK(std::abs(sp.var - ex.var) < 1e-6);
  }
}

TEST_CASE("contracted q(u) reduces the variance below the prior") {
  std::mt19937_64 rng(5);
  const KernelParams kp(KernelFamily::Matern52, 0.8, Vector::Constant(2, 1.2));
  const Matrix Z = random_points(8, 2, rng);
  const Matrix K = inducing_prior_covariance(kp, Z);
  for (double scale : {0.0001, 0.3, 0.9, 1.0}) {
    const InducingState q = InducingState::from_covariance(Z, Vector::Random(8), scale * K);
    for (int t = 0; t < 10; ++t) {
      const Vector x = random_points(1, 2, rng).row(0).transpose();
      CHECK(conditional_moments(q, kp, x).var <= 0.8 + 1e-10);
    }
  }
}

TEST_CASE("kl_inducing is invariant to permuting the inducing points") {
  std::mt19937_64 rng(6);
  const KernelParams kp(KernelFamily::Matern52, 1.1, Vector::Constant(3, 0.9));
  const Matrix Z = random_points(6, 3, rng);
  Matrix A = Matrix::Random(6, 6);
  const Matrix S = A * A.transpose() + 0.1 * Matrix::Identity(6, 6);
  const Vector m = Vector::Random(6);
  Eigen::PermutationMatrix<Eigen::Dynamic> P(6);
  P.indices() << 3, 0, 5, 1, 4, 2;
  const double a = kl_inducing(InducingState::from_covariance(Z, m, S), kp);
  const double b = kl_inducing(InducingState::from_covariance(P * Z, P * m, P * S * P.transpose()), kp);
  CHECK(a == Approx(b).epsilon(1e-10));
}

TEST_CASE("InducingState validation") {
  Matrix Z(2, 1);
  Z << 0.5, 0.5;
  CHECK_THROWS_AS(InducingState::from_factor(Z, Vector::Zero(2), Matrix::Identity(2, 2)), InvalidConfig);
  const InducingState bad{Matrix::Zero(2, 1), Vector::Zero(3), Matrix::Zero(2, 2)};
  CHECK_THROWS_AS(bad.validate(), DimensionMismatch);
  const KernelParams kp(KernelFamily::Matern52, 1.0, Vector::Ones(2));
  Matrix Z2 = Matrix::Random(3, 1);
  CHECK_THROWS_AS(conditional_moments(InducingState::from_factor(Z2, Vector::Zero(3), Matrix::Identity(3, 3)),
                                      kp, Vector::Zero(2)),
                  DimensionMismatch);
}
