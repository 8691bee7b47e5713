#include "egpssm/kernels.hpp"

#include <cmath>

namespace egpssm {

std::string to_string(KernelFamily family) {
  switch (family) {
    case KernelFamily::SquaredExponential:
      return "se";
    case KernelFamily::Matern52:
      return "matern52";
  }
  return "unknown";
}

KernelFamily kernel_family_from_string(const std::string& name) {
  if (name == "se" || name == "rbf" || name == "squared_exponential") {
    return KernelFamily::SquaredExponential;
  }
  if (name == "matern52" || name == "matern") return KernelFamily::Matern52;
  throw InvalidConfig("unknown kernel family '" + name + "'");
}

KernelParams::KernelParams(KernelFamily fam, double variance, const Vector& lengthscales)
    : family(fam) {
  if (!(variance > 0.0)) throw InvalidConfig("kernel variance must be positive");
  if (lengthscales.size() < 1) throw InvalidConfig("kernel needs at least one lengthscale");
  if ((lengthscales.array() <= 0.0).any()) {
    throw InvalidConfig("kernel lengthscales must be positive");
  }
  log_variance = std::log(variance);
  log_lengthscales = lengthscales.array().log();
}

KernelProfile kernel_profile(KernelFamily family, double variance, double r2) {
  switch (family) {
    case KernelFamily::SquaredExponential: {
      const double k = variance * std::exp(-0.5 * r2);
      return {k, -0.5 * k};
    }
    case KernelFamily::Matern52: {
      constexpr double kSqrt5 = 2.2360679774997896964091736687313;
      const double r = std::sqrt(r2);
      const double e = std::exp(-kSqrt5 * r);
      const double k = variance * (1.0 + kSqrt5 * r + 5.0 * r2 / 3.0) * e;
      // dk/dr = -(5/3) σ² r (1 + √5 r) e^{-√5 r}; dk/d(r²) = (dk/dr) / (2r)
      const double d_r2 = -(5.0 / 6.0) * variance * (1.0 + kSqrt5 * r) * e;
      return {k, d_r2};
    }
  }
  return {0.0, 0.0};
}

double scaled_sqdist(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b,
                     const Vector& inv_ls2) {
  return ((a - b).array().square() * inv_ls2.array()).sum();
}

Matrix kernel_matrix(const KernelParams& params, const Matrix& X, const Matrix& X2) {
  const Index d = params.input_dim();
  if (X.cols() != d || X2.cols() != d) {
    throw DimensionMismatch("kernel_matrix: point dimension " + std::to_string(X.cols()) +
                            "/" + std::to_string(X2.cols()) + " vs " + std::to_string(d) +
                            " lengthscales");
  }
  const Vector inv_ls2 = (-2.0 * params.log_lengthscales.array()).exp();
  const double var = params.variance();
  // Scaled coordinates keep the distance symmetric in its arguments bit-for-bit.
  const Matrix A = X * inv_ls2.cwiseSqrt().asDiagonal();
  const Matrix B = X2 * inv_ls2.cwiseSqrt().asDiagonal();
  Matrix K(X.rows(), X2.rows());
  for (Index j = 0; j < X2.rows(); ++j) {
    for (Index i = 0; i < X.rows(); ++i) {
      double r2 = 0.0;
      for (Index k = 0; k < d; ++k) {
        const double diff = A(i, k) - B(j, k);
        r2 += diff * diff;
      }
      K(i, j) = kernel_profile(params.family, var, r2).value;
    }
  }
  return K;
}

Vector kernel_diag(const KernelParams& params, const Matrix& X) {
  if (X.cols() != params.input_dim()) {
    throw DimensionMismatch("kernel_diag: point dimension differs from lengthscales");
  }
  return Vector::Constant(X.rows(), kernel_profile(params.family, params.variance(), 0.0).value);
}

}  // namespace egpssm
