#pragma once

#include <string>

#include "egpssm/numerics.hpp"

namespace egpssm {

enum class KernelFamily { SquaredExponential, Matern52 };

std::string to_string(KernelFamily family);
KernelFamily kernel_family_from_string(const std::string& name);

/// Hyperparameters of a stationary ARD kernel. Variance and lengthscales are
/// held as logarithms so that gradient updates keep them positive.
struct KernelParams {
  KernelFamily family = KernelFamily::Matern52;
  double log_variance = 0.0;
  Vector log_lengthscales;

  KernelParams() = default;
  KernelParams(KernelFamily family, double variance, const Vector& lengthscales);

  double variance() const { return std::exp(log_variance); }
  Vector lengthscales() const { return log_lengthscales.array().exp(); }
  Index input_dim() const noexcept { return log_lengthscales.size(); }
  /// Number of trainable hyperparameters (variance + ARD lengthscales).
  Index param_count() const noexcept { return 1 + input_dim(); }
};

/// Kernel value and its derivative with respect to the squared scaled
/// distance r², both as functions of r². The profile form gives every
/// gradient (inputs, lengthscales) without a singularity at r = 0.
struct KernelProfile {
  double value;
  double d_r2;
};

KernelProfile kernel_profile(KernelFamily family, double variance, double r2);

/// Squared ARD distance Σ_d ((a_d - b_d) / ℓ_d)², `inv_ls2` holding 1/ℓ_d².
double scaled_sqdist(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b,
                     const Vector& inv_ls2);

/// Covariance between rows of `X` (n×d) and rows of `X2` (n2×d).
Matrix kernel_matrix(const KernelParams& params, const Matrix& X, const Matrix& X2);

/// k(X_i, X_i) for every row.
Vector kernel_diag(const KernelParams& params, const Matrix& X);

}  // namespace egpssm
