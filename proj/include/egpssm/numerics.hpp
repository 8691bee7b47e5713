#pragma once

#include <Eigen/Dense>

#include "egpssm/errors.hpp"

namespace egpssm {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Dense symmetric matrix. Construction checks symmetry and stores the
/// exactly-symmetrized average of the input and its transpose.
class SymMatrix {
 public:
  explicit SymMatrix(const Matrix& entries, double tolerance = 1e-10);

  const Matrix& matrix() const noexcept { return entries_; }
  Index size() const noexcept { return entries_.rows(); }
  double operator()(Index i, Index j) const { return entries_(i, j); }

 private:
  Matrix entries_;
};

/// Lower Cholesky factor of `A + jitter_used * I`.
struct CholFactor {
  Matrix L;
  double jitter_used = 0.0;

  Index size() const noexcept { return L.rows(); }
  /// A⁻¹ b through two triangular solves.
  Matrix solve(const Matrix& b) const;
  Vector solve(const Vector& b) const;
  /// L⁻¹ b
  Matrix solve_lower(const Matrix& b) const;
  double log_det() const;
  Matrix reconstruct() const { return L * L.transpose(); }

  /// Wraps an existing lower-triangular factor.
  static CholFactor from_lower(Matrix lower);
};

/// Gaussian with diagonal covariance.
struct DiagGaussian {
  Vector mean;
  Vector var;

  DiagGaussian() = default;
  DiagGaussian(Vector mean, Vector var);
  Index size() const noexcept { return mean.size(); }
};

/// Factorizes A + εI with ε the first value of {0, b, 10b, ..., 10^(k-1) b}
/// that succeeds. Throws NotPositiveDefinite when all attempts fail.
CholFactor cholesky_jitter(const SymMatrix& a, double base_jitter, int max_tries);

/// Jitter schedule base used throughout: 1e-6 of the mean diagonal.
double default_base_jitter(const Matrix& a);

/// KL(N(q_mean, Lq Lqᵀ) ‖ N(p_mean, Lp Lpᵀ)).
double gaussian_kl(const Vector& q_mean, const CholFactor& q_cov_factor,
                   const Vector& p_mean, const CholFactor& p_cov_factor);

/// KL between diagonal Gaussians.
double gaussian_kl(const DiagGaussian& q, const DiagGaussian& p);

/// Log density of x under a diagonal Gaussian.
double gaussian_logpdf(const Vector& x, const DiagGaussian& dist);

/// mean + sqrt(var) * eps. Variances in [-1e-12, 0) are treated as zero.
double reparam_sample(double mean, double var, double eps);

inline constexpr double kLog2Pi = 1.8378770664093454835606594728112;

}  // namespace egpssm
