#pragma once

#include "egpssm/kernels.hpp"
#include "egpssm/numerics.hpp"

namespace egpssm {

/// Relative jitter added to K_zz (scaled by the kernel variance) before
/// factorization. The escalation schedule of cholesky_jitter runs on top.
inline constexpr double kDefaultInducingJitter = 1e-6;

/// Inducing inputs Z (m×d_in), variational mean of q(u), and the Cholesky
/// factor of its covariance S. The factor is stored unconstrained: strictly
/// lower entries as-is, diagonal entries as logarithms.
struct InducingState {
  Matrix Z;
  Vector mean;
  Matrix S_param;

  static InducingState from_factor(Matrix Z, Vector mean, const Matrix& S_factor);
  static InducingState from_covariance(Matrix Z, Vector mean, const Matrix& S);

  Index size() const noexcept { return Z.rows(); }
  Index input_dim() const noexcept { return Z.cols(); }
  /// Lower-triangular L_S with S = L_S L_Sᵀ.
  Matrix S_factor() const;
  Matrix covariance() const;
  /// Checks shapes and pairwise-distinct inducing inputs.
  void validate() const;
};

struct ConditionalMoments {
  double mean = 0.0;
  double var = 0.0;
  /// Amount by which a negative variance was raised to zero.
  double clamped = 0.0;
};

struct PosteriorMoments {
  double mean = 0.0;
  double var = 0.0;
};

/// K_zz + jitter·σ²·I.
Matrix inducing_prior_covariance(const KernelParams& kp, const Matrix& Z,
                                 double jitter = kDefaultInducingJitter);

/// Precomputed quantities of one sparse GP for repeated evaluation of
/// q(f̃ | x) = N(k_xᵀ K⁻¹ m, k(x,x) − k_xᵀ W k_x) with W = K⁻¹ − K⁻¹ S K⁻¹.
class SparseGpPredictor {
 public:
  SparseGpPredictor(const InducingState& gp, const KernelParams& kp,
                    double jitter = kDefaultInducingJitter);

  ConditionalMoments predict(const Vector& x) const;

  /// Row-major point `x` of length d_in; writes k_x and W k_x (length m).
  ConditionalMoments predict(const double* x, double* kx, double* w_kx) const;

  /// KL(q(u) ‖ N(0, K_zz)).
  double kl() const;

  const Matrix& kzz() const noexcept { return kzz_; }
  const CholFactor& kzz_factor() const noexcept { return chol_; }
  const Matrix& kzz_inverse() const noexcept { return kzz_inv_; }
  const Vector& alpha() const noexcept { return alpha_; }
  const Matrix& w() const noexcept { return w_; }
  const Matrix& s_factor() const noexcept { return s_factor_; }
  const Matrix& scaled_inducing() const noexcept { return z_scaled_; }
  const Vector& inv_ls2() const noexcept { return inv_ls2_; }
  const Vector& inv_ls() const noexcept { return inv_ls_; }
  double variance() const noexcept { return variance_; }
  KernelFamily family() const noexcept { return family_; }
  Index size() const noexcept { return kzz_.rows(); }
  Index input_dim() const noexcept { return z_scaled_.cols(); }

 private:
  KernelFamily family_;
  double variance_;
  Vector inv_ls2_;
  Vector inv_ls_;
  Matrix z_scaled_;  // Z with column d divided by ℓ_d, row-major access pattern
  Matrix kzz_;
  CholFactor chol_;
  Matrix kzz_inv_;
  Vector alpha_;
  Matrix w_;
  Matrix s_factor_;
  Matrix lz_inv_ls_;  // L⁻¹ L_S
  double mean_quad_ = 0.0;
  double s_logdet_ = 0.0;
};

/// Moments of q(f̃ | x) = E_{q(u)}[p(f̃ | x, u)].
ConditionalMoments conditional_moments(const InducingState& gp, const KernelParams& kp,
                                       const Vector& x,
                                       double jitter = kDefaultInducingJitter);

/// KL(q(u) ‖ p(u)) with p(u) = N(0, K_zz).
double kl_inducing(const InducingState& gp, const KernelParams& kp,
                   double jitter = kDefaultInducingJitter);

/// Noise-free GP regression posterior at one test input.
PosteriorMoments exact_gp_posterior(const KernelParams& kp, const Matrix& X_train,
                                    const Vector& f_train, const Vector& x_star);

}  // namespace egpssm
