#include "egpssm/sparse_gp.hpp"

#include <cmath>
#include <limits>

namespace egpssm {

InducingState InducingState::from_factor(Matrix Z, Vector mean, const Matrix& S_factor) {
  InducingState s;
  s.Z = std::move(Z);
  s.mean = std::move(mean);
  if (S_factor.rows() != S_factor.cols() || S_factor.rows() != s.Z.rows()) {
    throw DimensionMismatch("S factor must be m×m");
  }
  s.S_param = S_factor.triangularView<Eigen::Lower>();
  for (Index i = 0; i < S_factor.rows(); ++i) {
    if (S_factor(i, i) < 0.0) throw InvalidConfig("S factor needs a nonnegative diagonal");
    s.S_param(i, i) = S_factor(i, i) > 0.0 ? std::log(S_factor(i, i))
                                           : -std::numeric_limits<double>::infinity();
  }
  s.validate();
  return s;
}

InducingState InducingState::from_covariance(Matrix Z, Vector mean, const Matrix& S) {
  Eigen::LLT<Matrix> llt(S);
  if (llt.info() != Eigen::Success) {
    throw NotPositiveDefinite("inducing covariance S");
  }
  return from_factor(std::move(Z), std::move(mean), llt.matrixL());
}

Matrix InducingState::S_factor() const {
  Matrix L = S_param.triangularView<Eigen::Lower>();
  L.diagonal() = S_param.diagonal().array().exp();
  return L;
}

Matrix InducingState::covariance() const {
  const Matrix L = S_factor();
  return L * L.transpose();
}

void InducingState::validate() const {
  const Index m = Z.rows();
  if (m < 1) throw InvalidConfig("at least one inducing point is required");
  if (mean.size() != m || S_param.rows() != m || S_param.cols() != m) {
    throw DimensionMismatch("inducing state shapes disagree");
  }
  for (Index i = 0; i < m; ++i) {
    for (Index j = i + 1; j < m; ++j) {
      if (Z.row(i) == Z.row(j)) {
        throw InvalidConfig("inducing inputs must be pairwise distinct");
      }
    }
  }
}

Matrix inducing_prior_covariance(const KernelParams& kp, const Matrix& Z, double jitter) {
  Matrix K = kernel_matrix(kp, Z, Z);
  K.diagonal().array() += jitter * kp.variance();
  return K;
}

SparseGpPredictor::SparseGpPredictor(const InducingState& gp, const KernelParams& kp,
                                     double jitter)
    : family_(kp.family), variance_(kp.variance()) {
  if (gp.input_dim() != kp.input_dim()) {
    throw DimensionMismatch("inducing inputs have dimension " + std::to_string(gp.input_dim()) +
                            " but the kernel expects " + std::to_string(kp.input_dim()));
  }
  const Index m = gp.size();
  if (gp.mean.size() != m || gp.S_param.rows() != m) {
    throw DimensionMismatch("inducing state shapes disagree");
  }
  inv_ls2_ = (-2.0 * kp.log_lengthscales.array()).exp();
  inv_ls_ = (-kp.log_lengthscales.array()).exp();
  z_scaled_ = gp.Z * inv_ls_.asDiagonal();
  kzz_ = inducing_prior_covariance(kp, gp.Z, jitter);
  const SymMatrix ksym(kzz_);
  chol_ = cholesky_jitter(ksym, default_base_jitter(kzz_), 6);

  const Matrix eye = Matrix::Identity(m, m);
  const Matrix l_inv = chol_.solve_lower(eye);
  kzz_inv_ = l_inv.transpose() * l_inv;
  alpha_ = chol_.solve(gp.mean);
  s_factor_ = gp.S_factor();
  lz_inv_ls_ = chol_.solve_lower(s_factor_);
  // W = L⁻ᵀ (I − V Vᵀ) L⁻¹ with V = L⁻¹ L_S
  const Matrix v_lt = lz_inv_ls_.transpose() * l_inv;  // Vᵀ L⁻¹
  w_ = kzz_inv_ - v_lt.transpose() * v_lt;
  mean_quad_ = gp.mean.dot(alpha_);
  s_logdet_ = 2.0 * gp.S_param.diagonal().sum();
}

ConditionalMoments SparseGpPredictor::predict(const double* x, double* kx, double* w_kx) const {
  const Index m = size();
  const Index d = input_dim();
  double mu = 0.0;
  for (Index i = 0; i < m; ++i) {
    double r2 = 0.0;
    for (Index k = 0; k < d; ++k) {
      const double diff = x[k] * inv_ls_[k] - z_scaled_(i, k);
      r2 += diff * diff;
    }
    kx[i] = kernel_profile(family_, variance_, r2).value;
    mu += kx[i] * alpha_[i];
  }
  Eigen::Map<const Vector> kx_map(kx, m);
  Eigen::Map<Vector> wkx_map(w_kx, m);
  wkx_map.noalias() = w_ * kx_map;
  ConditionalMoments out;
  out.mean = mu;
  out.var = variance_ - kx_map.dot(wkx_map);
  if (out.var < 0.0) {
    out.clamped = -out.var;
    out.var = 0.0;
  }
  return out;
}

ConditionalMoments SparseGpPredictor::predict(const Vector& x) const {
  if (x.size() != input_dim()) {
    throw DimensionMismatch("conditional input has dimension " + std::to_string(x.size()) +
                            ", expected " + std::to_string(input_dim()));
  }
  Vector kx(size());
  Vector wkx(size());
  return predict(x.data(), kx.data(), wkx.data());
}

double SparseGpPredictor::kl() const {
  const double trace = lz_inv_ls_.squaredNorm();
  const double kl = 0.5 * (trace + mean_quad_ - static_cast<double>(size()) +
                           chol_.log_det() - s_logdet_);
  return kl < 0.0 ? 0.0 : kl;
}

ConditionalMoments conditional_moments(const InducingState& gp, const KernelParams& kp,
                                       const Vector& x, double jitter) {
  return SparseGpPredictor(gp, kp, jitter).predict(x);
}

double kl_inducing(const InducingState& gp, const KernelParams& kp, double jitter) {
  return SparseGpPredictor(gp, kp, jitter).kl();
}

PosteriorMoments exact_gp_posterior(const KernelParams& kp, const Matrix& X_train,
                                    const Vector& f_train, const Vector& x_star) {
  if (X_train.rows() != f_train.size() || X_train.rows() < 1) {
    throw DimensionMismatch("training inputs and targets disagree");
  }
  if (x_star.size() != kp.input_dim()) {
    throw DimensionMismatch("test input dimension differs from the kernel");
  }
  const Matrix K = kernel_matrix(kp, X_train, X_train);
  const CholFactor L = cholesky_jitter(SymMatrix(K), default_base_jitter(K), 6);
  const Matrix xs = x_star.transpose();
  const Vector k_star = kernel_matrix(kp, X_train, xs).col(0);
  PosteriorMoments out;
  out.mean = k_star.dot(L.solve(f_train));
  const Vector v = L.solve_lower(k_star);
  out.var = std::max(0.0, kernel_diag(kp, xs)[0] - v.squaredNorm());
  return out;
}

}  // namespace egpssm
