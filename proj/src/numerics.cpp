#include "egpssm/numerics.hpp"

#include <cmath>
#include <string>

namespace egpssm {

SymMatrix::SymMatrix(const Matrix& entries, double tolerance) {
  if (entries.rows() != entries.cols() || entries.rows() < 1) {
    throw DimensionMismatch("SymMatrix requires a non-empty square matrix");
  }
  const double scale = std::max(1.0, entries.cwiseAbs().maxCoeff());
  if ((entries - entries.transpose()).cwiseAbs().maxCoeff() > tolerance * scale) {
    throw InvalidConfig("SymMatrix input is not symmetric");
  }
  entries_ = 0.5 * (entries + entries.transpose());
}

Matrix CholFactor::solve(const Matrix& b) const {
  Matrix x = L.triangularView<Eigen::Lower>().solve(b);
  L.transpose().triangularView<Eigen::Upper>().solveInPlace(x);
  return x;
}

Vector CholFactor::solve(const Vector& b) const {
  Vector x = L.triangularView<Eigen::Lower>().solve(b);
  L.transpose().triangularView<Eigen::Upper>().solveInPlace(x);
  return x;
}

Matrix CholFactor::solve_lower(const Matrix& b) const {
  return L.triangularView<Eigen::Lower>().solve(b);
}

double CholFactor::log_det() const {
  return 2.0 * L.diagonal().array().log().sum();
}

CholFactor CholFactor::from_lower(Matrix lower) {
  if (lower.rows() != lower.cols()) {
    throw DimensionMismatch("Cholesky factor must be square");
  }
  CholFactor f;
  f.L = lower.triangularView<Eigen::Lower>();
  return f;
}

DiagGaussian::DiagGaussian(Vector m, Vector v) : mean(std::move(m)), var(std::move(v)) {
  if (mean.size() != var.size()) {
    throw DimensionMismatch("DiagGaussian mean and var lengths differ");
  }
  for (Index i = 0; i < var.size(); ++i) {
    if (!(var[i] > 0.0) || !std::isfinite(var[i])) {
      throw NegativeVariance("DiagGaussian variance must be positive and finite");
    }
  }
}

double default_base_jitter(const Matrix& a) {
  const double mean_diag = a.diagonal().mean();
  return 1e-6 * (mean_diag > 0.0 ? mean_diag : 1.0);
}

namespace {

bool try_factor(const Matrix& a, double jitter, Matrix& out) {
  Matrix shifted = a;
  shifted.diagonal().array() += jitter;
  Eigen::LLT<Matrix> llt(shifted);
  if (llt.info() != Eigen::Success) return false;
  out = llt.matrixL();
  for (Index i = 0; i < out.rows(); ++i) {
    if (!(out(i, i) > 0.0) || !std::isfinite(out(i, i))) return false;
  }
  return true;
}

}  // namespace

CholFactor cholesky_jitter(const SymMatrix& a, double base_jitter, int max_tries) {
  if (!(base_jitter > 0.0)) {
    throw InvalidConfig("base_jitter must be positive");
  }
  CholFactor f;
  if (try_factor(a.matrix(), 0.0, f.L)) return f;
  double jitter = base_jitter;
  for (int k = 0; k < max_tries; ++k, jitter *= 10.0) {
    if (try_factor(a.matrix(), jitter, f.L)) {
      f.jitter_used = jitter;
      return f;
    }
  }
  throw NotPositiveDefinite("factorization failed after " + std::to_string(max_tries) +
                            " jitter attempts");
}

double gaussian_kl(const Vector& q_mean, const CholFactor& q_cov_factor,
                   const Vector& p_mean, const CholFactor& p_cov_factor) {
  const Index n = q_mean.size();
  if (p_mean.size() != n || q_cov_factor.size() != n || p_cov_factor.size() != n) {
    throw DimensionMismatch("gaussian_kl operands have different dimensions");
  }
  const Matrix lp_inv_lq = p_cov_factor.solve_lower(q_cov_factor.L);
  const Vector lp_inv_diff = p_cov_factor.solve_lower(Matrix(p_mean - q_mean));
  const double trace_term = lp_inv_lq.squaredNorm();
  const double quad_term = lp_inv_diff.squaredNorm();
  const double kl = 0.5 * (trace_term + quad_term - static_cast<double>(n) +
                           p_cov_factor.log_det() - q_cov_factor.log_det());
  return kl < 0.0 ? 0.0 : kl;
}

double gaussian_kl(const DiagGaussian& q, const DiagGaussian& p) {
  if (q.size() != p.size()) {
    throw DimensionMismatch("gaussian_kl operands have different dimensions");
  }
  double kl = 0.0;
  for (Index i = 0; i < q.size(); ++i) {
    const double d = q.mean[i] - p.mean[i];
    kl += 0.5 * (q.var[i] / p.var[i] + d * d / p.var[i] - 1.0 + std::log(p.var[i]) -
                 std::log(q.var[i]));
  }
  return kl < 0.0 ? 0.0 : kl;
}

double gaussian_logpdf(const Vector& x, const DiagGaussian& dist) {
  if (x.size() != dist.size()) {
    throw DimensionMismatch("gaussian_logpdf point and distribution dimensions differ");
  }
  double lp = 0.0;
  for (Index i = 0; i < x.size(); ++i) {
    const double d = x[i] - dist.mean[i];
    lp += -0.5 * (kLog2Pi + std::log(dist.var[i]) + d * d / dist.var[i]);
  }
  return lp;
}

double reparam_sample(double mean, double var, double eps) {
  if (var < 0.0) {
    if (var < -1e-12) throw NegativeVariance("reparam_sample variance " + std::to_string(var));
    var = 0.0;
  }
  return mean + std::sqrt(var) * eps;
}

}  // namespace egpssm
