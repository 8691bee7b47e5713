#include "egpssm/models.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "egpssm/rng.hpp"
#include "rollout.hpp"

namespace egpssm {

Matrix SsmParams::default_emission(Index d_y, Index d_x) {
  if (d_y > d_x) throw InvalidConfig("d_y must not exceed d_x for the default emission");
  Matrix C = Matrix::Zero(d_y, d_x);
  C.leftCols(d_y).setIdentity();
  return C;
}

SsmParams SsmParams::make(Index d_x, Index d_y, Index d_c, double q_var, double r_var) {
  if (d_x < 1 || d_y < 1 || d_c < 0) throw InvalidConfig("invalid SSM dimensions");
  if (!(q_var > 0.0) || !(r_var > 0.0)) throw InvalidConfig("noise variances must be positive");
  SsmParams p;
  p.d_x = d_x;
  p.d_y = d_y;
  p.d_c = d_c;
  p.C = default_emission(d_y, d_x);
  p.Q_logvar = Vector::Constant(d_x, std::log(q_var));
  p.R_logvar = Vector::Constant(d_y, std::log(r_var));
  p.x0_prior = DiagGaussian(Vector::Zero(d_x), Vector::Ones(d_x));
  return p;
}

void SsmParams::validate() const {
  if (C.rows() != d_y || C.cols() != d_x) throw DimensionMismatch("emission matrix must be d_y×d_x");
  if (Q_logvar.size() != d_x || R_logvar.size() != d_y || x0_prior.size() != d_x) {
    throw DimensionMismatch("noise parameter lengths disagree with d_x/d_y");
  }
  if (Eigen::FullPivLU<Matrix>(C).rank() != d_y) {
    throw InvalidConfig("emission matrix must have full row rank");
  }
  if (!Q_logvar.allFinite() || !R_logvar.allFinite()) {
    throw InvalidConfig("noise log-variances must be finite");
  }
}

InitialStateParams InitialStateParams::from_moments(const Vector& mean, const Vector& var) {
  const DiagGaussian check(mean, var);
  return {mean, var.array().log()};
}

DiagGaussian InitialStateParams::distribution() const {
  return DiagGaussian(mean, log_var.array().exp());
}

void EgpssmModel::validate() const {
  ssm.validate();
  gp.validate();
  if (static_cast<Index>(flows.size()) != ssm.d_x) {
    throw DimensionMismatch("EGPSSM needs exactly d_x flows");
  }
  if (kernel.input_dim() != ssm.gp_input_dim() || gp.input_dim() != ssm.gp_input_dim()) {
    throw DimensionMismatch("GP input dimension must equal d_x + d_c");
  }
  for (const auto& q : x0_var) {
    if (q.mean.size() != ssm.d_x || q.log_var.size() != ssm.d_x) {
      throw DimensionMismatch("q(x0) dimension must equal d_x");
    }
  }
}

void BaselineModel::validate() const {
  ssm.validate();
  if (static_cast<Index>(gps.size()) != ssm.d_x || kernels.size() != gps.size()) {
    throw DimensionMismatch("baseline needs exactly d_x GPs and kernels");
  }
  for (std::size_t g = 0; g < gps.size(); ++g) {
    gps[g].validate();
    if (kernels[g].input_dim() != ssm.gp_input_dim() ||
        gps[g].input_dim() != ssm.gp_input_dim()) {
      throw DimensionMismatch("GP input dimension must equal d_x + d_c");
    }
  }
  for (const auto& q : x0_var) {
    if (q.mean.size() != ssm.d_x || q.log_var.size() != ssm.d_x) {
      throw DimensionMismatch("q(x0) dimension must equal d_x");
    }
  }
}

TransitionSample sample_transition(const EgpssmModel& model, const Vector& x_prev,
                                   const Vector& c_prev, double eps_f, const Vector& eps_x) {
  const SsmParams& ssm = model.ssm;
  if (x_prev.size() != ssm.d_x || c_prev.size() != ssm.d_c || eps_x.size() != ssm.d_x) {
    throw DimensionMismatch("sample_transition argument sizes");
  }
  Vector input(ssm.gp_input_dim());
  input << x_prev, c_prev;
  const auto mom = conditional_moments(model.gp, model.kernel, input, ssm.jitter);
  TransitionSample out;
  out.f_tilde = reparam_sample(mom.mean, mom.var, eps_f);
  out.f.resize(ssm.d_x);
  for (Index d = 0; d < ssm.d_x; ++d) {
    out.f[d] = flow_forward(model.flows[static_cast<std::size_t>(d)], out.f_tilde);
  }
  const Vector q_std = (0.5 * ssm.Q_logvar.array()).exp();
  out.x_next = out.f + q_std.cwiseProduct(eps_x);
  if (ssm.residual) out.x_next += x_prev;
  return out;
}

double emission_loglik(const SsmParams& ssm, const Vector& x, const Vector& y) {
  if (x.size() != ssm.C.cols() || y.size() != ssm.C.rows()) {
    throw DimensionMismatch("emission_loglik argument sizes");
  }
  return gaussian_logpdf(y, DiagGaussian(ssm.C * x, ssm.R_logvar.array().exp()));
}

ElboEstimate elbo(const EgpssmModel& model, std::span<const Sequence> sequences, int n_mc,
                  std::uint64_t rng_seed) {
  detail::EvalOptions opts;
  opts.n_mc = n_mc;
  opts.seed = rng_seed;
  return detail::evaluate(detail::view_of(model), sequences, opts, nullptr);
}

ElboEstimate elbo(const BaselineModel& model, std::span<const Sequence> sequences, int n_mc,
                  std::uint64_t rng_seed) {
  detail::EvalOptions opts;
  opts.n_mc = n_mc;
  opts.seed = rng_seed;
  return detail::evaluate(detail::view_of(model), sequences, opts, nullptr);
}

ElboEstimate elbo(const AnyModel& model, std::span<const Sequence> sequences, int n_mc,
                  std::uint64_t rng_seed) {
  return std::visit([&](const auto& m) { return elbo(m, sequences, n_mc, rng_seed); }, model);
}

Matrix persistence_forecast(const Sequence& warmup, int horizon) {
  if (warmup.length() < 1) throw EmptySequence("persistence forecast needs a warm-up");
  if (horizon < 1) throw InvalidConfig("horizon must be >= 1");
  return warmup.y.row(warmup.length() - 1).replicate(horizon, 1);
}

double rmse(const Matrix& pred, const Matrix& truth) {
  if (pred.rows() != truth.rows() || pred.cols() != truth.cols()) {
    throw DimensionMismatch("rmse shapes differ");
  }
  if (pred.size() == 0) throw DimensionMismatch("rmse of empty matrices");
  return std::sqrt((pred - truth).squaredNorm() / static_cast<double>(pred.size()));
}

Matrix init_inducing_inputs(const ModelSpec& spec, std::span<const Sequence> train,
                            std::uint64_t seed) {
  if (train.empty()) throw EmptySequence("inducing initialization needs training data");
  const Index m = spec.num_inducing;
  const Index d_in = spec.d_x + spec.d_c;
  if (m < 1) throw InvalidConfig("num_inducing must be >= 1");
  Rng rng(mix_seed({seed, 0x7a7aULL}));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Matrix Z(m, d_in);
  const bool fully_observed = spec.d_c == 0 && spec.d_x == spec.d_y;
  if (fully_observed) {
    Vector lo = Vector::Constant(spec.d_y, std::numeric_limits<double>::infinity());
    Vector hi = -lo;
    for (const auto& s : train) {
      lo = lo.cwiseMin(s.y.colwise().minCoeff().transpose());
      hi = hi.cwiseMax(s.y.colwise().maxCoeff().transpose());
    }
    for (Index i = 0; i < m; ++i) {
      for (Index k = 0; k < d_in; ++k) Z(i, k) = lo[k] + (hi[k] - lo[k]) * unit(rng);
    }
    return Z;
  }
  std::vector<std::pair<std::size_t, Index>> rows;
  for (std::size_t n = 0; n < train.size(); ++n) {
    for (Index t = 0; t < train[n].length(); ++t) rows.emplace_back(n, t);
  }
  std::shuffle(rows.begin(), rows.end(), rng);
  for (Index i = 0; i < m; ++i) {
    const auto [n, t] = rows[static_cast<std::size_t>(i) % rows.size()];
    const Sequence& s = train[n];
    for (Index k = 0; k < spec.d_x; ++k) {
      Z(i, k) = k < s.d_y() ? s.y(t, k) + 1e-3 * (unit(rng) - 0.5) : 2.0 * unit(rng) - 1.0;
    }
    for (Index k = 0; k < spec.d_c; ++k) Z(i, spec.d_x + k) = s.c(t, k);
  }
  return Z;
}

namespace {

void check_spec(const ModelSpec& spec, std::span<const Sequence> train) {
  if (spec.d_x < 1 || spec.d_y < 1 || spec.d_c < 0 || spec.d_y > spec.d_x) {
    throw InvalidConfig("model dimensions need 1 <= d_y <= d_x and d_c >= 0");
  }
  if (train.empty()) throw EmptySequence("model construction needs training sequences");
  for (const auto& s : train) {
    s.validate();
    if (s.d_y() != spec.d_y || s.d_c() != spec.d_c) {
      throw DimensionMismatch("training sequence '" + s.name + "' does not match d_y/d_c");
    }
  }
}

SsmParams make_ssm(const ModelSpec& spec) {
  SsmParams ssm = SsmParams::make(spec.d_x, spec.d_y, spec.d_c, spec.q_var, spec.r_var);
  ssm.residual = spec.residual;
  return ssm;
}

std::vector<InitialStateParams> make_x0(const ModelSpec& spec, const SsmParams& ssm,
                                        std::span<const Sequence> train) {
  // Mean: minimum-norm state reproducing the first observation.
  const Matrix pinv = ssm.C.transpose() * (ssm.C * ssm.C.transpose()).inverse();
  std::vector<InitialStateParams> out;
  for (const auto& s : train) {
    const Vector y0 = s.y.row(0).transpose();
    out.push_back(InitialStateParams::from_moments(pinv * y0,
                                                   Vector::Constant(spec.d_x, spec.x0_var)));
  }
  return out;
}

InducingState make_inducing(const ModelSpec& spec, std::span<const Sequence> train,
                            std::uint64_t seed) {
  const Index m = spec.num_inducing;
  return InducingState::from_factor(init_inducing_inputs(spec, train, seed), Vector::Zero(m),
                                    std::sqrt(spec.s_init) * Matrix::Identity(m, m));
}

KernelParams make_kernel(const ModelSpec& spec) {
  return KernelParams(spec.family, spec.kernel_variance,
                      Vector::Constant(spec.d_x + spec.d_c, spec.lengthscale));
}

}  // namespace

EgpssmModel make_egpssm(const ModelSpec& spec, std::span<const Sequence> train,
                        std::uint64_t seed) {
  check_spec(spec, train);
  EgpssmModel model;
  model.ssm = make_ssm(spec);
  model.kernel = make_kernel(spec);
  model.gp = make_inducing(spec, train, seed);
  Rng rng(mix_seed({seed, 0xf10ULL}));
  std::normal_distribution<double> normal(0.0, spec.flow_init_noise);
  for (Index d = 0; d < spec.d_x; ++d) {
    FlowStack f = FlowStack::identity(spec.flow_kind, spec.flow_layers, static_cast<int>(d));
    auto p = f.params();
    for (double& v : p) v += normal(rng);
    f.set_params(p);
    model.flows.push_back(std::move(f));
  }
  model.x0_var = make_x0(spec, model.ssm, train);
  model.validate();
  return model;
}

BaselineModel make_baseline(const ModelSpec& spec, std::span<const Sequence> train,
                            std::uint64_t seed) {
  check_spec(spec, train);
  BaselineModel model;
  model.ssm = make_ssm(spec);
  for (Index g = 0; g < spec.d_x; ++g) {
    model.kernels.push_back(make_kernel(spec));
    model.gps.push_back(make_inducing(spec, train, mix_seed({seed, static_cast<std::uint64_t>(g)})));
  }
  model.x0_var = make_x0(spec, model.ssm, train);
  model.validate();
  return model;
}

const SsmParams& ssm_of(const AnyModel& model) {
  return std::visit([](const auto& m) -> const SsmParams& { return m.ssm; }, model);
}

std::vector<InitialStateParams>& x0_of(AnyModel& model) {
  return std::visit([](auto& m) -> std::vector<InitialStateParams>& { return m.x0_var; }, model);
}

}  // namespace egpssm
