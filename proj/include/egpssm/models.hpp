#pragma once

#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include "egpssm/data_io.hpp"
#include "egpssm/flows.hpp"
#include "egpssm/kernels.hpp"
#include "egpssm/numerics.hpp"
#include "egpssm/sparse_gp.hpp"

namespace egpssm {

/// Linear-Gaussian parts shared by every GPSSM variant.
///
/// Transition: x_t = b·x_{t-1} + f_t + v_t, v_t ~ N(0, diag exp(Q_logvar)),
/// with b = 1 when `residual` is set and 0 otherwise (the plain form
/// x_t ~ N(f_t, Q)). Emission: y_t ~ N(C x_t, diag exp(R_logvar)).
struct SsmParams {
  Index d_x = 1;
  Index d_y = 1;
  Index d_c = 0;
  Matrix C;
  Vector Q_logvar;
  Vector R_logvar;
  DiagGaussian x0_prior;
  bool residual = false;
  double jitter = kDefaultInducingJitter;

  /// C = [I 0], p(x0) = N(0, I).
  static SsmParams make(Index d_x, Index d_y, Index d_c, double q_var, double r_var);
  static Matrix default_emission(Index d_y, Index d_x);

  Index gp_input_dim() const noexcept { return d_x + d_c; }
  void validate() const;
};

/// Free variational parameters of q(x0) = N(mean, diag exp(log_var)).
struct InitialStateParams {
  Vector mean;
  Vector log_var;

  static InitialStateParams from_moments(const Vector& mean, const Vector& var);
  DiagGaussian distribution() const;
};

/// One shared sparse GP whose scalar output is pushed through d_x flows.
struct EgpssmModel {
  SsmParams ssm;
  KernelParams kernel;
  InducingState gp;
  std::vector<FlowStack> flows;
  std::vector<InitialStateParams> x0_var;

  void validate() const;
};

/// d_x mutually independent sparse GPs, one per latent dimension.
struct BaselineModel {
  SsmParams ssm;
  std::vector<KernelParams> kernels;
  std::vector<InducingState> gps;
  std::vector<InitialStateParams> x0_var;

  void validate() const;
};

using AnyModel = std::variant<EgpssmModel, BaselineModel>;

struct ElboEstimate {
  double total = 0.0;
  double exp_loglik = 0.0;
  double kl_u = 0.0;
  double kl_x0 = 0.0;
};

struct TransitionSample {
  double f_tilde = 0.0;
  Vector f;
  Vector x_next;
};

/// One reparametrized transition of the EGPSSM from (x_prev, c_prev).
TransitionSample sample_transition(const EgpssmModel& model, const Vector& x_prev,
                                   const Vector& c_prev, double eps_f, const Vector& eps_x);

/// log N(y; C x, diag exp(R_logvar)).
double emission_loglik(const SsmParams& ssm, const Vector& x, const Vector& y);

/// Monte-Carlo ELBO with n_mc reparametrized rollouts per sequence.
/// Deterministic in (model, sequences, n_mc, rng_seed).
ElboEstimate elbo(const EgpssmModel& model, std::span<const Sequence> sequences, int n_mc,
                  std::uint64_t rng_seed);
ElboEstimate elbo(const BaselineModel& model, std::span<const Sequence> sequences, int n_mc,
                  std::uint64_t rng_seed);
ElboEstimate elbo(const AnyModel& model, std::span<const Sequence> sequences, int n_mc,
                  std::uint64_t rng_seed);

/// Options for the initial-state fit that precedes a forecast.
struct ForecastOptions {
  /// Adam steps fitting q(x0) to the warm-up observations with every other
  /// parameter frozen. Zero keeps q(x0) at its initialization.
  int fit_iterations = 200;
  double fit_learning_rate = 0.05;
  int fit_n_mc = 4;
};

struct ForecastResult {
  Matrix mean;  // horizon×d_y
  Matrix var;   // horizon×d_y
  InitialStateParams initial_state;
};

/// Rolls the model forward from the end of `warmup` for `horizon` steps.
/// q(x0) for the warm-up is fitted on its observations, then n_mc stochastic
/// rollouts run through the warm-up controls and `future_controls`
/// (horizon×d_c, may be empty when d_c = 0). Returns per-step sample
/// moments of C·x.
ForecastResult forecast(const AnyModel& model, const Sequence& warmup, int horizon, int n_mc,
                        std::uint64_t rng_seed, const Matrix& future_controls = Matrix(),
                        const ForecastOptions& opts = {});

/// Repeats the last warm-up observation.
Matrix persistence_forecast(const Sequence& warmup, int horizon);

/// √(mean squared error) over all entries.
double rmse(const Matrix& pred, const Matrix& truth);

/// Construction settings shared by both model kinds.
struct ModelSpec {
  Index d_x = 2;
  Index d_y = 2;
  Index d_c = 0;
  Index num_inducing = 20;
  KernelFamily family = KernelFamily::Matern52;
  FlowKind flow_kind = FlowKind::Linear;
  int flow_layers = 2;
  bool residual = false;
  double q_var = 0.01;
  double r_var = 0.1;
  double x0_var = 0.1;
  double kernel_variance = 1.0;
  double lengthscale = 1.0;
  double s_init = 0.1;
  double flow_init_noise = 0.01;
};

EgpssmModel make_egpssm(const ModelSpec& spec, std::span<const Sequence> train,
                        std::uint64_t seed);
BaselineModel make_baseline(const ModelSpec& spec, std::span<const Sequence> train,
                            std::uint64_t seed);

/// Inducing inputs: uniform over the observed range per dimension when every
/// GP input coordinate is observed; otherwise a random subsample of training
/// rows with unobserved latent coordinates drawn from U(-1, 1).
Matrix init_inducing_inputs(const ModelSpec& spec, std::span<const Sequence> train,
                            std::uint64_t seed);

const SsmParams& ssm_of(const AnyModel& model);
std::vector<InitialStateParams>& x0_of(AnyModel& model);

}  // namespace egpssm
