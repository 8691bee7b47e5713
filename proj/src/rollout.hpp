#pragma once

// Shared rollout machinery for both model kinds: a model is viewed as a bank
// of G sparse GPs (G = 1 for the EGPSSM, G = d_x for the baseline) plus an
// optional set of flows mapping the single shared GP output onto d_x
// dimensions.

#include <cstdint>
#include <span>
#include <vector>

#include "egpssm/models.hpp"

namespace egpssm::detail {

struct ModelView {
  const SsmParams* ssm = nullptr;
  std::vector<const KernelParams*> kernels;
  std::vector<const InducingState*> gps;
  const std::vector<FlowStack>* flows = nullptr;  // null: GP g drives dimension g
  const std::vector<InitialStateParams>* x0 = nullptr;

  Index num_gps() const noexcept { return static_cast<Index>(gps.size()); }
};

ModelView view_of(const EgpssmModel& model);
ModelView view_of(const BaselineModel& model);
ModelView view_of(const AnyModel& model);

/// Gradient of the objective with respect to each GP's unconstrained
/// parameters. S_param holds d/dL_S for off-diagonal entries and d/d(log L_ii)
/// on the diagonal.
struct GpGrad {
  double log_variance = 0.0;
  Vector log_lengthscales;
  Matrix Z;
  Vector mean;
  Matrix S_param;
};

struct ModelGrad {
  std::vector<GpGrad> gps;
  std::vector<std::vector<double>> flows;
  Vector Q_logvar;
  Vector R_logvar;
  std::vector<Vector> x0_mean;
  std::vector<Vector> x0_log_var;
};

struct EvalOptions {
  int n_mc = 8;
  std::uint64_t seed = 0;
  /// Indices of sequences entering this evaluation; empty means all.
  std::vector<std::size_t> active;
  /// Multiplier on the expected log-likelihood and KL(q(x0)) terms
  /// (N / batch size when minibatching).
  double data_scale = 1.0;
  /// Replaces every standard-normal draw with 0 (mean-path rollouts).
  bool zero_noise = false;
};

/// Evaluates the ELBO; fills `grad` when non-null.
ElboEstimate evaluate(const ModelView& view, std::span<const Sequence> sequences,
                      const EvalOptions& opts, ModelGrad* grad);

/// Sampled latent paths: n_mc matrices of (steps + 1)×d_x states starting
/// from q(x0) = `initial` and driven by `controls` (steps×d_c).
std::vector<Matrix> simulate_paths(const ModelView& view, const InitialStateParams& initial,
                                   const Matrix& controls, Index steps, int n_mc,
                                   std::uint64_t seed);

}  // namespace egpssm::detail
