#pragma once

#include <span>
#include <string>
#include <vector>

#include "egpssm/numerics.hpp"

namespace egpssm {

/// One Sinh-Arcsinh-Linear layer: u ↦ α·sinh(φ·asinh(u) − γ) + β.
/// α and φ are stored as logarithms, which keeps every layer strictly
/// increasing and therefore invertible.
struct SalLayerParams {
  double log_alpha = 0.0;
  double beta = 0.0;
  double gamma = 0.0;
  double log_phi = 0.0;

  static SalLayerParams from_natural(double alpha, double beta, double gamma, double phi);
  double alpha() const { return std::exp(log_alpha); }
  double phi() const { return std::exp(log_phi); }
};

/// Affine flow u ↦ α·u + β. The slope is an unconstrained real: a negative
/// slope is what lets one output dimension move against another.
struct LinearFlowParams {
  double alpha = 1.0;
  double beta = 0.0;
};

enum class FlowKind { Sal, Linear };

std::string to_string(FlowKind kind);
FlowKind flow_kind_from_string(const std::string& name);

/// The marginal flow G_d attached to one latent dimension.
struct FlowStack {
  FlowKind kind = FlowKind::Linear;
  std::vector<SalLayerParams> layers;  // Sal only, applied in order 0..J-1
  LinearFlowParams linear;             // Linear only
  int dim_index = 0;

  static FlowStack sal(std::vector<SalLayerParams> layers, int dim_index = 0);
  static FlowStack make_linear(double alpha, double beta, int dim_index = 0);
  /// Identity map of the requested kind (J layers for Sal).
  static FlowStack identity(FlowKind kind, int num_layers, int dim_index = 0);

  /// Trainable scalars: 4J for Sal, 2 for Linear.
  int param_count() const;
  /// Unconstrained parameters in storage order:
  /// Sal → [log α, β, γ, log φ] per layer; Linear → [α, β].
  std::vector<double> params() const;
  void set_params(std::span<const double> values);
};

double flow_forward(const FlowStack& stack, double f_tilde);
double flow_inverse(const FlowStack& stack, double y);
/// Σ_j ln |dG_j/du| along the composition, evaluated at input x.
double flow_logdet(const FlowStack& stack, double x);

/// Forward map plus derivatives: returns G(x), writes dG/dx and
/// dG/dθ for the unconstrained parameters (length param_count()).
double flow_forward_grad(const FlowStack& stack, double x, double& d_dx,
                         std::span<double> d_dparams);

/// Cov[f_d, f_d'] = α_d α_d' k for two linear flows over one shared GP value.
double etgp_cross_cov(double alpha_d, double alpha_dp, double k_val);

}  // namespace egpssm
