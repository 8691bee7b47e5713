#pragma once

#include <string>

namespace egpssm {

enum class ModelKind { PRSSM, ODGPSSM, EGPSSM };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& name);

/// Inputs of the closed-form parameter counts. `shared` (c) covers the
/// parameters every variant has in common and is supplied by the caller.
struct CountSpec {
  ModelKind kind = ModelKind::EGPSSM;
  long long d_x = 1;
  long long m = 1;
  long long q_latent = 0;  // ODGPSSM only
  long long theta_gp = 0;  // |θgp| of one GP
  long long eta = 0;       // flow parameters per latent dimension
  long long shared = 0;
};

struct ComplexityReport {
  ModelKind kind = ModelKind::EGPSSM;
  /// m·(2d + m + 4)/2 per GP is a half-integer for odd m, hence double.
  double inducing = 0.0;
  double total = 0.0;
  std::string time_complexity;
};

ComplexityReport count_params(const CountSpec& spec);

}  // namespace egpssm
