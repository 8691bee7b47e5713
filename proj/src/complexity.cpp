#include "egpssm/complexity.hpp"

#include "egpssm/errors.hpp"

namespace egpssm {

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::PRSSM: return "prssm";
    case ModelKind::ODGPSSM: return "odgpssm";
    case ModelKind::EGPSSM: return "egpssm";
  }
  throw InvalidSpec("unknown model kind");
}

ModelKind model_kind_from_string(const std::string& name) {
  if (name == "prssm") return ModelKind::PRSSM;
  if (name == "odgpssm") return ModelKind::ODGPSSM;
  if (name == "egpssm") return ModelKind::EGPSSM;
  throw InvalidSpec("unknown model kind '" + name + "'");
}

namespace {

// Inducing inputs, mean and covariance of one GP with d-dimensional inputs.
double inducing_block(double m, double d) { return m * (2.0 * d + m + 4.0) / 2.0; }

}  // namespace

ComplexityReport count_params(const CountSpec& s) {
  if (s.d_x < 1 || s.m < 1) throw InvalidSpec("d_x and m must be positive");
  if (s.theta_gp < 0 || s.eta < 0 || s.shared < 0) {
    throw InvalidSpec("parameter counts must be non-negative");
  }
  if (s.kind == ModelKind::ODGPSSM && s.q_latent < 1) {
    throw InvalidSpec("ODGPSSM needs a positive latent GP count");
  }
  const double d = static_cast<double>(s.d_x);
  const double m = static_cast<double>(s.m);
  const double theta = static_cast<double>(s.theta_gp);
  const double c = static_cast<double>(s.shared);
  ComplexityReport r;
  r.kind = s.kind;
  switch (s.kind) {
    case ModelKind::PRSSM:
      r.inducing = d * inducing_block(m, d);
      r.total = c + d * theta + r.inducing;
      r.time_complexity = "O(d_x*T*m^2)";
      break;
    case ModelKind::ODGPSSM: {
      const double q = static_cast<double>(s.q_latent);
      r.inducing = q * inducing_block(m, q);
      r.total = c + q * theta + r.inducing + q * d;
      r.time_complexity = "O(Q*T*m^2)";
      break;
    }
    case ModelKind::EGPSSM:
      r.inducing = inducing_block(m, d);
      r.total = c + theta + r.inducing + static_cast<double>(s.eta) * d;
      r.time_complexity = "O(T*m^2)";
      break;
  }
  return r;
}

}  // namespace egpssm
