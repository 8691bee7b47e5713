#include "egpssm/flows.hpp"

#include <cmath>

namespace egpssm {

SalLayerParams SalLayerParams::from_natural(double alpha, double beta, double gamma,
                                            double phi) {
  if (!(alpha > 0.0) || !(phi > 0.0)) {
    throw InvalidConfig("SAL layer requires alpha > 0 and phi > 0");
  }
  return {std::log(alpha), beta, gamma, std::log(phi)};
}

std::string to_string(FlowKind kind) { return kind == FlowKind::Sal ? "sal" : "linear"; }

FlowKind flow_kind_from_string(const std::string& name) {
  if (name == "sal") return FlowKind::Sal;
  if (name == "linear" || name == "l") return FlowKind::Linear;
  throw InvalidConfig("unknown flow kind '" + name + "'");
}

FlowStack FlowStack::sal(std::vector<SalLayerParams> layers, int dim_index) {
  if (layers.empty()) throw InvalidConfig("SAL flow needs at least one layer");
  FlowStack s;
  s.kind = FlowKind::Sal;
  s.layers = std::move(layers);
  s.dim_index = dim_index;
  return s;
}

FlowStack FlowStack::make_linear(double alpha, double beta, int dim_index) {
  FlowStack s;
  s.kind = FlowKind::Linear;
  s.linear = {alpha, beta};
  s.dim_index = dim_index;
  return s;
}

FlowStack FlowStack::identity(FlowKind kind, int num_layers, int dim_index) {
  if (kind == FlowKind::Linear) return make_linear(1.0, 0.0, dim_index);
  if (num_layers < 1) throw InvalidConfig("SAL flow needs at least one layer");
  return sal(std::vector<SalLayerParams>(static_cast<std::size_t>(num_layers)), dim_index);
}

int FlowStack::param_count() const {
  return kind == FlowKind::Sal ? 4 * static_cast<int>(layers.size()) : 2;
}

std::vector<double> FlowStack::params() const {
  if (kind == FlowKind::Linear) return {linear.alpha, linear.beta};
  std::vector<double> out;
  out.reserve(4 * layers.size());
  for (const auto& l : layers) {
    out.insert(out.end(), {l.log_alpha, l.beta, l.gamma, l.log_phi});
  }
  return out;
}

void FlowStack::set_params(std::span<const double> values) {
  if (static_cast<int>(values.size()) != param_count()) {
    throw DimensionMismatch("flow parameter count");
  }
  if (kind == FlowKind::Linear) {
    linear = {values[0], values[1]};
    return;
  }
  for (std::size_t j = 0; j < layers.size(); ++j) {
    layers[j] = {values[4 * j], values[4 * j + 1], values[4 * j + 2], values[4 * j + 3]};
  }
}

namespace {

double sal_apply(const SalLayerParams& l, double u) {
  return l.alpha() * std::sinh(l.phi() * std::asinh(u) - l.gamma) + l.beta;
}

double sal_invert(const SalLayerParams& l, double y) {
  return std::sinh((std::asinh((y - l.beta) / l.alpha()) + l.gamma) / l.phi());
}

double sal_log_derivative(const SalLayerParams& l, double u) {
  const double w = l.phi() * std::asinh(u) - l.gamma;
  // log cosh(w) computed without overflow for large |w|.
  const double aw = std::abs(w);
  const double log_cosh = aw + std::log1p(std::exp(-2.0 * aw)) - std::log(2.0);
  return l.log_alpha + l.log_phi + log_cosh - 0.5 * std::log1p(u * u);
}

}  // namespace

double flow_forward(const FlowStack& stack, double f_tilde) {
  if (stack.kind == FlowKind::Linear) return stack.linear.alpha * f_tilde + stack.linear.beta;
  double u = f_tilde;
  for (const auto& l : stack.layers) u = sal_apply(l, u);
  return u;
}

double flow_inverse(const FlowStack& stack, double y) {
  // A linear flow with α = 0 is not invertible; the division yields ±inf/NaN.
  if (stack.kind == FlowKind::Linear) return (y - stack.linear.beta) / stack.linear.alpha;
  double u = y;
  for (auto it = stack.layers.rbegin(); it != stack.layers.rend(); ++it) u = sal_invert(*it, u);
  return u;
}

double flow_logdet(const FlowStack& stack, double x) {
  if (stack.kind == FlowKind::Linear) return std::log(std::abs(stack.linear.alpha));
  double total = 0.0;
  double u = x;
  for (const auto& l : stack.layers) {
    total += sal_log_derivative(l, u);
    u = sal_apply(l, u);
  }
  return total;
}

double flow_forward_grad(const FlowStack& stack, double x, double& d_dx,
                         std::span<double> d_dparams) {
  if (static_cast<int>(d_dparams.size()) != stack.param_count()) {
    throw DimensionMismatch("flow gradient buffer size");
  }
  if (stack.kind == FlowKind::Linear) {
    d_dx = stack.linear.alpha;
    d_dparams[0] = x;
    d_dparams[1] = 1.0;
    return stack.linear.alpha * x + stack.linear.beta;
  }
  const std::size_t J = stack.layers.size();
  // Forward sweep records each layer's input; the backward sweep carries the
  // product of downstream layer derivatives.
  thread_local std::vector<double> inputs;
  inputs.resize(J);
  double u = x;
  for (std::size_t j = 0; j < J; ++j) {
    inputs[j] = u;
    u = sal_apply(stack.layers[j], u);
  }
  double downstream = 1.0;
  for (std::size_t jj = J; jj-- > 0;) {
    const auto& l = stack.layers[jj];
    const double in = inputs[jj];
    const double a = std::asinh(in);
    const double w = l.phi() * a - l.gamma;
    const double sh = std::sinh(w);
    const double ch = std::cosh(w);
    const double alpha = l.alpha();
    d_dparams[4 * jj + 0] = downstream * alpha * sh;
    d_dparams[4 * jj + 1] = downstream;
    d_dparams[4 * jj + 2] = -downstream * alpha * ch;
    d_dparams[4 * jj + 3] = downstream * alpha * ch * l.phi() * a;
    downstream *= alpha * l.phi() * ch / std::sqrt(1.0 + in * in);
  }
  d_dx = downstream;
  return u;
}

double etgp_cross_cov(double alpha_d, double alpha_dp, double k_val) {
  return alpha_d * alpha_dp * k_val;
}

}  // namespace egpssm
