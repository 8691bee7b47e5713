#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "egpssm/models.hpp"

namespace egpssm {

struct ParamBlock {
  std::string name;
  std::size_t offset = 0;
  std::size_t size = 0;
};

/// Every trainable scalar of a model in a fixed order. Per GP: log variance,
/// log lengthscales, Z (row-major), q(u) mean, packed lower factor of S
/// (row-major, log diagonal). Then the flows, Q_logvar, R_logvar and the
/// per-sequence q(x0) mean and log variance.
struct ParamVector {
  Vector values;
  std::vector<ParamBlock> blocks;

  std::size_t size() const noexcept { return static_cast<std::size_t>(values.size()); }
  const ParamBlock& block(const std::string& name) const;
  /// View of one named block.
  Eigen::Map<const Vector> slice(const std::string& name) const;
  bool same_layout(const ParamVector& other) const;
};

ParamVector pack(const EgpssmModel& model);
ParamVector pack(const BaselineModel& model);
ParamVector pack(const AnyModel& model);
/// Writes `params` back into `model`; the layouts must agree.
void unpack(const ParamVector& params, EgpssmModel& model);
void unpack(const ParamVector& params, BaselineModel& model);
void unpack(const ParamVector& params, AnyModel& model);

struct TrainConfig {
  int iterations = 1000;
  double learning_rate = 0.01;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.99;
  double adam_eps = 1e-8;
  int n_mc = 8;
  std::uint64_t seed = 0;
  int log_every = 10;
  /// Global gradient-norm cap; zero or negative disables clipping.
  double clip_norm = 10.0;
  /// Sequences per iteration; zero means full batch.
  int minibatch = 0;

  void validate() const;
};

struct GradResult {
  ElboEstimate elbo;
  ParamVector grad;
};

/// ELBO and its exact gradient for frozen noise drawn from `seed`.
GradResult value_and_grad(const AnyModel& model, std::span<const Sequence> sequences, int n_mc,
                          std::uint64_t seed);

struct AdamState {
  Vector m;
  Vector v;
};

/// One Adam ascent step at step index t ≥ 1.
void adam_step(ParamVector& params, const ParamVector& grad, AdamState& state,
               const TrainConfig& cfg, int t);

struct CurvePoint {
  int iteration = 0;
  ElboEstimate elbo;
  double wall_ms = 0.0;
};

struct FitResult {
  AnyModel model;
  std::vector<CurvePoint> curve;
};

/// Runs cfg.iterations Adam ascent steps with fresh noise every iteration.
/// Writes `iteration,elbo,kl_u,kl_x0,wall_ms` rows to `log` every
/// cfg.log_every iterations and at the last one.
FitResult fit(AnyModel model, std::span<const Sequence> sequences, const TrainConfig& cfg,
              std::ostream* log = nullptr);

/// Trailing moving average of the curve's ELBO with the given window.
std::vector<double> smoothed_elbo(const std::vector<CurvePoint>& curve, int window);

}  // namespace egpssm
