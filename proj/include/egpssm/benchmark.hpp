#pragma once

#include <cstdint>
#include <string>

#include "egpssm/complexity.hpp"
#include "egpssm/models.hpp"

namespace egpssm {

/// Closed-form count inputs for a model with d_y = d_x, ARD kernels over the
/// latent state, one sequence's q(x0) and diagonal Q and R as shared part.
CountSpec benchmark_count_spec(ModelKind kind, Index d_x, Index m, FlowKind flow = FlowKind::Linear,
                               int flow_layers = 2);

struct TimingResult {
  double median_ms = 0.0;
  double min_ms = 0.0;
  /// Trainable scalars of the instantiated model.
  std::size_t actual_params = 0;
};

/// Wall time of one forward ELBO evaluation (n_mc = 1) on a synthetic
/// T-step sequence with d_y = d_x, median over `repeats` runs.
TimingResult time_elbo(bool egpssm_model, Index d_x, Index T, Index m, int repeats,
                       std::uint64_t seed);

}  // namespace egpssm
