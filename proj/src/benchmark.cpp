#include "egpssm/benchmark.hpp"

#include <algorithm>
#include <chrono>
#include <random>
#include <vector>

#include "egpssm/rng.hpp"
#include "egpssm/training.hpp"

namespace egpssm {

CountSpec benchmark_count_spec(ModelKind kind, Index d_x, Index m, FlowKind flow,
                               int flow_layers) {
  CountSpec s;
  s.kind = kind;
  s.d_x = d_x;
  s.m = m;
  s.theta_gp = 1 + d_x;
  s.eta = kind == ModelKind::EGPSSM ? FlowStack::identity(flow, flow_layers).param_count() : 0;
  s.shared = 4 * d_x;
  if (kind == ModelKind::ODGPSSM) s.q_latent = d_x;
  return s;
}

TimingResult time_elbo(bool egpssm_model, Index d_x, Index T, Index m, int repeats,
                       std::uint64_t seed) {
  if (repeats < 1) throw InvalidConfig("repeats must be >= 1");
  Rng rng(mix_seed({seed, static_cast<std::uint64_t>(d_x), 0xbe9cULL}));
  std::normal_distribution<double> n01(0.0, 1.0);
  Sequence seq;
  seq.name = "bench";
  seq.y.resize(T, d_x);
  seq.c.resize(T, 0);
  for (Index t = 0; t < T; ++t) {
    for (Index k = 0; k < d_x; ++k) seq.y(t, k) = n01(rng);
  }
  const std::vector<Sequence> data{seq};
  ModelSpec spec;
  spec.d_x = d_x;
  spec.d_y = d_x;
  spec.num_inducing = m;
  const AnyModel model = egpssm_model ? AnyModel(make_egpssm(spec, data, seed))
                                      : AnyModel(make_baseline(spec, data, seed));
  TimingResult r;
  r.actual_params = pack(model).size();
  std::vector<double> ms;
  volatile double sink = 0.0;
  for (int i = 0; i < repeats; ++i) {
    const auto start = std::chrono::steady_clock::now();
    sink = sink + elbo(model, data, 1, seed + static_cast<std::uint64_t>(i)).total;
    ms.push_back(
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count());
  }
  std::sort(ms.begin(), ms.end());
  r.median_ms = ms[ms.size() / 2];
  r.min_ms = ms.front();
  return r;
}

}  // namespace egpssm
