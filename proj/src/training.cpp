#include "egpssm/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>

#include "egpssm/rng.hpp"
#include "rollout.hpp"

namespace egpssm {

namespace {

// Walks the trainable scalars in layout order, either appending them to a
// flat buffer or reading them back from one.
class Walker {
 public:
  explicit Walker(ParamVector& out) : out_(&out) {}
  explicit Walker(const ParamVector& in) : in_(&in) {}

  void begin(std::string name) {
    current_ = {std::move(name), pos_, 0};
    if (in_) {
      if (block_ >= in_->blocks.size() || in_->blocks[block_].name != current_.name ||
          in_->blocks[block_].offset != pos_) {
        throw DimensionMismatch("parameter layout differs at block '" + current_.name + "'");
      }
    }
  }
  void end() {
    current_.size = pos_ - current_.offset;
    if (out_) {
      out_->blocks.push_back(current_);
    } else if (in_->blocks[block_].size != current_.size) {
      throw DimensionMismatch("parameter block '" + current_.name + "' has the wrong size");
    }
    ++block_;
  }
  void item(double& v) {
    if (out_) {
      buffer_.push_back(v);
    } else {
      if (pos_ >= in_->size()) throw DimensionMismatch("parameter vector too short");
      v = in_->values[static_cast<Index>(pos_)];
    }
    ++pos_;
  }
  void finish() {
    if (out_) {
      out_->values = Eigen::Map<const Vector>(buffer_.data(), static_cast<Index>(buffer_.size()));
    } else if (pos_ != in_->size() || block_ != in_->blocks.size()) {
      throw DimensionMismatch("parameter vector length disagrees with the model");
    }
  }

  void vec(const std::string& name, Vector& v) {
    begin(name);
    for (Index i = 0; i < v.size(); ++i) item(v[i]);
    end();
  }
  void gp(const std::string& prefix, double& log_var, Vector& log_ls, Matrix& Z, Vector& mean,
          Matrix& S) {
    begin(prefix + ".log_variance");
    item(log_var);
    end();
    vec(prefix + ".log_lengthscales", log_ls);
    begin(prefix + ".Z");
    for (Index i = 0; i < Z.rows(); ++i) {
      for (Index j = 0; j < Z.cols(); ++j) item(Z(i, j));
    }
    end();
    vec(prefix + ".mean", mean);
    begin(prefix + ".S");
    for (Index i = 0; i < S.rows(); ++i) {
      for (Index j = 0; j <= i; ++j) item(S(i, j));
    }
    end();
  }
  void flow(const std::string& name, std::vector<double>& p) {
    begin(name);
    for (double& v : p) item(v);
    end();
  }

 private:
  ParamVector* out_ = nullptr;
  const ParamVector* in_ = nullptr;
  std::vector<double> buffer_;
  std::size_t pos_ = 0;
  std::size_t block_ = 0;
  ParamBlock current_;
};

std::string gp_name(std::size_t g, std::size_t count) {
  return count == 1 ? std::string("gp") : "gp" + std::to_string(g);
}

void walk_tail(Walker& w, SsmParams& ssm, std::vector<InitialStateParams>& x0) {
  w.vec("Q_logvar", ssm.Q_logvar);
  w.vec("R_logvar", ssm.R_logvar);
  for (std::size_t n = 0; n < x0.size(); ++n) {
    w.vec("x0_" + std::to_string(n) + ".mean", x0[n].mean);
    w.vec("x0_" + std::to_string(n) + ".log_var", x0[n].log_var);
  }
}

void walk(Walker& w, EgpssmModel& m, bool write_back) {
  w.gp("gp", m.kernel.log_variance, m.kernel.log_lengthscales, m.gp.Z, m.gp.mean, m.gp.S_param);
  for (std::size_t d = 0; d < m.flows.size(); ++d) {
    auto p = m.flows[d].params();
    w.flow("flow" + std::to_string(d), p);
    if (write_back) m.flows[d].set_params(p);
  }
  walk_tail(w, m.ssm, m.x0_var);
  w.finish();
}

void walk(Walker& w, BaselineModel& m) {
  for (std::size_t g = 0; g < m.gps.size(); ++g) {
    auto& k = m.kernels[g];
    auto& q = m.gps[g];
    w.gp(gp_name(g, m.gps.size()), k.log_variance, k.log_lengthscales, q.Z, q.mean, q.S_param);
  }
  walk_tail(w, m.ssm, m.x0_var);
  w.finish();
}

// Gradient container laid out like the model it came from.
ParamVector pack_gradient(detail::ModelGrad& g, bool has_flows) {
  ParamVector out;
  Walker w(out);
  for (std::size_t k = 0; k < g.gps.size(); ++k) {
    auto& gg = g.gps[k];
    w.gp(has_flows ? std::string("gp") : gp_name(k, g.gps.size()), gg.log_variance,
         gg.log_lengthscales, gg.Z, gg.mean, gg.S_param);
  }
  if (has_flows) {
    for (std::size_t d = 0; d < g.flows.size(); ++d) w.flow("flow" + std::to_string(d), g.flows[d]);
  }
  w.vec("Q_logvar", g.Q_logvar);
  w.vec("R_logvar", g.R_logvar);
  for (std::size_t n = 0; n < g.x0_mean.size(); ++n) {
    w.vec("x0_" + std::to_string(n) + ".mean", g.x0_mean[n]);
    w.vec("x0_" + std::to_string(n) + ".log_var", g.x0_log_var[n]);
  }
  w.finish();
  return out;
}

GradResult evaluate_with_grad(const AnyModel& model, std::span<const Sequence> sequences,
                              const detail::EvalOptions& opts) {
  detail::ModelGrad g;
  GradResult r;
  r.elbo = detail::evaluate(detail::view_of(model), sequences, opts, &g);
  r.grad = pack_gradient(g, std::holds_alternative<EgpssmModel>(model));
  if (!r.grad.values.allFinite()) {
    for (const auto& b : r.grad.blocks) {
      if (!r.grad.slice(b.name).allFinite()) {
        throw NonFiniteGradient("gradient of '" + b.name + "' is not finite");
      }
    }
  }
  return r;
}

}  // namespace

const ParamBlock& ParamVector::block(const std::string& name) const {
  for (const auto& b : blocks) {
    if (b.name == name) return b;
  }
  throw InvalidConfig("no parameter block named '" + name + "'");
}

Eigen::Map<const Vector> ParamVector::slice(const std::string& name) const {
  const auto& b = block(name);
  return {values.data() + b.offset, static_cast<Index>(b.size)};
}

bool ParamVector::same_layout(const ParamVector& other) const {
  if (blocks.size() != other.blocks.size() || size() != other.size()) return false;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    if (blocks[i].name != other.blocks[i].name || blocks[i].offset != other.blocks[i].offset ||
        blocks[i].size != other.blocks[i].size) {
      return false;
    }
  }
  return true;
}

ParamVector pack(const EgpssmModel& model) {
  ParamVector out;
  Walker w(out);
  EgpssmModel copy = model;
  walk(w, copy, false);
  return out;
}

ParamVector pack(const BaselineModel& model) {
  ParamVector out;
  Walker w(out);
  BaselineModel copy = model;
  walk(w, copy);
  return out;
}

ParamVector pack(const AnyModel& model) {
  return std::visit([](const auto& m) { return pack(m); }, model);
}

void unpack(const ParamVector& params, EgpssmModel& model) {
  Walker w(params);
  walk(w, model, true);
}

void unpack(const ParamVector& params, BaselineModel& model) {
  Walker w(params);
  walk(w, model);
}

void unpack(const ParamVector& params, AnyModel& model) {
  std::visit([&](auto& m) { unpack(params, m); }, model);
}

void TrainConfig::validate() const {
  if (iterations < 1) throw InvalidConfig("iterations must be >= 1");
  if (!(learning_rate > 0.0)) throw InvalidConfig("learning_rate must be positive");
  if (!(adam_beta1 > 0.0 && adam_beta1 < 1.0) || !(adam_beta2 > 0.0 && adam_beta2 < 1.0)) {
    throw InvalidConfig("Adam betas must lie in (0, 1)");
  }
  if (!(adam_eps > 0.0)) throw InvalidConfig("adam_eps must be positive");
  if (n_mc < 1) throw InvalidConfig("n_mc must be >= 1");
  if (log_every < 1) throw InvalidConfig("log_every must be >= 1");
  if (minibatch < 0) throw InvalidConfig("minibatch must be >= 0");
}

GradResult value_and_grad(const AnyModel& model, std::span<const Sequence> sequences, int n_mc,
                          std::uint64_t seed) {
  detail::EvalOptions opts;
  opts.n_mc = n_mc;
  opts.seed = seed;
  return evaluate_with_grad(model, sequences, opts);
}

void adam_step(ParamVector& params, const ParamVector& grad, AdamState& state,
               const TrainConfig& cfg, int t) {
  if (params.size() != grad.size()) throw DimensionMismatch("Adam: gradient length differs");
  if (t < 1) throw InvalidConfig("Adam step index must be >= 1");
  const Index n = params.values.size();
  if (state.m.size() == 0) {
    state.m = Vector::Zero(n);
    state.v = Vector::Zero(n);
  }
  if (state.m.size() != n || state.v.size() != n) {
    throw DimensionMismatch("Adam: moment buffers have the wrong length");
  }
  const double b1 = cfg.adam_beta1;
  const double b2 = cfg.adam_beta2;
  const double c1 = 1.0 - std::pow(b1, t);
  const double c2 = 1.0 - std::pow(b2, t);
  for (Index i = 0; i < n; ++i) {
    const double g = grad.values[i];
    state.m[i] = b1 * state.m[i] + (1.0 - b1) * g;
    state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g;
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    params.values[i] += cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.adam_eps);
  }
}

FitResult fit(AnyModel model, std::span<const Sequence> sequences, const TrainConfig& cfg,
              std::ostream* log) {
  cfg.validate();
  if (sequences.empty()) throw EmptySequence("no training sequences");
  FitResult result;
  ParamVector params = pack(model);
  AdamState state;
  const auto start = std::chrono::steady_clock::now();
  if (log) *log << "iteration,elbo,kl_u,kl_x0,wall_ms\n";
  const std::size_t N = sequences.size();
  const bool batched = cfg.minibatch > 0 && static_cast<std::size_t>(cfg.minibatch) < N;
  std::vector<std::size_t> order(N);
  std::iota(order.begin(), order.end(), 0);
  for (int it = 1; it <= cfg.iterations; ++it) {
    detail::EvalOptions opts;
    opts.n_mc = cfg.n_mc;
    opts.seed = mix_seed({cfg.seed, static_cast<std::uint64_t>(it)});
    if (batched) {
      Rng rng(mix_seed({cfg.seed, static_cast<std::uint64_t>(it), 0xba7cULL}));
      std::shuffle(order.begin(), order.end(), rng);
      opts.active.assign(order.begin(), order.begin() + cfg.minibatch);
      std::sort(opts.active.begin(), opts.active.end());
      opts.data_scale = static_cast<double>(N) / cfg.minibatch;
    }
    GradResult r = evaluate_with_grad(model, sequences, opts);
    if (cfg.clip_norm > 0.0) {
      const double norm = r.grad.values.norm();
      if (norm > cfg.clip_norm) r.grad.values *= cfg.clip_norm / norm;
    }
    adam_step(params, r.grad, state, cfg, it);
    unpack(params, model);

    CurvePoint p;
    p.iteration = it;
    p.elbo = r.elbo;
    p.wall_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    result.curve.push_back(p);
    if (log && (it % cfg.log_every == 0 || it == cfg.iterations)) {
      *log << it << ',' << p.elbo.total << ',' << p.elbo.kl_u << ',' << p.elbo.kl_x0 << ','
           << p.wall_ms << '\n';
    }
  }
  result.model = std::move(model);
  return result;
}

std::vector<double> smoothed_elbo(const std::vector<CurvePoint>& curve, int window) {
  if (window < 1) throw InvalidConfig("smoothing window must be >= 1");
  std::vector<double> out;
  out.reserve(curve.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < curve.size(); ++i) {
    sum += curve[i].elbo.total;
    if (i >= static_cast<std::size_t>(window)) sum -= curve[i - window].elbo.total;
    out.push_back(sum / static_cast<double>(std::min<std::size_t>(i + 1, window)));
  }
  return out;
}

ForecastResult forecast(const AnyModel& model, const Sequence& warmup, int horizon, int n_mc,
                        std::uint64_t rng_seed, const Matrix& future_controls,
                        const ForecastOptions& opts) {
  if (warmup.length() < 1) throw EmptySequence("forecast needs a non-empty warm-up");
  if (horizon < 1) throw InvalidConfig("horizon must be >= 1");
  if (n_mc < 1) throw InvalidConfig("n_mc must be >= 1");
  const SsmParams& ssm = ssm_of(model);
  if (warmup.d_y() != ssm.d_y || warmup.d_c() != ssm.d_c) {
    throw DimensionMismatch("warm-up has d_y=" + std::to_string(warmup.d_y()) + ", d_c=" +
                            std::to_string(warmup.d_c()) + " but the model expects d_y=" +
                            std::to_string(ssm.d_y) + ", d_c=" + std::to_string(ssm.d_c));
  }
  if (ssm.d_c > 0 && (future_controls.rows() != horizon || future_controls.cols() != ssm.d_c)) {
    throw DimensionMismatch("future controls must be horizon×d_c");
  }

  // q(x0) for the warm-up: start from the state matching its first
  // observation, then fit on the warm-up with everything else frozen.
  AnyModel local = model;
  auto& x0 = x0_of(local);
  double log_var0 = std::log(0.1);
  if (!x0.empty()) {
    double acc = 0.0;
    for (const auto& q : x0) acc += q.log_var.mean();
    log_var0 = acc / static_cast<double>(x0.size());
  }
  const Matrix pinv = ssm.C.transpose() * (ssm.C * ssm.C.transpose()).inverse();
  InitialStateParams q0;
  q0.mean = pinv * warmup.y.row(0).transpose();
  q0.log_var = Vector::Constant(ssm.d_x, log_var0);
  x0.assign(1, q0);

  const std::vector<Sequence> one{warmup};
  if (opts.fit_iterations > 0) {
    TrainConfig adam;
    adam.learning_rate = opts.fit_learning_rate;
    Vector theta(2 * ssm.d_x);
    theta << x0[0].mean, x0[0].log_var;
    ParamVector params{theta, {}};
    AdamState state;
    for (int it = 1; it <= opts.fit_iterations; ++it) {
      detail::EvalOptions eo;
      eo.n_mc = opts.fit_n_mc;
      eo.seed = mix_seed({rng_seed, static_cast<std::uint64_t>(it), 0xf17ULL});
      detail::ModelGrad g;
      detail::evaluate(detail::view_of(local), one, eo, &g);
      Vector gv(2 * ssm.d_x);
      gv << g.x0_mean[0], g.x0_log_var[0];
      if (!gv.allFinite()) throw NonFiniteGradient("initial-state gradient is not finite");
      adam_step(params, ParamVector{gv, {}}, state, adam, it);
      x0[0].mean = params.values.head(ssm.d_x);
      x0[0].log_var = params.values.tail(ssm.d_x);
    }
  }

  const Index T = warmup.length();
  const Index steps = T + horizon;
  Matrix controls(ssm.d_c > 0 ? steps : 0, ssm.d_c);
  if (ssm.d_c > 0) {
    controls.topRows(T) = warmup.c;
    controls.bottomRows(horizon) = future_controls;
  }
  const auto paths =
      detail::simulate_paths(detail::view_of(local), x0[0], controls, steps, n_mc, rng_seed);

  ForecastResult out;
  out.initial_state = x0[0];
  out.mean = Matrix::Zero(horizon, ssm.d_y);
  out.var = Matrix::Zero(horizon, ssm.d_y);
  std::vector<Matrix> obs;
  obs.reserve(paths.size());
  for (const auto& p : paths) {
    obs.push_back(p.bottomRows(horizon) * ssm.C.transpose());
    out.mean += obs.back();
  }
  out.mean /= static_cast<double>(n_mc);
  if (n_mc > 1) {
    for (const auto& o : obs) out.var += (o - out.mean).cwiseAbs2();
    out.var /= static_cast<double>(n_mc - 1);
  }
  return out;
}

}  // namespace egpssm
