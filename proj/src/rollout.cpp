#include "rollout.hpp"

#include <cmath>
#include <random>

#include "egpssm/rng.hpp"

namespace egpssm::detail {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Noise {
  Vector eps0;
  RowMatrix eps_f;  // T×G
  RowMatrix eps_x;  // T×d_x
};

Noise draw_noise(std::uint64_t seed, std::uint64_t sample, std::uint64_t seq, Index T, Index G,
                 Index d_x) {
  Rng rng(mix_seed({seed, sample, seq}));
  std::normal_distribution<double> normal(0.0, 1.0);
  Noise n;
  n.eps0.resize(d_x);
  for (Index k = 0; k < d_x; ++k) n.eps0[k] = normal(rng);
  n.eps_f.resize(T, G);
  n.eps_x.resize(T, d_x);
  for (Index t = 0; t < T; ++t) {
    for (Index g = 0; g < G; ++g) n.eps_f(t, g) = normal(rng);
    for (Index k = 0; k < d_x; ++k) n.eps_x(t, k) = normal(rng);
  }
  return n;
}

// Forward record of one rollout, kept only when gradients are requested.
struct Trace {
  RowMatrix x;    // (T+1)×d_x
  RowMatrix in;   // T×d_in
  std::vector<RowMatrix> kx;   // per GP: T×m
  std::vector<RowMatrix> wkx;  // per GP: T×m
  RowMatrix s2;       // T×G (after clamping)
  RowMatrix f_tilde;  // T×G
};

struct Workspace {
  std::vector<Vector> kx;
  std::vector<Vector> wkx;
  Vector in;
  Vector f;
  Vector f_tilde;
};

struct Context {
  const ModelView& view;
  std::vector<SparseGpPredictor> preds;
  Vector q_std;
  Vector r_var;
  Vector r_inv;
};

// Propagates one transition: x_next from x_prev and control row.
void transition(const Context& ctx, const double* x_prev, const double* c_row, const double* eps_f,
                const double* eps_x, double* x_next, Workspace& ws, double* s2_out,
                double* ft_out) {
  const SsmParams& ssm = *ctx.view.ssm;
  const Index d_x = ssm.d_x;
  const Index G = ctx.view.num_gps();
  for (Index k = 0; k < d_x; ++k) ws.in[k] = x_prev[k];
  for (Index k = 0; k < ssm.d_c; ++k) ws.in[d_x + k] = c_row[k];
  for (Index g = 0; g < G; ++g) {
    const auto mom = ctx.preds[static_cast<std::size_t>(g)].predict(
        ws.in.data(), ws.kx[static_cast<std::size_t>(g)].data(),
        ws.wkx[static_cast<std::size_t>(g)].data());
    ws.f_tilde[g] = mom.mean + std::sqrt(mom.var) * eps_f[g];
    if (s2_out) s2_out[g] = mom.var;
    if (ft_out) ft_out[g] = ws.f_tilde[g];
  }
  if (ctx.view.flows) {
    for (Index d = 0; d < d_x; ++d) {
      ws.f[d] = flow_forward((*ctx.view.flows)[static_cast<std::size_t>(d)], ws.f_tilde[0]);
    }
  } else {
    for (Index d = 0; d < d_x; ++d) ws.f[d] = ws.f_tilde[d];
  }
  for (Index d = 0; d < d_x; ++d) {
    x_next[d] = (ssm.residual ? x_prev[d] : 0.0) + ws.f[d] + ctx.q_std[d] * eps_x[d];
  }
}

Workspace make_workspace(const Context& ctx) {
  Workspace ws;
  for (const auto& p : ctx.preds) {
    ws.kx.emplace_back(p.size());
    ws.wkx.emplace_back(p.size());
  }
  ws.in.resize(ctx.view.ssm->gp_input_dim());
  ws.f.resize(ctx.view.ssm->d_x);
  ws.f_tilde.resize(ctx.view.num_gps());
  return ws;
}

Context make_context(const ModelView& view) {
  Context ctx{view, {}, {}, {}, {}};
  ctx.preds.reserve(view.gps.size());
  for (std::size_t g = 0; g < view.gps.size(); ++g) {
    ctx.preds.emplace_back(*view.gps[g], *view.kernels[g], view.ssm->jitter);
  }
  ctx.q_std = (0.5 * view.ssm->Q_logvar.array()).exp();
  ctx.r_var = view.ssm->R_logvar.array().exp();
  ctx.r_inv = (-view.ssm->R_logvar.array()).exp();
  return ctx;
}

double emission_term(const Context& ctx, const double* x, const double* y, double* dx,
                     double* dr, double weight) {
  const SsmParams& ssm = *ctx.view.ssm;
  double ll = 0.0;
  for (Index j = 0; j < ssm.d_y; ++j) {
    double cx = 0.0;
    for (Index k = 0; k < ssm.d_x; ++k) cx += ssm.C(j, k) * x[k];
    const double res = y[j] - cx;
    ll += -0.5 * (kLog2Pi + ssm.R_logvar[j] + res * res * ctx.r_inv[j]);
    if (dx) {
      const double g = weight * res * ctx.r_inv[j];
      for (Index k = 0; k < ssm.d_x; ++k) dx[k] += ssm.C(j, k) * g;
      dr[j] += weight * -0.5 * (1.0 - res * res * ctx.r_inv[j]);
    }
  }
  return ll;
}

// Per-GP accumulators for the terms that depend on K_zz, m and S only
// through A = K⁻¹m and W = K⁻¹ − K⁻¹SK⁻¹.
struct GpAccum {
  Vector a_bar;
  Matrix w_bar;
};

// Reverse sweep over one recorded rollout.
void backward_unit(const Context& ctx, const Sequence& seq, const Noise& noise,
                   const Trace& tr, const InitialStateParams& q0, double weight,
                   std::vector<GpAccum>& acc, ModelGrad& grad, Index seq_idx) {
  const SsmParams& ssm = *ctx.view.ssm;
  const Index T = seq.length();
  const Index d_x = ssm.d_x;
  const Index d_in = ssm.gp_input_dim();
  const Index G = ctx.view.num_gps();
  const bool flows = ctx.view.flows != nullptr;

  RowMatrix xbar = RowMatrix::Zero(T + 1, d_x);
  RowMatrix mu_bar(T, G);
  RowMatrix s2_bar(T, G);
  Vector f_bar(d_x);
  Vector ft_bar(G);
  Vector in_bar(d_in);
  Vector kx_bar;
  std::vector<double> flow_d;

  for (Index t = T; t >= 1; --t) {
    const Index row = t - 1;
    const Vector y_row = seq.y.row(row).transpose();
    emission_term(ctx, tr.x.row(t).data(), y_row.data(), xbar.row(t).data(),
                  grad.R_logvar.data(), weight);
    for (Index d = 0; d < d_x; ++d) {
      const double xb = xbar(t, d);
      f_bar[d] = xb;
      grad.Q_logvar[d] += xb * 0.5 * ctx.q_std[d] * noise.eps_x(row, d);
      if (ssm.residual) xbar(t - 1, d) += xb;
    }
    if (flows) {
      double acc_ft = 0.0;
      for (Index d = 0; d < d_x; ++d) {
        const auto& stack = (*ctx.view.flows)[static_cast<std::size_t>(d)];
        flow_d.resize(static_cast<std::size_t>(stack.param_count()));
        double dfdx = 0.0;
        flow_forward_grad(stack, tr.f_tilde(row, 0), dfdx, flow_d);
        acc_ft += f_bar[d] * dfdx;
        auto& fg = grad.flows[static_cast<std::size_t>(d)];
        for (std::size_t p = 0; p < flow_d.size(); ++p) fg[p] += f_bar[d] * flow_d[p];
      }
      ft_bar[0] = acc_ft;
    } else {
      for (Index g = 0; g < G; ++g) ft_bar[g] = f_bar[g];
    }

    in_bar.setZero();
    for (Index g = 0; g < G; ++g) {
      const auto& pred = ctx.preds[static_cast<std::size_t>(g)];
      auto& gg = grad.gps[static_cast<std::size_t>(g)];
      const double s2 = tr.s2(row, g);
      const double mb = ft_bar[g];
      const double sb = s2 > 0.0 ? ft_bar[g] * noise.eps_f(row, g) / (2.0 * std::sqrt(s2)) : 0.0;
      mu_bar(row, g) = mb;
      s2_bar(row, g) = sb;
      // s2 = σ² − k_xᵀ W k_x; the leading σ² is k(x, x).
      gg.log_variance += sb * pred.variance();
      const Index m = pred.size();
      const auto kx = tr.kx[static_cast<std::size_t>(g)].row(row);
      const auto wkx = tr.wkx[static_cast<std::size_t>(g)].row(row);
      kx_bar = mb * pred.alpha() - 2.0 * sb * wkx.transpose();
      const Vector& inv_ls = pred.inv_ls();
      const Matrix& zs = pred.scaled_inducing();
      for (Index i = 0; i < m; ++i) {
        double r2 = 0.0;
        for (Index k = 0; k < d_in; ++k) {
          const double diff = tr.in(row, k) * inv_ls[k] - zs(i, k);
          r2 += diff * diff;
        }
        const auto prof = kernel_profile(pred.family(), pred.variance(), r2);
        const double common = kx_bar[i] * 2.0 * prof.d_r2;
        gg.log_variance += kx_bar[i] * kx[i];
        for (Index k = 0; k < d_in; ++k) {
          const double diff = tr.in(row, k) * inv_ls[k] - zs(i, k);
          const double g_in = common * diff * inv_ls[k];
          in_bar[k] += g_in;
          gg.Z(i, k) -= g_in;
          gg.log_lengthscales[k] -= common * diff * diff;
        }
      }
    }
    for (Index d = 0; d < d_x; ++d) xbar(t - 1, d) += in_bar[d];
  }

  for (Index g = 0; g < G; ++g) {
    const auto& kx_all = tr.kx[static_cast<std::size_t>(g)];
    auto& a = acc[static_cast<std::size_t>(g)];
    a.a_bar.noalias() += kx_all.transpose() * mu_bar.col(g);
    a.w_bar.noalias() -= kx_all.transpose() * (s2_bar.col(g).asDiagonal() * kx_all);
  }

  const Vector q0_std = (0.5 * q0.log_var.array()).exp();
  auto& gm = grad.x0_mean[static_cast<std::size_t>(seq_idx)];
  auto& gv = grad.x0_log_var[static_cast<std::size_t>(seq_idx)];
  for (Index d = 0; d < d_x; ++d) {
    gm[d] += xbar(0, d);
    gv[d] += xbar(0, d) * 0.5 * q0_std[d] * noise.eps0[d];
  }
}

// Chains dObjective/dA, dObjective/dW and the −KL(q(u)‖p(u)) term back to
// the GP's kernel hyperparameters, inducing inputs, mean and S factor.
void backward_gp(const SparseGpPredictor& pred, const InducingState& gp, const GpAccum& acc,
                 GpGrad& out) {
  const Index m = pred.size();
  const Index d_in = pred.input_dim();
  const Matrix& P = pred.kzz_inverse();
  const Vector& A = pred.alpha();
  const Matrix& Ls = pred.s_factor();
  const Matrix S = Ls * Ls.transpose();

  Matrix k_bar = -(P * acc.a_bar) * A.transpose();
  Vector m_bar = P * acc.a_bar;

  const Matrix w_sym = 0.5 * (acc.w_bar + acc.w_bar.transpose());
  const Matrix M = P * w_sym * P;
  const Matrix SP = S * P;
  k_bar += -M + M * SP + SP.transpose() * M;
  Matrix l_bar = -2.0 * M * Ls;

  // −KL terms
  m_bar -= A;
  k_bar -= 0.5 * (P - P * SP - A * A.transpose());
  l_bar -= P * Ls;
  for (Index i = 0; i < m; ++i) l_bar(i, i) += 1.0 / Ls(i, i);

  out.mean += m_bar;
  for (Index i = 0; i < m; ++i) {
    for (Index j = 0; j < i; ++j) out.S_param(i, j) += l_bar(i, j);
    out.S_param(i, i) += l_bar(i, i) * Ls(i, i);
  }

  const Matrix ks = 0.5 * (k_bar + k_bar.transpose());
  out.log_variance += ks.cwiseProduct(pred.kzz()).sum();
  const Matrix& zs = pred.scaled_inducing();
  const Vector& inv_ls = pred.inv_ls();
  for (Index i = 0; i < m; ++i) {
    for (Index j = 0; j < m; ++j) {
      if (i == j) continue;
      double r2 = 0.0;
      for (Index k = 0; k < d_in; ++k) {
        const double diff = zs(i, k) - zs(j, k);
        r2 += diff * diff;
      }
      const double h = kernel_profile(pred.family(), pred.variance(), r2).d_r2;
      const double w = ks(i, j);
      for (Index k = 0; k < d_in; ++k) {
        const double diff = zs(i, k) - zs(j, k);
        out.Z(i, k) += 2.0 * w * 2.0 * h * diff * inv_ls[k];
        out.log_lengthscales[k] -= w * 2.0 * h * diff * diff;
      }
    }
  }
  (void)gp;
}

void init_grad(const ModelView& view, Index num_sequences, ModelGrad& grad) {
  const SsmParams& ssm = *view.ssm;
  grad.gps.clear();
  for (std::size_t g = 0; g < view.gps.size(); ++g) {
    GpGrad gg;
    const Index m = view.gps[g]->size();
    const Index d_in = view.gps[g]->input_dim();
    gg.log_lengthscales = Vector::Zero(view.kernels[g]->input_dim());
    gg.Z = Matrix::Zero(m, d_in);
    gg.mean = Vector::Zero(m);
    gg.S_param = Matrix::Zero(m, m);
    grad.gps.push_back(std::move(gg));
  }
  grad.flows.clear();
  if (view.flows) {
    for (const auto& f : *view.flows) {
      grad.flows.emplace_back(static_cast<std::size_t>(f.param_count()), 0.0);
    }
  }
  grad.Q_logvar = Vector::Zero(ssm.d_x);
  grad.R_logvar = Vector::Zero(ssm.d_y);
  grad.x0_mean.assign(static_cast<std::size_t>(num_sequences), Vector::Zero(ssm.d_x));
  grad.x0_log_var.assign(static_cast<std::size_t>(num_sequences), Vector::Zero(ssm.d_x));
}

}  // namespace

ModelView view_of(const EgpssmModel& model) {
  ModelView v;
  v.ssm = &model.ssm;
  v.kernels = {&model.kernel};
  v.gps = {&model.gp};
  v.flows = &model.flows;
  v.x0 = &model.x0_var;
  return v;
}

ModelView view_of(const BaselineModel& model) {
  ModelView v;
  v.ssm = &model.ssm;
  for (const auto& k : model.kernels) v.kernels.push_back(&k);
  for (const auto& g : model.gps) v.gps.push_back(&g);
  v.x0 = &model.x0_var;
  return v;
}

ModelView view_of(const AnyModel& model) {
  return std::visit([](const auto& m) { return view_of(m); }, model);
}

ElboEstimate evaluate(const ModelView& view, std::span<const Sequence> sequences,
                      const EvalOptions& opts, ModelGrad* grad) {
  if (opts.n_mc < 1) throw InvalidConfig("n_mc must be >= 1");
  if (sequences.empty()) throw EmptySequence("no sequences to evaluate");
  const SsmParams& ssm = *view.ssm;
  if (view.x0->size() != sequences.size()) {
    throw DimensionMismatch("model has " + std::to_string(view.x0->size()) +
                            " initial-state distributions for " +
                            std::to_string(sequences.size()) + " sequences");
  }
  std::vector<std::size_t> active = opts.active;
  if (active.empty()) {
    for (std::size_t n = 0; n < sequences.size(); ++n) active.push_back(n);
  }
  for (std::size_t n : active) {
    const auto& seq = sequences[n];
    if (seq.length() < 1) throw EmptySequence("sequence '" + seq.name + "' is empty");
    if (seq.d_y() != ssm.d_y || seq.d_c() != ssm.d_c) {
      throw DimensionMismatch("sequence '" + seq.name + "' has d_y=" +
                              std::to_string(seq.d_y()) + ", d_c=" + std::to_string(seq.d_c()) +
                              " but the model expects d_y=" + std::to_string(ssm.d_y) +
                              ", d_c=" + std::to_string(ssm.d_c));
    }
  }

  const Context ctx = make_context(view);
  Workspace ws = make_workspace(ctx);
  const Index d_x = ssm.d_x;
  const Index G = view.num_gps();
  const double weight = opts.data_scale / static_cast<double>(opts.n_mc);

  std::vector<GpAccum> acc;
  if (grad) {
    init_grad(view, static_cast<Index>(sequences.size()), *grad);
    for (const auto& p : ctx.preds) {
      acc.push_back({Vector::Zero(p.size()), Matrix::Zero(p.size(), p.size())});
    }
  }

  double loglik = 0.0;
  Trace tr;
  Vector x_prev(d_x);
  Vector x_next(d_x);
  Vector c_buf(ssm.d_c);
  for (int s = 0; s < opts.n_mc; ++s) {
    for (std::size_t n : active) {
      const Sequence& seq = sequences[n];
      const Index T = seq.length();
      Noise noise = draw_noise(opts.seed, static_cast<std::uint64_t>(s), n, T, G, d_x);
      if (opts.zero_noise) {
        noise.eps0.setZero();
        noise.eps_f.setZero();
        noise.eps_x.setZero();
      }
      const InitialStateParams& q0 = (*view.x0)[n];
      double unit_ll = 0.0;
      if (grad) {
        tr.x.resize(T + 1, d_x);
        tr.in.resize(T, ssm.gp_input_dim());
        tr.s2.resize(T, G);
        tr.f_tilde.resize(T, G);
        tr.kx.resize(static_cast<std::size_t>(G));
        tr.wkx.resize(static_cast<std::size_t>(G));
        for (Index g = 0; g < G; ++g) {
          tr.kx[static_cast<std::size_t>(g)].resize(T, ctx.preds[static_cast<std::size_t>(g)].size());
          tr.wkx[static_cast<std::size_t>(g)].resize(T, ctx.preds[static_cast<std::size_t>(g)].size());
        }
      }
      for (Index d = 0; d < d_x; ++d) {
        x_prev[d] = q0.mean[d] + std::exp(0.5 * q0.log_var[d]) * noise.eps0[d];
      }
      if (grad) tr.x.row(0) = x_prev.transpose();
      for (Index t = 1; t <= T; ++t) {
        const Index row = t - 1;
        if (ssm.d_c > 0) c_buf = seq.c.row(row).transpose();
        const double* c_row = c_buf.data();
        transition(ctx, x_prev.data(), c_row, noise.eps_f.row(row).data(),
                   noise.eps_x.row(row).data(), x_next.data(), ws,
                   grad ? tr.s2.row(row).data() : nullptr,
                   grad ? tr.f_tilde.row(row).data() : nullptr);
        if (grad) {
          tr.in.row(row) = ws.in.transpose();
          for (Index g = 0; g < G; ++g) {
            tr.kx[static_cast<std::size_t>(g)].row(row) = ws.kx[static_cast<std::size_t>(g)].transpose();
            tr.wkx[static_cast<std::size_t>(g)].row(row) = ws.wkx[static_cast<std::size_t>(g)].transpose();
          }
          tr.x.row(t) = x_next.transpose();
        }
        const Vector y_row = seq.y.row(row).transpose();
        unit_ll += emission_term(ctx, x_next.data(), y_row.data(), nullptr, nullptr, 0.0);
        std::swap(x_prev, x_next);
      }
      loglik += unit_ll;
      if (grad) backward_unit(ctx, seq, noise, tr, q0, weight, acc, *grad, static_cast<Index>(n));
    }
  }

  ElboEstimate est;
  est.exp_loglik = loglik * weight;
  for (const auto& p : ctx.preds) est.kl_u += p.kl();
  double kl_x0 = 0.0;
  for (std::size_t n : active) {
    const auto& q0 = (*view.x0)[n];
    kl_x0 += gaussian_kl(q0.distribution(), ssm.x0_prior);
    if (grad) {
      auto& gm = grad->x0_mean[n];
      auto& gv = grad->x0_log_var[n];
      for (Index d = 0; d < d_x; ++d) {
        const double vq = std::exp(q0.log_var[d]);
        const double vp = ssm.x0_prior.var[d];
        gm[d] -= opts.data_scale * (q0.mean[d] - ssm.x0_prior.mean[d]) / vp;
        gv[d] -= opts.data_scale * 0.5 * (vq / vp - 1.0);
      }
    }
  }
  est.kl_x0 = kl_x0 * opts.data_scale;
  est.total = est.exp_loglik - est.kl_u - est.kl_x0;

  if (grad) {
    for (std::size_t g = 0; g < ctx.preds.size(); ++g) {
      backward_gp(ctx.preds[g], *view.gps[g], acc[g], grad->gps[g]);
    }
  }
  return est;
}

std::vector<Matrix> simulate_paths(const ModelView& view, const InitialStateParams& initial,
                                   const Matrix& controls, Index steps, int n_mc,
                                   std::uint64_t seed) {
  const SsmParams& ssm = *view.ssm;
  if (ssm.d_c > 0 && (controls.rows() < steps || controls.cols() != ssm.d_c)) {
    throw DimensionMismatch("simulation needs " + std::to_string(steps) + "×" +
                            std::to_string(ssm.d_c) + " controls");
  }
  const Context ctx = make_context(view);
  Workspace ws = make_workspace(ctx);
  const Index d_x = ssm.d_x;
  std::vector<Matrix> paths;
  paths.reserve(static_cast<std::size_t>(n_mc));
  Vector x_prev(d_x), x_next(d_x), c_buf(ssm.d_c);
  for (int s = 0; s < n_mc; ++s) {
    const Noise noise =
        draw_noise(seed, static_cast<std::uint64_t>(s), 0x5eedULL, steps, view.num_gps(), d_x);
    Matrix path(steps + 1, d_x);
    for (Index d = 0; d < d_x; ++d) {
      x_prev[d] = initial.mean[d] + std::exp(0.5 * initial.log_var[d]) * noise.eps0[d];
    }
    path.row(0) = x_prev.transpose();
    for (Index t = 0; t < steps; ++t) {
      if (ssm.d_c > 0) c_buf = controls.row(t).transpose();
      transition(ctx, x_prev.data(), c_buf.data(), noise.eps_f.row(t).data(),
                 noise.eps_x.row(t).data(), x_next.data(), ws, nullptr, nullptr);
      path.row(t + 1) = x_next.transpose();
      std::swap(x_prev, x_next);
    }
    paths.push_back(std::move(path));
  }
  return paths;
}

}  // namespace egpssm::detail
