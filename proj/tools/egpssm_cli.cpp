#include <CLI11.hpp>
#include <json.hpp>

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "egpssm/benchmark.hpp"
#include "egpssm/checkpoint.hpp"
#include "egpssm/config.hpp"
#include "egpssm/data_io.hpp"
#include "egpssm/training.hpp"
#include "svg_chart.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace egpssm;

namespace {

using Echo = std::map<std::string, std::string>;

std::string comment_block(const Echo& echo, const std::string& prefix) {
  std::ostringstream o;
  for (const auto& [k, v] : echo) o << prefix << k << '=' << v << '\n';
  return o.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw Error("failed writing '" + path.string() + "'");
}

std::string num(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

// ---- gen-data ----

struct GenArgs {
  std::uint64_t seed = 0;
  int n_seq = 10;
  int len = 50;
  std::string out;
  bool noise_free = false;
};

void run_gen_data(const GenArgs& a) {
  if (a.n_seq < 1 || a.len < 1) throw InvalidConfig("--n-seq and --len must be >= 1");
  fs::create_directories(a.out);
  KinkOptions opts;
  opts.noise_free = a.noise_free;
  auto seqs = gen_kink(a.n_seq, a.len, a.seed, opts);
  const Echo echo{{"command", "gen-data"},
                  {"generator", "kink"},
                  {"seed", std::to_string(a.seed)},
                  {"n_seq", std::to_string(a.n_seq)},
                  {"len", std::to_string(a.len)},
                  {"noise_free", a.noise_free ? "true" : "false"}};
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    auto& s = seqs[i];
    s.provenance.clear();
    for (const auto& [k, v] : echo) s.provenance.push_back(k + "=" + v);
    s.provenance.push_back("index=" + std::to_string(i));
    char name[32];
    std::snprintf(name, sizeof name, "kink_%03zu.csv", i);
    write_csv(s, fs::path(a.out) / name);
  }
  std::cout << "wrote " << seqs.size() << " sequences to " << a.out << '\n';
}

// ---- train ----

struct TrainArgs {
  std::string config;
  std::vector<std::string> sets;
  std::string out;
  std::vector<std::string> data;
  std::uint64_t seed = 0;
  bool seed_given = false;
};

RunConfig resolve_config(const TrainArgs& a) {
  RunConfig cfg = a.config.empty() ? RunConfig{} : load_config(a.config);
  for (const auto& kv : a.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw InvalidConfig("--set expects key=value, got '" + kv + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (a.seed_given) cfg.train.seed = a.seed;
  if (!a.data.empty()) {
    cfg.data_source = "csv";
    cfg.data_path = a.data.front();
  }
  cfg.validate();
  return cfg;
}

void run_train(const TrainArgs& a) {
  const RunConfig cfg = resolve_config(a);
  std::vector<Sequence> train;
  std::optional<Standardizer> standardizer;
  if (cfg.data_source == "kink") {
    train = gen_kink(cfg.n_seq, cfg.seq_len, cfg.data_seed);
  } else if (a.data.size() > 1) {
    // Several files: each is a complete training sequence, used as is.
    for (const auto& p : a.data) train.push_back(load_csv(p));
  } else {
    const auto split = split_standardize(load_csv(cfg.data_path), cfg.split_frac);
    train.push_back(split.train);
    standardizer = split.standardizer;
  }
  ModelSpec spec = cfg.spec;
  for (const auto& s : train) {
    if (s.d_y() != spec.d_y || s.d_c() != spec.d_c) {
      throw DimensionMismatch("data '" + s.name + "' has d_y=" + std::to_string(s.d_y()) +
                              ", d_c=" + std::to_string(s.d_c()) + " but the config says d_y=" +
                              std::to_string(spec.d_y) + ", d_c=" + std::to_string(spec.d_c));
    }
  }
  AnyModel model = cfg.model == "egpssm" ? AnyModel(make_egpssm(spec, train, cfg.train.seed))
                                         : AnyModel(make_baseline(spec, train, cfg.train.seed));
  fs::create_directories(a.out);
  const Echo echo = cfg.resolved();
  std::ostringstream log;
  log << comment_block(echo, "# ");
  const FitResult fitted = fit(std::move(model), train, cfg.train, &log);
  write_text(fs::path(a.out) / "train_log.csv", log.str());

  Checkpoint ckpt{fitted.model, standardizer, echo, cfg.train.seed};
  save_checkpoint(ckpt, fs::path(a.out) / "checkpoint.json");

  const auto smooth = smoothed_elbo(fitted.curve, 50);
  json report = {{"command", "train"},
                 {"config", echo},
                 {"seed", cfg.train.seed},
                 {"iterations", cfg.train.iterations},
                 {"params_total", pack(fitted.model).size()},
                 {"elbo_initial", fitted.curve.front().elbo.total},
                 {"elbo_final", fitted.curve.back().elbo.total},
                 {"elbo_smoothed_final", smooth.back()}};
  write_text(fs::path(a.out) / "train_report.json", report.dump(2) + "\n");
  std::cout << "final ELBO " << fitted.curve.back().elbo.total << "; wrote " << a.out << '\n';
}

// ---- predict ----

struct PredictArgs {
  std::string checkpoint;
  std::vector<std::string> data;
  std::string out;
  int start = 0;
  int warmup = 10;
  int horizon = 50;
  int n_mc = 100;
  int fit_iterations = 200;
  std::uint64_t seed = 0;
};

void run_predict(const PredictArgs& a) {
  if (a.warmup < 1 || a.horizon < 1 || a.n_mc < 1 || a.start < 0) {
    throw InvalidConfig("--warmup, --horizon and --n-mc must be >= 1 and --start >= 0");
  }
  const Checkpoint ckpt = load_checkpoint(a.checkpoint);
  const SsmParams& ssm = ssm_of(ckpt.model);
  Echo echo = ckpt.config;
  echo["predict.checkpoint"] = a.checkpoint;
  echo["predict.start"] = std::to_string(a.start);
  echo["predict.warmup"] = std::to_string(a.warmup);
  echo["predict.horizon"] = std::to_string(a.horizon);
  echo["predict.n_mc"] = std::to_string(a.n_mc);
  echo["predict.fit_iterations"] = std::to_string(a.fit_iterations);
  echo["predict.seed"] = std::to_string(a.seed);
  ForecastOptions fo;
  fo.fit_iterations = a.fit_iterations;

  fs::create_directories(a.out);
  std::vector<double> scores;
  std::vector<double> persistence;
  json per_file = json::array();
  std::ostringstream csv;
  csv << comment_block(echo, "# ");
  csv << "file,step";
  for (Index k = 0; k < ssm.d_y; ++k) csv << ",mean_y" << k + 1 << ",var_y" << k + 1 << ",true_y" << k + 1;
  csv << '\n';
  for (const auto& path : a.data) {
    Sequence seq = load_csv(path);
    if (seq.d_y() != ssm.d_y || seq.d_c() != ssm.d_c) {
      throw DimensionMismatch("'" + path + "' has d_y=" + std::to_string(seq.d_y()) + ", d_c=" +
                              std::to_string(seq.d_c()) + " but the checkpoint expects d_y=" +
                              std::to_string(ssm.d_y) + ", d_c=" + std::to_string(ssm.d_c));
    }
    if (ckpt.standardizer) seq = ckpt.standardizer->apply(seq);
    if (a.start + a.warmup + a.horizon > seq.length()) {
      throw SequenceTooShort("'" + path + "' has " + std::to_string(seq.length()) +
                             " rows; need start + warmup + horizon = " +
                             std::to_string(a.start + a.warmup + a.horizon));
    }
    const Sequence warm = seq.slice(a.start, a.warmup);
    const Sequence future = seq.slice(a.start + a.warmup, a.horizon);
    const auto fc = forecast(ckpt.model, warm, a.horizon, a.n_mc, a.seed, future.c, fo);
    const double r = rmse(fc.mean, future.y);
    const double p = rmse(persistence_forecast(warm, a.horizon), future.y);
    scores.push_back(r);
    persistence.push_back(p);
    per_file.push_back({{"file", path}, {"rmse", r}, {"persistence_rmse", p}});
    for (Index t = 0; t < a.horizon; ++t) {
      csv << path << ',' << t + 1;
      for (Index k = 0; k < ssm.d_y; ++k) {
        csv << ',' << num(fc.mean(t, k)) << ',' << num(fc.var(t, k)) << ',' << num(future.y(t, k));
      }
      csv << '\n';
    }
  }
  const auto mean_std = [](const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::pair{m, v.size() > 1 ? std::sqrt(s / static_cast<double>(v.size() - 1)) : 0.0};
  };
  const auto [rm, rs] = mean_std(scores);
  const auto [pm, ps] = mean_std(persistence);
  json report = {{"command", "predict"},
                 {"config", echo},
                 {"seed", a.seed},
                 {"rmse_mean", rm},
                 {"rmse_std", rs},
                 {"persistence_rmse_mean", pm},
                 {"persistence_rmse_std", ps},
                 {"files", per_file}};
  write_text(fs::path(a.out) / "predictions.csv", csv.str());
  write_text(fs::path(a.out) / "metrics.json", report.dump(2) + "\n");
  std::cout << "rmse_mean " << rm << " (persistence " << pm << ")\n";
}

// ---- benchmark ----

struct BenchArgs {
  std::string dims = "2,8,32";
  std::string models = "egpssm,baseline";
  Index m = 200;
  Index T = 200;
  int repeats = 3;
  std::uint64_t seed = 0;
  std::string out;
  bool svg = false;
  bool skip_timing = false;
};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void run_benchmark(const BenchArgs& a) {
  std::vector<Index> dims;
  for (const auto& d : split_list(a.dims)) {
    Index v = 0;
    const auto r = std::from_chars(d.data(), d.data() + d.size(), v);
    if (r.ec != std::errc() || r.ptr != d.data() + d.size() || v < 1) {
      throw InvalidConfig("--dims entries must be positive integers, got '" + d + "'");
    }
    dims.push_back(v);
  }
  const auto models = split_list(a.models);
  if (dims.empty() || models.empty()) throw InvalidConfig("--dims and --models must not be empty");
  for (const auto& m : models) {
    if (m != "egpssm" && m != "baseline") throw InvalidConfig("unknown model '" + m + "'");
  }
  if (a.m < 1 || a.T < 1 || a.repeats < 1) throw InvalidConfig("--m, --T and --repeats must be >= 1");

  const Echo echo{{"command", "benchmark"},
                  {"dims", a.dims},
                  {"models", a.models},
                  {"m", std::to_string(a.m)},
                  {"T", std::to_string(a.T)},
                  {"repeats", std::to_string(a.repeats)},
                  {"seed", std::to_string(a.seed)}};
  fs::create_directories(a.out);
  std::ostringstream counts, timing;
  counts << comment_block(echo, "# ")
         << "model,formula,d_x,m,theta_gp,eta,shared,inducing,params_total,complexity\n";
  timing << comment_block(echo, "# ") << "model,d_x,m,T,elbo_wall_ms,elbo_wall_ms_min,params_actual\n";
  json rows = json::array();
  std::vector<tools::Series> series;
  for (const auto& model : models) {
    const ModelKind kind = model == "egpssm" ? ModelKind::EGPSSM : ModelKind::PRSSM;
    tools::Series line{model, {}};
    for (Index d : dims) {
      const CountSpec cs = benchmark_count_spec(kind, d, a.m);
      const ComplexityReport rep = count_params(cs);
      counts << model << ',' << to_string(kind) << ',' << d << ',' << a.m << ',' << cs.theta_gp << ','
             << cs.eta << ',' << cs.shared << ',' << num(rep.inducing) << ',' << num(rep.total) << ','
             << rep.time_complexity << '\n';
      json row = {{"model", model}, {"d_x", d}, {"params_total", rep.total}};
      if (!a.skip_timing) {
        const TimingResult t = time_elbo(kind == ModelKind::EGPSSM, d, a.T, a.m, a.repeats, a.seed);
        timing << model << ',' << d << ',' << a.m << ',' << a.T << ',' << num(t.median_ms) << ','
               << num(t.min_ms) << ',' << t.actual_params << '\n';
        row["elbo_wall_ms"] = t.median_ms;
        line.points.emplace_back(static_cast<double>(d), t.median_ms);
      }
      rows.push_back(row);
    }
    series.push_back(std::move(line));
  }
  write_text(fs::path(a.out) / "counts.csv", counts.str());
  json report = {{"command", "benchmark"}, {"config", echo}, {"seed", a.seed}, {"rows", rows}};
  if (!a.skip_timing) {
    write_text(fs::path(a.out) / "timing.csv", timing.str());
    if (a.svg) {
      write_text(fs::path(a.out) / "timing.svg",
                 tools::render_line_chart(series, "Forward ELBO wall time", "d_x", "ms",
                                          comment_block(echo, "")));
    }
  }
  write_text(fs::path(a.out) / "benchmark.json", report.dump(2) + "\n");
  std::cout << "wrote " << rows.size() << " rows to " << a.out << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Transformed-GP state-space models: data, training, forecasting, benchmarks"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Simulate kink-system sequences to CSV");
  gen_cmd->add_option("--seed", gen.seed, "RNG seed");
  gen_cmd->add_option("--n-seq", gen.n_seq, "Number of sequences");
  gen_cmd->add_option("--len", gen.len, "Steps per sequence");
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();
  gen_cmd->add_flag("--noise-free", gen.noise_free, "Disable process and observation noise");

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Fit a model; writes checkpoint and training log");
  train_cmd->add_option("--config", tr.config, "INI config file")->check(CLI::ExistingFile);
  train_cmd->add_option("--set", tr.sets, "Override a config key, section.key=value");
  train_cmd->add_option("--data", tr.data,
                        "CSV input: one file is split and standardized, several are used as is")
      ->check(CLI::ExistingFile);
  auto* seed_opt = train_cmd->add_option("--seed", tr.seed, "Training seed (overrides train.seed)");
  train_cmd->add_option("--out", tr.out, "Output directory")->required();

  PredictArgs pr;
  auto* predict_cmd = app.add_subcommand("predict", "Forecast from a checkpoint and score RMSE");
  predict_cmd->add_option("--checkpoint", pr.checkpoint, "Checkpoint JSON")
      ->required()
      ->check(CLI::ExistingFile);
  predict_cmd->add_option("--data", pr.data, "CSV sequences to forecast")
      ->required()
      ->check(CLI::ExistingFile);
  predict_cmd->add_option("--start", pr.start, "First warm-up row");
  predict_cmd->add_option("--warmup", pr.warmup, "Warm-up rows");
  predict_cmd->add_option("--horizon", pr.horizon, "Forecast steps");
  predict_cmd->add_option("--n-mc", pr.n_mc, "Monte-Carlo rollouts");
  predict_cmd->add_option("--fit-iterations", pr.fit_iterations, "Initial-state fit steps");
  predict_cmd->add_option("--seed", pr.seed, "RNG seed");
  predict_cmd->add_option("--out", pr.out, "Output directory")->required();

  BenchArgs bn;
  auto* bench_cmd =
      app.add_subcommand("benchmark", "Parameter counts and ELBO wall time versus d_x");
  bench_cmd->add_option("--dims", bn.dims, "Comma-separated latent dimensions");
  bench_cmd->add_option("--models", bn.models, "Comma-separated subset of egpssm,baseline");
  bench_cmd->add_option("--m", bn.m, "Inducing points");
  bench_cmd->add_option("--T", bn.T, "Sequence length for timing");
  bench_cmd->add_option("--repeats", bn.repeats, "Timing repetitions");
  bench_cmd->add_option("--seed", bn.seed, "RNG seed");
  bench_cmd->add_option("--out", bn.out, "Output directory")->required();
  bench_cmd->add_flag("--svg", bn.svg, "Also write timing.svg");
  bench_cmd->add_flag("--counts-only", bn.skip_timing, "Skip the timing runs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    if (e.get_exit_code() == 0) return 0;
    if (rc != 0) std::cerr << app.help();
    return 2;
  }

  try {
    if (*gen_cmd) run_gen_data(gen);
    if (*train_cmd) {
      tr.seed_given = seed_opt->count() > 0;
      run_train(tr);
    }
    if (*predict_cmd) run_predict(pr);
    if (*bench_cmd) run_benchmark(bn);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
