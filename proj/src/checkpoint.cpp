#include "egpssm/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace egpssm {

using nlohmann::json;

namespace {

json to_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json to_json(const Matrix& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    const Vector r = m.row(i).transpose();
    rows.push_back(to_json(r));
  }
  return rows;
}

Vector vector_from(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size()));
}

Matrix matrix_from(const json& j, Index cols) {
  Matrix m(static_cast<Index>(j.size()), cols);
  for (Index i = 0; i < m.rows(); ++i) {
    const Vector r = vector_from(j.at(static_cast<std::size_t>(i)));
    if (r.size() != cols) throw DimensionMismatch("ragged matrix in checkpoint");
    m.row(i) = r.transpose();
  }
  return m;
}

json gp_json(const KernelParams& k, const InducingState& gp) {
  return {{"kernel", to_string(k.family)},
          {"log_variance", k.log_variance},
          {"log_lengthscales", to_json(k.log_lengthscales)},
          {"Z", to_json(gp.Z)},
          {"mean", to_json(gp.mean)},
          {"S_param", to_json(gp.S_param)}};
}

void gp_from(const json& j, Index d_in, KernelParams& k, InducingState& gp) {
  k.family = kernel_family_from_string(j.at("kernel").get<std::string>());
  k.log_variance = j.at("log_variance").get<double>();
  k.log_lengthscales = vector_from(j.at("log_lengthscales"));
  gp.Z = matrix_from(j.at("Z"), d_in);
  gp.mean = vector_from(j.at("mean"));
  gp.S_param = matrix_from(j.at("S_param"), gp.Z.rows());
}

json standardizer_json(const Standardizer& s) {
  return {{"y_mean", to_json(s.y_mean)},
          {"y_std", to_json(s.y_std)},
          {"c_mean", to_json(s.c_mean)},
          {"c_std", to_json(s.c_std)}};
}

}  // namespace

std::string checkpoint_to_string(const Checkpoint& ckpt) {
  const SsmParams& ssm = ssm_of(ckpt.model);
  const bool is_egpssm = std::holds_alternative<EgpssmModel>(ckpt.model);
  json j;
  j["version"] = kCheckpointVersion;
  j["seed"] = ckpt.seed;
  j["config"] = ckpt.config;

  json spec = {{"model", is_egpssm ? "egpssm" : "baseline"},
               {"d_x", ssm.d_x},
               {"d_y", ssm.d_y},
               {"d_c", ssm.d_c},
               {"residual", ssm.residual}};
  json ssm_j = {{"C", to_json(ssm.C)},
                {"Q_logvar", to_json(ssm.Q_logvar)},
                {"R_logvar", to_json(ssm.R_logvar)},
                {"x0_prior_mean", to_json(ssm.x0_prior.mean)},
                {"x0_prior_var", to_json(ssm.x0_prior.var)},
                {"jitter", ssm.jitter}};
  json gps = json::array();
  json flows = json::array();
  const std::vector<InitialStateParams>* x0 = nullptr;
  if (is_egpssm) {
    const auto& m = std::get<EgpssmModel>(ckpt.model);
    gps.push_back(gp_json(m.kernel, m.gp));
    spec["m"] = m.gp.size();
    spec["kernel"] = to_string(m.kernel.family);
    spec["flow"] = m.flows.empty() ? "linear" : to_string(m.flows.front().kind);
    spec["flow_layers"] = m.flows.empty() ? 0 : m.flows.front().layers.size();
    for (const auto& f : m.flows) {
      flows.push_back({{"kind", to_string(f.kind)},
                       {"dim_index", f.dim_index},
                       {"layers", f.layers.size()},
                       {"params", f.params()}});
    }
    x0 = &m.x0_var;
  } else {
    const auto& m = std::get<BaselineModel>(ckpt.model);
    for (std::size_t g = 0; g < m.gps.size(); ++g) gps.push_back(gp_json(m.kernels[g], m.gps[g]));
    spec["m"] = m.gps.empty() ? 0 : m.gps.front().size();
    spec["kernel"] = m.kernels.empty() ? "matern52" : to_string(m.kernels.front().family);
    x0 = &m.x0_var;
  }
  json x0_j = json::array();
  for (const auto& q : *x0) x0_j.push_back({{"mean", to_json(q.mean)}, {"log_var", to_json(q.log_var)}});

  j["spec"] = spec;
  j["ssm"] = ssm_j;
  j["gps"] = gps;
  j["flows"] = flows;
  j["x0"] = x0_j;
  if (ckpt.standardizer) j["standardizer"] = standardizer_json(*ckpt.standardizer);
  return j.dump(2) + "\n";
}

Checkpoint checkpoint_from_string(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("checkpoint is not valid JSON: ") + e.what(), 0);
  }
  try {
    if (!j.contains("version")) throw InvalidConfig("checkpoint has no version field");
    if (j.at("version").get<int>() != kCheckpointVersion) {
      throw InvalidConfig("unsupported checkpoint version " + j.at("version").dump());
    }
    Checkpoint ckpt;
    ckpt.seed = j.at("seed").get<std::uint64_t>();
    ckpt.config = j.at("config").get<std::map<std::string, std::string>>();
    const json& spec = j.at("spec");
    const json& sj = j.at("ssm");
    SsmParams ssm;
    ssm.d_x = spec.at("d_x").get<Index>();
    ssm.d_y = spec.at("d_y").get<Index>();
    ssm.d_c = spec.at("d_c").get<Index>();
    ssm.residual = spec.at("residual").get<bool>();
    ssm.C = matrix_from(sj.at("C"), ssm.d_x);
    ssm.Q_logvar = vector_from(sj.at("Q_logvar"));
    ssm.R_logvar = vector_from(sj.at("R_logvar"));
    ssm.x0_prior = DiagGaussian(vector_from(sj.at("x0_prior_mean")), vector_from(sj.at("x0_prior_var")));
    ssm.jitter = sj.at("jitter").get<double>();
    std::vector<InitialStateParams> x0;
    for (const auto& q : j.at("x0")) {
      x0.push_back({vector_from(q.at("mean")), vector_from(q.at("log_var"))});
    }
    const Index d_in = ssm.gp_input_dim();
    const std::string kind = spec.at("model").get<std::string>();
    if (kind == "egpssm") {
      EgpssmModel m;
      m.ssm = ssm;
      if (j.at("gps").size() != 1) throw InvalidConfig("EGPSSM checkpoint must hold one GP");
      gp_from(j.at("gps").at(0), d_in, m.kernel, m.gp);
      for (const auto& f : j.at("flows")) {
        const FlowKind fk = flow_kind_from_string(f.at("kind").get<std::string>());
        FlowStack s = FlowStack::identity(fk, f.at("layers").get<int>(), f.at("dim_index").get<int>());
        const auto p = f.at("params").get<std::vector<double>>();
        if (static_cast<int>(p.size()) != s.param_count()) {
          throw DimensionMismatch("flow parameter count disagrees with its layer count");
        }
        s.set_params(p);
        m.flows.push_back(std::move(s));
      }
      m.x0_var = std::move(x0);
      m.validate();
      ckpt.model = std::move(m);
    } else if (kind == "baseline") {
      BaselineModel m;
      m.ssm = ssm;
      for (const auto& g : j.at("gps")) {
        KernelParams k;
        InducingState q;
        gp_from(g, d_in, k, q);
        m.kernels.push_back(std::move(k));
        m.gps.push_back(std::move(q));
      }
      m.x0_var = std::move(x0);
      m.validate();
      ckpt.model = std::move(m);
    } else {
      throw InvalidConfig("unknown model kind '" + kind + "' in checkpoint");
    }
    if (j.contains("standardizer")) {
      const json& s = j.at("standardizer");
      ckpt.standardizer = Standardizer{vector_from(s.at("y_mean")), vector_from(s.at("y_std")),
                                       vector_from(s.at("c_mean")), vector_from(s.at("c_std"))};
    }
    return ckpt;
  } catch (const json::exception& e) {
    throw InvalidConfig(std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out << checkpoint_to_string(ckpt);
  if (!out) throw Error("failed writing '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open checkpoint '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return checkpoint_from_string(ss.str());
}

}  // namespace egpssm
