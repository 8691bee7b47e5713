#include "egpssm/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

namespace egpssm {

namespace {

std::string fmt(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
  T v{};
  const char* end = text.data() + text.size();
  const auto r = std::from_chars(text.data(), end, v);
  if (r.ec != std::errc() || r.ptr != end) {
    throw InvalidConfig("cannot parse '" + text + "' for " + key);
  }
  return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw InvalidConfig("cannot parse '" + text + "' for " + key + " (expected true/false)");
}

struct Field {
  const char* key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

template <class T, class Access>
Field number(const char* key, Access access) {
  return {key, [access](const RunConfig& c) {
            if constexpr (std::is_floating_point_v<T>) {
              return fmt(static_cast<double>(access(const_cast<RunConfig&>(c))));
            } else {
              return std::to_string(access(const_cast<RunConfig&>(c)));
            }
          },
          [access, key](RunConfig& c, const std::string& v) {
            access(c) = static_cast<std::remove_reference_t<decltype(access(c))>>(
                parse_number<T>(key, v));
          }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      {"model.kind", [](const RunConfig& c) { return c.model; },
       [](RunConfig& c, const std::string& v) {
         if (v != "egpssm" && v != "baseline") {
           throw InvalidConfig("model.kind must be egpssm or baseline");
         }
         c.model = v;
       }},
      number<long long>("model.d_x", [](RunConfig& c) -> Index& { return c.spec.d_x; }),
      number<long long>("model.d_y", [](RunConfig& c) -> Index& { return c.spec.d_y; }),
      number<long long>("model.d_c", [](RunConfig& c) -> Index& { return c.spec.d_c; }),
      number<long long>("model.num_inducing",
                        [](RunConfig& c) -> Index& { return c.spec.num_inducing; }),
      {"model.residual", [](const RunConfig& c) { return std::string(c.spec.residual ? "true" : "false"); },
       [](RunConfig& c, const std::string& v) { c.spec.residual = parse_bool("model.residual", v); }},
      number<double>("model.q_var", [](RunConfig& c) -> double& { return c.spec.q_var; }),
      number<double>("model.r_var", [](RunConfig& c) -> double& { return c.spec.r_var; }),
      number<double>("model.x0_var", [](RunConfig& c) -> double& { return c.spec.x0_var; }),
      number<double>("model.s_init", [](RunConfig& c) -> double& { return c.spec.s_init; }),
      {"kernel.family", [](const RunConfig& c) { return to_string(c.spec.family); },
       [](RunConfig& c, const std::string& v) {
         try {
           c.spec.family = kernel_family_from_string(v);
         } catch (const Error&) {
           throw InvalidConfig("kernel.family must be se or matern52");
         }
       }},
      number<double>("kernel.variance", [](RunConfig& c) -> double& { return c.spec.kernel_variance; }),
      number<double>("kernel.lengthscale", [](RunConfig& c) -> double& { return c.spec.lengthscale; }),
      {"flow.kind", [](const RunConfig& c) { return to_string(c.spec.flow_kind); },
       [](RunConfig& c, const std::string& v) {
         try {
           c.spec.flow_kind = flow_kind_from_string(v);
         } catch (const Error&) {
           throw InvalidConfig("flow.kind must be sal or linear");
         }
       }},
      number<int>("flow.layers", [](RunConfig& c) -> int& { return c.spec.flow_layers; }),
      number<double>("flow.init_noise", [](RunConfig& c) -> double& { return c.spec.flow_init_noise; }),
      number<int>("train.iterations", [](RunConfig& c) -> int& { return c.train.iterations; }),
      number<double>("train.learning_rate", [](RunConfig& c) -> double& { return c.train.learning_rate; }),
      number<double>("train.adam_beta1", [](RunConfig& c) -> double& { return c.train.adam_beta1; }),
      number<double>("train.adam_beta2", [](RunConfig& c) -> double& { return c.train.adam_beta2; }),
      number<double>("train.adam_eps", [](RunConfig& c) -> double& { return c.train.adam_eps; }),
      number<int>("train.n_mc", [](RunConfig& c) -> int& { return c.train.n_mc; }),
      number<std::uint64_t>("train.seed", [](RunConfig& c) -> std::uint64_t& { return c.train.seed; }),
      number<int>("train.log_every", [](RunConfig& c) -> int& { return c.train.log_every; }),
      number<double>("train.clip_norm", [](RunConfig& c) -> double& { return c.train.clip_norm; }),
      number<int>("train.minibatch", [](RunConfig& c) -> int& { return c.train.minibatch; }),
      {"data.source", [](const RunConfig& c) { return c.data_source; },
       [](RunConfig& c, const std::string& v) {
         if (v != "kink" && v != "csv") throw InvalidConfig("data.source must be kink or csv");
         c.data_source = v;
       }},
      {"data.path", [](const RunConfig& c) { return c.data_path; },
       [](RunConfig& c, const std::string& v) { c.data_path = v; }},
      number<int>("data.n_seq", [](RunConfig& c) -> int& { return c.n_seq; }),
      number<int>("data.length", [](RunConfig& c) -> int& { return c.seq_len; }),
      number<std::uint64_t>("data.seed", [](RunConfig& c) -> std::uint64_t& { return c.data_seed; }),
      number<double>("data.split_frac", [](RunConfig& c) -> double& { return c.split_frac; }),
  };
  return table;
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  for (const auto& f : fields()) {
    if (key == f.key) {
      f.set(*this, value);
      return;
    }
  }
  throw InvalidConfig("unknown configuration key '" + key + "'");
}

std::map<std::string, std::string> RunConfig::resolved() const {
  std::map<std::string, std::string> out;
  for (const auto& f : fields()) out[f.key] = f.get(*this);
  return out;
}

void RunConfig::validate() const {
  if (spec.d_x < 1 || spec.d_y < 1 || spec.d_y > spec.d_x || spec.d_c < 0) {
    throw InvalidConfig("model dimensions need 1 <= d_y <= d_x and d_c >= 0");
  }
  if (spec.num_inducing < 1) throw InvalidConfig("model.num_inducing must be >= 1");
  if (!(spec.q_var > 0) || !(spec.r_var > 0) || !(spec.x0_var > 0) || !(spec.s_init > 0)) {
    throw InvalidConfig("variances must be positive");
  }
  if (!(spec.kernel_variance > 0) || !(spec.lengthscale > 0)) {
    throw InvalidConfig("kernel variance and lengthscale must be positive");
  }
  if (spec.flow_kind == FlowKind::Sal && spec.flow_layers < 1) {
    throw InvalidConfig("flow.layers must be >= 1 for SAL flows");
  }
  if (spec.flow_init_noise < 0) throw InvalidConfig("flow.init_noise must be >= 0");
  train.validate();
  if (n_seq < 1 || seq_len < 1) throw InvalidConfig("data.n_seq and data.length must be >= 1");
  if (!(split_frac > 0.0 && split_frac < 1.0)) throw InvalidConfig("data.split_frac must lie in (0, 1)");
  if (data_source == "csv" && data_path.empty()) throw InvalidConfig("data.path is required for csv data");
}

RunConfig parse_config(const std::string& text) {
  boost::property_tree::ptree tree;
  std::istringstream in(text);
  try {
    boost::property_tree::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ParseError(e.message(), static_cast<int>(e.line()));
  }
  RunConfig cfg;
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw InvalidConfig("key '" + section + "' lies outside any section");
    for (const auto& [key, value] : body) cfg.set(section + "." + key, value.data());
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string to_ini(const RunConfig& cfg) {
  std::ostringstream out;
  std::string section;
  for (const auto& f : fields()) {
    const std::string key = f.key;
    const auto dot = key.find('.');
    if (key.substr(0, dot) != section) {
      if (!section.empty()) out << '\n';
      section = key.substr(0, dot);
      out << '[' << section << "]\n";
    }
    out << key.substr(dot + 1) << " = " << f.get(cfg) << '\n';
  }
  return out.str();
}

}  // namespace egpssm
