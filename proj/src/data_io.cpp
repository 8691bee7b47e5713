#include "egpssm/data_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "egpssm/rng.hpp"

namespace egpssm {

Sequence Sequence::slice(Index begin, Index count) const {
  if (begin < 0 || count < 0 || begin + count > length()) {
    throw DimensionMismatch("sequence slice out of range");
  }
  Sequence out;
  out.y = y.middleRows(begin, count);
  out.c = c.middleRows(begin, c.cols() > 0 ? count : 0);
  if (c.cols() == 0) out.c.resize(count, 0);
  out.name = name;
  out.provenance = provenance;
  return out;
}

void Sequence::validate() const {
  if (y.rows() < 1) throw EmptySequence("sequence '" + name + "' has no rows");
  if (c.rows() != y.rows()) {
    throw DimensionMismatch("sequence '" + name + "' control and observation lengths differ");
  }
  if (!y.allFinite() || !c.allFinite()) {
    throw InvalidConfig("sequence '" + name + "' contains non-finite values");
  }
}

double kink_function(double x1, double x2) {
  return 0.8 + (x1 + 0.2) * (1.0 - 5.0 / (1.0 + std::exp(-2.0 * x1))) + x2;
}

KinkTrajectory simulate_kink(const Vector& x0, int T, std::uint64_t seed,
                             const KinkOptions& opts) {
  if (T < 1) throw InvalidConfig("kink sequence length must be >= 1");
  if (x0.size() != 2) throw DimensionMismatch("kink state is 2-dimensional");
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double v_std = std::sqrt(opts.process_cov);
  const double e_std = std::sqrt(opts.observation_cov);
  KinkTrajectory traj;
  traj.states.resize(T + 1, 2);
  traj.observations.resize(T, 2);
  traj.states.row(0) = x0.transpose();
  for (int t = 0; t < T; ++t) {
    const double x1 = traj.states(t, 0);
    const double x2 = traj.states(t, 1);
    const double f = kink_function(x1, x2);
    double v1 = 0.0, v2 = 0.0, e1 = 0.0, e2 = 0.0;
    if (!opts.noise_free) {
      v1 = v_std * normal(rng);
      v2 = v_std * normal(rng);
      e1 = e_std * normal(rng);
      e2 = e_std * normal(rng);
    }
    traj.states(t + 1, 0) = f + x1 + v1;
    traj.states(t + 1, 1) = -0.5 * f + x2 + v2;
    traj.observations(t, 0) = traj.states(t + 1, 0) + e1;
    traj.observations(t, 1) = traj.states(t + 1, 1) + e2;
  }
  return traj;
}

std::vector<Sequence> gen_kink(int n_seq, int T, std::uint64_t seed, const KinkOptions& opts) {
  if (n_seq < 1 || T < 1) throw InvalidConfig("gen_kink needs n_seq >= 1 and T >= 1");
  std::vector<Sequence> out;
  out.reserve(static_cast<std::size_t>(n_seq));
  for (int i = 0; i < n_seq; ++i) {
    Rng rng(mix_seed({seed, static_cast<std::uint64_t>(i), 0x6b696e6bULL}));
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector x0(2);
    const double s0 = std::sqrt(opts.x0_var);
    x0 << s0 * normal(rng), s0 * normal(rng);
    const auto traj = simulate_kink(x0, T, rng(), opts);
    Sequence seq;
    seq.y = traj.observations;
    seq.c.resize(T, 0);
    seq.name = "kink_" + std::to_string(i);
    out.push_back(std::move(seq));
  }
  return out;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_cells(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace

Sequence parse_csv(std::istream& in, const std::string& name) {
  Sequence seq;
  seq.name = name;
  std::string line;
  int line_no = 0;
  std::vector<std::string> header;
  // column index -> (is_control, channel)
  std::vector<std::pair<bool, int>> mapping;
  int d_c = 0;
  int d_y = 0;
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      seq.provenance.push_back(trim(line.substr(1)));
      continue;
    }
    if (header.empty()) {
      header = split_cells(line);
      std::map<int, int> u_idx, y_idx;
      for (std::size_t k = 0; k < header.size(); ++k) {
        const auto& h = header[k];
        if (h.size() < 2 || (h[0] != 'u' && h[0] != 'y')) {
          throw ParseError("unrecognized column '" + h + "'", line_no);
        }
        int idx = 0;
        const auto res = std::from_chars(h.data() + 1, h.data() + h.size(), idx);
        if (res.ec != std::errc() || res.ptr != h.data() + h.size() || idx < 1) {
          throw ParseError("unrecognized column '" + h + "'", line_no);
        }
        auto& target = h[0] == 'u' ? u_idx : y_idx;
        if (!target.emplace(idx, static_cast<int>(k)).second) {
          throw ParseError("duplicate column '" + h + "'", line_no);
        }
      }
      if (y_idx.empty()) throw MissingColumn("no observation column (y1) in header");
      const auto check_contiguous = [](const std::map<int, int>& m, char prefix) {
        int expect = 1;
        for (const auto& [i, col] : m) {
          if (i != expect) {
            throw MissingColumn(std::string("column ") + prefix + std::to_string(expect) +
                                " is missing");
          }
          ++expect;
        }
      };
      check_contiguous(u_idx, 'u');
      check_contiguous(y_idx, 'y');
      d_c = static_cast<int>(u_idx.size());
      d_y = static_cast<int>(y_idx.size());
      mapping.resize(header.size());
      for (const auto& [i, col] : u_idx) mapping[col] = {true, i - 1};
      for (const auto& [i, col] : y_idx) mapping[col] = {false, i - 1};
      continue;
    }
    const auto cells = split_cells(line);
    if (cells.size() != header.size()) {
      throw ParseError("expected " + std::to_string(header.size()) + " cells, found " +
                           std::to_string(cells.size()),
                       line_no);
    }
    std::vector<double> row(header.size());
    for (std::size_t k = 0; k < cells.size(); ++k) {
      const auto& cell = cells[k];
      double v = 0.0;
      const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (cell.empty() || res.ec != std::errc() || res.ptr != cell.data() + cell.size() ||
          !std::isfinite(v)) {
        throw ParseError("non-numeric cell '" + cell + "'", line_no);
      }
      row[k] = v;
    }
    rows.push_back(std::move(row));
  }
  if (header.empty()) throw MissingColumn("file has no header");
  if (rows.empty()) throw EmptySequence("file '" + name + "' has no data rows");
  const Index T = static_cast<Index>(rows.size());
  seq.y.resize(T, d_y);
  seq.c.resize(T, d_c);
  for (Index t = 0; t < T; ++t) {
    for (std::size_t k = 0; k < mapping.size(); ++k) {
      const auto [is_control, ch] = mapping[k];
      (is_control ? seq.c : seq.y)(t, ch) = rows[static_cast<std::size_t>(t)][k];
    }
  }
  return seq;
}

Sequence load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  return parse_csv(in, path.stem().string());
}

void write_csv(const Sequence& seq, std::ostream& out) {
  for (const auto& p : seq.provenance) out << "# " << p << '\n';
  bool first = true;
  for (Index k = 0; k < seq.d_c(); ++k) {
    out << (first ? "" : ",") << 'u' << (k + 1);
    first = false;
  }
  for (Index k = 0; k < seq.d_y(); ++k) {
    out << (first ? "" : ",") << 'y' << (k + 1);
    first = false;
  }
  out << '\n';
  for (Index t = 0; t < seq.length(); ++t) {
    first = true;
    for (Index k = 0; k < seq.d_c(); ++k) {
      out << (first ? "" : ",") << format_double(seq.c(t, k));
      first = false;
    }
    for (Index k = 0; k < seq.d_y(); ++k) {
      out << (first ? "" : ",") << format_double(seq.y(t, k));
      first = false;
    }
    out << '\n';
  }
}

void write_csv(const Sequence& seq, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  write_csv(seq, out);
}

namespace {

void column_stats(const Matrix& m, Vector& mean, Vector& stddev, const std::string& what) {
  mean = m.colwise().mean();
  stddev.resize(m.cols());
  for (Index k = 0; k < m.cols(); ++k) {
    const double var = (m.col(k).array() - mean[k]).square().mean();
    stddev[k] = std::sqrt(var);
    if (!(stddev[k] > 1e-12 * std::max(1.0, std::abs(mean[k])))) {
      throw DegenerateChannel(what + std::to_string(k + 1) + " has zero variance");
    }
  }
}

}  // namespace

Standardizer Standardizer::fit(const Sequence& seq) {
  Standardizer s;
  column_stats(seq.y, s.y_mean, s.y_std, "observation channel y");
  column_stats(seq.c, s.c_mean, s.c_std, "control channel u");
  return s;
}

Sequence Standardizer::apply(const Sequence& seq) const {
  if (seq.d_y() != y_mean.size() || seq.d_c() != c_mean.size()) {
    throw DimensionMismatch("standardizer channel counts differ from the sequence");
  }
  Sequence out = seq;
  out.y = ((seq.y.rowwise() - y_mean.transpose()).array().rowwise() /
           y_std.transpose().array()).matrix();
  if (seq.d_c() > 0) {
    out.c = ((seq.c.rowwise() - c_mean.transpose()).array().rowwise() /
             c_std.transpose().array()).matrix();
  }
  return out;
}

Sequence Standardizer::invert(const Sequence& seq) const {
  if (seq.d_y() != y_mean.size() || seq.d_c() != c_mean.size()) {
    throw DimensionMismatch("standardizer channel counts differ from the sequence");
  }
  Sequence out = seq;
  out.y = (seq.y.array().rowwise() * y_std.transpose().array()).matrix().rowwise() +
          y_mean.transpose();
  if (seq.d_c() > 0) {
    out.c = (seq.c.array().rowwise() * c_std.transpose().array()).matrix().rowwise() +
            c_mean.transpose();
  }
  return out;
}

SplitResult split_standardize(const Sequence& seq, double frac) {
  if (!(frac > 0.0 && frac < 1.0)) throw InvalidConfig("split fraction must lie in (0, 1)");
  seq.validate();
  const Index split = static_cast<Index>(std::floor(static_cast<double>(seq.length()) * frac));
  if (split < 2 || seq.length() - split < 1) {
    throw SequenceTooShort("sequence of length " + std::to_string(seq.length()) +
                           " cannot be split at fraction " + std::to_string(frac));
  }
  SplitResult r;
  const Sequence train_raw = seq.slice(0, split);
  r.standardizer = Standardizer::fit(train_raw);
  r.train = r.standardizer.apply(train_raw);
  r.test = r.standardizer.apply(seq.slice(split, seq.length() - split));
  r.train.name = seq.name + "_train";
  r.test.name = seq.name + "_test";
  return r;
}

}  // namespace egpssm
