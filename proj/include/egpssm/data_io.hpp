#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "egpssm/numerics.hpp"

namespace egpssm {

/// One observed trajectory: y is T×d_y, c is T×d_c (d_c may be zero).
/// Row t of c is the control applied in the transition that produces the
/// state observed in row t of y.
struct Sequence {
  Matrix y;
  Matrix c;
  std::string name;
  /// Free-form `key=value` lines carried as `#` comments in CSV files.
  std::vector<std::string> provenance;

  Index length() const noexcept { return y.rows(); }
  Index d_y() const noexcept { return y.cols(); }
  Index d_c() const noexcept { return c.cols(); }
  /// Rows [begin, begin + count).
  Sequence slice(Index begin, Index count) const;
  void validate() const;
};

/// The modified 2-D kink map f(x) = 0.8 + (x₁ + 0.2)(1 − 5 / (1 + e^{−2x₁})) + x₂.
double kink_function(double x1, double x2);

struct KinkOptions {
  /// Covariance scales of the process and observation noise.
  double process_cov = std::sqrt(0.001);
  double observation_cov = std::sqrt(0.01);
  double x0_var = 0.1;
  bool noise_free = false;
};

struct KinkTrajectory {
  Matrix states;  // (T+1)×2, row 0 is x₀
  Matrix observations;  // T×2
};

/// x_{t+1} = [f(x_t); −0.5 f(x_t)] + x_t + v_t, y_t = x_t + e_t for t = 1..T.
KinkTrajectory simulate_kink(const Vector& x0, int T, std::uint64_t seed,
                             const KinkOptions& opts = {});

/// n_seq independent kink sequences of length T with x₀ ~ N(0, x0_var·I).
std::vector<Sequence> gen_kink(int n_seq, int T, std::uint64_t seed,
                               const KinkOptions& opts = {});

Sequence load_csv(const std::filesystem::path& path);
Sequence parse_csv(std::istream& in, const std::string& name);
void write_csv(const Sequence& seq, std::ostream& out);
void write_csv(const Sequence& seq, const std::filesystem::path& path);

/// Per-channel affine standardization fit on a training portion.
struct Standardizer {
  Vector y_mean, y_std;
  Vector c_mean, c_std;

  static Standardizer fit(const Sequence& seq);
  Sequence apply(const Sequence& seq) const;
  Sequence invert(const Sequence& seq) const;
};

struct SplitResult {
  Sequence train;
  Sequence test;
  Standardizer standardizer;
};

/// Splits at ⌊T·frac⌋, fits the standardizer on the first part only and
/// returns both parts standardized.
SplitResult split_standardize(const Sequence& seq, double frac);

}  // namespace egpssm
