#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "egpssm/models.hpp"
#include "egpssm/training.hpp"

namespace egpssm {

/// Everything a CLI run needs. Read from an INI file with sections
/// [model], [kernel], [flow], [train] and [data]; keys are addressed as
/// "section.key".
struct RunConfig {
  std::string model = "egpssm";  // egpssm | baseline
  ModelSpec spec;
  TrainConfig train;
  std::string data_source = "kink";  // kink | csv
  std::string data_path;
  int n_seq = 10;
  int seq_len = 50;
  std::uint64_t data_seed = 0;
  double split_frac = 0.5;

  /// Sets one value from its textual form; throws InvalidConfig for unknown
  /// keys or unparsable values.
  void set(const std::string& key, const std::string& value);
  /// Every key with its current value, in a stable order.
  std::map<std::string, std::string> resolved() const;
  void validate() const;
};

RunConfig load_config(const std::filesystem::path& path);
RunConfig parse_config(const std::string& text);
std::string to_ini(const RunConfig& cfg);

}  // namespace egpssm
