#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include "egpssm/data_io.hpp"
#include "egpssm/models.hpp"

namespace egpssm {

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  AnyModel model;
  std::optional<Standardizer> standardizer;
  /// Resolved configuration echoed from the run that produced the model.
  std::map<std::string, std::string> config;
  std::uint64_t seed = 0;
};

std::string checkpoint_to_string(const Checkpoint& ckpt);
Checkpoint checkpoint_from_string(const std::string& text);
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace egpssm
