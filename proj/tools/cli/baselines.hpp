#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace projlab::cli {

inline constexpr int kBaselineFormat = 1;

struct BaselineSettings {
  std::vector<int> decoupling_K{4, 8, 16};
  double decoupling_p = 6.0;
  std::size_t decoupling_ensembles = 50;
  std::uint64_t decoupling_seed = 1;
  int per_cap = 4;

  double strichartz_R = 256.0;
  std::size_t strichartz_seeds = 10;
  std::size_t strichartz_tubes = 64;
  std::uint64_t strichartz_seed = 1;
  double strichartz_p = 6.0;
};

// {"format", "kind", "settings", "entries": [{"K", "seeds", "ratios", "max", "mean"}]}
nlohmann::json compute_decoupling_baseline(const BaselineSettings& settings);
// {"format", "kind", "settings", "entries": [{"seed", "ratio", "lhs", "rhs", "incidence", "cubes"}]}
nlohmann::json compute_strichartz_baseline(const BaselineSettings& settings);

// Settings stored in a baseline file.
BaselineSettings settings_from_json(const nlohmann::json& settings);

std::string decoupling_baseline_path(const std::string& dir);
std::string strichartz_baseline_path(const std::string& dir);

// Reads a baseline file; PreconditionError when missing or of another format.
nlohmann::json read_baseline(const std::string& path, const std::string& kind);

// Writes both files. Existing files need force; their version is then bumped.
// Returns the version written.
int write_baselines(const std::string& dir, const BaselineSettings& settings, bool force);

}  // namespace projlab::cli
