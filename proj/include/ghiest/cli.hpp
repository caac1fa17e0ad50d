#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ghiest/core_data.hpp"
#include "ghiest/evaluation.hpp"
#include "ghiest/orientation_id.hpp"
#include "ghiest/pv_proxy.hpp"
#include "ghiest/reconciliation.hpp"
#include "ghiest/solver.hpp"

namespace ghiest {

struct PathsConfig {
  std::vector<std::filesystem::path> plants;  // plant id = file stem
  std::optional<std::filesystem::path> clearsky;
  std::filesystem::path output_dir = ".";
  std::optional<std::filesystem::path> omega;
  std::optional<std::filesystem::path> synth_spec;
  std::optional<std::filesystem::path> estimate;
  std::optional<std::filesystem::path> truth;
};

struct RunConfig {
  unsigned threads = 0;
  std::uint64_t seed = 0;
  Site site;
  std::optional<Seconds> sampling;
  double linke_turbidity = 3.0;
  ProxyParams proxy;
  SolverConfig solver;
  IdentificationOptions orientation;
  ReconciliationConfig reconciliation;
  PathsConfig paths;

  void validate() const;
};

// Sets one key. `section` is empty for top-level keys. Unknown keys and
// unparseable values throw InputError. Relative paths resolve against `base`.
void apply_setting(RunConfig& cfg, const std::string& section, const std::string& key, const std::string& value,
                   const std::filesystem::path& base = {});

// INI file with sections site, proxy, solver, orientation, reconciliation and
// paths. Each override reads `section.key=value` (or `key=value` at the top).
RunConfig load_run_config(const std::optional<std::filesystem::path>& path,
                          const std::vector<std::string>& overrides = {});

enum ExitCode : int { kExitOk = 0, kExitInput = 1, kExitConvergence = 2 };

AlignedDataset load_dataset(const RunConfig& cfg);

int cmd_identify(const RunConfig& cfg);
int cmd_estimate(const RunConfig& cfg);
int cmd_synth(const RunConfig& cfg);
int cmd_evaluate(const RunConfig& cfg);

// Timestamp column plus one named value column of a CSV file.
Series read_csv_column(const std::filesystem::path& path, const std::string& column);

}  // namespace ghiest
