#pragma once

// Config parsing and experiment orchestration for the neuromfg tool.

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "neuromfg/core_model.hpp"
#include "neuromfg/game_eval.hpp"
#include "neuromfg/meanfield.hpp"

namespace neuromfg {

enum class Experiment { SolveMfe, Consistency, NashGap, Lln, Verify };

std::string experiment_name(Experiment e);

struct RunConfig {
  nlohmann::json source;  // the parsed document, echoed into the manifest
  ModelParams params;
  JumpMeasure nu;
  TypeDistribution dist;
  TimeGrid grid;
  McSettings mc;
  SolverOptions solver;
  Experiment experiment = Experiment::SolveMfe;
  std::vector<std::size_t> n_list;
  std::vector<double> t_checks;
  std::string out_dir = "out";
  std::size_t dump_paths = 0;  // representative paths written by "consistency"
};

// Throws ConfigError on any schema violation or invalid model value.
RunConfig parse_config(const nlohmann::json& doc);
RunConfig load_config(const std::string& path);

// Exit codes of run().
enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitConfig = 2,
  kExitNonConvergence = 3,
  kExitVerification = 4,
};

// Runs the configured experiment, writes its CSVs and run_manifest.json
// into out_dir, and reports progress and errors on `log`.
int run(const std::string& config_path, std::ostream& log);

}  // namespace neuromfg
