#pragma once

#include "singflow/census.hpp"
#include "singflow/zoo.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace singflow::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitMismatch = 1;
inline constexpr int kExitUnreliable = 2;
inline constexpr int kExitConfig = 64;

/// Settings of one experiment. Precedence, lowest first: built-in defaults,
/// the [census] section of the config file, the model's own section, then
/// command-line flags.
struct ExperimentConfig {
  std::string model;
  /// JSON section-graph model used instead of a zoo label.
  std::string model_file;
  double horizon = 0.0;
  double burn_in = 0.0;
  int grid = 0;
  double gap_tol = 0.01;
  double cluster_tol = 0.05;
  double radius_tol = 0.05;
  /// Output directory; empty writes reports to standard output.
  std::string out_dir;
  int workers = 0;
  std::uint64_t seed = CensusConfig{}.seed;
  std::string format = "json";
  /// Model parameters from the config file (e.g. a, b, r for Lorenz).
  std::map<std::string, double> params;

  void validate() const;
  CensusConfig census_config() const;
};

/// Worker count from SINGFLOW_WORKERS, or 0 when unset.
int default_workers();

/// Keys of the [census] section and of per-model sections.
const std::vector<std::string>& census_keys();
/// Model parameter keys accepted for a label.
std::vector<std::string> model_param_keys(const std::string& label);

/// Load an INI file: [census] keys apply to every model, [<label>] sections
/// hold census overrides and model parameters for that label.
void apply_config_file(ExperimentConfig& cfg, const std::string& path);

/// Zoo entry for the configured model (label plus parameters, or model file).
ZooEntry resolve_model(const ExperimentConfig& cfg);

int cmd_list(const ExperimentConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_analyze(const ExperimentConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_sweep(const std::vector<std::string>& labels, const ExperimentConfig& cfg,
              std::ostream& out, std::ostream& err);
/// what: trajectory, return_map or density. piece selects a section-graph
/// piece by id (empty: the first).
int cmd_dump(const ExperimentConfig& cfg, const std::string& what, const std::string& piece,
             std::ostream& out, std::ostream& err);

/// Full command-line entry point.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace singflow::cli
