#pragma once

#include "koopbound/bounds.hpp"
#include "koopbound/json_io.hpp"
#include "koopbound/network.hpp"
#include "koopbound/rademacher.hpp"
#include "koopbound/svg_plot.hpp"

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace koopbound {

inline constexpr const char* kToolVersion = "0.1.0";

struct DatasetConfig {
  int n = 16;
  int dim = 2;
  enum class Distribution { unit_sphere, gaussian, grid };
  Distribution distribution = Distribution::unit_sphere;
  std::uint64_t seed = 0;
};

std::vector<Vector> generate_dataset(const DatasetConfig& config);

struct SweepAxis {
  std::string name;  // width | depth | condition_number | tasks | n
  std::vector<double> values;
};

// Kernel section of an experiment: the scalar spec is re-derived per sweep
// cell as s_0 = d_0/2 + nu so the Sobolev order tracks the input width.
struct KernelTemplate {
  double matern_smoothness = 0.5;  // nu in {1/2, 3/2, 5/2}
  double length_scale = 1.0;
  double amplitude = 1.0;
  // diag(M_t) per task; empty = identity for every task, a single entry is
  // shared by all tasks.
  std::vector<std::vector<double>> output_diagonals;
};

struct ExperimentConfig {
  std::optional<NetworkGeneratorConfig> generator;
  std::optional<std::string> network_file;
  WeightClassSpec weight_class;
  KernelTemplate kernel;
  DatasetConfig dataset;
  std::vector<std::string> variants{"theorem_inv"};
  std::optional<EstimatorConfig> estimator;
  std::vector<SweepAxis> sweep;
  std::string output_dir;  // may be empty; resolution order: flag, config, env
  std::uint64_t master_seed = 0;
  bool project_to_weight_class = true;
};

ExperimentConfig experiment_config_from_json(const Json& j);
Json experiment_config_to_json(const ExperimentConfig& config);

struct ValidationReport {
  std::vector<std::string> errors;
  bool valid() const { return errors.empty(); }
};

// Structural and semantic checks: dimension chains, s > d/2, class
// feasibility, axis names and values, referenced files.
ValidationReport validate_experiment(const ExperimentConfig& config);

struct ConfigLoadResult {
  std::optional<ExperimentConfig> config;
  std::vector<std::string> errors;  // parse errors carry line:column anchors
};

ConfigLoadResult load_experiment_config(const std::string& path);

struct CellResult {
  int index = 0;
  std::vector<std::pair<std::string, double>> axes;
  std::vector<BoundReport> bounds;
  std::optional<RademacherEstimate> estimate;
  std::string error;  // empty on success

  bool failed() const { return !error.empty(); }
};

struct ExperimentReport {
  Json config_echo;
  std::string tool_version = kToolVersion;
  std::uint64_t master_seed = 0;
  double wall_clock_seconds = 0.0;
  std::vector<CellResult> cells;

  bool any_failed() const;
};

// Executes the Cartesian sweep; failures are isolated per cell. jobs <= 0
// means machine parallelism. Per-cell seeds derive from (master_seed, cell
// index), so reruns with the same config and seed reproduce every result.
ExperimentReport run_experiment(const ExperimentConfig& config, int jobs = 1);

Json report_to_json(const ExperimentReport& report);

// One row per cell x variant (plus an estimate-only row when no bound
// variants ran); fixed, documented column set; numeric cells printed with 17
// significant digits so they round-trip exactly.
std::string bounds_csv(const ExperimentReport& report);

// One chart per sweep axis: every bound variant plus the estimate against the
// axis, other axes held at their first value, log-scale y.
std::vector<std::pair<std::string, std::string>> render_plots(
    const ExperimentReport& report, const ExperimentConfig& config);

// report.json + bounds.csv + plots/*.svg under out_dir.
void write_report_files(const ExperimentReport& report,
                        const ExperimentConfig& config,
                        const std::string& out_dir);

}  // namespace koopbound
