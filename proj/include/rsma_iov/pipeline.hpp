#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "rsma_iov/bcd.hpp"
#include "rsma_iov/config.hpp"
#include "rsma_iov/csv.hpp"
#include "rsma_iov/feel.hpp"
#include "rsma_iov/metrics.hpp"

namespace rsma_iov {

// Files of a run directory.
inline constexpr const char* kConfigFile = "config.json";
inline constexpr const char* kScenarioFile = "scenario.json";
inline constexpr const char* kTrajectoryFile = "trajectory.csv";
inline constexpr const char* kCommTraceFile = "comm_trace.csv";
inline constexpr const char* kBcdTraceFile = "bcd_trace.csv";
inline constexpr const char* kFeelLossFile = "feel_loss.csv";
inline constexpr const char* kMetricsFile = "metrics.json";

struct RunOutput {
  Scenario scenario;
  BcdResult bcd;
  std::vector<TrainingPoint> training;
  double smoothness = 0.0;
  nlohmann::json metrics;
};

// BCD, FEEL training over the resulting schedule, and metrics. Pure; writes
// nothing.
RunOutput execute_run(const RunConfig& config);

// execute_run plus every artifact in `out_dir` (created if needed).
RunOutput run_to_dir(const RunConfig& config, const std::string& out_dir);

// Table builders. The trajectory has one row per (t, vehicle) for
// t = 0..T; input and per-step columns are empty on the final state row.
CsvTable trajectory_table(const PlatoonTrace& trace);
CsvTable comm_trace_table(const ScaReport& report);
CsvTable bcd_trace_table(const BcdResult& result);
CsvTable feel_loss_table(const std::vector<TrainingPoint>& curve, Scheme scheme);

PlatoonTrace trace_from_table(const CsvTable& table);

nlohmann::json metrics_json(const RunConfig& config, const RunOutput& out);

// Re-parses every artifact and re-checks its invariants. Returns one line
// per failed check; empty means the directory is valid.
std::vector<std::string> validate_run_dir(const std::string& dir);

// Comparison of completed run directories: latency per scheme against K and
// power, scheme ordering, and variance gaps against the RSMA run of the same
// K and power (the first run of the group when there is none). Throws
// comparison when the runs do not share scenario, steps, dt and weather.
nlohmann::json compare_runs(const std::vector<std::string>& dirs);

struct SweepSpec {
  std::vector<int> followers;
  std::vector<double> power_dbm;
  std::vector<Scheme> schemes;
  int jobs = 1;
};

// One isolated run per (K, power, scheme) under out_dir/K<k>_P<p>_<scheme>,
// then compare.json over all of them. Returns the run directories.
std::vector<std::string> sweep(const RunConfig& base, const SweepSpec& spec,
                               const std::string& out_dir);

}  // namespace rsma_iov
