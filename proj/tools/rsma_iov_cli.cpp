#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rsma_iov/config.hpp"
#include "rsma_iov/errors.hpp"
#include "rsma_iov/pipeline.hpp"

using namespace rsma_iov;
using nlohmann::json;

namespace {

constexpr int kOk = 0;
constexpr int kRuntime = 1;
constexpr int kUsage = 2;

struct Overrides {
  std::string config;
  std::optional<std::string> scenario;
  std::optional<std::string> scheme;
  std::optional<int> vehicles;
  std::optional<int> antennas;
  std::optional<double> power_dbm;
  std::optional<std::uint64_t> seed;
  std::optional<double> kappa;
};

void add_overrides(CLI::App* cmd, Overrides& o, bool sweep) {
  cmd->add_option("--config", o.config, "JSON run configuration overlaid on the defaults")
      ->check(CLI::ExistingFile);
  cmd->add_option("--scenario", o.scenario, "s1 (obstacle) or s2 (crossroad)")
      ->check(CLI::IsMember({"s1", "s2"}));
  cmd->add_option("--antennas", o.antennas, "transmit antennas M")->check(CLI::PositiveNumber);
  cmd->add_option("--seed", o.seed, "seed of the synthetic learning task");
  cmd->add_option("--weather-kappa", o.kappa, "water-film thickness; 0 is dry")
      ->check(CLI::NonNegativeNumber);
  if (!sweep) {
    cmd->add_option("--scheme", o.scheme, "rsma, mulp or noma")
        ->check(CLI::IsMember({"rsma", "mulp", "noma"}));
    cmd->add_option("--vehicles", o.vehicles, "number of followers K")->check(CLI::Range(2, 9));
    cmd->add_option("--power-dbm", o.power_dbm, "transmit power in dBm");
  }
}

RunConfig resolve(const Overrides& o) {
  RunConfig c = o.config.empty() ? RunConfig{} : load_config(o.config);
  if (o.scenario) c.scenario = *o.scenario;
  if (o.scheme) c.scheme = parse_scheme(*o.scheme);
  if (o.vehicles) c.followers = *o.vehicles;
  if (o.antennas) c.radio.antennas = *o.antennas;
  if (o.power_dbm) c.radio.power_dbm = *o.power_dbm;
  if (o.seed) c.seed = *o.seed;
  if (o.kappa) c.weather_kappa = *o.kappa;
  c.radio.followers = c.followers;
  c.feel.training.workers = c.followers;
  return c;
}

int report_error(const std::string& kind, const std::string& message) {
  std::cerr << json{{"error", {{"kind", kind}, {"message", message}}}}.dump() << '\n';
  return kRuntime;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint RSMA downlink and platoon control simulator"};
  app.require_subcommand(1);

  Overrides run_opts;
  std::string run_out = "run";
  auto* run = app.add_subcommand("run", "run BCD and FEEL training, write artifacts");
  add_overrides(run, run_opts, false);
  run->add_option("--out", run_out, "output directory");

  std::vector<std::string> compare_dirs;
  std::string compare_out;
  auto* compare = app.add_subcommand("compare", "compare completed run directories");
  compare->add_option("dirs", compare_dirs, "run directories")->required()->expected(2, -1)
      ->check(CLI::ExistingDirectory);
  compare->add_option("--out", compare_out, "write the report here instead of stdout");

  std::string validate_dir;
  auto* validate = app.add_subcommand("validate", "re-parse and re-check a run directory");
  validate->add_option("dir", validate_dir, "run directory")->required()
      ->check(CLI::ExistingDirectory);

  Overrides sweep_opts;
  std::string sweep_out = "sweep";
  std::vector<int> sweep_k{2, 3, 4};
  std::vector<double> sweep_p{25.0};
  std::vector<std::string> sweep_schemes{"rsma", "mulp", "noma"};
  int jobs = 1;
  auto* sweep_cmd = app.add_subcommand("sweep", "independent runs over K, power and scheme");
  add_overrides(sweep_cmd, sweep_opts, true);
  sweep_cmd->add_option("--vehicles", sweep_k, "followers K to sweep")->delimiter(',')
      ->check(CLI::Range(2, 9));
  sweep_cmd->add_option("--power-dbm", sweep_p, "powers in dBm to sweep")->delimiter(',');
  sweep_cmd->add_option("--scheme", sweep_schemes, "schemes to sweep")->delimiter(',')
      ->check(CLI::IsMember({"rsma", "mulp", "noma"}));
  sweep_cmd->add_option("--jobs", jobs, "concurrent runs")->check(CLI::PositiveNumber);
  sweep_cmd->add_option("--out", sweep_out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*run) {
      const RunConfig c = resolve(run_opts);
      const auto out = run_to_dir(c, run_out);
      json summary = {{"out", run_out},
                      {"latency_index", out.metrics["latency_index"]},
                      {"latency_s", out.metrics["latency_s"]},
                      {"bcd_iterations", out.metrics["bcd"]["iterations"]},
                      {"joint_objective", out.metrics["bcd"]["joint_objective"]}};
      std::cout << summary.dump(2) << '\n';
    } else if (*compare) {
      const json report = compare_runs(compare_dirs);
      if (compare_out.empty()) {
        std::cout << report.dump(2) << '\n';
      } else {
        write_json_file(compare_out, report);
      }
    } else if (*validate) {
      const auto problems = validate_run_dir(validate_dir);
      std::cout << json{{"dir", validate_dir}, {"valid", problems.empty()}, {"problems", problems}}
                       .dump(2)
                << '\n';
      if (!problems.empty()) return kRuntime;
    } else if (*sweep_cmd) {
      SweepSpec spec;
      spec.followers = sweep_k;
      spec.power_dbm = sweep_p;
      for (const auto& s : sweep_schemes) spec.schemes.push_back(parse_scheme(s));
      spec.jobs = jobs;
      const auto dirs = sweep(resolve(sweep_opts), spec, sweep_out);
      std::cout << json{{"out", sweep_out}, {"runs", dirs}}.dump(2) << '\n';
    }
  } catch (const Error& e) {
    return report_error(std::string(to_string(e.kind())), e.what());
  } catch (const std::exception& e) {
    return report_error("internal", e.what());
  }
  return kOk;
}
