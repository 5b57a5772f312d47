#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "rsma_iov/bcd.hpp"
#include "rsma_iov/downlink.hpp"
#include "rsma_iov/feel.hpp"
#include "rsma_iov/mpc.hpp"
#include "rsma_iov/scenario.hpp"

namespace rsma_iov {

// Synthetic training task plus the size of the model that is broadcast.
struct FeelTaskConfig {
  FeelConfig training;
  int samples = 600;
  int dimension = 16;
  double noise = 0.1;
  // The broadcast model is sized independently of the small synthetic task:
  // B0 = model_parameters * precision_bits.
  double model_parameters = 312500;
  int precision_bits = 32;
  double payload_bits() const { return model_parameters * precision_bits; }
};

struct RunConfig {
  std::string scenario = "s1";
  int followers = 3;
  ScenarioParams scenario_params;
  double weather_kappa = 0.0;
  Scheme scheme = Scheme::kRsma;
  RadioConfig radio;
  double qos_bps = 5e5;
  double q_t = 1.0;
  double q_h = 100.0;
  ScaOptions sca = default_sca_options();
  // Steering-rate limit in rad/s; the MPC step limit is this times dt.
  double steer_rate_per_s = 0.2;
  MpcConfig mpc;
  BcdConfig bcd;
  FeelTaskConfig feel;
  std::uint64_t seed = 1;

  void validate() const;
  Scenario build_scenario() const;
  DownlinkSpec downlink_template() const;  // channels and epsilons empty
  // `mpc` with the steering step limit and Q_h filled in from this config.
  MpcConfig resolved_mpc() const;
};

// Reads the keys present in `j` over `base`; unknown keys and wrong types
// raise invalid-config naming the JSON path.
RunConfig config_from_json(const nlohmann::json& j, RunConfig base = {});
nlohmann::json config_to_json(const RunConfig& config);
RunConfig load_config(const std::string& path, RunConfig base = {});

nlohmann::json scenario_to_json(const Scenario& scenario);
Scenario scenario_from_json(const nlohmann::json& j);
Scenario load_scenario(const std::string& path);

nlohmann::json read_json_file(const std::string& path);
// Two-space indented, trailing newline.
void write_json_file(const std::string& path, const nlohmann::json& j);

}  // namespace rsma_iov
