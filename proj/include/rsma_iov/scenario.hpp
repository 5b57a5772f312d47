#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rsma_iov/dynamics.hpp"

namespace rsma_iov {

// Road lanes are numbered from the right: lane 0 is the right lane.
double lane_center(int lane, double lane_width);

struct WeatherParams {
  double adhesion = 1.0;
  double accel_threshold = 9.81;
};

inline constexpr double kGravity = 9.81;

// rho = 0.9458 - 0.0057 v - 0.0108 kappa; throws invalid-weather if rho <= 0.
double rain_adhesion(double speed, double kappa);
double rain_accel_threshold(double adhesion);
WeatherParams weather_at(double speed, double kappa);

// Knobs of the built-in scenarios. Distances in m, speeds in m/s.
struct ScenarioParams {
  int steps = 100;
  double dt = 0.05;
  int lanes = 3;
  double lane_width = 3.7;
  double speed = 14.0;
  double decel = 0.25;      // reference speed falls linearly at this rate
  double spacing = 10.0;
  double lead_x = -1.0;     // < 0: scenario default
  double obstacle_x = 60.0;
  double obstacle_length = 5.0;
  double zone_start = 80.0;
  double zone_end = 120.0;
  int pad_steps = 40;       // reference samples beyond `steps` for the horizon
};

struct Scenario {
  std::string name;
  int lanes = 3;
  double lane_width = 3.7;
  double dt = 0.05;
  int steps = 100;
  VehicleGeometry geometry;
  std::vector<Polytope> obstacles;
  std::vector<VehicleState> initial_states;  // index 0 is the lead vehicle
  // references[i][t] for t = 0 .. steps + pad; t = 0 is the initial time.
  std::vector<std::vector<VehicleState>> references;
  std::optional<std::pair<double, double>> no_change_zone;
  int target_lane = 0;
  double kappa = 0.0;  // water-film thickness; 0 is dry
  // Symmetric acceleration bound per step, |a(t)| <= accel_limit[t].
  std::vector<double> accel_limit;

  int vehicles() const { return static_cast<int>(initial_states.size()); }
  int followers() const { return vehicles() - 1; }
  double road_width() const { return lanes * lane_width; }
  const VehicleState& reference(int vehicle, int t) const;
  void validate() const;
};

// Obstacle avoidance: K followers plus the lead vehicle spread over three
// lanes; an obstacle blocks the central and left lanes and every vehicle
// merges into a single column in the right lane.
Scenario scenario_s1(int followers, const ScenarioParams& params = {});

// Crossroad: all vehicles merge into the central lane before a solid-line
// zone in which no lateral motion is allowed.
Scenario scenario_s2(int followers, const ScenarioParams& params = {});

Scenario make_scenario(const std::string& id, int followers,
                       const ScenarioParams& params = {});

// Acceleration bounds become +/- min(a_max, rho(v_ref) g) per step.
Scenario apply_weather(Scenario scenario, double kappa, double accel_max = 4.0);

}  // namespace rsma_iov
