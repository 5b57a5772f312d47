#include "rsma_iov/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rsma_iov/errors.hpp"

namespace rsma_iov {

namespace {

constexpr double kLaneChangeStart = 0.25;  // s
constexpr double kMinLaneChange = 1.5;     // s per lane crossed

// Quintic smoothstep and its derivative.
double smooth(double tau) { return tau * tau * tau * (10.0 + tau * (-15.0 + 6.0 * tau)); }
double smooth_rate(double tau) { return 30.0 * tau * tau * (1.0 - tau) * (1.0 - tau); }

double ref_speed(const ScenarioParams& p, double time) {
  return std::max(0.0, p.speed - p.decel * time);
}

double ref_distance(const ScenarioParams& p, double time) {
  if (p.decel <= 0.0) return p.speed * time;
  const double stop = p.speed / p.decel;
  const double s = std::min(time, stop);
  return p.speed * s - 0.5 * p.decel * s * s;
}

// Time at which the reference has covered `dist` metres.
double time_to_cover(const ScenarioParams& p, double dist) {
  double lo = 0.0, hi = 1e3;
  for (int i = 0; i < 100; ++i) {
    const double mid = 0.5 * (lo + hi);
    (ref_distance(p, mid) < dist ? lo : hi) = mid;
  }
  return hi;
}

struct LaneChange {
  double y0 = 0.0;
  double y1 = 0.0;
  double start = 0.0;
  double duration = 1.0;
};

std::vector<VehicleState> reference_path(const ScenarioParams& p, double x0,
                                         const LaneChange& lc) {
  const int n = p.steps + p.pad_steps + 1;
  std::vector<VehicleState> out(n);
  for (int t = 0; t < n; ++t) {
    const double time = t * p.dt;
    const double tau = std::clamp((time - lc.start) / lc.duration, 0.0, 1.0);
    const double vx = ref_speed(p, time);
    const double vy = (lc.y1 - lc.y0) * smooth_rate(tau) / lc.duration;
    out[t].x = x0 + ref_distance(p, time);
    out[t].y = lc.y0 + (lc.y1 - lc.y0) * smooth(tau);
    out[t].heading = std::atan2(vy, vx);
    out[t].speed = std::hypot(vx, vy);
  }
  return out;
}

void check_followers(int followers) {
  if (followers < 2 || followers > 9) {
    throw Error(ErrorKind::kInvalidConfig,
                "follower count must be in [2, 9], got " + std::to_string(followers));
  }
}

Scenario base(const std::string& name, const ScenarioParams& p) {
  if (p.steps < 1 || !(p.dt > 0.0) || p.lanes < 1 || p.pad_steps < 0) {
    throw Error(ErrorKind::kInvalidConfig, "scenario needs steps >= 1, dt > 0, lanes >= 1");
  }
  Scenario s;
  s.name = name;
  s.lanes = p.lanes;
  s.lane_width = p.lane_width;
  s.dt = p.dt;
  s.steps = p.steps;
  s.accel_limit.assign(p.steps + p.pad_steps + 1, 4.0);
  return s;
}

}  // namespace

double lane_center(int lane, double lane_width) { return (lane + 0.5) * lane_width; }

double rain_adhesion(double speed, double kappa) {
  const double rho = 0.9458 - 0.0057 * speed - 0.0108 * kappa;
  if (!(rho > 0.0)) {
    throw Error(ErrorKind::kInvalidWeather,
                "road adhesion " + std::to_string(rho) + " is not positive");
  }
  return rho;
}

double rain_accel_threshold(double adhesion) {
  if (!(adhesion > 0.0 && adhesion <= 1.0)) {
    throw Error(ErrorKind::kInvalidWeather, "adhesion must lie in (0, 1]");
  }
  return adhesion * kGravity;
}

WeatherParams weather_at(double speed, double kappa) {
  WeatherParams w;
  w.adhesion = rain_adhesion(speed, kappa);
  w.accel_threshold = rain_accel_threshold(w.adhesion);
  return w;
}

const VehicleState& Scenario::reference(int vehicle, int t) const {
  const auto& row = references.at(vehicle);
  return row[std::clamp<std::size_t>(t, 0, row.size() - 1)];
}

void Scenario::validate() const {
  geometry.validate();
  if (!(lane_width > geometry.width)) {
    throw Error(ErrorKind::kInvalidConfig, "lane narrower than the vehicle");
  }
  if (initial_states.empty() || references.size() != initial_states.size()) {
    throw Error(ErrorKind::kInvalidConfig, "one reference per vehicle is required");
  }
  if (static_cast<int>(accel_limit.size()) < steps) {
    throw Error(ErrorKind::kInvalidConfig, "acceleration limits must cover every step");
  }
  const double half = geometry.width / 2.0;
  for (std::size_t i = 0; i < references.size(); ++i) {
    if (static_cast<int>(references[i].size()) < steps + 1) {
      throw Error(ErrorKind::kInvalidConfig, "reference shorter than the scenario");
    }
    for (const auto& r : references[i]) {
      if (r.y - half < 0.0 || r.y + half > road_width()) {
        throw Error(ErrorKind::kInvalidConfig,
                    "reference of vehicle " + std::to_string(i) + " leaves the road");
      }
    }
  }
  for (std::size_t i = 0; i < initial_states.size(); ++i) {
    const auto body = polytope_of(initial_states[i], geometry);
    for (const auto& ob : obstacles) {
      if (polytopes_intersect(body, ob)) {
        throw Error(ErrorKind::kCollision,
                    "vehicle " + std::to_string(i) + " starts inside an obstacle");
      }
    }
  }
}

Scenario scenario_s1(int followers, const ScenarioParams& p) {
  check_followers(followers);
  if (p.lanes < 3) throw Error(ErrorKind::kInvalidConfig, "S1 needs three lanes");
  Scenario s = base("s1", p);
  s.target_lane = 0;
  const double lead_x = p.lead_x >= 0.0 ? p.lead_x : 20.0;
  const double y_target = lane_center(0, p.lane_width);
  // Lane changes finish 8 m before the obstacle or by 3/4 of the run.
  const double latest = 0.75 * p.steps * p.dt;
  for (int i = 0; i <= followers; ++i) {
    const int lane = i % 3;
    const double x0 = lead_x - p.spacing * i;
    s.initial_states.push_back({x0, lane_center(lane, p.lane_width), 0.0, p.speed});
    LaneChange lc;
    lc.y0 = lane_center(lane, p.lane_width);
    lc.y1 = y_target;
    lc.start = kLaneChangeStart;
    const double clear = time_to_cover(p, p.obstacle_x - 8.0 - x0 - s.geometry.length / 2);
    const double end = std::max(std::min(clear, latest), lc.start + kMinLaneChange * lane);
    lc.duration = std::max(end - lc.start, 1e-3);
    s.references.push_back(reference_path(p, x0, lc));
  }
  s.obstacles.push_back(box_polytope(p.obstacle_x, p.obstacle_x + p.obstacle_length,
                                     p.lane_width, p.lanes * p.lane_width));
  s.validate();
  return s;
}

Scenario scenario_s2(int followers, const ScenarioParams& p) {
  check_followers(followers);
  if (p.lanes < 3) throw Error(ErrorKind::kInvalidConfig, "S2 needs three lanes");
  if (!(p.zone_end > p.zone_start)) {
    throw Error(ErrorKind::kInvalidConfig, "no-change zone must be a nonempty interval");
  }
  Scenario s = base("s2", p);
  s.target_lane = 1;
  const double lead_x = p.lead_x >= 0.0 ? p.lead_x : 40.0;
  const double y_target = lane_center(1, p.lane_width);
  for (int i = 0; i <= followers; ++i) {
    const int lane = i == 0 ? 1 : (i % 2 == 1 ? 2 : 0);
    const double x0 = lead_x - p.spacing * i;
    s.initial_states.push_back({x0, lane_center(lane, p.lane_width), 0.0, p.speed});
    LaneChange lc;
    lc.y0 = lane_center(lane, p.lane_width);
    lc.y1 = y_target;
    lc.start = kLaneChangeStart;
    lc.duration = 2.0;
    const double x_done = x0 + ref_distance(p, lc.start + lc.duration) + s.geometry.length / 2;
    if (lane != 1 && x_done > p.zone_start) {
      throw Error(ErrorKind::kInvalidConfig,
                  "vehicle " + std::to_string(i) + " cannot merge before the no-change zone");
    }
    s.references.push_back(reference_path(p, x0, lc));
  }
  s.no_change_zone = std::make_pair(p.zone_start, p.zone_end);
  s.validate();
  return s;
}

Scenario make_scenario(const std::string& id, int followers, const ScenarioParams& params) {
  if (id == "s1") return scenario_s1(followers, params);
  if (id == "s2") return scenario_s2(followers, params);
  throw Error(ErrorKind::kInvalidConfig, "unknown scenario '" + id + "'");
}

Scenario apply_weather(Scenario scenario, double kappa, double accel_max) {
  if (!(kappa >= 0.0)) throw Error(ErrorKind::kInvalidWeather, "kappa must be nonnegative");
  scenario.kappa = kappa;
  const int n = static_cast<int>(scenario.accel_limit.size());
  for (int t = 0; t < n; ++t) {
    // The lead vehicle's reference speed stands in for every vehicle.
    const double v = scenario.reference(0, t).speed;
    scenario.accel_limit[t] = std::min(accel_max, rain_accel_threshold(rain_adhesion(v, kappa)));
  }
  return scenario;
}

}  // namespace rsma_iov
