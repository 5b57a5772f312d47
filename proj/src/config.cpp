#include "rsma_iov/config.hpp"

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <limits>

#include "rsma_iov/errors.hpp"

namespace rsma_iov {

using nlohmann::json;

namespace {

[[noreturn]] void bad(const std::string& path, const std::string& what) {
  throw Error(ErrorKind::kInvalidConfig, path + ": " + what);
}

const json& object_at(const json& j, const std::string& path,
                      std::initializer_list<const char*> allowed) {
  if (!j.is_object()) bad(path, "expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || it.key() == a;
    if (!ok) bad(path + "." + it.key(), "unknown key");
  }
  return j;
}

void read(const json& j, const char* key, const std::string& path, double& out) {
  if (!j.contains(key)) return;
  if (!j[key].is_number()) bad(path + "." + key, "expected a number");
  out = j[key].get<double>();
}

void read(const json& j, const char* key, const std::string& path, int& out) {
  if (!j.contains(key)) return;
  const auto& v = j[key];
  if (!v.is_number_integer() && !(v.is_number_float() && std::floor(v.get<double>()) == v.get<double>())) {
    bad(path + "." + key, "expected an integer");
  }
  out = static_cast<int>(v.get<double>());
}

void read(const json& j, const char* key, const std::string& path, bool& out) {
  if (!j.contains(key)) return;
  if (!j[key].is_boolean()) bad(path + "." + key, "expected true or false");
  out = j[key].get<bool>();
}

void read(const json& j, const char* key, const std::string& path, std::string& out) {
  if (!j.contains(key)) return;
  if (!j[key].is_string()) bad(path + "." + key, "expected a string");
  out = j[key].get<std::string>();
}

template <int N>
void read(const json& j, const char* key, const std::string& path, Eigen::Matrix<double, N, 1>& out) {
  if (!j.contains(key)) return;
  const auto& v = j[key];
  if (!v.is_array() || v.size() != N) bad(path + "." + key, "expected " + std::to_string(N) + " numbers");
  for (int i = 0; i < N; ++i) {
    if (!v[i].is_number()) bad(path + "." + key, "expected numbers");
    out[i] = v[i].get<double>();
  }
}

template <int N>
json vec(const Eigen::Matrix<double, N, 1>& v) {
  json a = json::array();
  for (int i = 0; i < N; ++i) a.push_back(v[i]);
  return a;
}

json state_json(const VehicleState& z) { return json::array({z.x, z.y, z.heading, z.speed}); }

VehicleState state_from(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 4) bad(path, "expected [x, y, heading, speed]");
  for (const auto& v : j)
    if (!v.is_number()) bad(path, "expected numbers");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
}

template <typename T>
T require(const json& j, const char* key, const std::string& path) {
  if (!j.contains(key)) bad(path + "." + key, "missing");
  T out{};
  read(j, key, path, out);
  return out;
}

}  // namespace

void RunConfig::validate() const {
  if (followers < 2 || followers > 9) bad("scenario.followers", "must be in [2, 9]");
  if (!(weather_kappa >= 0.0)) bad("scenario.weather_kappa", "must be nonnegative");
  if (!(qos_bps >= 0.0) || !(q_t >= 0.0) || !(q_h >= 0.0)) {
    bad("comm", "qos_bps, q_t and q_h must be nonnegative");
  }
  if (sca.max_iters < 1 || !(sca.tol > 0.0)) bad("comm", "sca_max_iters >= 1 and sca_tol > 0");
  if (!(steer_rate_per_s > 0.0)) bad("mpc.steer_rate_per_s", "must be positive");
  if (feel.samples < followers || feel.dimension < 1) {
    bad("feel", "needs samples >= followers and dimension >= 1");
  }
  if (!(feel.model_parameters > 0.0) || feel.precision_bits < 1) {
    bad("feel", "model_parameters and precision_bits must be positive");
  }
  if (!(feel.noise >= 0.0)) bad("feel.noise", "must be nonnegative");
  radio.validate();
  resolved_mpc().validate();
  bcd.validate();
  feel.training.validate();
}

Scenario RunConfig::build_scenario() const {
  Scenario sc = make_scenario(scenario, followers, scenario_params);
  if (weather_kappa > 0.0) sc = apply_weather(std::move(sc), weather_kappa, mpc.u_max[0]);
  return sc;
}

MpcConfig RunConfig::resolved_mpc() const {
  MpcConfig m = mpc;
  m.du_max[1] = steer_rate_per_s * scenario_params.dt;
  m.du_min[1] = -m.du_max[1];
  m.q_h = q_h;
  return m;
}

DownlinkSpec RunConfig::downlink_template() const {
  DownlinkSpec s;
  s.slots = scenario_params.steps;
  s.dt = scenario_params.dt;
  s.payload_bits = feel.payload_bits();
  s.qos_bps = qos_bps;
  s.radio = radio;
  s.radio.followers = followers;
  s.q_t = q_t;
  s.q_h = q_h;
  return s;
}

RunConfig config_from_json(const json& root, RunConfig c) {
  object_at(root, "$", {"scenario", "scheme", "radio", "comm", "mpc", "bcd", "feel", "seed"});
  if (root.contains("scenario")) {
    const auto& j = object_at(root["scenario"], "scenario",
                              {"id", "followers", "steps", "dt", "lanes", "lane_width", "speed",
                               "decel", "spacing", "obstacle_x", "obstacle_length", "zone_start",
                               "zone_end", "pad_steps", "weather_kappa"});
    const std::string p = "scenario";
    auto& sp = c.scenario_params;
    read(j, "id", p, c.scenario);
    read(j, "followers", p, c.followers);
    read(j, "steps", p, sp.steps);
    read(j, "dt", p, sp.dt);
    read(j, "lanes", p, sp.lanes);
    read(j, "lane_width", p, sp.lane_width);
    read(j, "speed", p, sp.speed);
    read(j, "decel", p, sp.decel);
    read(j, "spacing", p, sp.spacing);
    read(j, "obstacle_x", p, sp.obstacle_x);
    read(j, "obstacle_length", p, sp.obstacle_length);
    read(j, "zone_start", p, sp.zone_start);
    read(j, "zone_end", p, sp.zone_end);
    read(j, "pad_steps", p, sp.pad_steps);
    read(j, "weather_kappa", p, c.weather_kappa);
  }
  if (root.contains("scheme")) {
    if (!root["scheme"].is_string()) bad("scheme", "expected a string");
    try {
      c.scheme = parse_scheme(root["scheme"].get<std::string>());
    } catch (const Error& e) {
      bad("scheme", e.what());
    }
  }
  if (root.contains("radio")) {
    const auto& j = object_at(root["radio"], "radio",
                              {"antennas", "bandwidth_hz", "power_dbm", "noise_dbm_per_hz",
                               "path_loss_exponent"});
    read(j, "antennas", "radio", c.radio.antennas);
    read(j, "bandwidth_hz", "radio", c.radio.bandwidth_hz);
    read(j, "power_dbm", "radio", c.radio.power_dbm);
    read(j, "noise_dbm_per_hz", "radio", c.radio.noise_dbm_per_hz);
    read(j, "path_loss_exponent", "radio", c.radio.path_loss_exponent);
  }
  if (root.contains("comm")) {
    const auto& j =
        object_at(root["comm"], "comm", {"qos_bps", "q_t", "q_h", "sca_max_iters", "sca_tol"});
    read(j, "qos_bps", "comm", c.qos_bps);
    read(j, "q_t", "comm", c.q_t);
    read(j, "q_h", "comm", c.q_h);
    read(j, "sca_max_iters", "comm", c.sca.max_iters);
    read(j, "sca_tol", "comm", c.sca.tol);
  }
  if (root.contains("mpc")) {
    const auto& j = object_at(
        root["mpc"], "mpc",
        {"horizon", "q_z", "q_u", "q_du", "terminal_weight", "state_min", "state_max",
         "input_min", "input_max", "accel_rate_min", "accel_rate_max", "steer_rate_per_s",
         "max_inner_iters", "tol", "safety_margin", "collision_penalty"});
    const std::string p = "mpc";
    auto& m = c.mpc;
    read(j, "horizon", p, m.horizon);
    read(j, "q_z", p, m.q_z);
    read(j, "q_u", p, m.q_u);
    read(j, "q_du", p, m.q_du);
    read(j, "terminal_weight", p, m.terminal_weight);
    read(j, "state_min", p, m.z_min);
    read(j, "state_max", p, m.z_max);
    read(j, "input_min", p, m.u_min);
    read(j, "input_max", p, m.u_max);
    read(j, "accel_rate_min", p, m.du_min[0]);
    read(j, "accel_rate_max", p, m.du_max[0]);
    read(j, "steer_rate_per_s", p, c.steer_rate_per_s);
    read(j, "max_inner_iters", p, m.max_inner_iters);
    read(j, "tol", p, m.tol);
    read(j, "safety_margin", p, m.safety_margin);
    read(j, "collision_penalty", p, m.collision_penalty);
  }
  if (root.contains("bcd")) {
    const auto& j = object_at(root["bcd"], "bcd", {"max_outer", "stop_tol"});
    read(j, "max_outer", "bcd", c.bcd.max_outer);
    read(j, "stop_tol", "bcd", c.bcd.stop_tol);
    if (c.bcd.stop_tol >= 1e300) c.bcd.stop_tol = std::numeric_limits<double>::infinity();
  }
  if (root.contains("feel")) {
    const auto& j = object_at(root["feel"], "feel",
                              {"step_size", "rounds", "loss", "weighted", "samples", "dimension",
                               "noise", "model_parameters", "precision_bits"});
    const std::string p = "feel";
    read(j, "step_size", p, c.feel.training.step_size);
    read(j, "rounds", p, c.feel.training.rounds);
    std::string loss = to_string(c.feel.training.loss);
    read(j, "loss", p, loss);
    try {
      c.feel.training.loss = parse_loss(loss);
    } catch (const Error& e) {
      bad("feel.loss", e.what());
    }
    read(j, "weighted", p, c.feel.training.weighted);
    read(j, "samples", p, c.feel.samples);
    read(j, "dimension", p, c.feel.dimension);
    read(j, "noise", p, c.feel.noise);
    read(j, "model_parameters", p, c.feel.model_parameters);
    read(j, "precision_bits", p, c.feel.precision_bits);
  }
  if (root.contains("seed")) {
    if (!root["seed"].is_number_unsigned()) bad("seed", "expected a nonnegative integer");
    c.seed = root["seed"].get<std::uint64_t>();
  }
  c.feel.training.workers = c.followers;
  c.radio.followers = c.followers;
  return c;
}

json config_to_json(const RunConfig& c) {
  const auto& sp = c.scenario_params;
  const auto& m = c.mpc;
  json j;
  j["scenario"] = {{"id", c.scenario},
                   {"followers", c.followers},
                   {"steps", sp.steps},
                   {"dt", sp.dt},
                   {"lanes", sp.lanes},
                   {"lane_width", sp.lane_width},
                   {"speed", sp.speed},
                   {"decel", sp.decel},
                   {"spacing", sp.spacing},
                   {"obstacle_x", sp.obstacle_x},
                   {"obstacle_length", sp.obstacle_length},
                   {"zone_start", sp.zone_start},
                   {"zone_end", sp.zone_end},
                   {"pad_steps", sp.pad_steps},
                   {"weather_kappa", c.weather_kappa}};
  j["scheme"] = to_string(c.scheme);
  j["radio"] = {{"antennas", c.radio.antennas},
                {"bandwidth_hz", c.radio.bandwidth_hz},
                {"power_dbm", c.radio.power_dbm},
                {"noise_dbm_per_hz", c.radio.noise_dbm_per_hz},
                {"path_loss_exponent", c.radio.path_loss_exponent}};
  j["comm"] = {{"qos_bps", c.qos_bps},
               {"q_t", c.q_t},
               {"q_h", c.q_h},
               {"sca_max_iters", c.sca.max_iters},
               {"sca_tol", c.sca.tol}};
  j["mpc"] = {{"horizon", m.horizon},
              {"q_z", vec(m.q_z)},
              {"q_u", vec(m.q_u)},
              {"q_du", vec(m.q_du)},
              {"terminal_weight", m.terminal_weight},
              {"state_min", vec(m.z_min)},
              {"state_max", vec(m.z_max)},
              {"input_min", vec(m.u_min)},
              {"input_max", vec(m.u_max)},
              {"accel_rate_min", m.du_min[0]},
              {"accel_rate_max", m.du_max[0]},
              {"steer_rate_per_s", c.steer_rate_per_s},
              {"max_inner_iters", m.max_inner_iters},
              {"tol", m.tol},
              {"safety_margin", m.safety_margin},
              {"collision_penalty", m.collision_penalty}};
  // Infinity has no JSON form; a huge tolerance stops after one iteration too.
  j["bcd"] = {{"max_outer", c.bcd.max_outer},
              {"stop_tol", std::isfinite(c.bcd.stop_tol) ? c.bcd.stop_tol : 1e300}};
  j["feel"] = {{"step_size", c.feel.training.step_size},
               {"rounds", c.feel.training.rounds},
               {"loss", to_string(c.feel.training.loss)},
               {"weighted", c.feel.training.weighted},
               {"samples", c.feel.samples},
               {"dimension", c.feel.dimension},
               {"noise", c.feel.noise},
               {"model_parameters", c.feel.model_parameters},
               {"precision_bits", c.feel.precision_bits}};
  j["seed"] = c.seed;
  return j;
}

json read_json_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorKind::kIo, "cannot read " + path);
  try {
    return json::parse(f);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::kInvalidConfig, path + ": " + e.what());
  }
}

void write_json_file(const std::string& path, const json& j) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::kIo, "cannot write " + path);
  f << j.dump(2) << '\n';
  if (!f) throw Error(ErrorKind::kIo, "write failed for " + path);
}

RunConfig load_config(const std::string& path, RunConfig base) {
  return config_from_json(read_json_file(path), std::move(base));
}

json scenario_to_json(const Scenario& s) {
  json j;
  j["name"] = s.name;
  j["lanes"] = s.lanes;
  j["lane_width"] = s.lane_width;
  j["dt"] = s.dt;
  j["steps"] = s.steps;
  j["geometry"] = {{"length", s.geometry.length},
                   {"width", s.geometry.width},
                   {"front_axle", s.geometry.front_axle},
                   {"rear_axle", s.geometry.rear_axle}};
  j["obstacles"] = json::array();
  for (const auto& ob : s.obstacles) {
    json rows = json::array();
    for (int r = 0; r < 4; ++r) rows.push_back({ob.A(r, 0), ob.A(r, 1), ob.b[r]});
    j["obstacles"].push_back(rows);
  }
  j["initial_states"] = json::array();
  for (const auto& z : s.initial_states) j["initial_states"].push_back(state_json(z));
  j["references"] = json::array();
  for (const auto& ref : s.references) {
    json r = json::array();
    for (const auto& z : ref) r.push_back(state_json(z));
    j["references"].push_back(r);
  }
  j["no_change_zone"] = s.no_change_zone
                            ? json::array({s.no_change_zone->first, s.no_change_zone->second})
                            : json(nullptr);
  j["target_lane"] = s.target_lane;
  j["kappa"] = s.kappa;
  j["accel_limit"] = s.accel_limit;
  return j;
}

Scenario scenario_from_json(const json& j) {
  object_at(j, "scenario", {"name", "lanes", "lane_width", "dt", "steps", "geometry", "obstacles",
                            "initial_states", "references", "no_change_zone", "target_lane",
                            "kappa", "accel_limit"});
  const std::string p = "scenario";
  Scenario s;
  s.name = require<std::string>(j, "name", p);
  s.lanes = require<int>(j, "lanes", p);
  s.lane_width = require<double>(j, "lane_width", p);
  s.dt = require<double>(j, "dt", p);
  s.steps = require<int>(j, "steps", p);
  s.target_lane = require<int>(j, "target_lane", p);
  s.kappa = require<double>(j, "kappa", p);
  if (!j.contains("geometry")) bad(p + ".geometry", "missing");
  const auto& g = object_at(j["geometry"], p + ".geometry",
                            {"length", "width", "front_axle", "rear_axle"});
  s.geometry.length = require<double>(g, "length", p + ".geometry");
  s.geometry.width = require<double>(g, "width", p + ".geometry");
  s.geometry.front_axle = require<double>(g, "front_axle", p + ".geometry");
  s.geometry.rear_axle = require<double>(g, "rear_axle", p + ".geometry");
  auto array_at = [&](const char* key) -> const json& {
    if (!j.contains(key) || !j[key].is_array()) bad(p + "." + key, "expected an array");
    return j[key];
  };
  for (const auto& ob : array_at("obstacles")) {
    if (!ob.is_array() || ob.size() != 4) bad(p + ".obstacles", "expected 4 rows [a0, a1, b]");
    Polytope poly;
    for (int r = 0; r < 4; ++r) {
      const auto& row = ob[r];
      if (!row.is_array() || row.size() != 3) bad(p + ".obstacles", "expected rows [a0, a1, b]");
      for (const auto& v : row)
        if (!v.is_number()) bad(p + ".obstacles", "expected numbers");
      poly.A(r, 0) = row[0].get<double>();
      poly.A(r, 1) = row[1].get<double>();
      poly.b[r] = row[2].get<double>();
    }
    s.obstacles.push_back(poly);
  }
  for (const auto& z : array_at("initial_states")) {
    s.initial_states.push_back(state_from(z, p + ".initial_states"));
  }
  for (const auto& ref : array_at("references")) {
    if (!ref.is_array()) bad(p + ".references", "expected one array per vehicle");
    std::vector<VehicleState> r;
    for (const auto& z : ref) r.push_back(state_from(z, p + ".references"));
    s.references.push_back(std::move(r));
  }
  if (j.contains("no_change_zone") && !j["no_change_zone"].is_null()) {
    const auto& z = j["no_change_zone"];
    if (!z.is_array() || z.size() != 2 || !z[0].is_number() || !z[1].is_number()) {
      bad(p + ".no_change_zone", "expected null or [start, end]");
    }
    s.no_change_zone = std::make_pair(z[0].get<double>(), z[1].get<double>());
  }
  for (const auto& a : array_at("accel_limit")) {
    if (!a.is_number()) bad(p + ".accel_limit", "expected numbers");
    s.accel_limit.push_back(a.get<double>());
  }
  s.validate();
  return s;
}

Scenario load_scenario(const std::string& path) { return scenario_from_json(read_json_file(path)); }

}  // namespace rsma_iov
