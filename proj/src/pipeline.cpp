#include "rsma_iov/pipeline.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <map>
#include <mutex>
#include <thread>

#include "rsma_iov/errors.hpp"

namespace rsma_iov {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string num(double v) { return csv_number(v); }

json stats_json(const QuantityStats& s) { return {{"mean", s.mean}, {"variance", s.variance}}; }

json motion_json(const MotionStats& m) {
  return {{"heading", stats_json(m.heading)},
          {"velocity", stats_json(m.velocity)},
          {"acceleration", stats_json(m.acceleration)},
          {"steering", stats_json(m.steering)}};
}

double parse_number(const std::string& s, const std::string& what) {
  CsvTable t{{what}, {{s}}};
  return t.number(0, what);
}

// Latency index of a schedule: largest 1-based slot with psi > 0.5.
int last_slot(const std::vector<double>& psi) {
  for (int t = static_cast<int>(psi.size()); t > 0; --t)
    if (psi[t - 1] > 0.5) return t;
  return 0;
}

bool close(double a, double b, double rel) { return std::abs(a - b) <= rel * (1.0 + std::abs(b)); }

}  // namespace

RunOutput execute_run(const RunConfig& config) {
  config.validate();
  RunOutput out;
  out.scenario = config.build_scenario();
  const MpcConfig mpc = config.resolved_mpc();
  const DownlinkSpec base = config.downlink_template();
  out.bcd = bcd_run(out.scenario, base, mpc, config.bcd, config.scheme, config.sca);

  const auto& task = config.feel;
  const auto shards = synthetic_task(task.samples, task.dimension, config.followers,
                                     task.training.loss, config.seed, task.noise);
  out.smoothness = smoothness(shards, task.training.loss, task.training.weighted);
  FeelConfig training = task.training;
  training.workers = config.followers;
  out.training = run_training(training, shards, Eigen::VectorXd::Zero(task.dimension),
                              {out.bcd.comm}, out.scenario.dt, task.payload_bits());
  out.metrics = metrics_json(config, out);
  return out;
}

json metrics_json(const RunConfig& config, const RunOutput& out) {
  const auto& comm = out.bcd.comm;
  const auto& last = out.bcd.iterations.back();
  const auto motion = motion_stats(out.bcd.control);
  double min_clear = std::numeric_limits<double>::infinity();
  int collisions = 0;
  for (std::size_t t = 0; t < out.bcd.control.min_clearance.size(); ++t) {
    min_clear = std::min(min_clear, out.bcd.control.min_clearance[t]);
    collisions += out.bcd.control.collision[t] ? 1 : 0;
  }
  json m;
  m["scenario"] = config.scenario;
  m["scheme"] = to_string(config.scheme);
  m["followers"] = config.followers;
  m["antennas"] = config.radio.antennas;
  m["power_dbm"] = config.radio.power_dbm;
  m["weather_kappa"] = config.weather_kappa;
  m["steps"] = out.scenario.steps;
  m["dt"] = out.scenario.dt;
  m["seed"] = config.seed;
  m["latency_index"] = comm.latency_index;
  m["latency_s"] = comm.latency_s;
  m["payload_bits"] = config.feel.payload_bits();
  m["delivered_bits"] = comm.delivered_bits;
  m["psi"] = comm.final.psi;
  m["sum_rate_per_slot"] = sum_rate_per_slot(comm.final);
  m["sca"] = {{"status", to_string(comm.status)},
              {"iterations", static_cast<int>(comm.iterates.size()) - 1}};
  m["bcd"] = {{"iterations", static_cast<int>(out.bcd.iterations.size())},
              {"converged", out.bcd.converged},
              {"joint_objective", last.terms.total},
              {"latency_term", last.terms.latency},
              {"penalty_term", last.terms.penalty},
              {"control_term", last.terms.control}};
  m["motion"] = motion_json(motion);
  m["safety"] = {{"min_clearance", min_clear}, {"collision_steps", collisions}};
  const auto& tr = out.training;
  m["feel"] = {{"rounds", static_cast<int>(tr.size()) - 1},
               {"step_size", config.feel.training.step_size},
               {"smoothness", out.smoothness},
               {"initial_loss", tr.front().loss},
               {"final_loss", tr.back().loss},
               {"cumulative_latency_s", tr.back().cumulative_latency_s}};
  return m;
}

CsvTable trajectory_table(const PlatoonTrace& tr) {
  CsvTable t;
  t.header = {"t", "vehicle", "x", "y", "heading", "speed", "accel", "steer",
              "horizon_objective", "inner_iterations", "min_clearance", "collision"};
  for (int s = 0; s <= tr.steps(); ++s) {
    for (int i = 0; i < tr.vehicles(); ++i) {
      const auto& z = tr.states[s][i];
      std::vector<std::string> row{std::to_string(s), std::to_string(i), num(z.x), num(z.y),
                                   num(z.heading), num(z.speed)};
      if (s < tr.steps()) {
        const auto& u = tr.inputs[s][i];
        const bool solved = s < static_cast<int>(tr.horizon_objective.size());
        row.insert(row.end(), {num(u.accel), num(u.steer),
                               solved ? num(tr.horizon_objective[s]) : "",
                               solved ? std::to_string(tr.inner_iterations[s]) : "",
                               num(tr.min_clearance[s]), tr.collision[s] ? "1" : "0"});
      } else {
        row.insert(row.end(), 6, "");
      }
      t.rows.push_back(std::move(row));
    }
  }
  return t;
}

PlatoonTrace trace_from_table(const CsvTable& t) {
  PlatoonTrace tr;
  int vehicles = 0;
  for (std::size_t r = 0; r < t.rows.size() && t.number(r, "t") == 0.0; ++r) ++vehicles;
  if (vehicles == 0 || t.rows.size() % vehicles != 0) {
    throw Error(ErrorKind::kIo, "trajectory rows do not form whole steps");
  }
  const int steps = static_cast<int>(t.rows.size() / vehicles) - 1;
  const int c_obj = t.column("horizon_objective");
  const int c_it = t.column("inner_iterations");
  for (int s = 0; s <= steps; ++s) {
    std::vector<VehicleState> states;
    std::vector<ControlInput> inputs;
    for (int i = 0; i < vehicles; ++i) {
      const std::size_t r = static_cast<std::size_t>(s * vehicles + i);
      if (t.number(r, "t") != s || t.number(r, "vehicle") != i) {
        throw Error(ErrorKind::kIo, "trajectory row " + std::to_string(r + 1) + " is out of order");
      }
      states.push_back({t.number(r, "x"), t.number(r, "y"), t.number(r, "heading"),
                        t.number(r, "speed")});
      if (s < steps) inputs.push_back({t.number(r, "accel"), t.number(r, "steer")});
    }
    tr.states.push_back(std::move(states));
    if (s == steps) break;
    tr.inputs.push_back(std::move(inputs));
    const std::size_t r0 = static_cast<std::size_t>(s * vehicles);
    tr.min_clearance.push_back(t.number(r0, "min_clearance"));
    tr.collision.push_back(t.number(r0, "collision") != 0.0);
    if (!t.rows[r0][c_obj].empty()) {
      tr.horizon_objective.push_back(t.number(r0, "horizon_objective"));
      tr.inner_iterations.push_back(static_cast<int>(parse_number(t.rows[r0][c_it], "inner_iterations")));
      ++tr.mpc_steps;
    }
  }
  return tr;
}

CsvTable comm_trace_table(const ScaReport& r) {
  CsvTable t;
  t.header = {"iteration", "latency_bound", "objective", "max_violation", "scheme"};
  for (const auto& it : r.iterates) {
    t.rows.push_back({std::to_string(it.iteration), num(it.latency_bound), num(it.objective),
                      num(it.max_violation), to_string(r.scheme)});
  }
  return t;
}

CsvTable bcd_trace_table(const BcdResult& res) {
  CsvTable t;
  t.header = {"n", "joint_objective", "latency_index", "latency_term", "penalty_term",
              "control_cost", "gap", "comm_kept", "control_kept", "sca_iterations", "mpc_steps"};
  for (const auto& it : res.iterations) {
    t.rows.push_back({std::to_string(it.n), num(it.terms.total),
                      std::to_string(it.terms.latency_index), num(it.terms.latency),
                      num(it.terms.penalty), num(it.terms.control),
                      std::isfinite(it.gap) ? num(it.gap) : "inf", it.comm_kept ? "1" : "0",
                      it.control_kept ? "1" : "0", std::to_string(it.sca_iterations),
                      std::to_string(it.mpc_steps)});
  }
  return t;
}

CsvTable feel_loss_table(const std::vector<TrainingPoint>& curve, Scheme scheme) {
  CsvTable t;
  t.header = {"round", "cumulative_latency_s", "loss", "scheme"};
  for (const auto& p : curve) {
    t.rows.push_back({std::to_string(p.round), num(p.cumulative_latency_s), num(p.loss),
                      to_string(scheme)});
  }
  return t;
}

RunOutput run_to_dir(const RunConfig& config, const std::string& out_dir) {
  RunOutput out = execute_run(config);
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorKind::kIo, "cannot create " + out_dir + ": " + ec.message());
  const fs::path d(out_dir);
  write_json_file((d / kConfigFile).string(), config_to_json(config));
  write_json_file((d / kScenarioFile).string(), scenario_to_json(out.scenario));
  write_csv_file((d / kTrajectoryFile).string(), trajectory_table(out.bcd.control));
  write_csv_file((d / kCommTraceFile).string(), comm_trace_table(out.bcd.comm));
  write_csv_file((d / kBcdTraceFile).string(), bcd_trace_table(out.bcd));
  write_csv_file((d / kFeelLossFile).string(), feel_loss_table(out.training, config.scheme));
  write_json_file((d / kMetricsFile).string(), out.metrics);
  return out;
}

std::vector<std::string> validate_run_dir(const std::string& dir) {
  std::vector<std::string> problems;
  const fs::path d(dir);
  auto fail = [&](const std::string& file, const std::string& what) {
    problems.push_back(file + ": " + what);
  };
  // Each check runs on its own so one broken file does not hide the others.
  auto guarded = [&](const char* file, auto&& body) {
    try {
      body();
    } catch (const std::exception& e) {
      fail(file, e.what());
    }
  };

  RunConfig config;
  Scenario scenario;
  bool have_config = false, have_scenario = false;
  guarded(kConfigFile, [&] {
    config = load_config((d / kConfigFile).string());
    config.validate();
    have_config = true;
  });
  guarded(kScenarioFile, [&] {
    scenario = load_scenario((d / kScenarioFile).string());
    have_scenario = true;
    if (have_config && scenario_to_json(scenario) != scenario_to_json(config.build_scenario())) {
      fail(kScenarioFile, "does not match the scenario built from config.json");
    }
  });

  PlatoonTrace trace;
  bool have_trace = false;
  guarded(kTrajectoryFile, [&] {
    trace = trace_from_table(read_csv_file((d / kTrajectoryFile).string()));
    have_trace = true;
    if (!have_scenario || !have_config) return;
    if (trace.vehicles() != scenario.vehicles() || trace.steps() != scenario.steps) {
      fail(kTrajectoryFile, "does not cover the scenario's vehicles and steps");
      return;
    }
    const MpcConfig mpc = config.resolved_mpc();
    const std::string bad = check_trace(scenario, mpc, trace);
    if (!bad.empty()) fail(kTrajectoryFile, bad);
    for (int t = 0; t < trace.steps(); ++t) {
      if (trace.collision[t]) fail(kTrajectoryFile, "collision flag at step " + std::to_string(t));
      for (int i = 0; i < trace.vehicles(); ++i) {
        const Eigen::Vector4d next = step(trace.states[t][i], trace.inputs[t][i],
                                          scenario.geometry, scenario.dt, mpc.heading_model).vec();
        if ((next - trace.states[t + 1][i].vec()).cwiseAbs().maxCoeff() > 1e-9) {
          fail(kTrajectoryFile, "state of vehicle " + std::to_string(i) + " at step " +
                                    std::to_string(t + 1) + " does not follow the dynamics");
          return;
        }
      }
    }
  });

  guarded(kCommTraceFile, [&] {
    const auto t = read_csv_file((d / kCommTraceFile).string());
    if (t.rows.empty()) fail(kCommTraceFile, "no iterations");
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
      if (t.number(r, "iteration") != static_cast<double>(r)) fail(kCommTraceFile, "iteration numbers skip");
      if (t.number(r, "max_violation") > 1e-6) {
        fail(kCommTraceFile, "iterate " + std::to_string(r) + " violates the exact constraints");
      }
      if (r > 0 && t.number(r, "objective") > t.number(r - 1, "objective") + 1e-8) {
        fail(kCommTraceFile, "objective increases at iteration " + std::to_string(r));
      }
      if (have_config && t.rows[r][t.column("scheme")] != to_string(config.scheme)) {
        fail(kCommTraceFile, "scheme differs from config.json");
      }
    }
  });

  guarded(kBcdTraceFile, [&] {
    const auto t = read_csv_file((d / kBcdTraceFile).string());
    if (t.rows.empty()) fail(kBcdTraceFile, "no iterations");
    for (std::size_t r = 1; r < t.rows.size(); ++r) {
      const double prev = t.number(r - 1, "joint_objective");
      if (t.number(r, "joint_objective") > prev + 1e-6 * (1.0 + std::abs(prev))) {
        fail(kBcdTraceFile, "joint objective increases at n = " + std::to_string(r + 1));
      }
    }
  });

  guarded(kFeelLossFile, [&] {
    const auto t = read_csv_file((d / kFeelLossFile).string());
    if (t.rows.empty()) fail(kFeelLossFile, "no rounds");
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
      if (t.number(r, "round") != static_cast<double>(r)) fail(kFeelLossFile, "round numbers skip");
      if (!std::isfinite(t.number(r, "loss"))) fail(kFeelLossFile, "non-finite loss");
      if (r > 0 && t.number(r, "cumulative_latency_s") < t.number(r - 1, "cumulative_latency_s")) {
        fail(kFeelLossFile, "cumulative latency decreases");
      }
    }
    if (have_config && t.rows.size() != static_cast<std::size_t>(config.feel.training.rounds + 1)) {
      fail(kFeelLossFile, "round count differs from config.json");
    }
  });

  guarded(kMetricsFile, [&] {
    const json m = read_json_file((d / kMetricsFile).string());
    const std::vector<double> psi = m.at("psi").get<std::vector<double>>();
    const int index = m.at("latency_index").get<int>();
    if (last_slot(psi) != index) fail(kMetricsFile, "latency_index differs from the schedule");
    if (have_scenario && !close(m.at("latency_s").get<double>(), index * scenario.dt, 1e-12)) {
      fail(kMetricsFile, "latency_s differs from latency_index * dt");
    }
    if (m.at("delivered_bits").get<double>() < m.at("payload_bits").get<double>() * (1.0 - 1e-9)) {
      fail(kMetricsFile, "schedule does not deliver the payload");
    }
    for (double r : m.at("sum_rate_per_slot").get<std::vector<double>>())
      if (!(r >= 0.0)) fail(kMetricsFile, "negative sum rate");
    if (have_trace) {
      const json expect = motion_json(motion_stats(trace));
      for (const char* q : {"heading", "velocity", "acceleration", "steering"}) {
        for (const char* f : {"mean", "variance"}) {
          if (!close(m.at("motion").at(q).at(f).get<double>(), expect[q][f].get<double>(), 1e-12)) {
            fail(kMetricsFile, std::string("motion ") + q + " " + f + " differs from trajectory.csv");
          }
        }
      }
    }
  });
  return problems;
}

json compare_runs(const std::vector<std::string>& dirs) {
  if (dirs.size() < 2) throw Error(ErrorKind::kComparison, "compare needs at least two runs");
  std::vector<json> metrics;
  std::vector<PlatoonTrace> traces;
  for (const auto& dir : dirs) {
    metrics.push_back(read_json_file((fs::path(dir) / kMetricsFile).string()));
    traces.push_back(trace_from_table(read_csv_file((fs::path(dir) / kTrajectoryFile).string())));
  }
  for (std::size_t i = 1; i < metrics.size(); ++i) {
    for (const char* key : {"scenario", "steps", "dt", "weather_kappa", "antennas"}) {
      if (metrics[i].at(key) != metrics[0].at(key)) {
        throw Error(ErrorKind::kComparison, dirs[i] + " differs from " + dirs[0] + " in " + key);
      }
    }
  }

  json report;
  report["runs"] = json::array();
  // scheme -> K -> power -> latency (s)
  std::map<std::string, std::map<int, std::map<double, double>>> lat;
  for (std::size_t i = 0; i < metrics.size(); ++i) {
    const auto& m = metrics[i];
    const std::string scheme = m.at("scheme");
    const int K = m.at("followers");
    const double p = m.at("power_dbm");
    if (lat[scheme][K].count(p)) {
      throw Error(ErrorKind::kComparison, "two runs of " + scheme + " share K and power");
    }
    lat[scheme][K][p] = m.at("latency_s");
    report["runs"].push_back({{"dir", dirs[i]},
                              {"scheme", scheme},
                              {"followers", K},
                              {"power_dbm", p},
                              {"latency_index", m.at("latency_index")},
                              {"latency_s", m.at("latency_s")}});
  }

  // Latency tables; trends hold within one slot of slack in seconds.
  const double slack = 1e-5;
  json by_k = json::object(), by_p = json::object(), trends = json::object();
  for (const auto& [scheme, ks] : lat) {
    json rows_k = json::array(), rows_p = json::array();
    bool k_nondecreasing = true, p_nonincreasing = true;
    std::map<double, double> prev_k;  // power -> latency at the previous K
    for (const auto& [K, ps] : ks) {
      double prev_p = std::numeric_limits<double>::infinity();
      for (const auto& [p, l] : ps) {
        rows_k.push_back({{"followers", K}, {"power_dbm", p}, {"latency_s", l}});
        rows_p.push_back({{"power_dbm", p}, {"followers", K}, {"latency_s", l}});
        if (l > prev_p + slack) p_nonincreasing = false;
        prev_p = l;
        if (prev_k.count(p) && l < prev_k[p] - slack) k_nondecreasing = false;
        prev_k[p] = l;
      }
    }
    by_k[scheme] = rows_k;
    by_p[scheme] = rows_p;
    trends[scheme] = {{"latency_nondecreasing_in_followers", k_nondecreasing},
                      {"latency_nonincreasing_in_power", p_nonincreasing}};
  }
  report["latency_vs_followers"] = by_k;
  report["latency_vs_power"] = by_p;
  report["trends"] = trends;

  // Ordering rsma <= mulp <= noma wherever all three exist.
  json ordering = json::array();
  bool all_hold = true;
  if (lat.count("rsma") && lat.count("mulp") && lat.count("noma")) {
    for (const auto& [K, ps] : lat["rsma"]) {
      for (const auto& [p, l_r] : ps) {
        if (!lat["mulp"][K].count(p) || !lat["noma"][K].count(p)) continue;
        const double l_m = lat["mulp"][K][p], l_n = lat["noma"][K][p];
        const bool holds = l_m - l_r >= -slack && l_n - l_m >= -slack;
        all_hold = all_hold && holds;
        ordering.push_back({{"followers", K}, {"power_dbm", p}, {"rsma", l_r}, {"mulp", l_m},
                            {"noma", l_n}, {"holds", holds}});
      }
    }
  }
  report["ordering"] = ordering;
  report["ordering_holds"] = all_hold;

  // Variance gaps within each (K, power) group.
  json gaps = json::array();
  std::map<std::pair<int, double>, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < metrics.size(); ++i) {
    groups[{metrics[i].at("followers").get<int>(), metrics[i].at("power_dbm").get<double>()}]
        .push_back(i);
  }
  for (const auto& [key, members] : groups) {
    if (members.size() < 2) continue;
    std::size_t base = members[0];
    for (auto i : members)
      if (metrics[i].at("scheme") == "rsma") {
        base = i;
        break;
      }
    const auto base_stats = motion_stats(traces[base]);
    for (auto i : members) {
      if (i == base) continue;
      const auto s = motion_stats(traces[i]);
      json row = {{"baseline", dirs[base]}, {"run", dirs[i]}, {"scheme", metrics[i].at("scheme")},
                  {"followers", key.first}, {"power_dbm", key.second}};
      auto gap = [&](const char* name, double vi, double v0) {
        try {
          row[name] = variance_gap(vi, v0);
        } catch (const Error&) {
          row[name] = nullptr;  // baseline variance is zero
        }
      };
      gap("heading", s.heading.variance, base_stats.heading.variance);
      gap("velocity", s.velocity.variance, base_stats.velocity.variance);
      gap("acceleration", s.acceleration.variance, base_stats.acceleration.variance);
      gap("steering", s.steering.variance, base_stats.steering.variance);
      gaps.push_back(row);
    }
  }
  report["variance_gap"] = gaps;
  return report;
}

std::vector<std::string> sweep(const RunConfig& base, const SweepSpec& spec,
                               const std::string& out_dir) {
  if (spec.followers.empty() || spec.power_dbm.empty() || spec.schemes.empty()) {
    throw Error(ErrorKind::kInvalidConfig, "sweep needs at least one K, power and scheme");
  }
  if (spec.jobs < 1) throw Error(ErrorKind::kInvalidConfig, "sweep needs jobs >= 1");
  std::vector<RunConfig> configs;
  std::vector<std::string> dirs;
  for (int K : spec.followers) {
    for (double p : spec.power_dbm) {
      for (Scheme s : spec.schemes) {
        RunConfig c = base;
        c.followers = K;
        c.radio.followers = K;
        c.feel.training.workers = K;
        c.radio.power_dbm = p;
        c.scheme = s;
        c.validate();
        char name[96];
        std::snprintf(name, sizeof name, "K%d_P%g_%s", K, p, to_string(s));
        configs.push_back(c);
        dirs.push_back((fs::path(out_dir) / name).string());
      }
    }
  }
  // Worker pool over independent runs; each writes only its own directory.
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (std::size_t i; (i = next++) < configs.size();) {
      try {
        run_to_dir(configs[i], dirs[i]);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  const int n = std::min<int>(spec.jobs, static_cast<int>(configs.size()));
  std::vector<std::thread> pool;
  for (int j = 1; j < n; ++j) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
  if (dirs.size() >= 2) write_json_file((fs::path(out_dir) / "compare.json").string(), compare_runs(dirs));
  return dirs;
}

}  // namespace rsma_iov
