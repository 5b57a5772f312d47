#include "rsma_iov/mpc.hpp"

#include <algorithm>
#include <limits>
#include <cmath>
#include <string>

#include "rsma_iov/channel.hpp"
#include "rsma_iov/errors.hpp"

namespace rsma_iov {

namespace {

using convex::AffineForm;
using Plan = std::vector<std::vector<ControlInput>>;

constexpr double kInf = std::numeric_limits<double>::infinity();

// Sensitivity of a rolled-out state to the horizon inputs of one vehicle:
// z_j(u) ~ base_j + S_j (u - u_guess), S_j is 4 x 2H.
struct Linearization {
  std::vector<VehicleState> states;     // j = 0 .. H
  std::vector<Eigen::MatrixXd> sens;    // j = 0 .. H
  std::vector<StepJacobian> jac;        // j = 0 .. H-1
};

Linearization linearize(const VehicleState& z0, const std::vector<ControlInput>& guess,
                        const Scenario& sc, const MpcConfig& cfg) {
  const int H = cfg.horizon;
  Linearization lin;
  lin.states.push_back(z0);
  lin.sens.push_back(Eigen::MatrixXd::Zero(4, 2 * H));
  for (int j = 0; j < H; ++j) {
    const auto jac = step_jacobian(lin.states[j], guess[j], sc.geometry, sc.dt, cfg.heading_model);
    Eigen::MatrixXd next = jac.wrt_state * lin.sens[j];
    next.middleCols(2 * j, 2) += jac.wrt_input;
    lin.jac.push_back(jac);
    lin.sens.push_back(std::move(next));
    lin.states.push_back(step(lin.states[j], guess[j], sc.geometry, sc.dt, cfg.heading_model));
  }
  return lin;
}

// Affine form of row vector `row` (length 2H) times (u - u_guess) plus `base`.
AffineForm delta_form(const Eigen::RowVectorXd& row, double base, int first_var,
                      const std::vector<ControlInput>& guess) {
  AffineForm f(base);
  for (int c = 0; c < row.size(); ++c) {
    if (row[c] == 0.0) continue;
    f.add(first_var + c, row[c]);
    f.shift(-row[c] * guess[c / 2].vec()[c % 2]);
  }
  return f;
}

double accel_bound(const Scenario& sc, const MpcConfig& cfg, int t, bool upper) {
  const double lim = sc.accel_limit[std::min<std::size_t>(t, sc.accel_limit.size() - 1)];
  return upper ? std::min(cfg.u_max[0], lim) : std::max(cfg.u_min[0], -lim);
}

ControlInput clamp_input(const Scenario& sc, const MpcConfig& cfg, int t, ControlInput u) {
  u.accel = std::clamp(u.accel, accel_bound(sc, cfg, t, false), accel_bound(sc, cfg, t, true));
  u.steer = std::clamp(u.steer, cfg.u_min[1], cfg.u_max[1]);
  return u;
}

bool in_zone(const Scenario& sc, double x, double slack) {
  return sc.no_change_zone && x >= sc.no_change_zone->first - slack &&
         x <= sc.no_change_zone->second + slack;
}

double weight_at(const PenaltyWeights& w, int vehicle, int t) {
  if (w.empty() || vehicle >= static_cast<int>(w.size()) || w[vehicle].empty()) return 0.0;
  const auto& row = w[vehicle];
  return row[std::min<std::size_t>(t, row.size() - 1)];
}

bool any_collision(const Scenario& sc, const std::vector<VehicleState>& states) {
  std::vector<Polytope> bodies;
  for (const auto& z : states) bodies.push_back(polytope_of(z, sc.geometry));
  for (std::size_t i = 0; i < bodies.size(); ++i) {
    for (const auto& ob : sc.obstacles)
      if (polytopes_intersect(bodies[i], ob)) return true;
    for (std::size_t l = i + 1; l < bodies.size(); ++l)
      if (polytopes_intersect(bodies[i], bodies[l])) return true;
  }
  return false;
}

double min_disc_gap(const Scenario& sc, const MpcConfig& cfg,
                    const std::vector<VehicleState>& states) {
  double best = kInf;
  for (std::size_t i = 0; i < states.size(); ++i) {
    const auto di = disc_cover(states[i], sc.geometry, cfg.safety_margin);
    for (const auto& a : di) {
      for (const auto& ob : sc.obstacles)
        best = std::min(best, point_polytope_distance(a.center, ob).distance - a.radius);
      for (std::size_t l = i + 1; l < states.size(); ++l)
        for (const auto& b : disc_cover(states[l], sc.geometry, cfg.safety_margin))
          best = std::min(best, (a.center - b.center).norm() - a.radius - b.radius);
    }
  }
  return best;
}

// Disc center and its Jacobian with respect to the state.
struct DiscLin {
  Eigen::Vector2d center;
  Eigen::Matrix<double, 2, 4> jac;
};

DiscLin disc_lin(const VehicleState& z, double offset) {
  DiscLin d;
  const double c = std::cos(z.heading), s = std::sin(z.heading);
  d.center = Eigen::Vector2d(z.x + offset * c, z.y + offset * s);
  d.jac << 1, 0, -offset * s, 0, 0, 1, offset * c, 0;
  return d;
}

// Supporting half-plane of an obstacle for a disc center. Outside, it is the
// projection plane. Inside, the nearest face normal would often point back
// against the direction of travel and make consecutive horizon steps
// contradict each other, so the shallowest lateral face is used instead.
PointDistance obstacle_plane(const Eigen::Vector2d& p, const Polytope& ob) {
  PointDistance pd = point_polytope_distance(p, ob);
  if (pd.distance >= 0.0) return pd;
  double best = kInf;
  for (int k = 0; k < 4; ++k) {
    const Eigen::Vector2d n = ob.A.row(k).transpose();
    if (std::abs(n.y()) < std::abs(n.x())) continue;
    const double depth = (ob.b[k] - n.dot(p)) / n.norm();
    if (depth < best) {
      best = depth;
      pd.normal = n.normalized();
      pd.closest = p + depth * pd.normal;
      pd.distance = -depth;
    }
  }
  return pd;
}

}  // namespace

void MpcConfig::validate() const {
  if (horizon < 1 || max_inner_iters < 1 || !(tol > 0.0)) {
    throw Error(ErrorKind::kInvalidConfig, "MPC needs horizon >= 1, M_p >= 1, tol > 0");
  }
  if ((q_z.array() < 0).any() || (q_u.array() < 0).any() || (q_du.array() < 0).any() ||
      q_h < 0 || !(terminal_weight >= 0.0)) {
    throw Error(ErrorKind::kInvalidConfig, "MPC weights must be nonnegative");
  }
  if ((z_min.array() > z_max.array()).any() || (u_min.array() > u_max.array()).any() ||
      (du_min.array() > du_max.array()).any()) {
    throw Error(ErrorKind::kInvalidConfig, "MPC bounds must be ordered");
  }
  if (z_max.norm() == 0.0) throw Error(ErrorKind::kInvalidConfig, "z_max has zero norm");
  if (!(collision_penalty > 0.0)) {
    throw Error(ErrorKind::kInvalidConfig, "collision penalty must be positive");
  }
}

double disc_overlap(const Scenario& sc, const MpcConfig& cfg,
                    const std::vector<std::vector<VehicleState>>& states) {
  const std::size_t steps = states.empty() ? 0 : states[0].size();
  double worst = 0.0;
  std::vector<VehicleState> snap(states.size());
  for (std::size_t j = 1; j < steps; ++j) {
    for (std::size_t i = 0; i < states.size(); ++i) snap[i] = states[i][j];
    worst = std::max(worst, -min_disc_gap(sc, cfg, snap));
  }
  return worst;
}

Eigen::Vector4d motion_deviation(const VehicleState& prev, const ControlInput& u,
                                 const VehicleGeometry& geom, double dt, HeadingModel model) {
  return step(prev, u, geom, dt, model).vec() - step(prev, {}, geom, dt, model).vec();
}

std::vector<std::vector<VehicleState>> rollout(const Scenario& sc, const MpcConfig& cfg,
                                               const std::vector<VehicleState>& current,
                                               const Plan& inputs) {
  std::vector<std::vector<VehicleState>> out(current.size());
  for (std::size_t i = 0; i < current.size(); ++i) {
    out[i].push_back(current[i]);
    for (const auto& u : inputs[i])
      out[i].push_back(step(out[i].back(), u, sc.geometry, sc.dt, cfg.heading_model));
  }
  return out;
}

double horizon_cost(const Scenario& sc, const MpcConfig& cfg, const HorizonProblem& pb,
                    const Plan& inputs, const PenaltyWeights& weights) {
  const auto states = rollout(sc, cfg, pb.current, inputs);
  const double norm2 = 4.0 * cfg.z_max.squaredNorm();
  double cost = 0.0;
  for (std::size_t i = 0; i < states.size(); ++i) {
    for (int j = 0; j < cfg.horizon; ++j) {
      const Eigen::Vector4d e = states[i][j + 1].vec() - sc.reference(i, pb.t0 + j + 1).vec();
      const double tw = j + 1 == cfg.horizon ? cfg.terminal_weight : 1.0;
      cost += tw * (cfg.q_z.array() * e.array().square()).sum();
      const Eigen::Vector2d u = inputs[i][j].vec();
      const Eigen::Vector2d du = u - (j == 0 ? pb.previous_input[i].vec() : inputs[i][j - 1].vec());
      cost += (cfg.q_u.array() * u.array().square()).sum();
      cost += (cfg.q_du.array() * du.array().square()).sum();
      const double w = weight_at(weights, i, pb.t0 + j);
      if (w > 0.0) {
        cost += w * motion_deviation(states[i][j], inputs[i][j], sc.geometry, sc.dt,
                                     cfg.heading_model).squaredNorm() / norm2;
      }
    }
  }
  return cost;
}

HorizonProgram build_horizon_program(const Scenario& sc, const MpcConfig& cfg,
                                     const HorizonProblem& pb, const PenaltyWeights& weights) {
  const int N = static_cast<int>(pb.current.size());
  const int H = cfg.horizon;
  if (N != sc.vehicles() || static_cast<int>(pb.guess.size()) != N ||
      static_cast<int>(pb.previous_input.size()) != N) {
    throw Error(ErrorKind::kInvalidConfig, "horizon problem does not match the scenario");
  }
  for (const auto& g : pb.guess) {
    if (static_cast<int>(g.size()) != H) {
      throw Error(ErrorKind::kInvalidConfig, "guess length differs from the horizon");
    }
  }

  HorizonProgram hp;
  hp.vehicles = N;
  hp.horizon = H;
  auto& prog = hp.program;
  for (int i = 0; i < N; ++i) {
    for (int j = 0; j < H; ++j) {
      const auto& g = pb.guess[i][j];
      const int t = pb.t0 + j;
      const std::string tag = std::to_string(i) + "_" + std::to_string(j);
      const double alo = accel_bound(sc, cfg, t, false), ahi = accel_bound(sc, cfg, t, true);
      prog.add_variable("a" + tag, std::max(alo, g.accel - pb.trust[0]),
                        std::min(ahi, g.accel + pb.trust[0]));
      prog.add_variable("d" + tag, std::max(cfg.u_min[1], g.steer - pb.trust[1]),
                        std::min(cfg.u_max[1], g.steer + pb.trust[1]));
      hp.start.push_back(g.accel);
      hp.start.push_back(g.steer);
    }
  }

  hp.slack_var = prog.add_variable("collision_slack", 0.0, kInf);
  prog.add_objective_linear(hp.slack_var, cfg.collision_penalty);
  double slack_start = 0.0;

  std::vector<Linearization> lin;
  for (int i = 0; i < N; ++i) lin.push_back(linearize(pb.current[i], pb.guess[i], sc, cfg));
  for (int i = 0; i < N; ++i) hp.guess_states.push_back(lin[i].states);

  auto state_form = [&](int i, int j, int c) {
    return delta_form(lin[i].sens[j].row(c), lin[i].states[j].vec()[c], hp.input_var(i, 0, 0),
                      pb.guess[i]);
  };

  const double norm2 = 4.0 * cfg.z_max.squaredNorm();
  for (int i = 0; i < N; ++i) {
    for (int j = 0; j < H; ++j) {
      // tracking of state j+1
      const auto& ref = sc.reference(i, pb.t0 + j + 1).vec();
      for (int c = 0; c < 4; ++c) {
        if (cfg.q_z[c] == 0.0) continue;
        AffineForm f = state_form(i, j + 1, c);
        f.shift(-ref[c]);
        const double s = std::sqrt(cfg.q_z[c] * (j + 1 == H ? cfg.terminal_weight : 1.0));
        for (auto& v : f.coef) v *= s;
        f.constant *= s;
        prog.add_objective_square(std::move(f));
      }
      for (int c = 0; c < 2; ++c) {
        const int var = hp.input_var(i, j, c);
        if (cfg.q_u[c] > 0.0) prog.add_objective_square(AffineForm().add(var, std::sqrt(cfg.q_u[c])));
        const double s = std::sqrt(cfg.q_du[c]);
        AffineForm du;
        du.add(var, 1.0);
        if (j == 0) du.shift(-pb.previous_input[i].vec()[c]);
        else du.add(hp.input_var(i, j - 1, c), -1.0);
        if (s > 0.0) {
          AffineForm sq = du;
          for (auto& v : sq.coef) v *= s;
          sq.constant *= s;
          prog.add_objective_square(std::move(sq));
        }
        AffineForm up = du;
        up.shift(-cfg.du_max[c]);
        prog.add_linear(up, "rate_hi" + std::to_string(i));
        AffineForm lo = du;
        for (auto& v : lo.coef) v = -v;
        lo.constant = -lo.constant + cfg.du_min[c];
        prog.add_linear(lo, "rate_lo" + std::to_string(i));
      }
      // motion-coefficient penalty: e = step(z, u) - step(z, 0)
      const double w = weight_at(weights, i, pb.t0 + j);
      if (w > 0.0) {
        const auto& z = lin[i].states[j];
        const Eigen::Vector4d e0 = motion_deviation(z, pb.guess[i][j], sc.geometry, sc.dt,
                                                    cfg.heading_model);
        const auto coast = step_jacobian(z, {}, sc.geometry, sc.dt, cfg.heading_model);
        Eigen::MatrixXd de = (lin[i].jac[j].wrt_state - coast.wrt_state) * lin[i].sens[j];
        de.middleCols(2 * j, 2) += lin[i].jac[j].wrt_input;
        const double s = std::sqrt(w / norm2);
        for (int c = 0; c < 4; ++c) {
          AffineForm f = delta_form(s * de.row(c), s * e0[c], hp.input_var(i, 0, 0), pb.guess[i]);
          if (!f.index.empty()) prog.add_objective_square(std::move(f));
        }
      }
      // state box on j+1
      for (int c = 0; c < 4; ++c) {
        AffineForm f = state_form(i, j + 1, c);
        if (std::isfinite(cfg.z_max[c])) {
          AffineForm up = f;
          up.shift(-cfg.z_max[c]);
          prog.add_linear(std::move(up), "zmax" + std::to_string(c));
        }
        if (std::isfinite(cfg.z_min[c])) {
          AffineForm lo = f;
          for (auto& v : lo.coef) v = -v;
          lo.constant = cfg.z_min[c] - lo.constant;
          prog.add_linear(std::move(lo), "zmin" + std::to_string(c));
        }
      }
      // no lateral motion inside the solid-line zone: |heading + slip| <= tol
      if (in_zone(sc, lin[i].states[j].x, 1.0)) {
        const auto& g = pb.guess[i][j];
        const double beta = side_slip(g.steer, sc.geometry);
        const double r = (sc.geometry.rear_axle / sc.geometry.wheelbase());
        const double t = std::tan(g.steer);
        const double dbeta = r * (1 + t * t) / (1 + r * r * t * t);
        AffineForm f = state_form(i, j, 2);
        f.shift(beta - dbeta * g.steer);
        f.add(hp.input_var(i, j, 1), dbeta);
        AffineForm up = f;
        up.shift(-cfg.zone_heading_tol);
        prog.add_linear(std::move(up), "zone_hi");
        for (auto& v : f.coef) v = -v;
        f.constant = -f.constant - cfg.zone_heading_tol;
        prog.add_linear(std::move(f), "zone_lo");
      }
    }
  }

  // Disc separation, linearized at the guess rollout.
  const double off = disc_offset(sc.geometry);
  const double rad = disc_radius(sc.geometry, cfg.safety_margin);
  for (int j = 1; j <= H; ++j) {
    for (int i = 0; i < N; ++i) {
      for (double si : {1.0, -1.0}) {
        const auto a = disc_lin(lin[i].states[j], si * off);
        const Eigen::MatrixXd ja = a.jac * lin[i].sens[j];
        for (const auto& ob : sc.obstacles) {
          const auto pd = obstacle_plane(a.center, ob);
          if (pd.distance - rad > cfg.collision_horizon_m) continue;
          // rad - n^T (c(u) - closest) <= 0
          const Eigen::RowVectorXd row = -pd.normal.transpose() * ja;
          AffineForm f = delta_form(row, rad - pd.normal.dot(a.center - pd.closest),
                                    hp.input_var(i, 0, 0), pb.guess[i]);
          slack_start = std::max(slack_start, rad - pd.normal.dot(a.center - pd.closest));
          f.add(hp.slack_var, -1.0);
          prog.add_linear(std::move(f), "obstacle" + std::to_string(i));
        }
        for (int l = i + 1; l < N; ++l) {
          for (double sl : {1.0, -1.0}) {
            const auto b = disc_lin(lin[l].states[j], sl * off);
            Eigen::Vector2d d = a.center - b.center;
            const double dist = d.norm();
            if (dist - 2 * rad > cfg.collision_horizon_m) continue;
            const Eigen::Vector2d n = dist > 1e-9 ? Eigen::Vector2d(d / dist) : Eigen::Vector2d(1, 0);
            // 2 rad - n^T (c_a(u) - c_b(u)) <= 0
            AffineForm f = delta_form(-n.transpose() * ja, 2 * rad - n.dot(d),
                                      hp.input_var(i, 0, 0), pb.guess[i]);
            const AffineForm g = delta_form(n.transpose() * (b.jac * lin[l].sens[j]), 0.0,
                                            hp.input_var(l, 0, 0), pb.guess[l]);
            for (std::size_t q = 0; q < g.index.size(); ++q) f.add(g.index[q], g.coef[q]);
            f.shift(g.constant);
            slack_start = std::max(slack_start, 2 * rad - n.dot(d));
            f.add(hp.slack_var, -1.0);
            prog.add_linear(std::move(f), "pair" + std::to_string(i) + "_" + std::to_string(l));
          }
        }
      }
    }
  }
  hp.start.push_back(slack_start + 1.0);
  return hp;
}

HorizonResult solve_horizon(const Scenario& sc, const MpcConfig& cfg, HorizonProblem pb,
                            const PenaltyWeights& weights) {
  const int N = static_cast<int>(pb.current.size());
  const int H = cfg.horizon;
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < H; ++j) pb.guess[i][j] = clamp_input(sc, cfg, pb.t0 + j, pb.guess[i][j]);

  HorizonResult res;
  auto merit = [&](const Plan& plan, bool& safe) {
    const auto states = rollout(sc, cfg, pb.current, plan);
    safe = true;
    for (int j = 1; j <= H && safe; ++j) {
      std::vector<VehicleState> snap;
      for (int i = 0; i < N; ++i) snap.push_back(states[i][j]);
      safe = !any_collision(sc, snap);
    }
    return horizon_cost(sc, cfg, pb, plan, weights) +
           cfg.collision_penalty * disc_overlap(sc, cfg, states);
  };
  Plan best = pb.guess;
  bool best_safe = false;
  double best_merit = merit(best, best_safe);
  res.objective_trace.push_back(best_merit);

  Eigen::Vector2d trust = pb.trust;
  for (int m = 1; m <= cfg.max_inner_iters; ++m) {
    res.inner_iterations = m;
    HorizonProblem cur = pb;
    cur.guess = best;
    cur.trust = trust;
    const auto hp = build_horizon_program(sc, cfg, cur, weights);
    const auto sol = convex::solve(hp.program, hp.start, cfg.solver);
    bool accepted = false;
    if (sol.status != convex::SolveStatus::kInfeasible &&
        hp.program.max_violation(sol.x) <= cfg.solver.feas_tol) {
      Plan cand = best;
      for (int i = 0; i < N; ++i)
        for (int j = 0; j < H; ++j)
          cand[i][j] = {sol.x[hp.input_var(i, j, 0)], sol.x[hp.input_var(i, j, 1)]};
      bool safe = false;
      const double value = merit(cand, safe);
      if ((safe || !best_safe) && value <= best_merit + 1e-12) {
        const double gain = best_merit - value;
        best = std::move(cand);
        best_merit = value;
        best_safe = safe;
        accepted = true;
        res.objective_trace.push_back(value);
        if (safe && gain < cfg.tol) {
          res.converged = true;
          break;
        }
      }
    }
    if (!accepted) {
      trust *= 0.5;
      if (trust[1] < 1e-6) break;
    }
  }
  if (!best_safe) {
    throw Error(ErrorKind::kCollision,
                "no collision-free plan found at step " + std::to_string(pb.t0));
  }
  res.inputs = best;
  res.objective = horizon_cost(sc, cfg, pb, best, weights);
  res.states = rollout(sc, cfg, pb.current, best);
  for (int i = 0; i < N; ++i) res.first.push_back(best[i][0]);
  return res;
}

PlatoonTrace receding_run(const Scenario& sc, const MpcConfig& cfg,
                          const PenaltyWeights& weights) {
  sc.validate();
  cfg.validate();
  const int N = sc.vehicles();
  const int T = sc.steps;
  const int H = cfg.horizon;
  PlatoonTrace tr;
  tr.states.push_back(sc.initial_states);
  std::vector<ControlInput> prev(N);
  Plan plan(N, std::vector<ControlInput>(H));
  for (int t = 0; t < T; ++t) {
    std::vector<ControlInput> u(N);
    if (t < T - H) {
      HorizonProblem pb;
      pb.t0 = t;
      pb.current = tr.states.back();
      pb.previous_input = prev;
      pb.guess = plan;
      pb.trust = cfg.trust;
      HorizonResult res;
      try {
        res = solve_horizon(sc, cfg, pb, weights);
      } catch (const Error& e) {
        throw Error(e.kind(), "MPC step " + std::to_string(t) + ": " + e.what());
      }
      u = res.first;
      tr.horizon_objective.push_back(res.objective);
      tr.inner_iterations.push_back(res.inner_iterations);
      ++tr.mpc_steps;
      // shifted warm start
      for (int i = 0; i < N; ++i) {
        std::rotate(res.inputs[i].begin(), res.inputs[i].begin() + 1, res.inputs[i].end());
        res.inputs[i].back() = res.inputs[i][H - 2 >= 0 ? H - 2 : 0];
      }
      plan = std::move(res.inputs);
    } else {
      for (int i = 0; i < N; ++i) u[i] = clamp_input(sc, cfg, t, prev[i]);
    }
    std::vector<VehicleState> next(N);
    for (int i = 0; i < N; ++i)
      next[i] = step(tr.states.back()[i], u[i], sc.geometry, sc.dt, cfg.heading_model);
    const bool hit = any_collision(sc, next);
    tr.collision.push_back(hit);
    tr.min_clearance.push_back(min_disc_gap(sc, cfg, next));
    tr.inputs.push_back(u);
    tr.states.push_back(std::move(next));
    prev = u;
    if (hit) {
      throw Error(ErrorKind::kCollision, "vehicles overlap after step " + std::to_string(t));
    }
  }
  return tr;
}

double control_cost(const Scenario& sc, const MpcConfig& cfg, const PlatoonTrace& tr) {
  double cost = 0.0;
  for (int t = 0; t < tr.steps(); ++t) {
    for (int i = 0; i < tr.vehicles(); ++i) {
      const Eigen::Vector4d e = tr.states[t + 1][i].vec() - sc.reference(i, t + 1).vec();
      cost += (cfg.q_z.array() * e.array().square()).sum();
      const Eigen::Vector2d u = tr.inputs[t][i].vec();
      const Eigen::Vector2d du = u - (t == 0 ? Eigen::Vector2d::Zero() : tr.inputs[t - 1][i].vec());
      cost += (cfg.q_u.array() * u.array().square()).sum();
      cost += (cfg.q_du.array() * du.array().square()).sum();
    }
  }
  return cost;
}

std::vector<std::vector<double>> trace_epsilons(const Scenario& sc, const MpcConfig& cfg,
                                                const PlatoonTrace& tr) {
  const VehicleState zmax = VehicleState::from(cfg.z_max);
  std::vector<std::vector<double>> eps(tr.vehicles() - 1, std::vector<double>(tr.steps()));
  for (int k = 1; k < tr.vehicles(); ++k) {
    for (int t = 0; t < tr.steps(); ++t) {
      const auto coast = step(tr.states[t][k], {}, sc.geometry, sc.dt, cfg.heading_model);
      eps[k - 1][t] = motion_coefficient(tr.states[t + 1][k], coast, zmax).epsilon;
    }
  }
  return eps;
}

std::vector<std::vector<double>> trace_distances(const PlatoonTrace& tr) {
  std::vector<std::vector<double>> d(tr.vehicles() - 1, std::vector<double>(tr.steps()));
  for (int k = 1; k < tr.vehicles(); ++k) {
    for (int t = 0; t < tr.steps(); ++t) {
      const auto& a = tr.states[t][0];
      const auto& b = tr.states[t][k];
      d[k - 1][t] = std::hypot(a.x - b.x, a.y - b.y);
    }
  }
  return d;
}

std::string check_trace(const Scenario& sc, const MpcConfig& cfg, const PlatoonTrace& tr) {
  for (int t = 0; t < tr.steps(); ++t) {
    const std::string at = " at step " + std::to_string(t);
    if (any_collision(sc, tr.states[t + 1])) return "collision" + at;
    for (int i = 0; i < tr.vehicles(); ++i) {
      const auto& u = tr.inputs[t][i];
      const std::string who = " of vehicle " + std::to_string(i) + at;
      if (u.accel < accel_bound(sc, cfg, t, false) || u.accel > accel_bound(sc, cfg, t, true))
        return "acceleration bound" + who;
      if (u.steer < cfg.u_min[1] || u.steer > cfg.u_max[1]) return "steering bound" + who;
      const Eigen::Vector2d du = u.vec() - (t == 0 ? Eigen::Vector2d::Zero() : tr.inputs[t - 1][i].vec());
      if ((du.array() > cfg.du_max.array()).any() || (du.array() < cfg.du_min.array()).any())
        return "input rate" + who;
      const Eigen::Vector4d z = tr.states[t + 1][i].vec();
      if ((z.array() > cfg.z_max.array()).any() || (z.array() < cfg.z_min.array()).any())
        return "state bound" + who;
    }
  }
  return {};
}

}  // namespace rsma_iov
