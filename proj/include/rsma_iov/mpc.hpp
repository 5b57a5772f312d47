#pragma once

#include <limits>
#include <vector>

#include <Eigen/Core>

#include "rsma_iov/convex.hpp"
#include "rsma_iov/dynamics.hpp"
#include "rsma_iov/scenario.hpp"

namespace rsma_iov {

struct MpcConfig {
  int horizon = 10;                                   // zeta
  Eigen::Vector4d q_z{1.0, 100.0, 1.0, 0.1};          // x, y, heading, speed
  Eigen::Vector2d q_u{1.0, 1.0};
  Eigen::Vector2d q_du{1.0, 1.0};
  double q_h = 100.0;
  // Multiplier of the tracking weight on the last horizon state.
  double terminal_weight = 30.0;
  // State box; x is bounded by the simulated road segment. z_max is also
  // the normalizer of the motion coefficient.
  Eigen::Vector4d z_min{-200.0, 0.9, -0.5, 0.0};
  Eigen::Vector4d z_max{200.0, 10.2, 0.5, 30.0};
  Eigen::Vector2d u_min{-4.0, -0.3};
  Eigen::Vector2d u_max{4.0, 0.3};
  // Change between consecutive inputs, per step: 1 m/s^2 and 0.2 rad/s * dt.
  Eigen::Vector2d du_min{-1.0, -0.01};
  Eigen::Vector2d du_max{1.0, 0.01};
  int max_inner_iters = 10;  // M_p
  double tol = 1e-5;         // epsilon_p on the objective change
  double safety_margin = kDefaultSafetyMargin;
  // Initial trust region half-widths on the input change per re-linearization.
  Eigen::Vector2d trust{2.0, 0.1};
  // Pairs farther apart than this (disc-center gap minus radii) are skipped.
  double collision_horizon_m = 6.0;
  // |heading + slip| bound inside a no-change zone.
  double zone_heading_tol = 5e-5;
  // Exact-penalty weight on the shared slack of the linearized collision rows
  // (per metre of disc overlap).
  double collision_penalty = 1e6;
  HeadingModel heading_model = HeadingModel::kKinematic;
  convex::SolverOptions solver;

  void validate() const;
};

// Per-vehicle, per-step weight w with penalty w * eps^2, where w is
// Q_h ||p_k||^4 ||h_k||^2 from the communication block. Indexed [vehicle][t];
// the lead vehicle row is zero. Empty means no penalty.
using PenaltyWeights = std::vector<std::vector<double>>;

// Motion-coefficient deviation: exact next state minus the coast prediction
// (zero input) from the previous state.
Eigen::Vector4d motion_deviation(const VehicleState& prev, const ControlInput& u,
                                 const VehicleGeometry& geom, double dt,
                                 HeadingModel model = HeadingModel::kKinematic);

struct HorizonProblem {
  int t0 = 0;
  std::vector<VehicleState> current;        // per vehicle
  std::vector<ControlInput> previous_input;  // per vehicle, applied at t0 - 1
  // Linearization guess: inputs[i][j] for j = 0 .. horizon-1.
  std::vector<std::vector<ControlInput>> guess;
  Eigen::Vector2d trust{2.0, 0.1};
};

struct HorizonProgram {
  convex::Program program;
  std::vector<double> start;
  // rollout of the guess: states[i][j], j = 0 .. horizon
  std::vector<std::vector<VehicleState>> guess_states;
  int vehicles = 0;
  int horizon = 0;
  int slack_var = -1;  // shared nonnegative slack of the collision rows
  int input_var(int vehicle, int step, int component) const {
    return (vehicle * horizon + step) * 2 + component;
  }
};

HorizonProgram build_horizon_program(const Scenario& scenario, const MpcConfig& config,
                                     const HorizonProblem& problem,
                                     const PenaltyWeights& weights = {});

// Largest disc overlap (sum of radii minus center distance, or radius minus
// obstacle distance) over the exact rollout of a plan; 0 when separated.
double disc_overlap(const Scenario& scenario, const MpcConfig& config,
                    const std::vector<std::vector<VehicleState>>& states);

// Exact horizon cost of an input plan: rollout through the nonlinear model.
double horizon_cost(const Scenario& scenario, const MpcConfig& config,
                    const HorizonProblem& problem,
                    const std::vector<std::vector<ControlInput>>& inputs,
                    const PenaltyWeights& weights = {});

std::vector<std::vector<VehicleState>> rollout(
    const Scenario& scenario, const MpcConfig& config,
    const std::vector<VehicleState>& current,
    const std::vector<std::vector<ControlInput>>& inputs);

struct HorizonResult {
  std::vector<ControlInput> first;                     // applied inputs
  std::vector<std::vector<ControlInput>> inputs;       // converged plan
  std::vector<std::vector<VehicleState>> states;       // exact rollout
  double objective = 0.0;
  int inner_iterations = 0;
  bool converged = false;
  // Accepted exact merits (cost plus penalized disc overlap), nonincreasing.
  std::vector<double> objective_trace;
};

HorizonResult solve_horizon(const Scenario& scenario, const MpcConfig& config,
                            HorizonProblem problem, const PenaltyWeights& weights = {});

struct PlatoonTrace {
  // states[t][i], t = 0 .. steps; inputs[t][i], t = 0 .. steps-1
  std::vector<std::vector<VehicleState>> states;
  std::vector<std::vector<ControlInput>> inputs;
  std::vector<double> horizon_objective;  // one per MPC step
  std::vector<int> inner_iterations;
  std::vector<double> min_clearance;      // per step, smallest disc gap
  std::vector<bool> collision;            // exact rectangle test per step
  int mpc_steps = 0;                      // steps solved; the rest hold input

  int steps() const { return static_cast<int>(inputs.size()); }
  int vehicles() const { return states.empty() ? 0 : static_cast<int>(states[0].size()); }
};

// Closed loop over the scenario: MPC for t < steps - horizon, then the last
// emitted input is held. Throws collision if an exact overlap appears.
PlatoonTrace receding_run(const Scenario& scenario, const MpcConfig& config,
                          const PenaltyWeights& weights = {});

// Tracking, effort and rate cost over the full trace (no penalty term).
double control_cost(const Scenario& scenario, const MpcConfig& config,
                    const PlatoonTrace& trace);

// Motion coefficients eps[k][t] of followers k = 1..K (row k-1) per slot:
// slot t covers the transition from state t to state t+1.
std::vector<std::vector<double>> trace_epsilons(const Scenario& scenario,
                                                const MpcConfig& config,
                                                const PlatoonTrace& trace);

// Distances from the lead vehicle to each follower at the start of every
// slot, [k][t].
std::vector<std::vector<double>> trace_distances(const PlatoonTrace& trace);

// Bound, rate and safety check of an emitted trace; returns a description of
// the first problem or an empty string.
std::string check_trace(const Scenario& scenario, const MpcConfig& config,
                        const PlatoonTrace& trace);

}  // namespace rsma_iov
