#pragma once

#include <vector>

#include "rsma_iov/downlink.hpp"
#include "rsma_iov/mpc.hpp"
#include "rsma_iov/scenario.hpp"

namespace rsma_iov {

struct BcdConfig {
  int max_outer = 10;     // N_c
  // Stop when |J_n - J_{n-1}| < stop_tol * (1 + |J_n|). Infinity stops after
  // the first outer iteration.
  double stop_tol = 1e-5;

  void validate() const;
};

// Weights of the joint objective.
struct JointWeights {
  double q_t = 1.0;
  double q_h = 100.0;
  Eigen::Vector4d q_z = Eigen::Vector4d::Zero();
  Eigen::Vector2d q_u = Eigen::Vector2d::Zero();
  Eigen::Vector2d q_du = Eigen::Vector2d::Zero();

  static JointWeights from(const DownlinkSpec& spec, const MpcConfig& mpc);
};

// Communication spec whose channels come from the trace's LV-FV distances
// and whose epsilons come from the trace's motion coefficients. Radio,
// payload, QoS and weights are copied from `base`; slots and dt from the
// scenario.
DownlinkSpec spec_from_trace(const Scenario& scenario, const MpcConfig& config,
                             const PlatoonTrace& trace, const DownlinkSpec& base);

// Control-block penalty weights w_k(t) = q_h ||p_k(t)||^4 ||h_k(t)||^2 for
// followers (rows 1..K); the lead vehicle row is zero.
PenaltyWeights penalty_weights(const DownlinkSpec& spec, const DownlinkVariables& comm,
                               double q_h);

struct JointTerms {
  int latency_index = 0;   // max_t psi(t) t over the rounded schedule
  double latency = 0.0;    // q_t * latency_index
  double penalty = 0.0;    // q_h * sum Gamma-hat, counted once
  double control = 0.0;    // tracking + effort + rate
  double total = 0.0;
};

// Joint objective of a communication solution and a control trace. Channels
// and epsilons are recomputed from the trace. Throws consistency when the
// two do not describe the same slots and followers.
JointTerms joint_terms(const Scenario& scenario, const MpcConfig& config,
                       const DownlinkSpec& base, const DownlinkVariables& comm,
                       const PlatoonTrace& trace, const JointWeights& weights);

double joint_objective(const Scenario& scenario, const MpcConfig& config,
                       const DownlinkSpec& base, const DownlinkVariables& comm,
                       const PlatoonTrace& trace, const JointWeights& weights);

struct BcdIteration {
  int n = 0;
  JointTerms terms;
  double gap = 0.0;        // |J_n - J_{n-1}|, infinite at n = 1
  bool comm_kept = false;  // new SCA solution was worse; previous one kept
  bool control_kept = false;  // new trace was worse; previous one kept
  int sca_iterations = 0;     // SCA iterations spent in this outer iteration
  int mpc_steps = 0;
};

struct BcdResult {
  std::vector<BcdIteration> iterations;
  bool converged = false;
  ScaReport comm;          // of the best joint state
  PlatoonTrace control;
  DownlinkSpec spec;       // channels and epsilons of `control`
  PlatoonTrace initial_control;  // MPC run without penalty
};

// Alternates the communication block (SCA on channels of the incumbent
// trace) and the control block (receding-horizon MPC with the penalty of the
// incumbent precoders). A new trace whose channels break the incumbent
// schedule is paired with a schedule re-solved on those channels. A block
// result replaces the incumbent only if the joint objective does not
// increase, so the recorded objective is nonincreasing and every recorded
// pair is feasible.
BcdResult bcd_run(const Scenario& scenario, const DownlinkSpec& base,
                  const MpcConfig& mpc, const BcdConfig& bcd, Scheme scheme = Scheme::kRsma,
                  const ScaOptions& sca = default_sca_options());

}  // namespace rsma_iov
