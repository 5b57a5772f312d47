#include "rsma_iov/bcd.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "rsma_iov/errors.hpp"

namespace rsma_iov {

namespace {

int last_slot(const std::vector<double>& psi) {
  for (int t = static_cast<int>(psi.size()); t > 0; --t)
    if (psi[t - 1] > 0.5) return t;
  return 0;
}

// Feasibility slack for re-using an older communication solution under new
// channels.
constexpr double kReuseViolation = 1e-7;

}  // namespace

void BcdConfig::validate() const {
  if (max_outer < 1) throw Error(ErrorKind::kInvalidConfig, "BCD needs max_outer >= 1");
  if (!(stop_tol > 0.0)) throw Error(ErrorKind::kInvalidConfig, "BCD stop_tol must be positive");
}

JointWeights JointWeights::from(const DownlinkSpec& spec, const MpcConfig& mpc) {
  JointWeights w;
  w.q_t = spec.q_t;
  w.q_h = spec.q_h;
  w.q_z = mpc.q_z;
  w.q_u = mpc.q_u;
  w.q_du = mpc.q_du;
  return w;
}

DownlinkSpec spec_from_trace(const Scenario& sc, const MpcConfig& cfg, const PlatoonTrace& tr,
                             const DownlinkSpec& base) {
  if (tr.vehicles() != sc.vehicles() || tr.steps() != sc.steps) {
    throw Error(ErrorKind::kConsistency, "trace does not cover the scenario");
  }
  DownlinkSpec spec = spec_from_distances(trace_distances(tr), base.radio);
  spec.dt = sc.dt;
  spec.payload_bits = base.payload_bits;
  spec.qos_bps = base.qos_bps;
  spec.q_t = base.q_t;
  spec.q_h = base.q_h;
  spec.epsilons = trace_epsilons(sc, cfg, tr);
  return spec;
}

PenaltyWeights penalty_weights(const DownlinkSpec& spec, const DownlinkVariables& comm,
                               double q_h) {
  const int K = spec.followers();
  if (comm.slots() != spec.slots) {
    throw Error(ErrorKind::kConsistency, "communication schedule length differs from the spec");
  }
  PenaltyWeights w(K + 1, std::vector<double>(spec.slots, 0.0));
  for (int t = 0; t < spec.slots; ++t) {
    const auto& p = comm.precoders[t];
    if (p.followers() != K) {
      throw Error(ErrorKind::kConsistency,
                  "slot " + std::to_string(t + 1) + " has a precoder count that differs from K");
    }
    for (int k = 0; k < K; ++k) {
      const double p2 = p.priv[k].squaredNorm();
      w[k + 1][t] = q_h * p2 * p2 * spec.channels[k][t].gain();
    }
  }
  return w;
}

JointTerms joint_terms(const Scenario& sc, const MpcConfig& cfg, const DownlinkSpec& base,
                       const DownlinkVariables& comm, const PlatoonTrace& tr,
                       const JointWeights& w) {
  if (comm.slots() != tr.steps()) {
    throw Error(ErrorKind::kConsistency,
                "communication covers " + std::to_string(comm.slots()) + " slots, trace " +
                    std::to_string(tr.steps()) + " steps");
  }
  const auto spec = spec_from_trace(sc, cfg, tr, base);
  JointTerms out;
  out.latency_index = last_slot(comm.psi);
  out.latency = w.q_t * out.latency_index;
  double gamma = 0.0;
  for (int t = 0; t < spec.slots; ++t) {
    const auto& p = comm.precoders[t];
    if (p.followers() != spec.followers()) {
      throw Error(ErrorKind::kConsistency,
                  "slot " + std::to_string(t + 1) + " has " + std::to_string(p.followers()) +
                      " private precoders for " + std::to_string(spec.followers()) +
                      " followers");
    }
    for (int k = 0; k < spec.followers(); ++k) {
      const double e = spec.epsilons[k][t];
      const double p2 = p.priv[k].squaredNorm();
      gamma += e * e * p2 * p2 * spec.channels[k][t].gain();
    }
  }
  out.penalty = w.q_h * gamma;
  MpcConfig weights = cfg;
  weights.q_z = w.q_z;
  weights.q_u = w.q_u;
  weights.q_du = w.q_du;
  out.control = control_cost(sc, weights, tr);
  out.total = out.latency + out.penalty + out.control;
  return out;
}

double joint_objective(const Scenario& sc, const MpcConfig& cfg, const DownlinkSpec& base,
                       const DownlinkVariables& comm, const PlatoonTrace& tr,
                       const JointWeights& w) {
  return joint_terms(sc, cfg, base, comm, tr, w).total;
}

BcdResult bcd_run(const Scenario& sc, const DownlinkSpec& base, const MpcConfig& mpc,
                  const BcdConfig& bcd, Scheme scheme, const ScaOptions& sca) {
  bcd.validate();
  mpc.validate();
  const JointWeights weights = JointWeights::from(base, mpc);

  BcdResult res;
  res.initial_control = receding_run(sc, mpc);
  // Incumbent pair. The schedule is always feasible on the channels of the
  // incumbent trace, so its joint value is well defined.
  PlatoonTrace control = res.initial_control;
  ScaReport comm;
  JointTerms best;
  bool have_comm = false;
  bool comm_fresh = false;  // comm was solved on the channels of `control`
  double prev_total = std::numeric_limits<double>::infinity();

  for (int n = 1; n <= bcd.max_outer; ++n) {
    BcdIteration it;
    it.n = n;
    try {
      // communication block on the channels of the incumbent trace
      if (!comm_fresh) {
        const auto spec = spec_from_trace(sc, mpc, control, base);
        ScaReport fresh = solve_downlink(spec, scheme, sca);
        it.sca_iterations += static_cast<int>(fresh.iterates.size()) - 1;
        const auto terms = joint_terms(sc, mpc, base, fresh.final, control, weights);
        if (!have_comm || terms.total <= best.total) {
          comm = std::move(fresh);
          best = terms;
        } else {
          it.comm_kept = true;
        }
        have_comm = true;
        comm_fresh = true;
      }

      // control block with the penalty of the incumbent precoders
      const auto spec = spec_from_trace(sc, mpc, control, base);
      const auto w = penalty_weights(spec, comm.final, base.q_h);
      PlatoonTrace next = receding_run(sc, mpc, w);
      it.mpc_steps = next.mpc_steps;
      const auto next_spec = spec_from_trace(sc, mpc, next, base);
      ScaReport pair_comm = comm;
      bool resolved = false;
      if (original_violation(next_spec, comm.final, scheme) > kReuseViolation) {
        // The schedule no longer fits the new channels; pair the new trace
        // with a schedule solved on them.
        pair_comm = solve_downlink(next_spec, scheme, sca);
        it.sca_iterations += static_cast<int>(pair_comm.iterates.size()) - 1;
        resolved = true;
      }
      const auto terms = joint_terms(sc, mpc, base, pair_comm.final, next, weights);
      if (terms.total <= best.total) {
        control = std::move(next);
        comm = std::move(pair_comm);
        best = terms;
        comm_fresh = resolved;
      } else {
        it.control_kept = true;
      }
      it.terms = best;
    } catch (const Error& e) {
      throw Error(e.kind(), "BCD iteration " + std::to_string(n) + ": " + e.what());
    }
    it.gap = std::abs(prev_total - it.terms.total);
    prev_total = it.terms.total;
    res.iterations.push_back(it);
    if (std::isinf(bcd.stop_tol) || it.gap < bcd.stop_tol * (1.0 + std::abs(it.terms.total))) {
      res.converged = true;
      break;
    }
  }
  res.comm = comm;
  res.control = control;
  res.spec = spec_from_trace(sc, mpc, control, base);
  return res;
}

}  // namespace rsma_iov
