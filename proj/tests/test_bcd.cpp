#include <doctest.h>

#include <cmath>
#include <limits>

#include "rsma_iov/bcd.hpp"
#include "rsma_iov/config.hpp"
#include "rsma_iov/errors.hpp"

using namespace rsma_iov;

namespace {

// Short crossroad instance: 30 slots keep each BCD run to a few seconds.
RunConfig small(double q_h = 100.0) {
  RunConfig c;
  c.scenario = "s2";
  c.followers = 2;
  c.radio.followers = 2;
  c.scenario_params.steps = 30;
  c.q_h = q_h;
  return c;
}

BcdResult run(const RunConfig& c, Scheme scheme = Scheme::kRsma) {
  return bcd_run(c.build_scenario(), c.downlink_template(), c.resolved_mpc(), c.bcd, scheme,
                 c.sca);
}

bool nonincreasing(const BcdResult& r, double tol) {
  for (std::size_t i = 1; i < r.iterations.size(); ++i) {
    const double prev = r.iterations[i - 1].terms.total;
    if (r.iterations[i].terms.total > prev + tol * (1.0 + std::abs(prev))) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("bcd config validation") {
  BcdConfig c;
  CHECK_NOTHROW(c.validate());
  c.max_outer = 0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = BcdConfig{};
  c.stop_tol = 0.0;
  CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("penalty weights by hand") {
  DownlinkSpec spec;
  spec.slots = 2;
  spec.channels.assign(2, std::vector<ChannelVector>(2));
  Eigen::VectorXcd h(2);
  h << Complex(1e-3, 0), Complex(0, 2e-3);  // gain 5e-6
  for (auto& row : spec.channels)
    for (auto& c : row) c = ChannelVector(h);
  DownlinkVariables comm;
  comm.psi = {1.0, 0.0};
  comm.precoders.assign(2, PrecoderMatrix::zeros(2, 2));
  comm.precoders[1].priv[0] << Complex(0.5, 0), Complex(0, 0.5);  // ||p||^2 = 0.5
  const auto w = penalty_weights(spec, comm, 100.0);
  REQUIRE(w.size() == 3);
  CHECK(w[0] == std::vector<double>{0.0, 0.0});
  CHECK(w[1][0] == 0.0);
  CHECK(w[1][1] == doctest::Approx(100.0 * 0.25 * 5e-6));
  CHECK(w[2][1] == 0.0);

  comm.precoders[0] = PrecoderMatrix::zeros(2, 3);
  try {
    penalty_weights(spec, comm, 100.0);
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kConsistency);
  }
}

TEST_CASE("joint terms decompose and check consistency") {
  const RunConfig c = small();
  const auto sc = c.build_scenario();
  const auto mpc = c.resolved_mpc();
  const auto base = c.downlink_template();
  const auto trace = receding_run(sc, mpc);
  const auto spec = spec_from_trace(sc, mpc, trace, base);
  CHECK(spec.slots == 30);
  CHECK(spec.followers() == 2);
  CHECK(spec.payload_bits == base.payload_bits);
  CHECK(spec.epsilons == trace_epsilons(sc, mpc, trace));
  const auto comm = solve_downlink(spec, Scheme::kRsma);
  const auto w = JointWeights::from(base, mpc);
  const auto t = joint_terms(sc, mpc, base, comm.final, trace, w);
  CHECK(t.latency_index == comm.latency_index);
  CHECK(t.latency == doctest::Approx(base.q_t * comm.latency_index));
  CHECK(t.control == doctest::Approx(control_cost(sc, mpc, trace)).epsilon(1e-12));
  CHECK(t.penalty >= 0.0);
  CHECK(t.total == doctest::Approx(t.latency + t.penalty + t.control).epsilon(1e-14));
  CHECK(joint_objective(sc, mpc, base, comm.final, trace, w) == t.total);

  // Zeroing Q_h removes the penalty but nothing else.
  JointWeights w0 = w;
  w0.q_h = 0.0;
  const auto t0 = joint_terms(sc, mpc, base, comm.final, trace, w0);
  CHECK(t0.penalty == 0.0);
  CHECK(t0.control == t.control);

  DownlinkVariables shorter = comm.final;
  shorter.psi.pop_back();
  shorter.precoders.pop_back();
  try {
    joint_terms(sc, mpc, base, shorter, trace, w);
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kConsistency);
  }
}

TEST_CASE("single outer iteration") {
  RunConfig c = small();
  c.bcd.max_outer = 1;
  const auto r = run(c);
  REQUIRE(r.iterations.size() == 1);
  CHECK(std::isinf(r.iterations[0].gap));
  CHECK(!r.converged);

  c.bcd.max_outer = 10;
  c.bcd.stop_tol = std::numeric_limits<double>::infinity();
  const auto r2 = run(c);
  CHECK(r2.iterations.size() == 1);
  CHECK(r2.converged);
  CHECK(r2.iterations[0].terms.total == r.iterations[0].terms.total);
}

TEST_CASE("bcd converges monotonically and deterministically") {
  const RunConfig c = small();
  const auto a = run(c);
  CHECK(a.converged);
  CHECK(a.iterations.size() <= 10);
  CHECK(nonincreasing(a, 1e-6));
  const auto& last = a.iterations.back();
  CHECK(last.gap < c.bcd.stop_tol * (1.0 + std::abs(last.terms.total)));
  // The recorded pair is what the result holds.
  const auto w = JointWeights::from(c.downlink_template(), c.resolved_mpc());
  const auto t = joint_terms(c.build_scenario(), c.resolved_mpc(), c.downlink_template(),
                             a.comm.final, a.control, w);
  CHECK(t.total == doctest::Approx(last.terms.total).epsilon(1e-12));
  CHECK(check_trace(c.build_scenario(), c.resolved_mpc(), a.control).empty());

  const auto b = run(c);
  REQUIRE(a.iterations.size() == b.iterations.size());
  for (std::size_t i = 0; i < a.iterations.size(); ++i) {
    CHECK(std::abs(a.iterations[i].terms.total - b.iterations[i].terms.total) <= 1e-9);
  }
}

TEST_CASE("strong coupling stays monotone and feasible") {
  // Q_h large enough that the gain-error penalty competes with tracking.
  const RunConfig c = small(1e33);
  const auto r = run(c);
  CHECK(r.converged);
  CHECK(nonincreasing(r, 1e-6));
  CHECK(original_violation(r.spec, r.comm.final, Scheme::kRsma) <= 1e-6);
  CHECK(r.comm.delivered_bits >= c.feel.payload_bits() * (1.0 - 1e-9));
  // The coupled joint objective is no worse than pairing the uncoupled
  // trace with its own schedule.
  const auto sc = c.build_scenario();
  const auto mpc = c.resolved_mpc();
  const auto base = c.downlink_template();
  const auto comm0 = solve_downlink(spec_from_trace(sc, mpc, r.initial_control, base), Scheme::kRsma, c.sca);
  const auto j0 = joint_objective(sc, mpc, base, comm0.final, r.initial_control,
                                  JointWeights::from(base, mpc));
  CHECK(r.iterations.back().terms.total <= j0 + 1e-9 * (1.0 + j0));
}

TEST_CASE("bcd runs every scheme") {
  const RunConfig c = small();
  for (Scheme s : {Scheme::kMulp, Scheme::kNoma}) {
    const auto r = run(c, s);
    CHECK(r.comm.scheme == s);
    CHECK(nonincreasing(r, 1e-6));
    CHECK(r.comm.delivered_bits >= c.feel.payload_bits() * (1.0 - 1e-9));
  }
}
