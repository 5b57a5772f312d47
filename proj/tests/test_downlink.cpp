#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "rsma_iov/downlink.hpp"
#include "rsma_iov/errors.hpp"
#include "oracles.hpp"

using namespace rsma_iov;
using oracle::grid_oracle;
using oracle::random_vec;

namespace {

// K followers at 10, 20, ... m over T slots.
DownlinkSpec ladder_spec(int K, int M, int T, double power_dbm = 25.0, double eps = 0.01) {
  RadioConfig radio;
  radio.antennas = M;
  radio.power_dbm = power_dbm;
  std::vector<std::vector<double>> d(K, std::vector<double>(T));
  for (int k = 0; k < K; ++k)
    for (int t = 0; t < T; ++t) d[k][t] = 10.0 * (k + 1) + 0.05 * t;
  return spec_from_distances(d, radio, eps);
}

bool monotone(const ScaReport& r, double tol) {
  for (std::size_t i = 1; i < r.iterates.size(); ++i)
    if (r.iterates[i].objective > r.iterates[i - 1].objective + tol) return false;
  return true;
}

}  // namespace

TEST_CASE("bilinear tangent") {
  auto m = minorant_bilinear(0.3, 7.0);
  CHECK(m(0.3, 7.0) == doctest::Approx(0.3 * 7.0));
  m = minorant_bilinear(0.0, 0.0);
  CHECK(m(0.7, 3.0) == 0.0);
  CHECK(m(0.0, 0.0) == 0.0);
  m = minorant_bilinear(1.0, 5.0);
  CHECK(m(0.5, 4.0) == doctest::Approx(1.5));

  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0, 1);
  for (int i = 0; i < 1000; ++i) {
    const double psi = u(rng), c0 = 20 * u(rng);
    CHECK(std::abs(minorant_bilinear(psi, c0)(psi, c0) - psi * c0) <= 1e-10);
  }
}

TEST_CASE("quadratic-over-linear minorant examples") {
  const ChannelVector h(Eigen::VectorXcd::Constant(1, 1.0));
  Eigen::VectorXcd pn(1);
  pn[0] = 1.0;
  const auto m = minorant_qol(pn, 1.0, h);
  Eigen::VectorXcd p(1);
  p[0] = 2.0;
  CHECK(m(p, 1.0) == doctest::Approx(3.0));
  CHECK(m(p, 1.0) <= std::norm(h.inner(p)) / 1.0);
  CHECK(m(pn, 1.0) == doctest::Approx(1.0));

  Eigen::VectorXcd h2(2);
  h2 << 1.0, 0.0;
  Eigen::VectorXcd orth(2);
  orth << 0.0, Complex(0.0, 1.0);
  const auto z = minorant_qol(orth, 2.0, ChannelVector(h2));
  std::mt19937_64 rng(1);
  for (int i = 0; i < 20; ++i) CHECK(std::abs(z(random_vec(rng, 2), 0.1 + i)) < 1e-15);

  CHECK_THROWS_AS(minorant_qol(pn, 0.0, h), Error);
  CHECK_THROWS_AS(minorant_qol(pn, -1.0, h), Error);
}

TEST_CASE("quadratic-over-linear minorant: tangency, lower bound, gradient") {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u(0.05, 5.0);
  for (int trial = 0; trial < 50; ++trial) {
    const ChannelVector h(random_vec(rng, 3));
    const Eigen::VectorXcd pn = random_vec(rng, 3);
    const double xin = u(rng);
    const auto m = minorant_qol(pn, xin, h);
    const double exact = std::norm(h.inner(pn)) / xin;
    CHECK(std::abs(m(pn, xin) - exact) <= 1e-10 * std::max(1.0, exact));

    for (int s = 0; s < 20; ++s) {
      const Eigen::VectorXcd p = random_vec(rng, 3, 2.0);
      const double xi = u(rng);
      CHECK(m(p, xi) <= std::norm(h.inner(p)) / xi + 1e-9);
    }

    // gradient of |h^H p|^2 / xi by central differences over (Re p, Im p, xi)
    auto f = [&](const Eigen::VectorXcd& p, double xi) { return std::norm(h.inner(p)) / xi; };
    const double step = 1e-6;
    for (int j = 0; j < 3; ++j) {
      for (int part = 0; part < 2; ++part) {
        Eigen::VectorXcd e = Eigen::VectorXcd::Zero(3);
        e[j] = part == 0 ? Complex(step, 0) : Complex(0, step);
        const double fd = (f(pn + e, xin) - f(pn - e, xin)) / (2 * step);
        const double coef = part == 0 ? m.re[j] : m.im[j];
        CHECK(std::abs(fd - coef) <= 1e-5 * std::max(1.0, std::abs(fd)));
      }
    }
    const double fd = (f(pn, xin + step) - f(pn, xin - step)) / (2 * step);
    CHECK(std::abs(fd - m.xi_coef) <= 1e-5 * std::max(1.0, std::abs(fd)));
  }
}

TEST_CASE("lower bound holds on 1000 random samples") {
  std::mt19937_64 rng(1000);
  std::uniform_real_distribution<double> u(1e-3, 10.0);
  const ChannelVector h(random_vec(rng, 4));
  const auto m = minorant_qol(random_vec(rng, 4), 0.7, h);
  int violations = 0;
  for (int i = 0; i < 1000; ++i) {
    const Eigen::VectorXcd p = random_vec(rng, 4, 3.0);
    const double xi = u(rng);
    violations += m(p, xi) > std::norm(h.inner(p)) / xi + 1e-9;
  }
  CHECK(violations == 0);
}

TEST_CASE("scheme names") {
  CHECK(parse_scheme("rsma") == Scheme::kRsma);
  CHECK(parse_scheme("mulp") == Scheme::kMulp);
  CHECK(parse_scheme("noma") == Scheme::kNoma);
  CHECK(std::string(to_string(Scheme::kNoma)) == "noma");
  CHECK_THROWS_AS(parse_scheme("tdma"), Error);
}

TEST_CASE("SIC order: strongest first, ties by index") {
  RadioConfig radio;
  radio.antennas = 2;
  const std::vector<ChannelVector> ch{path_loss_channel(30, radio), path_loss_channel(10, radio),
                                      path_loss_channel(30, radio), path_loss_channel(20, radio)};
  CHECK(sic_order(ch) == std::vector<int>{1, 3, 0, 2});
}

TEST_CASE("initial point") {
  SUBCASE("single follower, large power") {
    auto spec = ladder_spec(1, 1, 3, 40.0);
    const auto v = init_feasible(spec);
    for (int t = 0; t < 3; ++t) {
      CHECK(v.psi[t] == 1.0);
      CHECK(v.private_rate[t][0] == 0.0);
      CHECK(v.common_rate[t] > 0.0);
      CHECK(v.precoders[t].total_power() <= spec.radio.transmit_power_w() * (1 + 1e-9));
    }
    CHECK(original_violation(spec, v) <= 1e-9);
  }
  SUBCASE("common rate equals the achieved common rate") {
    auto spec = ladder_spec(3, 4, 4);
    const auto v = init_feasible(spec);
    for (int t = 0; t < 4; ++t) {
      std::vector<ChannelVector> ch;
      for (int k = 0; k < 3; ++k) ch.push_back(split_csit(spec.channels[k][t], 0.01).estimate);
      const double rc = common_rate(ch, v.precoders[t], spec.noise_w(), spec.radio.bandwidth_hz);
      CHECK(v.common_rate[t] == doctest::Approx(rc).epsilon(1e-9));
    }
    CHECK(original_violation(spec, v) <= 1e-9);
    CHECK(original_violation(spec, init_feasible(spec, Scheme::kNoma), Scheme::kNoma) <= 1e-9);
  }
  SUBCASE("no QoS requirement") {
    auto spec = ladder_spec(2, 2, 3, -20.0);
    spec.qos_bps = 0.0;
    CHECK_NOTHROW(init_feasible(spec));
  }
  SUBCASE("noise dominated with QoS") {
    auto spec = ladder_spec(2, 2, 3, -120.0);
    try {
      init_feasible(spec);
      FAIL("expected qos-infeasible");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::kQosInfeasible);
      CHECK(std::string(e.what()).find("slot") != std::string::npos);
    }
  }
}

TEST_CASE("subproblem structure") {
  for (int K : {1, 2, 3}) {
    for (int T : {1, 4}) {
      auto spec = ladder_spec(K, 2, T);
      spec.payload_bits = 1e5;  // carried by the initial point
      const auto v = init_feasible(spec);
      const auto sub = build_subproblem(spec, v);
      const int oracle = T * (3 + 9 * K) + 1;
      CHECK(static_cast<int>(sub.program.constraints().size()) == oracle);
      // the expansion point is feasible for its own program
      CHECK(sub.program.max_violation(sub.start) <= 1e-9);
    }
  }
  auto spec = ladder_spec(2, 2, 3);
  spec.q_h = 0.0;
  const auto sub = build_subproblem(spec, init_feasible(spec));
  CHECK(sub.program.objective(sub.start) == doctest::Approx(sub.start[sub.layout.latency]));

  auto bad = init_feasible(spec);
  bad.psi.pop_back();
  CHECK_THROWS_AS(build_subproblem(spec, bad), Error);
}

TEST_CASE("schedule rounding") {
  auto spec = ladder_spec(1, 1, 2);
  spec.payload_bits = 1e6;
  DownlinkVariables v;
  v.omega = {0, 0};
  v.common_rate = {2e7, 2e7};  // 1e6 bits per slot
  v.psi = {1.0, 0.0};
  auto r = round_schedule(spec, v);
  CHECK(r.psi == std::vector<double>{1.0, 0.0});
  CHECK(r.latency_bound == 1.0);

  v.psi = {0.9, 0.1};
  CHECK(round_schedule(spec, v).psi == std::vector<double>{1.0, 0.0});

  v.common_rate = {1e7, 1e7};  // B0/2 per slot
  v.psi = {0.4, 0.4};
  r = round_schedule(spec, v);
  CHECK(r.psi == std::vector<double>{1.0, 1.0});
  double bits = 0.0;
  for (int t = 0; t < 2; ++t) bits += r.psi[t] * r.common_rate[t] * spec.dt;
  CHECK(bits >= spec.payload_bits);

  v.common_rate = {1e7, 0.5e7};
  try {
    round_schedule(spec, v);
    FAIL("expected payload-infeasible");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kPayloadInfeasible);
  }
}

TEST_CASE("SCA with infinite tolerance stops after one subproblem") {
  auto spec = ladder_spec(2, 2, 6);
  spec.payload_bits = 2e6;
  auto opt = default_sca_options();
  opt.tol = std::numeric_limits<double>::infinity();
  const auto r = sca_solve(spec, opt);
  REQUIRE_FALSE(r.iterates.empty());
  CHECK(r.iterates.back().iteration == 1);
  CHECK(r.status == ScaStatus::kConverged);
}

TEST_CASE("SCA trace properties") {
  auto spec = ladder_spec(3, 4, 12);
  spec.payload_bits = 6e6;
  for (auto scheme : {Scheme::kRsma, Scheme::kMulp, Scheme::kNoma}) {
    CAPTURE(to_string(scheme));
    const auto r = solve_downlink(spec, scheme);
    CHECK(r.status == ScaStatus::kConverged);
    CHECK(monotone(r, 1e-8));
    for (const auto& it : r.iterates) CHECK(it.max_violation <= 1e-6);
    CHECK(r.delivered_bits >= spec.payload_bits);
    CHECK(r.latency_index >= 1);
    CHECK(r.latency_s == doctest::Approx(r.latency_index * spec.dt));
    for (int t = 0; t < spec.slots; ++t)
      CHECK(r.final.precoders[t].total_power() <= spec.radio.transmit_power_w() * (1 + 1e-7));
  }
}

TEST_CASE("baselines are restrictions of RSMA") {
  SUBCASE("overloaded: K=3, M=2") {
    auto spec = ladder_spec(3, 2, 10);
    spec.payload_bits = 4e6;
    const auto rsma = sca_solve(spec);
    const auto mulp = baseline_mulp(spec);
    const auto noma = baseline_noma(spec);
    CHECK(rsma.iterates.back().objective <= mulp.iterates.back().objective + 1e-5);
    CHECK(rsma.iterates.back().objective <= noma.iterates.back().objective + 1e-5);
    CHECK(rsma.latency_index <= mulp.latency_index);
    CHECK(mulp.latency_index <= noma.latency_index);
  }
  SUBCASE("single follower") {
    auto spec = ladder_spec(1, 2, 6);
    spec.payload_bits = 3e6;
    const auto rsma = sca_solve(spec);
    const auto mulp = baseline_mulp(spec);
    const auto noma = baseline_noma(spec);
    CHECK(mulp.iterates.back().objective == doctest::Approx(rsma.iterates.back().objective).epsilon(1e-4));
    CHECK(rsma.latency_index <= noma.latency_index);
  }
}

TEST_CASE("unicast baseline delivers the payload to every follower") {
  auto spec = ladder_spec(2, 2, 10);
  spec.payload_bits = 3e6;
  const auto r = baseline_noma(spec);
  for (int k = 0; k < 2; ++k) {
    double bits = 0.0;
    for (int t = 0; t < spec.slots; ++t)
      bits += r.final.unicast_psi[t][k] * r.final.private_rate[t][k] * spec.dt;
    CHECK(bits >= spec.payload_bits);
  }
}

TEST_CASE("payload larger than the horizon can carry") {
  auto spec = ladder_spec(2, 2, 2);
  spec.payload_bits = 1e9;
  try {
    sca_solve(spec);
    FAIL("expected payload-infeasible");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kPayloadInfeasible);
  }
}


TEST_CASE("micro instance matches the grid oracle") {
  RadioConfig radio;
  radio.antennas = 1;
  for (double b0 : {3e6, 7e6}) {
    CAPTURE(b0);
    auto spec = spec_from_distances({{10.0, 10.0}}, radio, 0.0);
    spec.payload_bits = b0;
    const auto grid = grid_oracle(spec);
    REQUIRE(grid.slot_index > 0);
    const auto r = sca_solve(spec);
    CHECK(r.latency_index == grid.slot_index);
    CHECK(r.iterates.back().objective <= grid.objective + 0.02);
  }
}
