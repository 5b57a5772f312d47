#include <doctest.h>

#include "rsma_iov/errors.hpp"
#include "rsma_iov/metrics.hpp"

using namespace rsma_iov;

TEST_CASE("variance gap") {
  CHECK(variance_gap(0.5, 0.5) == 0.0);
  CHECK(variance_gap(1.0, 0.5) == doctest::Approx(1.0));
  CHECK(variance_gap(0.1843 * (1 + 0.0030), 0.1843) == doctest::Approx(0.0030).epsilon(1e-12));
  CHECK(variance_gap(0.25, 0.5) == doctest::Approx(0.5));
  try {
    variance_gap(1.0, 0.0);
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kUndefinedBaseline);
  }
}

TEST_CASE("population statistics") {
  const auto s = stats_of({1.0, 2.0, 3.0, 4.0});
  CHECK(s.mean == 2.5);
  CHECK(s.variance == doctest::Approx(1.25));
  CHECK(stats_of({7.0}).variance == 0.0);
}

TEST_CASE("motion statistics pool all vehicles") {
  PlatoonTrace tr;
  tr.states = {{{0, 0, 0.0, 10}, {0, 0, 0.2, 12}}, {{0, 0, 0.1, 11}, {0, 0, 0.3, 13}}};
  tr.inputs = {{{1.0, 0.01}, {-1.0, 0.03}}};
  const auto m = motion_stats(tr);
  CHECK(m.velocity.mean == doctest::Approx(11.5));
  CHECK(m.velocity.variance == doctest::Approx(1.25));
  CHECK(m.heading.mean == doctest::Approx(0.15));
  CHECK(m.acceleration.mean == 0.0);
  CHECK(m.acceleration.variance == doctest::Approx(1.0));
  CHECK(m.steering.variance == doctest::Approx(1e-4));

  const auto same = motion_gap(m, m);
  CHECK(same.heading == 0.0);
  CHECK(same.velocity == 0.0);
  CHECK(same.acceleration == 0.0);
  CHECK(same.steering == 0.0);
}

TEST_CASE("sum rate per slot") {
  DownlinkVariables v;
  v.psi = {1.0, 0.0};
  v.common_rate = {3e6, 1e6};
  v.private_rate = {{1e5, 2e5}, {5e5, 5e5}};
  const auto r = sum_rate_per_slot(v);
  REQUIRE(r.size() == 2);
  CHECK(r[0] == doctest::Approx(3.3e6));
  CHECK(r[1] == doctest::Approx(2e6));
}
