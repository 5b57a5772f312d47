#include <cmath>
#include <random>

#include <Eigen/LU>

#include "doctest.h"
#include "rsma_iov/dynamics.hpp"
#include "rsma_iov/errors.hpp"

using namespace rsma_iov;

namespace {

const VehicleGeometry kCar{};  // 4.5 x 1.8, axles 1.125

// Direct point-in-oriented-rectangle test in the body frame.
bool in_rectangle(const Eigen::Vector2d& p, const VehicleState& z, const VehicleGeometry& g) {
  const Eigen::Vector2d d = p - Eigen::Vector2d(z.x, z.y);
  const double lon = std::cos(z.heading) * d.x() + std::sin(z.heading) * d.y();
  const double lat = -std::sin(z.heading) * d.x() + std::cos(z.heading) * d.y();
  return std::abs(lon) <= g.length / 2 && std::abs(lat) <= g.width / 2;
}

}  // namespace

TEST_CASE("side slip angle") {
  CHECK(side_slip(0.0, kCar) == 0.0);
  CHECK(side_slip(0.2, kCar) == doctest::Approx(std::atan(std::tan(0.2) / 2)));
  CHECK(side_slip(0.3, kCar) == doctest::Approx(std::atan(std::tan(0.3) * 1.125 / 2.25)).epsilon(1e-12));
  CHECK_THROWS_AS(side_slip(M_PI / 2, kCar), Error);
  CHECK_THROWS_AS(side_slip(-M_PI / 2, kCar), Error);
}

TEST_CASE("step: straight motion and acceleration") {
  const VehicleState z{0, 0, 0, 10};
  auto n = step(z, {0, 0}, kCar, 0.05);
  CHECK(n.x == doctest::Approx(0.5));
  CHECK(n.y == 0.0);
  CHECK(n.heading == 0.0);
  CHECK(n.speed == 10.0);
  n = step(z, {2, 0}, kCar, 0.05);
  CHECK(n.x == doctest::Approx(0.5));
  CHECK(n.speed == doctest::Approx(10.1));
}

TEST_CASE("step: steering") {
  const VehicleState z{0, 0, 0, 10};
  const double dt = 0.05;
  const double beta = std::atan(std::tan(0.1) / 2);
  CHECK(beta == doctest::Approx(0.04983).epsilon(1e-3));
  for (auto model : {HeadingModel::kKinematic, HeadingModel::kAsPrinted}) {
    const auto n = step(z, {0, 0.1}, kCar, dt, model);
    CHECK(n.x == doctest::Approx(10 * std::cos(beta) * dt));
    CHECK(n.y == doctest::Approx(10 * std::sin(beta) * dt));
    const double slip = model == HeadingModel::kAsPrinted ? beta : std::cos(beta);
    CHECK(n.heading == doctest::Approx(10 * slip * std::tan(0.1) / 2.25 * dt));
  }
  // the kinematic yaw rate follows the steering sign
  CHECK(step(z, {0, -0.1}, kCar, dt).heading < 0.0);
}

TEST_CASE("zero input preserves speed and heading") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-3, 3);
  for (int i = 0; i < 100; ++i) {
    const VehicleState z{u(rng) * 10, u(rng), u(rng), 5 + u(rng)};
    const auto n = step(z, {0, 0}, kCar, 0.05);
    CHECK(n.speed == z.speed);
    CHECK(n.heading == z.heading);
  }
}

TEST_CASE("step jacobian matches finite differences") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-0.25, 0.25);
  for (auto model : {HeadingModel::kKinematic, HeadingModel::kAsPrinted}) {
    for (int trial = 0; trial < 20; ++trial) {
      const VehicleState z{u(rng), u(rng), u(rng), 12 + 4 * u(rng)};
      const ControlInput in{4 * u(rng), u(rng)};
      const auto jac = step_jacobian(z, in, kCar, 0.05, model);
      const double h = 1e-6;
      for (int j = 0; j < 4; ++j) {
        Eigen::Vector4d e = Eigen::Vector4d::Zero();
        e[j] = h;
        const Eigen::Vector4d fd = (step(VehicleState::from(z.vec() + e), in, kCar, 0.05, model).vec() -
                         step(VehicleState::from(z.vec() - e), in, kCar, 0.05, model).vec()) / (2 * h);
        CHECK((fd - jac.wrt_state.col(j)).norm() < 1e-7);
      }
      for (int j = 0; j < 2; ++j) {
        Eigen::Vector2d e = Eigen::Vector2d::Zero();
        e[j] = h;
        const Eigen::Vector4d fd = (step(z, ControlInput::from(in.vec() + e), kCar, 0.05, model).vec() -
                         step(z, ControlInput::from(in.vec() - e), kCar, 0.05, model).vec()) / (2 * h);
        CHECK((fd - jac.wrt_input.col(j)).norm() < 1e-7);
      }
    }
  }
}

TEST_CASE("linearization error is second order") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int trial = 0; trial < 50; ++trial) {
    const VehicleState z{0, 0, 0.2 * u(rng), 14 + u(rng)};
    const ControlInput in{u(rng), 0.2 * u(rng)};
    const auto jac = step_jacobian(z, in, kCar, 0.05);
    const auto base = step(z, in, kCar, 0.05).vec();
    const Eigen::Vector4d dz(u(rng), u(rng), 0.2 * u(rng), u(rng));
    const Eigen::Vector2d du(u(rng), 0.1 * u(rng));
    auto err = [&](double s) {
      const auto exact = step(VehicleState::from(z.vec() + s * dz),
                              ControlInput::from(in.vec() + s * du), kCar, 0.05).vec();
      const Eigen::Vector4d lin = base + s * (jac.wrt_state * dz + jac.wrt_input * du);
      return (exact - lin).norm();
    };
    const double e1 = err(0.5);
    const double e2 = err(0.25);
    if (e1 > 1e-12) CHECK(e1 / e2 >= 3.0);
  }
}

TEST_CASE("rotation") {
  CHECK(rotation(0.0).isApprox(Eigen::Matrix2d::Identity()));
  Eigen::Matrix2d quarter;
  quarter << 0, -1, 1, 0;
  CHECK((rotation(M_PI / 2) - quarter).norm() < 1e-15);
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-10, 10);
  for (int i = 0; i < 100; ++i) {
    const double a = u(rng);
    CHECK((rotation(a) * rotation(-a) - Eigen::Matrix2d::Identity()).norm() < 1e-12);
    CHECK(rotation(a).determinant() == doctest::Approx(1.0));
    const Eigen::Vector2d x(u(rng), u(rng));
    CHECK(std::abs((rotation(a) * x).norm() - x.norm()) < 1e-12);
  }
}

TEST_CASE("vehicle polytope") {
  const auto p = polytope_of({0, 0, 0, 10}, kCar);
  for (double sx : {-1.0, 1.0}) {
    for (double sy : {-1.0, 1.0}) {
      CHECK(p.contains({sx * 2.25, sy * 0.9}, 1e-12));
      CHECK_FALSE(p.contains({sx * 2.26, sy * 0.9}));
      CHECK_FALSE(p.contains({sx * 2.25, sy * 0.91}));
    }
  }
  // translation equivariance
  const auto q = polytope_of({10, 0, 0, 10}, kCar);
  CHECK(q.A.isApprox(p.A));
  CHECK((q.b - (p.b + p.A * Eigen::Vector2d(10, 0))).norm() < 1e-12);
  CHECK(q.contains({12.25, 0.9}, 1e-12));
  CHECK_FALSE(q.contains({2.25, 0.0}));

  // quarter turn: long axis along y
  const auto r = polytope_of({0, 0, M_PI / 2, 0}, kCar);
  for (double sx : {-1.0, 1.0}) {
    for (double sy : {-1.0, 1.0}) {
      CHECK(r.contains({sx * 0.9, sy * 2.25}, 1e-9));
      CHECK_FALSE(r.contains({sx * 2.25, sy * 0.9}, 1e-9));
    }
  }
}

TEST_CASE("polytope membership matches the body-frame test") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(-4, 4);
  const VehicleState z{0.5, -0.3, 0.7, 0};
  const auto p = polytope_of(z, kCar);
  int inside = 0;
  for (int i = 0; i < 1000; ++i) {
    const Eigen::Vector2d pt(u(rng), u(rng));
    const bool want = in_rectangle(pt, z, kCar);
    CHECK(p.contains(pt) == want);
    inside += want;
  }
  CHECK(inside > 50);
}

TEST_CASE("rectangle intersection") {
  const auto a = polytope_of({0, 0, 0, 0}, kCar);
  CHECK(polytopes_intersect(a, a));
  const auto u0 = box_polytope(-0.5, 0.5, -0.5, 0.5);
  const auto u3 = box_polytope(2.5, 3.5, -0.5, 0.5);
  CHECK_FALSE(polytopes_intersect(u0, u3));
  const auto b = polytope_of({4.0, 0, 0, 0}, kCar);
  CHECK(polytopes_intersect(a, b));
  CHECK(polytopes_intersect(b, a));
  CHECK_FALSE(polytopes_intersect(a, polytope_of({4.6, 0, 0, 0}, kCar)));
  CHECK_THROWS_AS(box_polytope(1, 1, 0, 1), Error);
}

TEST_CASE("intersection agrees with a sampling oracle") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> pos(-5, 5);
  std::uniform_real_distribution<double> ang(-M_PI, M_PI);
  std::uniform_real_distribution<double> unit(0, 1);
  int overlaps = 0;
  for (int trial = 0; trial < 60; ++trial) {
    const VehicleState z1{0, 0, ang(rng), 0};
    const VehicleState z2{pos(rng), pos(rng) * 0.6, ang(rng), 0};
    const auto p1 = polytope_of(z1, kCar);
    const auto p2 = polytope_of(z2, kCar);
    const bool sat = polytopes_intersect(p1, p2);
    CHECK(sat == polytopes_intersect(p2, p1));
    // sample inside p1's bounding disc
    bool sampled = false;
    for (int i = 0; i < 10000 && !sampled; ++i) {
      const double r = 2.5 * std::sqrt(unit(rng));
      const double t = ang(rng);
      const Eigen::Vector2d pt(r * std::cos(t), r * std::sin(t));
      sampled = in_rectangle(pt, z1, kCar) && in_rectangle(pt, z2, kCar);
    }
    if (sampled) CHECK(sat);  // no false negatives
    if (sat && !sampled) {
      // SAT overlap missed by sampling must be thin; a tiny inflation of
      // the separation would be needed to see it
      const auto v2 = p2.vertices();
      double depth = -1e300;
      for (const auto& v : v2) depth = std::max(depth, -(p1.A * v - p1.b).maxCoeff());
      CHECK(depth < 0.1);
    }
    overlaps += sat;
  }
  CHECK(overlaps > 5);
}

TEST_CASE("disc cover") {
  CHECK(disc_radius(kCar, 0.0) == doctest::Approx(std::sqrt(1.125 * 1.125 + 0.9 * 0.9)));
  CHECK(disc_radius(kCar, 0.0) == doctest::Approx(1.4408).epsilon(1e-4));
  const auto d = disc_cover({0, 0, 0, 0}, kCar, 0.0);
  CHECK(d[0].center.isApprox(Eigen::Vector2d(1.125, 0)));
  CHECK(d[1].center.isApprox(Eigen::Vector2d(-1.125, 0)));

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> ang(-M_PI, M_PI);
  for (int trial = 0; trial < 50; ++trial) {
    const VehicleState z{ang(rng), ang(rng), ang(rng), 0};
    const auto discs = disc_cover(z, kCar, 0.0);
    for (const auto& v : polytope_of(z, kCar).vertices()) {
      double best = 1e300;
      for (const auto& c : discs) best = std::min(best, (v - c.center).norm() - c.radius);
      CHECK(best <= 1e-9);
    }
  }
}

TEST_CASE("disc separation implies no rectangle overlap") {
  std::mt19937_64 rng(33);
  std::uniform_real_distribution<double> pos(-6, 6);
  std::uniform_real_distribution<double> ang(-M_PI, M_PI);
  int separated = 0;
  for (int trial = 0; trial < 2000; ++trial) {
    const VehicleState z1{0, 0, ang(rng), 0};
    const VehicleState z2{pos(rng), pos(rng), ang(rng), 0};
    const auto d1 = disc_cover(z1, kCar, kDefaultSafetyMargin);
    const auto d2 = disc_cover(z2, kCar, kDefaultSafetyMargin);
    bool apart = true;
    for (const auto& a : d1)
      for (const auto& b : d2) apart = apart && (a.center - b.center).norm() > a.radius + b.radius;
    if (apart) {
      ++separated;
      CHECK_FALSE(polytopes_intersect(polytope_of(z1, kCar), polytope_of(z2, kCar)));
    }
  }
  CHECK(separated > 100);
}

TEST_CASE("point to polytope distance") {
  const auto box = box_polytope(0, 2, 0, 1);
  auto d = point_polytope_distance({3, 0.5}, box);
  CHECK(d.distance == doctest::Approx(1.0));
  CHECK(d.normal.isApprox(Eigen::Vector2d(1, 0)));
  d = point_polytope_distance({3, 2}, box);
  CHECK(d.distance == doctest::Approx(std::sqrt(2.0)));
  d = point_polytope_distance({1, 0.75}, box);
  CHECK(d.distance == doctest::Approx(-0.25));
}
