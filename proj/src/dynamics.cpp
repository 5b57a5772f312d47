#include "rsma_iov/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <Eigen/Dense>

#include "rsma_iov/errors.hpp"

namespace rsma_iov {

namespace {

double slip_ratio(const VehicleGeometry& geom) {
  return geom.rear_axle / geom.wheelbase();
}

// d(beta)/d(steer)
double side_slip_derivative(double steer, const VehicleGeometry& geom) {
  const double r = slip_ratio(geom);
  const double t = std::tan(steer);
  const double sec2 = 1.0 + t * t;
  return r * sec2 / (1.0 + r * r * t * t);
}

}  // namespace

void VehicleGeometry::validate() const {
  if (!(length > 0.0 && width > 0.0 && front_axle > 0.0 && rear_axle > 0.0) ||
      front_axle + rear_axle > length) {
    throw Error(ErrorKind::kInvalidConfig,
                "vehicle geometry must be positive with lf + lr <= length");
  }
}

double side_slip(double steer, const VehicleGeometry& geom) {
  if (!(std::abs(steer) < std::numbers::pi / 2.0)) {
    throw Error(ErrorKind::kSingularSteering, "steering angle at +/-pi/2");
  }
  return std::atan(std::tan(steer) * slip_ratio(geom));
}

VehicleState step(const VehicleState& z, const ControlInput& u,
                  const VehicleGeometry& geom, double dt, HeadingModel model) {
  const double beta = side_slip(u.steer, geom);
  VehicleState next;
  next.x = z.x + z.speed * std::cos(z.heading + beta) * dt;
  next.y = z.y + z.speed * std::sin(z.heading + beta) * dt;
  const double slip_term =
      model == HeadingModel::kAsPrinted ? beta : std::cos(beta);
  next.heading =
      z.heading + z.speed * slip_term * std::tan(u.steer) / geom.wheelbase() * dt;
  next.speed = z.speed + u.accel * dt;
  return next;
}

StepJacobian step_jacobian(const VehicleState& z, const ControlInput& u,
                           const VehicleGeometry& geom, double dt,
                           HeadingModel model) {
  const double beta = side_slip(u.steer, geom);
  const double dbeta = side_slip_derivative(u.steer, geom);
  const double angle = z.heading + beta;
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  const double t = std::tan(u.steer);
  const double sec2 = 1.0 + t * t;
  const double L = geom.wheelbase();

  StepJacobian jac;
  jac.wrt_state.setIdentity();
  jac.wrt_input.setZero();

  jac.wrt_state(0, 2) = -z.speed * s * dt;
  jac.wrt_state(0, 3) = c * dt;
  jac.wrt_state(1, 2) = z.speed * c * dt;
  jac.wrt_state(1, 3) = s * dt;

  jac.wrt_input(0, 1) = -z.speed * s * dbeta * dt;
  jac.wrt_input(1, 1) = z.speed * c * dbeta * dt;

  if (model == HeadingModel::kAsPrinted) {
    jac.wrt_state(2, 3) = beta * t / L * dt;
    jac.wrt_input(2, 1) = z.speed * (dbeta * t + beta * sec2) / L * dt;
  } else {
    const double cb = std::cos(beta);
    jac.wrt_state(2, 3) = cb * t / L * dt;
    jac.wrt_input(2, 1) =
        z.speed * (-std::sin(beta) * dbeta * t + cb * sec2) / L * dt;
  }
  jac.wrt_input(3, 0) = dt;
  return jac;
}

Eigen::Matrix2d rotation(double heading) {
  const double c = std::cos(heading);
  const double s = std::sin(heading);
  Eigen::Matrix2d ro;
  ro << c, -s, s, c;
  return ro;
}

bool Polytope::contains(const Eigen::Vector2d& p, double tol) const {
  return ((A * p - b).array() <= tol).all();
}

std::array<Eigen::Vector2d, 4> Polytope::vertices() const {
  std::array<Eigen::Vector2d, 4> out;
  for (int i = 0; i < 4; ++i) {
    const int j = (i + 1) % 4;
    Eigen::Matrix2d faces;
    faces.row(0) = A.row(i);
    faces.row(1) = A.row(j);
    out[i] = faces.partialPivLu().solve(Eigen::Vector2d(b[i], b[j]));
  }
  return out;
}

Polytope polytope_of(const VehicleState& z, const VehicleGeometry& geom) {
  const Eigen::Matrix2d rot_t = rotation(z.heading).transpose();
  Polytope poly;
  poly.A.topRows<2>() = rot_t;
  poly.A.bottomRows<2>() = -rot_t;
  const Eigen::Vector4d half(geom.length / 2.0, geom.width / 2.0,
                             geom.length / 2.0, geom.width / 2.0);
  poly.b = half + poly.A * Eigen::Vector2d(z.x, z.y);
  return poly;
}

Polytope box_polytope(double x_min, double x_max, double y_min, double y_max) {
  if (!(x_max > x_min && y_max > y_min)) {
    throw Error(ErrorKind::kDegenerateGeometry, "empty obstacle box");
  }
  VehicleState center{(x_min + x_max) / 2.0, (y_min + y_max) / 2.0, 0.0, 0.0};
  VehicleGeometry g;
  g.length = x_max - x_min;
  g.width = y_max - y_min;
  return polytope_of(center, g);
}

bool polytopes_intersect(const Polytope& p1, const Polytope& p2) {
  const auto v1 = p1.vertices();
  const auto v2 = p2.vertices();
  auto separated_along = [&](const Eigen::Vector2d& axis) {
    double min1 = std::numeric_limits<double>::infinity();
    double max1 = -min1;
    double min2 = min1;
    double max2 = -min1;
    for (const auto& v : v1) {
      const double d = axis.dot(v);
      min1 = std::min(min1, d);
      max1 = std::max(max1, d);
    }
    for (const auto& v : v2) {
      const double d = axis.dot(v);
      min2 = std::min(min2, d);
      max2 = std::max(max2, d);
    }
    return max1 < min2 || max2 < min1;
  };
  for (int i = 0; i < 2; ++i) {
    if (separated_along(p1.A.row(i).transpose())) return false;
    if (separated_along(p2.A.row(i).transpose())) return false;
  }
  return true;
}

PointDistance point_polytope_distance(const Eigen::Vector2d& p,
                                      const Polytope& poly) {
  PointDistance out;
  const Eigen::Vector4d slack = poly.A * p - poly.b;
  if ((slack.array() <= 0.0).all()) {
    Eigen::Index face = 0;
    out.distance = slack.maxCoeff(&face);
    out.normal = poly.A.row(face).transpose();
    out.closest = p - out.distance * out.normal;
    return out;
  }
  const auto verts = poly.vertices();
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 4; ++i) {
    const Eigen::Vector2d a = verts[i];
    const Eigen::Vector2d e = verts[(i + 1) % 4] - a;
    const double len2 = e.squaredNorm();
    const double s = len2 > 0.0 ? std::clamp((p - a).dot(e) / len2, 0.0, 1.0) : 0.0;
    const Eigen::Vector2d q = a + s * e;
    const double d = (p - q).norm();
    if (d < best) {
      best = d;
      out.closest = q;
    }
  }
  out.distance = best;
  out.normal = (p - out.closest) / best;
  return out;
}

double disc_offset(const VehicleGeometry& geom) { return geom.length / 4.0; }

double disc_radius(const VehicleGeometry& geom, double margin) {
  return std::hypot(geom.length / 4.0, geom.width / 2.0) + margin;
}

std::array<Disc, 2> disc_cover(const VehicleState& z,
                               const VehicleGeometry& geom, double margin) {
  const Eigen::Vector2d center(z.x, z.y);
  const Eigen::Vector2d axis(std::cos(z.heading), std::sin(z.heading));
  const double r = disc_radius(geom, margin);
  const double off = disc_offset(geom);
  return {Disc{center + off * axis, r}, Disc{center - off * axis, r}};
}

}  // namespace rsma_iov
