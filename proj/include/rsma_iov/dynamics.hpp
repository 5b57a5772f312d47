#pragma once

#include <array>
#include <vector>

#include <Eigen/Core>

namespace rsma_iov {

struct VehicleState {
  double x = 0.0;        // m, longitudinal
  double y = 0.0;        // m, lateral
  double heading = 0.0;  // rad
  double speed = 0.0;    // m/s

  Eigen::Vector4d vec() const { return {x, y, heading, speed}; }
  static VehicleState from(const Eigen::Vector4d& v) {
    return {v[0], v[1], v[2], v[3]};
  }
};

struct ControlInput {
  double accel = 0.0;  // m/s^2
  double steer = 0.0;  // rad

  Eigen::Vector2d vec() const { return {accel, steer}; }
  static ControlInput from(const Eigen::Vector2d& v) { return {v[0], v[1]}; }
};

struct VehicleGeometry {
  double length = 4.5;
  double width = 1.8;
  double front_axle = 1.125;
  double rear_axle = 1.125;

  double wheelbase() const { return front_axle + rear_axle; }
  void validate() const;
};

// How the heading update is computed. kAsPrinted multiplies the slip angle by
// tan(steer), which makes the yaw rate non-negative for any steering sign;
// kKinematic is the usual v*cos(beta)*tan(steer)/(lf+lr) bicycle yaw rate.
enum class HeadingModel { kKinematic, kAsPrinted };

double side_slip(double steer, const VehicleGeometry& geom);

VehicleState step(const VehicleState& z, const ControlInput& u,
                  const VehicleGeometry& geom, double dt,
                  HeadingModel model = HeadingModel::kKinematic);

// Jacobians of `step` with respect to state (4x4) and input (4x2).
struct StepJacobian {
  Eigen::Matrix4d wrt_state;
  Eigen::Matrix<double, 4, 2> wrt_input;
};
StepJacobian step_jacobian(const VehicleState& z, const ControlInput& u,
                           const VehicleGeometry& geom, double dt,
                           HeadingModel model = HeadingModel::kKinematic);

Eigen::Matrix2d rotation(double heading);

// Oriented rectangle {p : A p <= b}; rows are [RO^T; -RO^T].
struct Polytope {
  Eigen::Matrix<double, 4, 2> A;
  Eigen::Vector4d b;

  bool contains(const Eigen::Vector2d& p, double tol = 0.0) const;
  std::array<Eigen::Vector2d, 4> vertices() const;
};

Polytope polytope_of(const VehicleState& z, const VehicleGeometry& geom);

// Axis-aligned box helper for obstacles.
Polytope box_polytope(double x_min, double x_max, double y_min, double y_max);

bool polytopes_intersect(const Polytope& p1, const Polytope& p2);

// Signed distance from a point to a polytope (negative inside) and the unit
// direction along which the distance grows.
struct PointDistance {
  double distance = 0.0;
  Eigen::Vector2d normal = Eigen::Vector2d::Zero();
  Eigen::Vector2d closest = Eigen::Vector2d::Zero();
};
PointDistance point_polytope_distance(const Eigen::Vector2d& p,
                                      const Polytope& poly);

struct Disc {
  Eigen::Vector2d center;
  double radius = 0.0;
};

inline constexpr double kDefaultSafetyMargin = 0.2;

// Two discs whose union covers the vehicle body.
std::array<Disc, 2> disc_cover(const VehicleState& z,
                               const VehicleGeometry& geom, double margin);

// Body-frame longitudinal offset of the disc centers (+/-).
double disc_offset(const VehicleGeometry& geom);
double disc_radius(const VehicleGeometry& geom, double margin);

}  // namespace rsma_iov
