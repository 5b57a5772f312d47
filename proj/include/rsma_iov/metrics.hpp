#pragma once

#include <vector>

#include "rsma_iov/downlink.hpp"
#include "rsma_iov/mpc.hpp"

namespace rsma_iov {

struct QuantityStats {
  double mean = 0.0;
  double variance = 0.0;  // population variance
};

QuantityStats stats_of(const std::vector<double>& values);

// Heading and velocity over all states (t = 0..T), acceleration and
// steering over all emitted inputs, pooled across every vehicle.
struct MotionStats {
  QuantityStats heading;
  QuantityStats velocity;
  QuantityStats acceleration;
  QuantityStats steering;
};

MotionStats motion_stats(const PlatoonTrace& trace);

// |V_i - V_0| / V_0; throws undefined-baseline when V_0 is zero.
double variance_gap(double v_i, double v_0);

struct MotionGap {
  double heading = 0.0;
  double velocity = 0.0;
  double acceleration = 0.0;
  double steering = 0.0;
};

MotionGap motion_gap(const MotionStats& other, const MotionStats& baseline);

// Common plus private rates of each slot in bit/s.
std::vector<double> sum_rate_per_slot(const DownlinkVariables& vars);

}  // namespace rsma_iov
