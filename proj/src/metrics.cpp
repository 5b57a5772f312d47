#include "rsma_iov/metrics.hpp"

#include <cmath>

#include "rsma_iov/errors.hpp"

namespace rsma_iov {

QuantityStats stats_of(const std::vector<double>& values) {
  QuantityStats s;
  if (values.empty()) return s;
  for (double v : values) s.mean += v;
  s.mean /= values.size();
  for (double v : values) s.variance += (v - s.mean) * (v - s.mean);
  s.variance /= values.size();
  return s;
}

MotionStats motion_stats(const PlatoonTrace& tr) {
  std::vector<double> h, v, a, d;
  for (const auto& row : tr.states) {
    for (const auto& z : row) {
      h.push_back(z.heading);
      v.push_back(z.speed);
    }
  }
  for (const auto& row : tr.inputs) {
    for (const auto& u : row) {
      a.push_back(u.accel);
      d.push_back(u.steer);
    }
  }
  return {stats_of(h), stats_of(v), stats_of(a), stats_of(d)};
}

double variance_gap(double v_i, double v_0) {
  if (v_0 == 0.0) throw Error(ErrorKind::kUndefinedBaseline, "baseline variance is zero");
  return std::abs(v_i - v_0) / v_0;
}

MotionGap motion_gap(const MotionStats& other, const MotionStats& base) {
  return {variance_gap(other.heading.variance, base.heading.variance),
          variance_gap(other.velocity.variance, base.velocity.variance),
          variance_gap(other.acceleration.variance, base.acceleration.variance),
          variance_gap(other.steering.variance, base.steering.variance)};
}

std::vector<double> sum_rate_per_slot(const DownlinkVariables& vars) {
  std::vector<double> out(vars.slots(), 0.0);
  for (int t = 0; t < vars.slots(); ++t) {
    if (t < static_cast<int>(vars.common_rate.size())) out[t] += vars.common_rate[t];
    if (t < static_cast<int>(vars.private_rate.size()))
      for (double r : vars.private_rate[t]) out[t] += r;
  }
  return out;
}

}  // namespace rsma_iov
