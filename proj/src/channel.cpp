#include "rsma_iov/channel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "rsma_iov/errors.hpp"

namespace rsma_iov {

namespace {

void check_dims(const ChannelVector& h, const PrecoderMatrix& precoders) {
  if (h.antennas() != precoders.antennas()) {
    throw Error(ErrorKind::kDimensionMismatch,
                "channel has " + std::to_string(h.antennas()) +
                    " antennas, precoder has " +
                    std::to_string(precoders.antennas()));
  }
}

void check_noise(double noise_w) {
  if (!(noise_w > 0.0)) {
    throw Error(ErrorKind::kInvalidConfig, "noise power must be positive");
  }
}

}  // namespace

ChannelVector::ChannelVector(Eigen::VectorXcd coefficients)
    : coefficients_(std::move(coefficients)) {
  if (coefficients_.size() < 1) {
    throw Error(ErrorKind::kInvalidConfig, "channel needs at least one antenna");
  }
  for (Eigen::Index i = 0; i < coefficients_.size(); ++i) {
    if (!std::isfinite(coefficients_[i].real()) ||
        !std::isfinite(coefficients_[i].imag())) {
      throw Error(ErrorKind::kInvalidCoefficient, "non-finite channel gain");
    }
  }
}

PrecoderMatrix PrecoderMatrix::zeros(int antennas, int followers) {
  PrecoderMatrix p;
  p.common = Eigen::VectorXcd::Zero(antennas);
  p.priv.assign(followers, Eigen::VectorXcd::Zero(antennas));
  return p;
}

double PrecoderMatrix::total_power() const {
  double total = common.squaredNorm();
  for (const auto& pk : priv) total += pk.squaredNorm();
  return total;
}

double dbm_to_watts(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

double RadioConfig::transmit_power_w() const { return dbm_to_watts(power_dbm); }

void RadioConfig::validate() const {
  if (antennas < 1 || followers < 1 || !(bandwidth_hz > 0.0) ||
      !std::isfinite(power_dbm)) {
    throw Error(ErrorKind::kInvalidConfig,
                "radio config requires M >= 1, K >= 1, B > 0 and finite P_t");
  }
}

double noise_power(double noise_dbm_per_hz, double bandwidth_hz) {
  if (!(bandwidth_hz > 0.0)) {
    throw Error(ErrorKind::kInvalidConfig, "bandwidth must be positive");
  }
  return dbm_to_watts(noise_dbm_per_hz) * bandwidth_hz;
}

ChannelVector path_loss_channel(double distance_m, const RadioConfig& config) {
  if (!(distance_m > 0.0)) {
    throw Error(ErrorKind::kDegenerateGeometry,
                "LV-FV distance must be positive, got " +
                    std::to_string(distance_m));
  }
  const double gain = std::pow(distance_m, -config.path_loss_exponent);
  return ChannelVector(
      Eigen::VectorXcd::Constant(config.antennas, Complex(gain, 0.0)));
}

ChannelVector perturb_channel(const ChannelVector& h, double epsilon,
                              std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double variance = epsilon * epsilon * h.gain() / h.antennas();
  const double sd = std::sqrt(variance / 2.0);
  Eigen::VectorXcd c = h.coefficients();
  for (Eigen::Index i = 0; i < c.size(); ++i) {
    const double re = normal(rng);
    const double im = normal(rng);
    c[i] += Complex(sd * re, sd * im);
  }
  return ChannelVector(std::move(c));
}

MotionCoefficient motion_coefficient(const VehicleState& z,
                                     const VehicleState& z_est,
                                     const VehicleState& z_max) {
  const double bound = z_max.vec().norm();
  if (!(bound > 0.0)) {
    throw Error(ErrorKind::kInvalidConfig, "state upper bound has zero norm");
  }
  const double raw = (z.vec() - z_est.vec()).norm() / (2.0 * bound);
  MotionCoefficient out;
  out.clamped = raw > 1.0;
  out.epsilon = std::min(raw, 1.0);
  return out;
}

CsitSplit split_csit(const ChannelVector& h, double epsilon) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) {
    throw Error(ErrorKind::kInvalidCoefficient,
                "motion coefficient outside [0, 1]");
  }
  const double e2 = epsilon * epsilon;
  CsitSplit out;
  out.estimate = ChannelVector(h.coefficients() * std::sqrt(1.0 - e2));
  out.error_gain = e2 * h.gain();
  out.epsilon = epsilon;
  return out;
}

double sinr_common(const ChannelVector& h, const PrecoderMatrix& precoders,
                   double noise_w) {
  check_noise(noise_w);
  check_dims(h, precoders);
  double interference = 0.0;
  for (const auto& pk : precoders.priv) interference += std::norm(h.inner(pk));
  return std::norm(h.inner(precoders.common)) / (interference + noise_w);
}

double sinr_private(const ChannelVector& h, const PrecoderMatrix& precoders,
                    int k, double noise_w) {
  check_noise(noise_w);
  check_dims(h, precoders);
  if (k < 0 || k >= precoders.followers()) {
    throw Error(ErrorKind::kIndex, "follower index " + std::to_string(k) +
                                       " out of range");
  }
  double interference = 0.0;
  for (int i = 0; i < precoders.followers(); ++i) {
    if (i != k) interference += std::norm(h.inner(precoders.priv[i]));
  }
  return std::norm(h.inner(precoders.priv[k])) / (interference + noise_w);
}

double rate(double sinr, double bandwidth_hz) {
  if (sinr < 0.0 || std::isnan(sinr)) {
    throw Error(ErrorKind::kInvalidCoefficient, "negative SINR");
  }
  return bandwidth_hz * std::log2(1.0 + sinr);
}

double common_rate(std::span<const ChannelVector> channels,
                   const PrecoderMatrix& precoders, double noise_w,
                   double bandwidth_hz) {
  if (channels.empty()) {
    throw Error(ErrorKind::kInvalidConfig, "no follower channels");
  }
  double best = std::numeric_limits<double>::infinity();
  for (const auto& h : channels) {
    best = std::min(best, rate(sinr_common(h, precoders, noise_w), bandwidth_hz));
  }
  return best;
}

double gain_error_penalty(const PrecoderMatrix& precoders,
                          std::span<const double> epsilons,
                          std::span<const ChannelVector> channels) {
  const auto k_count = static_cast<std::size_t>(precoders.followers());
  if (epsilons.size() != k_count || channels.size() != k_count) {
    throw Error(ErrorKind::kDimensionMismatch,
                "penalty needs one epsilon and one channel per follower");
  }
  double total = 0.0;
  for (std::size_t k = 0; k < k_count; ++k) {
    const double p2 = precoders.priv[k].squaredNorm();
    total += epsilons[k] * epsilons[k] * p2 * p2 * channels[k].gain();
  }
  return total;
}

}  // namespace rsma_iov
