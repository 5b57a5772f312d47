#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "rsma_iov/dynamics.hpp"

namespace rsma_iov {

using Complex = std::complex<double>;

// Downlink channel from the lead vehicle's M antennas to one follower.
class ChannelVector {
 public:
  ChannelVector() = default;
  explicit ChannelVector(Eigen::VectorXcd coefficients);

  const Eigen::VectorXcd& coefficients() const { return coefficients_; }
  int antennas() const { return static_cast<int>(coefficients_.size()); }
  double gain() const { return coefficients_.squaredNorm(); }

  // h^H x
  Complex inner(const Eigen::VectorXcd& x) const {
    return coefficients_.dot(x);
  }

 private:
  Eigen::VectorXcd coefficients_;
};

// Transmitter-side view of a channel under imperfect CSIT. The estimate keeps
// a (1 - eps^2) share of the channel power; `error_gain` is the eps^2 share.
struct CsitSplit {
  ChannelVector estimate;
  double error_gain = 0.0;
  double epsilon = 0.0;
};

// One common precoder plus K private precoders, all of length M.
struct PrecoderMatrix {
  Eigen::VectorXcd common;
  std::vector<Eigen::VectorXcd> priv;

  static PrecoderMatrix zeros(int antennas, int followers);
  int antennas() const { return static_cast<int>(common.size()); }
  int followers() const { return static_cast<int>(priv.size()); }
  double total_power() const;
};

struct RadioConfig {
  int antennas = 4;
  int followers = 3;
  double bandwidth_hz = 5e6;
  double power_dbm = 25.0;
  double noise_dbm_per_hz = -174.0;
  double path_loss_exponent = 2.0;

  double transmit_power_w() const;
  void validate() const;
};

double dbm_to_watts(double dbm);

double noise_power(double noise_dbm_per_hz, double bandwidth_hz);

ChannelVector path_loss_channel(double distance_m, const RadioConfig& config);

// Adds a zero-mean circular complex Gaussian perturbation with per-coefficient
// variance eps^2 * |h|^2 / M. Used only in the Monte-Carlo channel mode.
ChannelVector perturb_channel(const ChannelVector& h, double epsilon,
                              std::uint64_t seed);

struct MotionCoefficient {
  double epsilon = 0.0;
  bool clamped = false;
};

// ||z - z_est|| / (2 ||z_max||), clamped to [0, 1].
MotionCoefficient motion_coefficient(const VehicleState& z,
                                     const VehicleState& z_est,
                                     const VehicleState& z_max);

CsitSplit split_csit(const ChannelVector& h, double epsilon);

double sinr_common(const ChannelVector& h, const PrecoderMatrix& precoders,
                   double noise_w);
double sinr_private(const ChannelVector& h, const PrecoderMatrix& precoders,
                    int k, double noise_w);

// Shannon rate in bit/s.
double rate(double sinr, double bandwidth_hz);

double common_rate(std::span<const ChannelVector> channels,
                   const PrecoderMatrix& precoders, double noise_w,
                   double bandwidth_hz);

// Sum over followers of eps_k^2 * ||p_k||^4 * ||h_k||^2.
double gain_error_penalty(const PrecoderMatrix& precoders,
                          std::span<const double> epsilons,
                          std::span<const ChannelVector> channels);

}  // namespace rsma_iov
