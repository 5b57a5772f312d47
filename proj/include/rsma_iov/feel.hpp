#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "rsma_iov/downlink.hpp"

namespace rsma_iov {

enum class Loss { kLeastSquares, kLogistic };

const char* to_string(Loss loss);
Loss parse_loss(const std::string& name);

// Least squares: f = (w'x - y)^2 / 2. Logistic: f = log(1 + exp(-y w'x))
// with labels y in {-1, +1}.
struct Sample {
  Eigen::VectorXd x;
  double y = 0.0;
};
using Dataset = std::vector<Sample>;

struct ModelVector {
  Eigen::VectorXd parameters;
  int precision_bits = 32;

  double bit_size() const { return static_cast<double>(parameters.size()) * precision_bits; }
};

struct FeelConfig {
  double step_size = 0.1;  // eta
  int rounds = 20;
  int workers = 3;         // K
  Loss loss = Loss::kLeastSquares;
  // Worker gradients are averaged uniformly; the weighted variant uses
  // |D_k| / sum |D_j|.
  bool weighted = false;

  void validate() const;
};

double local_loss(const Eigen::VectorXd& w, const Dataset& data, Loss loss);

// Full-batch gradient (1/|D|) sum grad f(w, d).
Eigen::VectorXd local_gradient(const Eigen::VectorXd& w, const Dataset& data, Loss loss);

Eigen::VectorXd aggregate(const std::vector<Eigen::VectorXd>& gradients);
Eigen::VectorXd aggregate_weighted(const std::vector<Eigen::VectorXd>& gradients,
                                   const std::vector<std::size_t>& sizes);

Eigen::VectorXd global_update(const Eigen::VectorXd& w, const Eigen::VectorXd& g, double eta);

// Global training loss: the same average the gradients use.
double global_loss(const Eigen::VectorXd& w, const std::vector<Dataset>& shards, Loss loss,
                   bool weighted = false);

// Smoothness constant of the averaged loss: largest eigenvalue of the
// averaged second-moment matrix (quartered for logistic).
double smoothness(const std::vector<Dataset>& shards, Loss loss, bool weighted = false);

struct RoundResult {
  Eigen::VectorXd parameters;
  double latency_s = 0.0;  // downlink only; uplink is not modelled
};

// Downlink latency of a schedule: (largest t with psi(t) = 1) * dt.
double round_latency(const std::vector<double>& psi, double dt);

// Local gradients, aggregation and update. `downlink` must deliver `payload_bits`.
RoundResult feel_round(const Eigen::VectorXd& w, const std::vector<Dataset>& shards,
                       const FeelConfig& config, const ScaReport& downlink, double dt,
                       double payload_bits);

struct TrainingPoint {
  int round = 0;
  double cumulative_latency_s = 0.0;
  double loss = 0.0;
};

// Chains rounds; round r uses schedules[min(r-1, size-1)]. Loss rising for 5
// consecutive rounds raises a step-size error. Entry 0 is the initial model.
std::vector<TrainingPoint> run_training(const FeelConfig& config,
                                        const std::vector<Dataset>& shards,
                                        const Eigen::VectorXd& w0,
                                        const std::vector<ScaReport>& schedules, double dt,
                                        double payload_bits);

// Synthetic task split into equal shards: Gaussian features, labels from a
// hidden model (plus noise for least squares, signs for logistic).
std::vector<Dataset> synthetic_task(int samples, int dimension, int shards, Loss loss,
                                    std::uint64_t seed, double noise = 0.1);

}  // namespace rsma_iov
