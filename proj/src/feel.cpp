#include "rsma_iov/feel.hpp"

#include <cmath>
#include <random>
#include <string>

#include <Eigen/Eigenvalues>

#include "rsma_iov/errors.hpp"

namespace rsma_iov {

namespace {

void check_dataset(const Dataset& data, Eigen::Index dim) {
  if (data.empty()) throw Error(ErrorKind::kInvalidConfig, "dataset is empty");
  for (const auto& s : data) {
    if (s.x.size() != dim) {
      throw Error(ErrorKind::kDimensionMismatch, "sample dimension differs from the model");
    }
  }
}

// log(1 + exp(z)) without overflow
double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }
double sigmoid(double z) {
  return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

std::vector<double> shard_weights(const std::vector<Dataset>& shards, bool weighted) {
  std::vector<double> w(shards.size(), 1.0 / shards.size());
  if (weighted) {
    double n = 0.0;
    for (const auto& s : shards) n += s.size();
    for (std::size_t k = 0; k < shards.size(); ++k) w[k] = shards[k].size() / n;
  }
  return w;
}

}  // namespace

const char* to_string(Loss loss) {
  return loss == Loss::kLeastSquares ? "least-squares" : "logistic";
}

Loss parse_loss(const std::string& name) {
  if (name == "least-squares") return Loss::kLeastSquares;
  if (name == "logistic") return Loss::kLogistic;
  throw Error(ErrorKind::kInvalidConfig, "unknown loss '" + name + "'");
}

void FeelConfig::validate() const {
  if (!(step_size > 0.0)) throw Error(ErrorKind::kInvalidConfig, "FEEL step size must be positive");
  if (rounds < 0 || workers < 1) {
    throw Error(ErrorKind::kInvalidConfig, "FEEL needs rounds >= 0 and workers >= 1");
  }
}

double local_loss(const Eigen::VectorXd& w, const Dataset& data, Loss loss) {
  check_dataset(data, w.size());
  double total = 0.0;
  for (const auto& s : data) {
    const double z = w.dot(s.x);
    total += loss == Loss::kLeastSquares ? 0.5 * (z - s.y) * (z - s.y) : softplus(-s.y * z);
  }
  return total / data.size();
}

Eigen::VectorXd local_gradient(const Eigen::VectorXd& w, const Dataset& data, Loss loss) {
  check_dataset(data, w.size());
  Eigen::VectorXd g = Eigen::VectorXd::Zero(w.size());
  for (const auto& s : data) {
    const double z = w.dot(s.x);
    const double c = loss == Loss::kLeastSquares ? z - s.y : -s.y * sigmoid(-s.y * z);
    g += c * s.x;
  }
  return g / static_cast<double>(data.size());
}

Eigen::VectorXd aggregate(const std::vector<Eigen::VectorXd>& gradients) {
  return aggregate_weighted(gradients, std::vector<std::size_t>(gradients.size(), 1));
}

Eigen::VectorXd aggregate_weighted(const std::vector<Eigen::VectorXd>& gradients,
                                   const std::vector<std::size_t>& sizes) {
  if (gradients.empty() || sizes.size() != gradients.size()) {
    throw Error(ErrorKind::kDimensionMismatch, "one size per gradient is required");
  }
  double n = 0.0;
  for (auto s : sizes) n += static_cast<double>(s);
  if (!(n > 0.0)) throw Error(ErrorKind::kInvalidConfig, "aggregation weights sum to zero");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(gradients[0].size());
  for (std::size_t k = 0; k < gradients.size(); ++k) {
    if (gradients[k].size() != out.size()) {
      throw Error(ErrorKind::kDimensionMismatch, "gradient " + std::to_string(k) +
                                                     " has a different dimension");
    }
    out += (static_cast<double>(sizes[k]) / n) * gradients[k];
  }
  return out;
}

Eigen::VectorXd global_update(const Eigen::VectorXd& w, const Eigen::VectorXd& g, double eta) {
  if (w.size() != g.size()) throw Error(ErrorKind::kDimensionMismatch, "update dimension");
  return w - eta * g;
}

double global_loss(const Eigen::VectorXd& w, const std::vector<Dataset>& shards, Loss loss,
                   bool weighted) {
  const auto wk = shard_weights(shards, weighted);
  double total = 0.0;
  for (std::size_t k = 0; k < shards.size(); ++k) total += wk[k] * local_loss(w, shards[k], loss);
  return total;
}

double smoothness(const std::vector<Dataset>& shards, Loss loss, bool weighted) {
  if (shards.empty() || shards[0].empty()) throw Error(ErrorKind::kInvalidConfig, "no data");
  const auto wk = shard_weights(shards, weighted);
  const auto d = shards[0][0].x.size();
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(d, d);
  for (std::size_t k = 0; k < shards.size(); ++k) {
    check_dataset(shards[k], d);
    for (const auto& s : shards[k]) m += (wk[k] / shards[k].size()) * s.x * s.x.transpose();
  }
  const double top = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(m).eigenvalues().maxCoeff();
  return loss == Loss::kLeastSquares ? top : top / 4.0;
}

double round_latency(const std::vector<double>& psi, double dt) {
  for (int t = static_cast<int>(psi.size()); t > 0; --t)
    if (psi[t - 1] > 0.5) return t * dt;
  return 0.0;
}

RoundResult feel_round(const Eigen::VectorXd& w, const std::vector<Dataset>& shards,
                       const FeelConfig& config, const ScaReport& downlink, double dt,
                       double payload_bits) {
  config.validate();
  if (shards.empty()) throw Error(ErrorKind::kInvalidConfig, "no worker datasets");
  // Delivered bits are computed from rates, so allow rounding at 1e-9.
  if (payload_bits > 0.0 && downlink.delivered_bits < payload_bits * (1.0 - 1e-9)) {
    throw Error(ErrorKind::kPayloadInfeasible,
                "downlink delivers " + std::to_string(downlink.delivered_bits) + " of " +
                    std::to_string(payload_bits) + " bits");
  }
  std::vector<Eigen::VectorXd> grads;
  std::vector<std::size_t> sizes;
  for (const auto& d : shards) {
    grads.push_back(local_gradient(w, d, config.loss));
    sizes.push_back(d.size());
  }
  RoundResult r;
  const auto g = config.weighted ? aggregate_weighted(grads, sizes) : aggregate(grads);
  r.parameters = global_update(w, g, config.step_size);
  r.latency_s = round_latency(downlink.final.psi, dt);
  return r;
}

std::vector<TrainingPoint> run_training(const FeelConfig& config,
                                        const std::vector<Dataset>& shards,
                                        const Eigen::VectorXd& w0,
                                        const std::vector<ScaReport>& schedules, double dt,
                                        double payload_bits) {
  config.validate();
  if (schedules.empty() && config.rounds > 0) {
    throw Error(ErrorKind::kInvalidConfig, "training needs at least one downlink schedule");
  }
  std::vector<TrainingPoint> curve;
  Eigen::VectorXd w = w0;
  curve.push_back({0, 0.0, global_loss(w, shards, config.loss, config.weighted)});
  int rising = 0;
  for (int r = 1; r <= config.rounds; ++r) {
    const auto& sched = schedules[std::min<std::size_t>(r - 1, schedules.size() - 1)];
    const auto res = feel_round(w, shards, config, sched, dt, payload_bits);
    w = res.parameters;
    TrainingPoint p;
    p.round = r;
    p.cumulative_latency_s = curve.back().cumulative_latency_s + res.latency_s;
    p.loss = global_loss(w, shards, config.loss, config.weighted);
    rising = p.loss > curve.back().loss ? rising + 1 : 0;
    curve.push_back(p);
    if (rising >= 5 || !std::isfinite(p.loss)) {
      throw Error(ErrorKind::kStepSize,
                  "training loss rose for 5 consecutive rounds up to round " + std::to_string(r));
    }
  }
  return curve;
}

std::vector<Dataset> synthetic_task(int samples, int dimension, int shards, Loss loss,
                                    std::uint64_t seed, double noise) {
  if (samples < shards || shards < 1 || dimension < 1) {
    throw Error(ErrorKind::kInvalidConfig, "synthetic task needs samples >= shards >= 1");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01;
  Eigen::VectorXd truth(dimension);
  for (int i = 0; i < dimension; ++i) truth[i] = n01(rng);
  std::vector<Dataset> out(shards);
  const int per = samples / shards;
  for (int k = 0; k < shards; ++k) {
    for (int i = 0; i < per; ++i) {
      Sample s;
      s.x.resize(dimension);
      for (int j = 0; j < dimension; ++j) s.x[j] = n01(rng);
      const double z = truth.dot(s.x);
      s.y = loss == Loss::kLeastSquares ? z + noise * n01(rng) : (z + noise * n01(rng) >= 0 ? 1.0 : -1.0);
      out[k].push_back(std::move(s));
    }
  }
  return out;
}

}  // namespace rsma_iov
