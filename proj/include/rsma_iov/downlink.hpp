#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "rsma_iov/channel.hpp"
#include "rsma_iov/convex.hpp"

namespace rsma_iov {

// FEEL downlink problem over T slots. Channels and epsilons are indexed
// [k][t] (follower, slot); slot t covers the t-th interval of length dt and
// has 1-based index t+1 in latency accounting.
struct DownlinkSpec {
  int slots = 100;
  double dt = 0.05;
  double payload_bits = 1e7;  // B0
  double qos_bps = 5e5;       // R_th per follower per slot
  RadioConfig radio;
  std::vector<std::vector<ChannelVector>> channels;
  std::vector<std::vector<double>> epsilons;
  double q_t = 1.0;
  double q_h = 100.0;

  int followers() const { return static_cast<int>(channels.size()); }
  double noise_w() const;
  void validate() const;
};

// Builds a spec whose channels come from LV-FV distances [k][t] and whose
// epsilons are all `epsilon`.
DownlinkSpec spec_from_distances(const std::vector<std::vector<double>>& distances,
                                 const RadioConfig& radio, double epsilon = 0.0);

// Iterate of the communication block. Precoders are in sqrt(W); C0, C and
// omega in bits/s; alpha/alpha_c in bits/s/Hz; theta/theta_c are 1 + SINR
// bounds; xi/xi_c are interference-plus-noise in units of the noise power,
// so xi >= 1 means xi >= sigma^2. Per-follower arrays are [t][k].
struct DownlinkVariables {
  std::vector<double> psi;
  std::vector<PrecoderMatrix> precoders;
  std::vector<double> common_rate;
  std::vector<std::vector<double>> private_rate;
  std::vector<std::vector<double>> alpha, theta, xi;
  std::vector<std::vector<double>> alpha_c, theta_c, xi_c;
  std::vector<double> omega;
  double latency_bound = 0.0;
  // Unicast baseline only: per-follower schedule [t][k]; empty otherwise.
  std::vector<std::vector<double>> unicast_psi;

  int slots() const { return static_cast<int>(psi.size()); }
};

enum class Scheme { kRsma, kMulp, kNoma };

const char* to_string(Scheme scheme);
Scheme parse_scheme(const std::string& name);

struct ScaIterate {
  int iteration = 0;
  double latency_bound = 0.0;
  double objective = 0.0;
  double max_violation = 0.0;  // exact nonconvex constraints, <= 0 is feasible
};

enum class ScaStatus { kConverged, kIterationLimit };

const char* to_string(ScaStatus status);

struct ScaReport {
  Scheme scheme = Scheme::kRsma;
  std::vector<ScaIterate> iterates;
  ScaStatus status = ScaStatus::kIterationLimit;
  DownlinkVariables relaxed;  // last accepted SCA point
  DownlinkVariables final;    // after round_schedule
  int latency_index = 0;      // largest scheduled 1-based slot
  double latency_s = 0.0;
  double penalty = 0.0;       // sum of gain-error penalties at `final`
  double delivered_bits = 0.0;  // minimum over receivers of the FEEL bits
};

struct ScaOptions {
  int max_iters = 30;   // N
  double tol = 1e-4;    // stop when |latency_bound change| < tol
  convex::SolverOptions solver;
};

ScaOptions default_sca_options();

// Affine tangent of psi * C0 at (psi_n, C0_n):
// psi_n * C0 + C0_n * psi - psi_n * C0_n.
struct BilinearMinorant {
  double psi_n = 0.0;
  double c0_n = 0.0;
  double operator()(double psi, double c0) const {
    return psi_n * c0 + c0_n * psi - psi_n * c0_n;
  }
};
BilinearMinorant minorant_bilinear(double psi_n, double c0_n);

// Affine lower bound of |h^H p|^2 / xi tangent at (p_n, xi_n):
// value = re . Re(p) + im . Im(p) + xi_coef * xi.
struct QolMinorant {
  Eigen::VectorXd re;
  Eigen::VectorXd im;
  double xi_coef = 0.0;
  double operator()(const Eigen::VectorXcd& p, double xi) const {
    return re.dot(p.real()) + im.dot(p.imag()) + xi_coef * xi;
  }
};
QolMinorant minorant_qol(const Eigen::VectorXcd& p_n, double xi_n,
                         const ChannelVector& h);

// Feasible starting point: psi = 1, C_k = 0, C0 = common rate, auxiliaries
// at their equality values. Throws qos-infeasible naming the slot.
DownlinkVariables init_feasible(const DownlinkSpec& spec,
                                Scheme scheme = Scheme::kRsma);

// Index map of the convexified subproblem around an iterate.
struct SubproblemLayout {
  int latency = -1;
  std::vector<int> psi, omega, c0;
  std::vector<std::vector<int>> c;        // [t][k]
  std::vector<int> pc;                    // [t] first of 2M reals (re, im interleaved)
  std::vector<std::vector<int>> pk;       // [t][k]
  std::vector<std::vector<int>> alpha, theta, xi;
  std::vector<std::vector<int>> alpha_c, theta_c, xi_c;
  std::vector<std::vector<int>> power_epi;  // s_k >= |p_k|^2
};

struct Subproblem {
  convex::Program program;
  SubproblemLayout layout;
  std::vector<double> start;  // the expansion point, in program coordinates
};

Subproblem build_subproblem(const DownlinkSpec& spec,
                            const DownlinkVariables& current,
                            Scheme scheme = Scheme::kRsma);

// Communication-block objective Q_t * latency_bound + Q_h * sum Gamma-hat.
double downlink_objective(const DownlinkSpec& spec, const DownlinkVariables& v);

// Worst violation of the exact (nonconvex) rate, SINR and bilinear
// constraints at `v`, scaled per constraint; <= 0 means feasible.
double original_violation(const DownlinkSpec& spec, const DownlinkVariables& v,
                          Scheme scheme = Scheme::kRsma);

ScaReport sca_solve(const DownlinkSpec& spec,
                    const ScaOptions& options = default_sca_options(),
                    Scheme scheme = Scheme::kRsma);

// Threshold at 0.5, then add slots in increasing t until the payload fits.
DownlinkVariables round_schedule(const DownlinkSpec& spec,
                                 const DownlinkVariables& vars);

ScaReport baseline_mulp(const DownlinkSpec& spec,
                        const ScaOptions& options = default_sca_options());
ScaReport baseline_noma(const DownlinkSpec& spec,
                        const ScaOptions& options = default_sca_options());

// Dispatches to sca_solve / baseline_mulp / baseline_noma.
ScaReport solve_downlink(const DownlinkSpec& spec, Scheme scheme,
                         const ScaOptions& options = default_sca_options());

// SIC decoding order for the unicast baseline: strongest channel first, ties
// by follower index.
std::vector<int> sic_order(const std::vector<ChannelVector>& channels);

}  // namespace rsma_iov
