#include "rsma_iov/downlink.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "rsma_iov/errors.hpp"

namespace rsma_iov {

namespace {

using convex::AffineForm;

constexpr double kInf = std::numeric_limits<double>::infinity();

// Channel data in solver units: power relative to P_t, noise power 1.
struct SlotData {
  std::vector<Eigen::VectorXcd> g;  // estimate * sqrt(P_t) / sigma
  std::vector<double> gain;         // |g_k|^2
  std::vector<double> penalty_w;    // Gamma-hat_k = penalty_w * s_k^2
  double rmax = 0.0;                // cap on any rate variable, bits/s/Hz
};

std::vector<SlotData> normalize(const DownlinkSpec& spec) {
  const int K = spec.followers();
  const double pt = spec.radio.transmit_power_w();
  const double scale = std::sqrt(pt / spec.noise_w());
  std::vector<SlotData> out(spec.slots);
  for (int t = 0; t < spec.slots; ++t) {
    auto& s = out[t];
    double gmax = 0.0;
    for (int k = 0; k < K; ++k) {
      const auto split = split_csit(spec.channels[k][t], spec.epsilons[k][t]);
      s.g.push_back(split.estimate.coefficients() * scale);
      s.gain.push_back(s.g.back().squaredNorm());
      const double e = spec.epsilons[k][t];
      s.penalty_w.push_back(e * e * pt * pt * spec.channels[k][t].gain());
      gmax = std::max(gmax, s.gain.back());
    }
    s.rmax = std::log2(1.0 + gmax) + 1.0;
  }
  return out;
}

double qol(const Eigen::VectorXcd& g, const Eigen::VectorXcd& p) {
  return std::norm(g.dot(p));
}

// Re(g^H p) and Im(g^H p) as affine forms over interleaved (re, im) reals.
AffineForm inner_re(const Eigen::VectorXcd& g, int base) {
  AffineForm f;
  for (Eigen::Index j = 0; j < g.size(); ++j) {
    f.add(base + 2 * static_cast<int>(j), g[j].real());
    f.add(base + 2 * static_cast<int>(j) + 1, g[j].imag());
  }
  return f;
}

AffineForm inner_im(const Eigen::VectorXcd& g, int base) {
  AffineForm f;
  for (Eigen::Index j = 0; j < g.size(); ++j) {
    f.add(base + 2 * static_cast<int>(j), -g[j].imag());
    f.add(base + 2 * static_cast<int>(j) + 1, g[j].real());
  }
  return f;
}

void add_norm_squares(std::vector<AffineForm>& squares, int base, int m) {
  for (int j = 0; j < 2 * m; ++j) squares.push_back(AffineForm().add(base + j, 1.0));
}

QolMinorant qol_minorant(const Eigen::VectorXcd& p_n, double xi_n,
                         const Eigen::VectorXcd& g) {
  if (!(xi_n > 0.0)) {
    throw Error(ErrorKind::kInvalidLinearization, "expansion point needs xi > 0");
  }
  const Complex a = g.dot(p_n);  // g^H p_n
  QolMinorant m;
  m.re.resize(g.size());
  m.im.resize(g.size());
  for (Eigen::Index j = 0; j < g.size(); ++j) {
    const Complex c = std::conj(a) * std::conj(g[j]);
    m.re[j] = 2.0 * c.real() / xi_n;
    m.im[j] = -2.0 * c.imag() / xi_n;
  }
  m.xi_coef = -std::norm(a) / (xi_n * xi_n);
  return m;
}

// theta - 1 - Psi(p, xi) <= 0
AffineForm qol_row(const QolMinorant& m, int theta, int p_base, int xi) {
  AffineForm f(-1.0);
  f.add(theta, 1.0);
  for (Eigen::Index j = 0; j < m.re.size(); ++j) {
    f.add(p_base + 2 * static_cast<int>(j), -m.re[j]);
    f.add(p_base + 2 * static_cast<int>(j) + 1, -m.im[j]);
  }
  f.add(xi, -m.xi_coef);
  return f;
}

// omega <= psi*C0 through the concave minorant
// Omega(psi, C0) - ((a dpsi - dC0 / a) / 2)^2, which lies below psi*C0
// everywhere and shares its value and gradient at the expansion point.
void add_bilinear_row(convex::Program& prog, int omega, int psi, int c0,
                      double psi_n, double c0_n, double a, const std::string& label) {
  AffineForm f;
  f.add(omega, 1.0).add(c0, -psi_n).add(psi, -c0_n).shift(psi_n * c0_n);
  AffineForm sq;
  sq.add(psi, 0.5 * a).add(c0, -0.5 / a).shift(-0.5 * a * psi_n + 0.5 * c0_n / a);
  prog.add_quadratic({sq}, f, label);
}

// Scale a of the bilinear correction. Without history a^2 = max(C0_n, 1).
// After a step (dpsi, dC0), a^2 = |dC0 / dpsi| minimizes the correction
// |a dpsi| + |dC0 / a| along that step; any a > 0 keeps the lower bound.
double curvature_scale(double c0_n, double dpsi = 0.0, double dc0 = 0.0) {
  const double base = std::max(c0_n, 1.0);
  if (std::abs(dpsi) < 1e-12 && std::abs(dc0) < 1e-12) return std::sqrt(base);
  const double a2 = std::abs(dpsi) < 1e-12 ? 1e2 * base : std::abs(dc0 / dpsi);
  return std::sqrt(std::clamp(a2, 1e-4 * base, 1e2 * base));
}

Eigen::VectorXcd read_vec(const std::vector<double>& x, int base, int m) {
  Eigen::VectorXcd v(m);
  for (int j = 0; j < m; ++j) v[j] = Complex(x[base + 2 * j], x[base + 2 * j + 1]);
  return v;
}

void write_vec(std::vector<double>& x, int base, const Eigen::VectorXcd& v) {
  for (Eigen::Index j = 0; j < v.size(); ++j) {
    x[base + 2 * j] = v[j].real();
    x[base + 2 * j + 1] = v[j].imag();
  }
}

using Grid = std::vector<std::vector<double>>;

Grid grid(int T, int K, double value = 0.0) {
  return Grid(T, std::vector<double>(K, value));
}

// Unit direction of g, or e_1 for a zero channel.
Eigen::VectorXcd direction(const Eigen::VectorXcd& g) {
  const double n = g.norm();
  if (n > 0.0) return g / n;
  Eigen::VectorXcd e = Eigen::VectorXcd::Zero(g.size());
  e[0] = 1.0;
  return e;
}

struct SlotRates {
  std::vector<double> interference;  // private: sum_{i != k} |g_k^H p_i|^2 + 1
  std::vector<double> interference_c;  // common: sum_i |g_k^H p_i|^2 + 1
  std::vector<double> sinr_p, sinr_c;
};

SlotRates slot_rates(const SlotData& s, const Eigen::VectorXcd& pc,
                     const std::vector<Eigen::VectorXcd>& pk) {
  const int K = static_cast<int>(s.g.size());
  SlotRates r;
  for (int k = 0; k < K; ++k) {
    double total = 1.0;
    for (int i = 0; i < K; ++i) total += qol(s.g[k], pk[i]);
    const double own = qol(s.g[k], pk[k]);
    r.interference.push_back(total - own);
    r.interference_c.push_back(total);
    r.sinr_p.push_back(own / (total - own));
    r.sinr_c.push_back(qol(s.g[k], pc) / total);
  }
  return r;
}

// NOMA: rate at which follower l decodes follower k's message, where
// messages earlier in `order` (stronger followers) still interfere.
double noma_interference(const SlotData& s, const std::vector<Eigen::VectorXcd>& pk,
                         const std::vector<int>& pos, int l, int k) {
  double total = 1.0;
  for (int i = 0; i < static_cast<int>(pk.size()); ++i) {
    if (pos[i] < pos[k]) total += qol(s.g[l], pk[i]);
  }
  return total;
}

std::vector<int> positions(const std::vector<int>& order) {
  std::vector<int> pos(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) pos[order[i]] = static_cast<int>(i);
  return pos;
}

std::vector<int> slot_order(const DownlinkSpec& spec, int t) {
  std::vector<ChannelVector> ch;
  for (int k = 0; k < spec.followers(); ++k) ch.push_back(spec.channels[k][t]);
  return sic_order(ch);
}

// Receivers that decode follower k's unicast message.
std::vector<int> decoders(const std::vector<int>& pos, int k) {
  std::vector<int> out;
  for (int l = 0; l < static_cast<int>(pos.size()); ++l)
    if (pos[l] <= pos[k]) out.push_back(l);
  return out;
}

double payload_need(const DownlinkSpec& spec) {
  return spec.payload_bits / (spec.dt * spec.radio.bandwidth_hz);
}

double qos_need(const DownlinkSpec& spec) { return spec.qos_bps / spec.radio.bandwidth_hz; }

DownlinkVariables empty_vars(int T, int K) {
  DownlinkVariables v;
  v.psi.assign(T, 0.0);
  v.precoders.assign(T, PrecoderMatrix{});
  v.common_rate.assign(T, 0.0);
  v.private_rate = grid(T, K);
  v.alpha = grid(T, K);
  v.theta = grid(T, K);
  v.xi = grid(T, K);
  v.alpha_c = grid(T, K);
  v.theta_c = grid(T, K);
  v.xi_c = grid(T, K);
  v.omega.assign(T, 0.0);
  return v;
}

// ---------------------------------------------------------------------------
// RSMA / MU-LP subproblem

Subproblem build_split(const DownlinkSpec& spec, const DownlinkVariables& cur,
                       const std::vector<SlotData>& data, Scheme scheme,
                       const DownlinkVariables* prev = nullptr) {
  const int T = spec.slots;
  const int K = spec.followers();
  const int M = spec.radio.antennas;
  const double sqrt_pt = std::sqrt(spec.radio.transmit_power_w());
  const double B = spec.radio.bandwidth_hz;
  const double rth = qos_need(spec);

  Subproblem sub;
  auto& prog = sub.program;
  auto& L = sub.layout;
  L.latency = prog.add_variable("latency", 0.0, T + 1.0);
  L.c = std::vector<std::vector<int>>(T);
  L.pk = L.alpha = L.theta = L.xi = L.alpha_c = L.theta_c = L.xi_c = L.power_epi = L.c;

  for (int t = 0; t < T; ++t) {
    const auto& s = data[t];
    const std::string tag = "[" + std::to_string(t) + "]";
    L.psi.push_back(prog.add_variable("psi" + tag, 0.0, 1.0));
    L.omega.push_back(prog.add_variable("omega" + tag, -s.rmax, s.rmax));
    L.c0.push_back(prog.add_variable("c0" + tag, 0.0, s.rmax));
    L.pc.push_back(prog.add_block("pc" + tag, 2 * M, -2.0, 2.0));
    for (int k = 0; k < K; ++k) {
      const std::string tk = "[" + std::to_string(t) + "," + std::to_string(k) + "]";
      const double gcap = 2.0 + 2.0 * s.gain[k];
      L.c[t].push_back(prog.add_variable("c" + tk, 0.0, s.rmax));
      if (scheme == Scheme::kMulp) prog.fix(L.c[t][k], 0.0);
      L.pk[t].push_back(prog.add_block("p" + tk, 2 * M, -2.0, 2.0));
      L.alpha[t].push_back(prog.add_variable("alpha" + tk, -1.0, s.rmax));
      L.theta[t].push_back(prog.add_variable("theta" + tk, 0.0, gcap));
      L.xi[t].push_back(prog.add_variable("xi" + tk, 0.5, gcap));
      L.alpha_c[t].push_back(prog.add_variable("alpha_c" + tk, -1.0, s.rmax));
      L.theta_c[t].push_back(prog.add_variable("theta_c" + tk, 0.0, gcap));
      L.xi_c[t].push_back(prog.add_variable("xi_c" + tk, 0.5, gcap));
      L.power_epi[t].push_back(prog.add_variable("s" + tk, 0.0, 2.0));
    }
  }

  const auto& pcur = cur.precoders;
  for (int t = 0; t < T; ++t) {
    const auto& s = data[t];
    const std::string tag = "[" + std::to_string(t) + "]";
    const double c0_n = cur.common_rate[t] / B;
    prog.add_linear(AffineForm().add(L.psi[t], t + 1.0).add(L.latency, -1.0), "latency" + tag);
    const double a = prev ? curvature_scale(c0_n, cur.psi[t] - prev->psi[t],
                                            c0_n - prev->common_rate[t] / B)
                          : curvature_scale(c0_n);
    add_bilinear_row(prog, L.omega[t], L.psi[t], L.c0[t], cur.psi[t], c0_n, a, "bilinear" + tag);
    std::vector<AffineForm> power;
    add_norm_squares(power, L.pc[t], M);
    const Eigen::VectorXcd pc_n = pcur[t].common / sqrt_pt;
    for (int k = 0; k < K; ++k) {
      const std::string tk = "[" + std::to_string(t) + "," + std::to_string(k) + "]";
      const Eigen::VectorXcd pk_n = pcur[t].priv[k] / sqrt_pt;
      prog.add_linear(AffineForm(rth).add(L.c[t][k], -1.0).add(L.alpha[t][k], -1.0), "qos" + tk);
      prog.add_power_cone(L.alpha[t][k], L.theta[t][k], "rate" + tk);
      prog.add_linear(qol_row(qol_minorant(pk_n, cur.xi[t][k], s.g[k]), L.theta[t][k],
                              L.pk[t][k], L.xi[t][k]),
                      "sinr" + tk);
      std::vector<AffineForm> interf;
      for (int i = 0; i < K; ++i) {
        if (i == k) continue;
        interf.push_back(inner_re(s.g[k], L.pk[t][i]));
        interf.push_back(inner_im(s.g[k], L.pk[t][i]));
      }
      prog.add_quadratic(interf, AffineForm(1.0).add(L.xi[t][k], -1.0), "interference" + tk);

      AffineForm split;
      split.add(L.c0[t], 1.0).add(L.alpha_c[t][k], -1.0);
      for (int j = 0; j < K; ++j) split.add(L.c[t][j], 1.0);
      prog.add_linear(split, "common" + tk);
      prog.add_power_cone(L.alpha_c[t][k], L.theta_c[t][k], "rate_c" + tk);
      prog.add_linear(qol_row(qol_minorant(pc_n, cur.xi_c[t][k], s.g[k]), L.theta_c[t][k],
                              L.pc[t], L.xi_c[t][k]),
                      "sinr_c" + tk);
      std::vector<AffineForm> interf_c;
      for (int i = 0; i < K; ++i) {
        interf_c.push_back(inner_re(s.g[k], L.pk[t][i]));
        interf_c.push_back(inner_im(s.g[k], L.pk[t][i]));
      }
      prog.add_quadratic(interf_c, AffineForm(1.0).add(L.xi_c[t][k], -1.0),
                         "interference_c" + tk);

      std::vector<AffineForm> own;
      add_norm_squares(own, L.pk[t][k], M);
      prog.add_quadratic(own, AffineForm().add(L.power_epi[t][k], -1.0), "epigraph" + tk);
      add_norm_squares(power, L.pk[t][k], M);

      if (s.penalty_w[k] > 0.0 && spec.q_h > 0.0) {
        prog.add_objective_square(
            AffineForm().add(L.power_epi[t][k], std::sqrt(spec.q_h * s.penalty_w[k])));
      }
    }
    prog.add_quadratic(power, AffineForm(-1.0), "power" + tag);
  }
  AffineForm payload(payload_need(spec));
  for (int t = 0; t < T; ++t) payload.add(L.omega[t], -1.0);
  prog.add_linear(payload, "payload");
  prog.add_objective_linear(L.latency, spec.q_t);

  // Expansion point in program coordinates.
  auto& x = sub.start;
  x.assign(prog.num_variables(), 0.0);
  x[L.latency] = cur.latency_bound;
  for (int t = 0; t < T; ++t) {
    x[L.psi[t]] = cur.psi[t];
    x[L.omega[t]] = cur.omega[t] / B;
    x[L.c0[t]] = cur.common_rate[t] / B;
    write_vec(x, L.pc[t], pcur[t].common / sqrt_pt);
    for (int k = 0; k < K; ++k) {
      const Eigen::VectorXcd pk_n = pcur[t].priv[k] / sqrt_pt;
      x[L.c[t][k]] = cur.private_rate[t][k] / B;
      write_vec(x, L.pk[t][k], pk_n);
      x[L.alpha[t][k]] = cur.alpha[t][k];
      x[L.theta[t][k]] = cur.theta[t][k];
      x[L.xi[t][k]] = cur.xi[t][k];
      x[L.alpha_c[t][k]] = cur.alpha_c[t][k];
      x[L.theta_c[t][k]] = cur.theta_c[t][k];
      x[L.xi_c[t][k]] = cur.xi_c[t][k];
      x[L.power_epi[t][k]] = pk_n.squaredNorm() * (1.0 + 1e-6) + 1e-12;
    }
  }
  return sub;
}

DownlinkVariables extract_split(const DownlinkSpec& spec, const Subproblem& sub,
                                const std::vector<double>& x) {
  const int T = spec.slots;
  const int K = spec.followers();
  const int M = spec.radio.antennas;
  const double sqrt_pt = std::sqrt(spec.radio.transmit_power_w());
  const double B = spec.radio.bandwidth_hz;
  const auto& L = sub.layout;
  DownlinkVariables v = empty_vars(T, K);
  v.latency_bound = x[L.latency];
  for (int t = 0; t < T; ++t) {
    v.psi[t] = x[L.psi[t]];
    v.omega[t] = x[L.omega[t]] * B;
    v.common_rate[t] = x[L.c0[t]] * B;
    v.precoders[t].common = read_vec(x, L.pc[t], M) * sqrt_pt;
    v.precoders[t].priv.resize(K);
    for (int k = 0; k < K; ++k) {
      v.precoders[t].priv[k] = read_vec(x, L.pk[t][k], M) * sqrt_pt;
      v.private_rate[t][k] = x[L.c[t][k]] * B;
      v.alpha[t][k] = x[L.alpha[t][k]];
      v.theta[t][k] = x[L.theta[t][k]];
      v.xi[t][k] = x[L.xi[t][k]];
      v.alpha_c[t][k] = x[L.alpha_c[t][k]];
      v.theta_c[t][k] = x[L.theta_c[t][k]];
      v.xi_c[t][k] = x[L.xi_c[t][k]];
    }
  }
  return v;
}

// ---------------------------------------------------------------------------
// NOMA subproblem. Pair auxiliaries are rebuilt at their equality values from
// the precoders of the expansion point, which keeps that point feasible.

struct NomaLayout {
  int latency = -1;
  std::vector<std::vector<int>> psi, omega, rate, pk, epi;  // [t][k]
};

struct NomaProgram {
  convex::Program program;
  NomaLayout layout;
  std::vector<double> start;
};

NomaProgram build_noma(const DownlinkSpec& spec, const DownlinkVariables& cur,
                       const std::vector<SlotData>& data,
                       const DownlinkVariables* prev = nullptr) {
  const int T = spec.slots;
  const int K = spec.followers();
  const int M = spec.radio.antennas;
  const double sqrt_pt = std::sqrt(spec.radio.transmit_power_w());
  const double B = spec.radio.bandwidth_hz;
  const double rth = qos_need(spec);

  NomaProgram np;
  auto& prog = np.program;
  auto& L = np.layout;
  auto& x = np.start;
  L.latency = prog.add_variable("latency", 0.0, T + 1.0);
  L.psi = L.omega = L.rate = L.pk = L.epi = std::vector<std::vector<int>>(T);
  std::vector<std::pair<int, double>> start_values{{L.latency, cur.latency_bound}};

  for (int t = 0; t < T; ++t) {
    const auto& s = data[t];
    const auto pos = positions(slot_order(spec, t));
    std::vector<Eigen::VectorXcd> pk_n(K);
    for (int k = 0; k < K; ++k) pk_n[k] = cur.precoders[t].priv[k] / sqrt_pt;
    std::vector<AffineForm> power;
    for (int k = 0; k < K; ++k) {
      const std::string tk = "[" + std::to_string(t) + "," + std::to_string(k) + "]";
      L.psi[t].push_back(prog.add_variable("psi" + tk, 0.0, 1.0));
      L.omega[t].push_back(prog.add_variable("omega" + tk, -s.rmax, s.rmax));
      L.rate[t].push_back(prog.add_variable("d" + tk, 0.0, s.rmax));
      L.pk[t].push_back(prog.add_block("p" + tk, 2 * M, -2.0, 2.0));
      L.epi[t].push_back(prog.add_variable("s" + tk, 0.0, 2.0));
      start_values.emplace_back(L.psi[t][k], cur.unicast_psi[t][k]);
      start_values.emplace_back(L.rate[t][k], cur.private_rate[t][k] / B);
      start_values.emplace_back(L.epi[t][k], pk_n[k].squaredNorm() * (1.0 + 1e-6) + 1e-12);
    }
    for (int k = 0; k < K; ++k) {
      const std::string tk = "[" + std::to_string(t) + "," + std::to_string(k) + "]";
      const double d_n = cur.private_rate[t][k] / B;
      const double psi_n = cur.unicast_psi[t][k];
      // omega starts at the minorant value, which is exact at the point.
      start_values.emplace_back(L.omega[t][k], psi_n * d_n);
      prog.add_linear(AffineForm().add(L.psi[t][k], t + 1.0).add(L.latency, -1.0), "latency" + tk);
      const double a = prev ? curvature_scale(d_n, psi_n - prev->unicast_psi[t][k],
                                              d_n - prev->private_rate[t][k] / B)
                            : curvature_scale(d_n);
      add_bilinear_row(prog, L.omega[t][k], L.psi[t][k], L.rate[t][k], psi_n, d_n, a,
                       "bilinear" + tk);
      for (int l : decoders(pos, k)) {
        const std::string tl = tk + "@" + std::to_string(l);
        const double gcap = 2.0 + 2.0 * s.gain[l];
        const int a = prog.add_variable("alpha" + tl, -1.0, s.rmax);
        const int th = prog.add_variable("theta" + tl, 0.0, gcap);
        const int xi = prog.add_variable("xi" + tl, 0.5, gcap);
        const double xi_n = noma_interference(s, pk_n, pos, l, k);
        const double th_n = 1.0 + qol(s.g[l], pk_n[k]) / xi_n;
        start_values.emplace_back(a, std::log2(th_n));
        start_values.emplace_back(th, th_n);
        start_values.emplace_back(xi, xi_n);
        prog.add_linear(AffineForm(rth).add(L.rate[t][k], 1.0).add(a, -1.0), "qos" + tl);
        prog.add_power_cone(a, th, "rate" + tl);
        prog.add_linear(qol_row(qol_minorant(pk_n[k], xi_n, s.g[l]), th, L.pk[t][k], xi),
                        "sinr" + tl);
        std::vector<AffineForm> interf;
        for (int i = 0; i < K; ++i) {
          if (pos[i] >= pos[k]) continue;
          interf.push_back(inner_re(s.g[l], L.pk[t][i]));
          interf.push_back(inner_im(s.g[l], L.pk[t][i]));
        }
        prog.add_quadratic(interf, AffineForm(1.0).add(xi, -1.0), "interference" + tl);
      }
      std::vector<AffineForm> own;
      add_norm_squares(own, L.pk[t][k], M);
      prog.add_quadratic(own, AffineForm().add(L.epi[t][k], -1.0), "epigraph" + tk);
      add_norm_squares(power, L.pk[t][k], M);
      if (s.penalty_w[k] > 0.0 && spec.q_h > 0.0) {
        prog.add_objective_square(
            AffineForm().add(L.epi[t][k], std::sqrt(spec.q_h * s.penalty_w[k])));
      }
    }
    prog.add_quadratic(power, AffineForm(-1.0), "power[" + std::to_string(t) + "]");
  }
  for (int k = 0; k < K; ++k) {
    AffineForm payload(payload_need(spec));
    for (int t = 0; t < T; ++t) payload.add(L.omega[t][k], -1.0);
    prog.add_linear(payload, "payload[" + std::to_string(k) + "]");
  }
  prog.add_objective_linear(L.latency, spec.q_t);

  x.assign(prog.num_variables(), 0.0);
  for (const auto& [i, v] : start_values) x[i] = v;
  for (int t = 0; t < T; ++t)
    for (int k = 0; k < K; ++k)
      write_vec(x, L.pk[t][k], cur.precoders[t].priv[k] / sqrt_pt);
  return np;
}

// Fills NOMA auxiliaries (own-pair values) from precoders and rates.
void fill_noma_aux(const DownlinkSpec& spec, const std::vector<SlotData>& data,
                   DownlinkVariables& v) {
  const int K = spec.followers();
  const double sqrt_pt = std::sqrt(spec.radio.transmit_power_w());
  for (int t = 0; t < spec.slots; ++t) {
    const auto pos = positions(slot_order(spec, t));
    std::vector<Eigen::VectorXcd> pk(K);
    for (int k = 0; k < K; ++k) pk[k] = v.precoders[t].priv[k] / sqrt_pt;
    double psi = 0.0;
    for (int k = 0; k < K; ++k) {
      const double xi = noma_interference(data[t], pk, pos, k, k);
      v.xi[t][k] = xi;
      v.theta[t][k] = 1.0 + qol(data[t].g[k], pk[k]) / xi;
      v.alpha[t][k] = std::log2(v.theta[t][k]);
      psi = std::max(psi, v.unicast_psi[t][k]);
    }
    v.psi[t] = psi;
  }
}

DownlinkVariables extract_noma(const DownlinkSpec& spec, const NomaProgram& np,
                               const std::vector<double>& x,
                               const std::vector<SlotData>& data) {
  const int T = spec.slots;
  const int K = spec.followers();
  const int M = spec.radio.antennas;
  const double sqrt_pt = std::sqrt(spec.radio.transmit_power_w());
  const double B = spec.radio.bandwidth_hz;
  const auto& L = np.layout;
  DownlinkVariables v = empty_vars(T, K);
  v.unicast_psi = grid(T, K);
  v.latency_bound = x[L.latency];
  for (int t = 0; t < T; ++t) {
    v.precoders[t] = PrecoderMatrix::zeros(M, K);
    double omega = kInf;
    for (int k = 0; k < K; ++k) {
      v.precoders[t].priv[k] = read_vec(x, L.pk[t][k], M) * sqrt_pt;
      v.private_rate[t][k] = x[L.rate[t][k]] * B;
      v.unicast_psi[t][k] = x[L.psi[t][k]];
      omega = std::min(omega, x[L.omega[t][k]] * B);
    }
    v.omega[t] = omega;
  }
  fill_noma_aux(spec, data, v);
  return v;
}

// ---------------------------------------------------------------------------
// Initial points

// Private MRT precoders with power fraction q each; the common precoder takes
// the remainder along the normalized sum of channel directions.
struct SplitInit {
  Eigen::VectorXcd pc;
  std::vector<Eigen::VectorXcd> pk;
};

SplitInit split_init(const SlotData& s, double q, int m) {
  const int K = static_cast<int>(s.g.size());
  SplitInit out;
  Eigen::VectorXcd sum = Eigen::VectorXcd::Zero(m);
  for (int k = 0; k < K; ++k) {
    const Eigen::VectorXcd d = direction(s.g[k]);
    out.pk.push_back(std::sqrt(q) * d);
    sum += d;
  }
  const double rest = std::max(0.0, 1.0 - 1e-3 - K * q);
  out.pc = std::sqrt(rest) * direction(sum);
  return out;
}

DownlinkVariables init_split(const DownlinkSpec& spec, const std::vector<SlotData>& data) {
  const int T = spec.slots;
  const int K = spec.followers();
  const int M = spec.radio.antennas;
  const double sqrt_pt = std::sqrt(spec.radio.transmit_power_w());
  const double B = spec.radio.bandwidth_hz;
  const double rth = qos_need(spec);
  std::vector<double> fractions;
  for (double q = 1e-4; q <= (1.0 - 1e-3) / (K + 1); q *= 1.25) fractions.push_back(q);

  DownlinkVariables v = empty_vars(T, K);
  v.latency_bound = T;
  for (int t = 0; t < T; ++t) {
    const auto& s = data[t];
    bool ok = false;
    for (double q : fractions) {
      const auto init = split_init(s, q, M);
      const auto r = slot_rates(s, init.pc, init.pk);
      bool meets = true;
      for (int k = 0; k < K; ++k) meets = meets && std::log2(1.0 + r.sinr_p[k]) >= rth;
      if (!meets) continue;
      double rc = kInf;
      for (int k = 0; k < K; ++k) {
        v.xi[t][k] = r.interference[k];
        v.theta[t][k] = 1.0 + r.sinr_p[k];
        v.alpha[t][k] = std::log2(v.theta[t][k]);
        v.xi_c[t][k] = r.interference_c[k];
        v.theta_c[t][k] = 1.0 + r.sinr_c[k];
        v.alpha_c[t][k] = std::log2(v.theta_c[t][k]);
        rc = std::min(rc, v.alpha_c[t][k]);
      }
      v.precoders[t].common = init.pc * sqrt_pt;
      v.precoders[t].priv.clear();
      for (const auto& p : init.pk) v.precoders[t].priv.push_back(p * sqrt_pt);
      v.common_rate[t] = rc * B;
      v.omega[t] = rc * B;
      v.psi[t] = 1.0;
      ok = true;
      break;
    }
    if (!ok) {
      throw Error(ErrorKind::kQosInfeasible,
                  "QoS rate cannot be met in slot " + std::to_string(t + 1));
    }
  }
  return v;
}

DownlinkVariables init_noma(const DownlinkSpec& spec, const std::vector<SlotData>& data) {
  const int T = spec.slots;
  const int K = spec.followers();
  const int M = spec.radio.antennas;
  const double sqrt_pt = std::sqrt(spec.radio.transmit_power_w());
  const double B = spec.radio.bandwidth_hz;
  const double rth = qos_need(spec);
  const std::vector<double> ratios{1.0, 0.5, 0.3, 0.1, 0.03, 0.01, 3e-3, 1e-3, 3e-4, 1e-4};

  DownlinkVariables v = empty_vars(T, K);
  v.unicast_psi = grid(T, K, 1.0);
  v.latency_bound = T;
  for (int t = 0; t < T; ++t) {
    const auto& s = data[t];
    const auto order = slot_order(spec, t);
    const auto pos = positions(order);
    double best = -kInf;
    for (double rho : ratios) {
      // SIC position j gets weight rho^(K-1-j): the weakest follower the most.
      std::vector<double> w(K);
      double total = 0.0;
      for (int k = 0; k < K; ++k) {
        w[k] = std::pow(rho, K - 1 - pos[k]);
        total += w[k];
      }
      std::vector<Eigen::VectorXcd> pk(K);
      for (int k = 0; k < K; ++k) pk[k] = std::sqrt((1.0 - 1e-3) * w[k] / total) * direction(s.g[k]);
      double worst = kInf;
      std::vector<double> d(K);
      bool meets = true;
      for (int k = 0; k < K; ++k) {
        double r = kInf;
        for (int l : decoders(pos, k)) {
          const double xi = noma_interference(s, pk, pos, l, k);
          r = std::min(r, std::log2(1.0 + qol(s.g[l], pk[k]) / xi));
        }
        d[k] = r - rth;
        meets = meets && d[k] >= 0.0;
        worst = std::min(worst, d[k]);
      }
      if (!meets || worst <= best) continue;
      best = worst;
      v.precoders[t] = PrecoderMatrix::zeros(M, K);
      for (int k = 0; k < K; ++k) {
        v.precoders[t].priv[k] = pk[k] * sqrt_pt;
        v.private_rate[t][k] = d[k] * B;
      }
      v.omega[t] = worst * B;
    }
    if (best == -kInf) {
      throw Error(ErrorKind::kQosInfeasible,
                  "QoS rate cannot be met in slot " + std::to_string(t + 1));
    }
  }
  fill_noma_aux(spec, data, v);
  return v;
}

void check_vars(const DownlinkSpec& spec, const DownlinkVariables& v) {
  const int T = spec.slots;
  const int K = spec.followers();
  bool ok = v.slots() == T && static_cast<int>(v.precoders.size()) == T &&
            static_cast<int>(v.common_rate.size()) == T &&
            static_cast<int>(v.omega.size()) == T &&
            static_cast<int>(v.private_rate.size()) == T &&
            static_cast<int>(v.xi.size()) == T && static_cast<int>(v.xi_c.size()) == T;
  for (int t = 0; ok && t < T; ++t) {
    ok = v.precoders[t].followers() == K && v.precoders[t].antennas() == spec.radio.antennas &&
         static_cast<int>(v.xi[t].size()) == K && static_cast<int>(v.xi_c[t].size()) == K;
  }
  if (!ok) {
    throw Error(ErrorKind::kInvalidLinearization, "iterate does not match the spec dimensions");
  }
}

double penalty_of(const DownlinkSpec& spec, const DownlinkVariables& v) {
  double total = 0.0;
  for (int t = 0; t < spec.slots; ++t) {
    std::vector<double> eps;
    std::vector<ChannelVector> ch;
    for (int k = 0; k < spec.followers(); ++k) {
      eps.push_back(spec.epsilons[k][t]);
      ch.push_back(spec.channels[k][t]);
    }
    total += gain_error_penalty(v.precoders[t], eps, ch);
  }
  return total;
}

int last_scheduled(const std::vector<double>& psi) {
  for (int t = static_cast<int>(psi.size()); t > 0; --t)
    if (psi[t - 1] > 0.5) return t;
  return 0;
}

// Threshold-then-greedy rounding of one schedule against per-slot rates.
std::vector<double> round_one(const std::vector<double>& psi, const std::vector<double>& rate,
                              double dt, double need_bits) {
  std::vector<double> out(psi.size());
  double delivered = 0.0;
  for (std::size_t t = 0; t < psi.size(); ++t) {
    out[t] = psi[t] >= 0.5 ? 1.0 : 0.0;
    delivered += out[t] * rate[t] * dt;
  }
  for (std::size_t t = 0; t < psi.size() && delivered < need_bits; ++t) {
    if (out[t] == 0.0) {
      out[t] = 1.0;
      delivered += rate[t] * dt;
    }
  }
  if (delivered < need_bits) {
    throw Error(ErrorKind::kPayloadInfeasible,
                "all slots together deliver " + std::to_string(delivered) + " of " +
                    std::to_string(need_bits) + " bits");
  }
  return out;
}

double delivered(const DownlinkSpec& spec, const DownlinkVariables& v) {
  const int K = spec.followers();
  if (!v.unicast_psi.empty()) {
    double worst = kInf;
    for (int k = 0; k < K; ++k) {
      double bits = 0.0;
      for (int t = 0; t < spec.slots; ++t) bits += v.unicast_psi[t][k] * v.private_rate[t][k] * spec.dt;
      worst = std::min(worst, bits);
    }
    return worst;
  }
  double bits = 0.0;
  for (int t = 0; t < spec.slots; ++t) bits += v.psi[t] * v.common_rate[t] * spec.dt;
  return bits;
}

}  // namespace

// ---------------------------------------------------------------------------
// Public API

double DownlinkSpec::noise_w() const {
  return noise_power(radio.noise_dbm_per_hz, radio.bandwidth_hz);
}

void DownlinkSpec::validate() const {
  radio.validate();
  if (slots < 1 || !(dt > 0.0) || !(payload_bits > 0.0) || !(qos_bps >= 0.0) ||
      !(q_t >= 0.0) || !(q_h >= 0.0)) {
    throw Error(ErrorKind::kInvalidConfig,
                "downlink spec needs T >= 1, dt > 0, B0 > 0, R_th >= 0 and nonnegative weights");
  }
  if (followers() != radio.followers || static_cast<int>(epsilons.size()) != followers()) {
    throw Error(ErrorKind::kDimensionMismatch, "channels/epsilons must have K rows");
  }
  for (int k = 0; k < followers(); ++k) {
    if (static_cast<int>(channels[k].size()) != slots ||
        static_cast<int>(epsilons[k].size()) != slots) {
      throw Error(ErrorKind::kDimensionMismatch,
                  "follower " + std::to_string(k) + " needs one channel and epsilon per slot");
    }
    for (int t = 0; t < slots; ++t) {
      if (channels[k][t].antennas() != radio.antennas) {
        throw Error(ErrorKind::kDimensionMismatch, "channel length differs from antenna count");
      }
    }
  }
}

DownlinkSpec spec_from_distances(const std::vector<std::vector<double>>& distances,
                                 const RadioConfig& radio, double epsilon) {
  DownlinkSpec spec;
  spec.radio = radio;
  spec.radio.followers = static_cast<int>(distances.size());
  spec.slots = distances.empty() ? 0 : static_cast<int>(distances[0].size());
  for (const auto& row : distances) {
    std::vector<ChannelVector> ch;
    for (double d : row) ch.push_back(path_loss_channel(d, spec.radio));
    spec.channels.push_back(std::move(ch));
    spec.epsilons.emplace_back(row.size(), epsilon);
  }
  return spec;
}

const char* to_string(Scheme scheme) {
  switch (scheme) {
    case Scheme::kRsma: return "rsma";
    case Scheme::kMulp: return "mulp";
    case Scheme::kNoma: return "noma";
  }
  return "?";
}

Scheme parse_scheme(const std::string& name) {
  if (name == "rsma") return Scheme::kRsma;
  if (name == "mulp") return Scheme::kMulp;
  if (name == "noma") return Scheme::kNoma;
  throw Error(ErrorKind::kInvalidConfig, "unknown scheme '" + name + "'");
}

const char* to_string(ScaStatus status) {
  return status == ScaStatus::kConverged ? "converged" : "iteration-limit";
}

ScaOptions default_sca_options() {
  ScaOptions o;
  o.solver.max_iters = 500;
  return o;
}

BilinearMinorant minorant_bilinear(double psi_n, double c0_n) {
  return BilinearMinorant{psi_n, c0_n};
}

QolMinorant minorant_qol(const Eigen::VectorXcd& p_n, double xi_n, const ChannelVector& h) {
  if (p_n.size() != h.antennas()) {
    throw Error(ErrorKind::kDimensionMismatch, "precoder and channel lengths differ");
  }
  return qol_minorant(p_n, xi_n, h.coefficients());
}

std::vector<int> sic_order(const std::vector<ChannelVector>& channels) {
  std::vector<int> order(channels.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return channels[a].gain() > channels[b].gain();
  });
  return order;
}

DownlinkVariables init_feasible(const DownlinkSpec& spec, Scheme scheme) {
  spec.validate();
  const auto data = normalize(spec);
  return scheme == Scheme::kNoma ? init_noma(spec, data) : init_split(spec, data);
}

Subproblem build_subproblem(const DownlinkSpec& spec, const DownlinkVariables& current,
                            Scheme scheme) {
  spec.validate();
  if (scheme == Scheme::kNoma) {
    throw Error(ErrorKind::kInvalidConfig, "the unicast baseline has its own program");
  }
  check_vars(spec, current);
  return build_split(spec, current, normalize(spec), scheme);
}

double downlink_objective(const DownlinkSpec& spec, const DownlinkVariables& v) {
  return spec.q_t * v.latency_bound + spec.q_h * penalty_of(spec, v);
}

double original_violation(const DownlinkSpec& spec, const DownlinkVariables& v,
                          Scheme scheme) {
  check_vars(spec, v);
  const auto data = normalize(spec);
  const int K = spec.followers();
  const double sqrt_pt = std::sqrt(spec.radio.transmit_power_w());
  const double B = spec.radio.bandwidth_hz;
  const double rth = qos_need(spec);
  double worst = -kInf;
  for (int t = 0; t < spec.slots; ++t) {
    const auto& s = data[t];
    std::vector<Eigen::VectorXcd> pk(K);
    for (int k = 0; k < K; ++k) pk[k] = v.precoders[t].priv[k] / sqrt_pt;
    const double power = v.precoders[t].total_power() / (sqrt_pt * sqrt_pt);
    worst = std::max(worst, power - 1.0);
    if (scheme == Scheme::kNoma) {
      const auto pos = positions(slot_order(spec, t));
      for (int k = 0; k < K; ++k) {
        const double psi = v.unicast_psi[t][k];
        const double d = v.private_rate[t][k] / B;
        worst = std::max(worst, psi * (t + 1.0) - v.latency_bound);
        for (int l : decoders(pos, k)) {
          const double xi = noma_interference(s, pk, pos, l, k);
          worst = std::max(worst, d + rth - std::log2(1.0 + qol(s.g[l], pk[k]) / xi));
        }
      }
      continue;
    }
    const auto r = slot_rates(s, v.precoders[t].common / sqrt_pt, pk);
    const double c0 = v.common_rate[t] / B;
    double c_sum = 0.0;
    for (int k = 0; k < K; ++k) c_sum += v.private_rate[t][k] / B;
    worst = std::max(worst, v.psi[t] * (t + 1.0) - v.latency_bound);
    worst = std::max(worst, (v.omega[t] / B - v.psi[t] * c0) / std::max(1.0, c0));
    for (int k = 0; k < K; ++k) {
      // (25a)/(26c) as stated and the rate chains they feed.
      worst = std::max(worst, (v.theta[t][k] - 1.0 - qol(s.g[k], pk[k]) / v.xi[t][k]) /
                                  std::max(1.0, v.theta[t][k]));
      worst = std::max(worst, (v.theta_c[t][k] - 1.0 -
                               qol(s.g[k], v.precoders[t].common / sqrt_pt) / v.xi_c[t][k]) /
                                  std::max(1.0, v.theta_c[t][k]));
      worst = std::max(worst, rth - v.private_rate[t][k] / B - std::log2(1.0 + r.sinr_p[k]));
      worst = std::max(worst, c0 + c_sum - std::log2(1.0 + r.sinr_c[k]));
    }
  }
  return worst;
}

DownlinkVariables round_schedule(const DownlinkSpec& spec, const DownlinkVariables& vars) {
  DownlinkVariables out = vars;
  const int T = spec.slots;
  if (!vars.unicast_psi.empty()) {
    const int K = spec.followers();
    for (int k = 0; k < K; ++k) {
      std::vector<double> psi(T), rate(T);
      for (int t = 0; t < T; ++t) {
        psi[t] = vars.unicast_psi[t][k];
        rate[t] = vars.private_rate[t][k];
      }
      const auto r = round_one(psi, rate, spec.dt, spec.payload_bits);
      for (int t = 0; t < T; ++t) out.unicast_psi[t][k] = r[t];
    }
    for (int t = 0; t < T; ++t) {
      out.psi[t] = *std::max_element(out.unicast_psi[t].begin(), out.unicast_psi[t].end());
      double omega = kInf;
      for (int k = 0; k < K; ++k)
        omega = std::min(omega, out.unicast_psi[t][k] * out.private_rate[t][k]);
      out.omega[t] = omega;
    }
  } else {
    out.psi = round_one(vars.psi, vars.common_rate, spec.dt, spec.payload_bits);
    for (int t = 0; t < T; ++t) out.omega[t] = out.psi[t] * out.common_rate[t];
  }
  out.latency_bound = last_scheduled(out.psi);
  return out;
}

ScaReport sca_solve(const DownlinkSpec& spec, const ScaOptions& options, Scheme scheme) {
  spec.validate();
  const auto data = normalize(spec);
  ScaReport report;
  report.scheme = scheme;
  DownlinkVariables cur =
      scheme == Scheme::kNoma ? init_noma(spec, data) : init_split(spec, data);

  // The initial point only enters the trace when it already carries the payload.
  const double need = spec.payload_bits / spec.dt;
  double best = kInf;
  double omega_sum = 0.0;
  for (double w : cur.omega) omega_sum += w;
  if (omega_sum >= need) {
    best = downlink_objective(spec, cur);
    report.iterates.push_back({0, cur.latency_bound, best, original_violation(spec, cur, scheme)});
  }

  DownlinkVariables prev;
  bool have_prev = false;
  for (int n = 1; n <= options.max_iters; ++n) {
    convex::Solution sol;
    DownlinkVariables next;
    double program_violation = 0.0;
    if (scheme == Scheme::kNoma) {
      const auto np = build_noma(spec, cur, data, have_prev ? &prev : nullptr);
      sol = convex::solve(np.program, np.start, options.solver);
      program_violation = np.program.max_violation(sol.x);
      if (sol.status != convex::SolveStatus::kInfeasible) next = extract_noma(spec, np, sol.x, data);
    } else {
      const auto sub = build_split(spec, cur, data, scheme, have_prev ? &prev : nullptr);
      sol = convex::solve(sub.program, sub.start, options.solver);
      program_violation = sub.program.max_violation(sol.x);
      if (sol.status != convex::SolveStatus::kInfeasible) next = extract_split(spec, sub, sol.x);
    }
    const bool usable = sol.status != convex::SolveStatus::kInfeasible &&
                        program_violation <= options.solver.feas_tol;
    if (!usable) {
      if (report.iterates.empty()) {
        throw Error(ErrorKind::kPayloadInfeasible,
                    std::string("no schedule delivers the payload (") + to_string(scheme) + ")");
      }
      break;
    }
    double obj = downlink_objective(spec, next);
    // Keep the better of the new solution and the previous point.
    if (obj > best) {
      next = cur;
      obj = best;
    }
    const double step = std::abs(next.latency_bound - cur.latency_bound);
    prev = cur;
    have_prev = true;
    report.iterates.push_back({n, next.latency_bound, obj, original_violation(spec, next, scheme)});
    best = obj;
    cur = std::move(next);
    if (step < options.tol) {
      report.status = ScaStatus::kConverged;
      break;
    }
  }
  report.relaxed = cur;
  report.final = round_schedule(spec, cur);
  report.latency_index = last_scheduled(report.final.psi);
  report.latency_s = report.latency_index * spec.dt;
  report.penalty = penalty_of(spec, report.final);
  report.delivered_bits = delivered(spec, report.final);
  return report;
}

ScaReport baseline_mulp(const DownlinkSpec& spec, const ScaOptions& options) {
  return sca_solve(spec, options, Scheme::kMulp);
}

ScaReport baseline_noma(const DownlinkSpec& spec, const ScaOptions& options) {
  return sca_solve(spec, options, Scheme::kNoma);
}

ScaReport solve_downlink(const DownlinkSpec& spec, Scheme scheme, const ScaOptions& options) {
  return sca_solve(spec, options, scheme);
}

}  // namespace rsma_iov
