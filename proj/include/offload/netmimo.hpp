#pragma once

#include "offload/sca.hpp"

namespace offload {

struct NetMimoSettings {
  bool coop = true;
  bool block_diag = false;  // forces [Q_j] off-diagonal blocks to zero
  std::optional<double> lambda;  // J/s; config value when unset
  double gamma0 = 1.0, alpha = 1e-5, delta = 1e-3;
  int max_outer = 500;
  double prox_scale = 1e-6, gamma_floor = 1e-8;
  SolveOptions sub;
  std::function<void(int, double, const SubSolution&)> progress;
};

// log2 det(I + G^H R^-1 G Q_j) with interference from every other active MU.
inline double coop_rate(const SystemConfig& c, const ChannelSet& ch, const std::vector<CMat>& q, int j) {
  Iterate z;
  z.coop = true;
  z.q_dl = q;
  return downlink_rate(c, ch, z, j);
}

inline void restack(const SystemConfig& c, ChannelSet& ch) {
  ch.g_stacked.resize(ch.n_users);
  for (int u = 0; u < ch.n_users; ++u) {
    ch.g_stacked[u] = CMat(c.n_rx, c.n_cells * c.n_tx);
    for (int n = 0; n < c.n_cells; ++n) ch.g_stacked[u].middleCols(n * c.n_tx, c.n_tx) = ch.dl[u][n];
  }
}

// Copy of the channel set with every cross link zeroed.
inline ChannelSet without_cross_links(const SystemConfig& c, const ChannelSet& ch) {
  ChannelSet out = ch;
  for (int u = 0; u < out.n_users; ++u)
    for (int n = 0; n < c.n_cells; ++n)
      if (n != c.cell_of(u)) {
        out.ul[u][n].setZero();
        out.dl[u][n].setZero();
      }
  restack(c, out);
  return out;
}

// Latency of the two phases for one MU.
inline std::pair<double, double> phase_latency(const SystemConfig& c, const ChannelSet& ch, const Iterate& z, int u) {
  Latency l = latency_components(c, ch, z, u);
  return {l.ul + l.exe + l.bh_ul + l.bh_dl, l.dl};
}

// White full-power covariances, equal shares, T1/T2 1% above the resulting maxima.
inline Iterate netmimo_initial_point(const SystemConfig& c, const ChannelSet& ch, bool coop) {
  Iterate z = zero_iterate(c, coop);
  white_covariances(c, z);
  if (coop) {
    int nu = c.n_users(), nd = c.n_cells * c.n_tx;
    for (int u = 0; u < nu; ++u) z.q_dl[u] = c.p_dl / (nu * c.n_tx) * CMat::Identity(nd, nd);
  }
  equal_shares(c, z);
  double t1 = 0, t2 = 0;
  for (int u = 0; u < c.n_users(); ++u) {
    auto [a, b] = phase_latency(c, ch, z, u);
    t1 = std::max(t1, a);
    t2 = std::max(t2, b);
  }
  z.t1 = 1.01 * t1;
  z.t2 = 1.01 * t2;
  return z;
}

inline double netmimo_objective(const SystemConfig& c, const ChannelSet& ch, const Iterate& z, double lambda) {
  return total_energy(c, ch, z, true) + lambda * (z.t1 + z.t2);
}

// SCA for the two-phase problem; objective is uplink energy + lambda (T1 + T2).
inline RunReport run_netmimo(const SystemConfig& cfg, const ChannelSet& ch, const NetMimoSettings& s = {}) {
  SystemConfig c = cfg;
  if (s.lambda) c.lambda_weight = *s.lambda;
  if (!(c.lambda_weight > 0)) throw std::invalid_argument("run_netmimo: lambda must be > 0");
  Iterate z = netmimo_initial_point(c, ch, s.coop);
  if (!std::isfinite(z.t1) || !std::isfinite(z.t2)) {
    RunReport r;
    r.termination = "infeasible-start";
    r.failed_condition = 'a';
    return r;
  }
  double lambda = c.lambda_weight;
  LoopSpec spec;
  spec.sub.kind = SubKind::p8;
  spec.sub.block_diag = s.block_diag;
  spec.objective = [&c, &ch, lambda](const Iterate& y) { return netmimo_objective(c, ch, y, lambda); };
  spec.residual = [&c, &ch](const Iterate& y) { return max_residual(constraint_residuals(c, ch, y, Mode::p8)); };
  spec.delta = s.delta;
  spec.max_outer = s.max_outer;
  spec.gamma0 = s.gamma0;
  spec.alpha = s.alpha;
  spec.gamma_floor = s.gamma_floor;
  spec.prox_scale = s.prox_scale;
  spec.solve = s.sub;
  spec.progress = s.progress;
  return sca_loop(c, ch, z, spec);
}

}  // namespace offload
