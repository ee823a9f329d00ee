#pragma once

#include "offload/scenario.hpp"

#include <optional>
#include <string>
#include <vector>

namespace offload {

enum class Mode { p1, p2, p4, p6, p8 };

// Full decision vector. q_dl holds per-user N_T x N_T covariances, or the
// stacked (N_c N_T)^2 user-centric covariances when coop is set.
struct Iterate {
  std::vector<CMat> q_ul, q_dl;
  Vec f, c_ul, c_dl;
  Vec x, y;          // scheduling slacks
  Vec u, f_cenb;     // hybrid split and cloudlet shares
  Mat c_dl_coop;     // users x cells
  double t_shared = 0, t1 = 0, t2 = 0;
  std::vector<char> active;
  bool coop = false;

  bool is_active(int k) const { return active.empty() || active[k]; }
};

inline Iterate zero_iterate(const SystemConfig& c, bool coop = false) {
  Iterate z;
  int nu = c.n_users();
  z.q_ul.assign(nu, CMat::Zero(c.n_tx, c.n_tx));
  int nd = coop ? c.n_cells * c.n_tx : c.n_tx;
  z.q_dl.assign(nu, CMat::Zero(nd, nd));
  z.f = Vec::Zero(nu);
  z.c_ul = Vec::Zero(nu);
  z.c_dl = Vec::Zero(nu);
  z.x = Vec::Zero(nu);
  z.y = Vec::Zero(nu);
  z.u = Vec::Ones(nu);
  z.f_cenb = Vec::Zero(nu);
  if (coop) z.c_dl_coop = Mat::Zero(nu, c.n_cells);
  z.active.assign(nu, 1);
  z.coop = coop;
  return z;
}

// Same-spectral-index users in the other cells.
inline std::vector<int> interferers(const SystemConfig& c, const Iterate& z, int u) {
  std::vector<int> out;
  int n = c.cell_of(u), i = c.index_of(u);
  for (int m = 0; m < c.n_cells; ++m) {
    if (m == n) continue;
    int j = c.user(m, i);
    if (z.is_active(j)) out.push_back(j);
  }
  return out;
}

inline CMat uplink_interference_cov(const SystemConfig& c, const ChannelSet& ch, const Iterate& z, int u) {
  int n = c.cell_of(u);
  CMat r = c.n0 * CMat::Identity(c.n_rx, c.n_rx);
  for (int j : interferers(c, z, u)) r += ch.ul[j][n] * z.q_ul[j] * ch.ul[j][n].adjoint();
  return hermitian_part(r);
}

inline CMat downlink_interference_cov(const SystemConfig& c, const ChannelSet& ch, const Iterate& z, int u) {
  if (z.coop) {
    CMat r = c.sigma_w2 * CMat::Identity(c.n_rx, c.n_rx);
    for (int k = 0; k < c.n_users(); ++k) {
      if (k == u || !z.is_active(k)) continue;
      r += ch.g_stacked[u] * z.q_dl[k] * ch.g_stacked[u].adjoint();
    }
    return hermitian_part(r);
  }
  CMat r = c.n0 * CMat::Identity(c.n_rx, c.n_rx);
  for (int j : interferers(c, z, u)) {
    int m = c.cell_of(j);
    r += ch.dl[u][m] * z.q_dl[j] * ch.dl[u][m].adjoint();
  }
  return hermitian_part(r);
}

// log2 det(R + H Q H^H) - log2 det(R)
inline double mimo_rate(const CMat& r, const CMat& h, const CMat& q) {
  double a = logdet_pd(r + h * q * h.adjoint());
  double b = logdet_pd(r);
  if (!std::isfinite(a) || !std::isfinite(b)) return std::numeric_limits<double>::quiet_NaN();
  return std::max(0.0, (a - b) / kLn2);
}

inline double uplink_rate(const SystemConfig& c, const ChannelSet& ch, const Iterate& z, int u) {
  return mimo_rate(uplink_interference_cov(c, ch, z, u), ch.h_direct(c, u), z.q_ul[u]);
}

inline double downlink_rate(const SystemConfig& c, const ChannelSet& ch, const Iterate& z, int u) {
  const CMat& g = z.coop ? ch.g_stacked[u] : ch.g_direct(c, u);
  return mimo_rate(downlink_interference_cov(c, ch, z, u), g, z.q_dl[u]);
}

struct Latency {
  double ul = 0, exe = 0, bh_ul = 0, bh_dl = 0, dl = 0;
  double total() const { return ul + exe + bh_ul + bh_dl + dl; }
};

namespace detail {
inline double ratio(double num, double den) {
  if (num == 0) return 0;
  if (!(den > 0)) return kInf;
  return num / den;
}
}  // namespace detail

// Cloud-only latency terms; in hybrid mode exe/bh are weighted by u and exe
// also carries the cloudlet term (1-u)V/(f_cenb F_cenb).
inline Latency latency_components(const SystemConfig& c, const ChannelSet& ch, const Iterate& z, int u,
                                  bool hybrid = false) {
  using detail::ratio;
  Latency l;
  int n = c.cell_of(u);
  l.ul = ratio(c.b_in[u], c.w_ul * uplink_rate(c, ch, z, u));
  l.dl = ratio(c.b_out[u], c.w_dl * downlink_rate(c, ch, z, u));
  double w = hybrid ? z.u[u] : 1.0;
  l.exe = ratio(w * c.v_cycles[u], z.f[u] * c.f_cloud);
  l.bh_ul = ratio(w * c.b_in[u], z.c_ul[u] * c.c_ul[n]);
  if (z.coop) {
    l.bh_dl = 0;
    for (int m = 0; m < c.n_cells; ++m) l.bh_dl += ratio(c.b_out[u], z.c_dl_coop(u, m) * c.c_dl[m]);
  } else {
    l.bh_dl = ratio(w * c.b_out[u], z.c_dl[u] * c.c_dl[n]);
  }
  if (hybrid) l.exe += ratio((1.0 - z.u[u]) * c.v_cycles[u], z.f_cenb[u] * c.f_cenb[n]);
  return l;
}

inline double uplink_energy(const SystemConfig& c, const ChannelSet& ch, const Iterate& z, int u) {
  double tr = z.q_ul[u].trace().real();
  if (c.b_in[u] == 0 || tr == 0) return 0;
  return detail::ratio(c.b_in[u] * tr, uplink_rate(c, ch, z, u));
}

inline double downlink_energy(const SystemConfig& c, const ChannelSet& ch, const Iterate& z, int u) {
  return detail::ratio(c.b_out[u] * c.d_rx[u], downlink_rate(c, ch, z, u));
}

inline double offload_energy(const SystemConfig& c, const ChannelSet& ch, const Iterate& z, int u,
                             bool uplink_only = false) {
  double e = uplink_energy(c, ch, z, u);
  if (!uplink_only) e += downlink_energy(c, ch, z, u);
  return e;
}

inline double total_energy(const SystemConfig& c, const ChannelSet& ch, const Iterate& z, bool uplink_only = false) {
  double e = 0;
  for (int u = 0; u < c.n_users(); ++u)
    if (z.is_active(u)) e += offload_energy(c, ch, z, u, uplink_only);
  return e;
}

inline double local_energy(const SystemConfig& c, int u) {
  double v = c.v_cycles[u], t = c.t_max[u];
  return c.kappa * v * v * v / (t * t);
}

inline bool offloading_advantageous(const SystemConfig& c, const ChannelSet& ch, const Iterate& z, int u) {
  return local_energy(c, u) >= uplink_energy(c, ch, z, u);
}

// --------------------------------------------------------------- feasibility

struct Feasibility {
  bool ok = false;
  char failed = 0;  // 'a'..'d'
  double alpha[3] = {0, 0, 0};
  Vec f, c_ul, c_dl;
  Vec slack;  // T - radio latency per user
};

// Conditions a)-d) at the given covariances. Without an explicit split the
// split alpha_k = req_k / sum(req) is used, which is feasible iff any is.
inline Feasibility check_feasibility(const SystemConfig& c, const ChannelSet& ch, const std::vector<CMat>& q_ul,
                                     const std::vector<CMat>& q_dl, const double* split = nullptr,
                                     const std::vector<char>& active = {}) {
  Feasibility r;
  Iterate z;
  z.q_ul = q_ul;
  z.q_dl = q_dl;
  z.active = active;
  int nu = c.n_users();
  r.slack = Vec::Zero(nu);
  for (int u = 0; u < nu; ++u) {
    if (!z.is_active(u)) continue;
    double rad = detail::ratio(c.b_in[u], c.w_ul * uplink_rate(c, ch, z, u)) +
                 detail::ratio(c.b_out[u], c.w_dl * downlink_rate(c, ch, z, u));
    r.slack(u) = c.t_max[u] - rad;
    if (!(r.slack(u) > 0)) {
      r.failed = 'a';
      return r;
    }
  }
  double req[3] = {0, 0, 0};
  for (int u = 0; u < nu; ++u)
    if (z.is_active(u)) req[0] += c.v_cycles[u] / c.f_cloud / r.slack(u);
  for (int n = 0; n < c.n_cells; ++n) {
    double s2 = 0, s3 = 0;
    for (int i = 0; i < c.users_per_cell; ++i) {
      int u = c.user(n, i);
      if (!z.is_active(u)) continue;
      s2 += c.b_in[u] / c.c_ul[n] / r.slack(u);
      s3 += c.b_out[u] / c.c_dl[n] / r.slack(u);
    }
    req[1] = std::max(req[1], s2);
    req[2] = std::max(req[2], s3);
  }
  double sum = req[0] + req[1] + req[2];
  if (split) {
    for (int k = 0; k < 3; ++k) r.alpha[k] = split[k];
  } else {
    for (int k = 0; k < 3; ++k) r.alpha[k] = sum > 0 ? req[k] / sum : 1.0 / 3.0;
  }
  for (int k = 0; k < 3; ++k)
    if (req[k] > r.alpha[k] * (1 + 1e-12) || (req[k] > 0 && r.alpha[k] <= 0)) {
      r.failed = static_cast<char>('b' + k);
      return r;
    }
  if (sum > 1.0) {
    r.failed = req[0] > 1.0 ? 'b' : (req[1] >= req[2] ? 'c' : 'd');
    return r;
  }
  r.f = Vec::Zero(nu);
  r.c_ul = Vec::Zero(nu);
  r.c_dl = Vec::Zero(nu);
  for (int u = 0; u < nu; ++u) {
    if (!z.is_active(u)) continue;
    int n = c.cell_of(u);
    r.f(u) = c.v_cycles[u] / c.f_cloud / (r.alpha[0] * r.slack(u));
    r.c_ul(u) = c.b_in[u] / c.c_ul[n] / (r.alpha[1] * r.slack(u));
    r.c_dl(u) = c.b_out[u] / c.c_dl[n] / (r.alpha[2] * r.slack(u));
  }
  r.ok = true;
  return r;
}

// ------------------------------------------------------------------ residuals

struct Residual {
  std::string name;
  double value;  // <= 0 means satisfied
};

inline std::vector<Residual> constraint_residuals(const SystemConfig& c, const ChannelSet& ch, const Iterate& z,
                                                  Mode mode) {
  std::vector<Residual> out;
  int nu = c.n_users();
  auto name = [](const char* s, int k) { return std::string(s) + "[" + std::to_string(k) + "]"; };
  bool hybrid = mode == Mode::p6;
  for (int u = 0; u < nu; ++u) {
    if (!z.is_active(u)) continue;
    Latency l = latency_components(c, ch, z, u, hybrid);
    if (mode == Mode::p8) {
      out.push_back({name("C1_phase1", u), l.ul + l.exe + l.bh_ul + l.bh_dl - z.t1});
      out.push_back({name("C2_phase2", u), l.dl - z.t2});
    } else {
      double t = mode == Mode::p2 ? z.t_shared : c.t_max[u];
      double v = l.total() - t;
      if (mode == Mode::p4) v -= z.x(u);
      out.push_back({name("C1_latency", u), v});
    }
    if (mode == Mode::p4) {
      double e = z.q_ul[u].trace().real() - local_energy(c, u) / c.b_in[u] * uplink_rate(c, ch, z, u) - z.y(u);
      out.push_back({name("C2_energy", u), e});
      out.push_back({name("x_nonneg", u), -z.x(u)});
      out.push_back({name("y_nonneg", u), -z.y(u)});
    }
    out.push_back({name("f_nonneg", u), -z.f(u)});
    out.push_back({name("c_ul_nonneg", u), -z.c_ul(u)});
    if (z.coop) {
      for (int m = 0; m < c.n_cells; ++m) out.push_back({name("c_dl_nonneg", u), -z.c_dl_coop(u, m)});
    } else {
      out.push_back({name("c_dl_nonneg", u), -z.c_dl(u)});
    }
    if (hybrid) {
      out.push_back({name("u_lower", u), -z.u(u)});
      out.push_back({name("u_upper", u), z.u(u) - 1.0});
      out.push_back({name("f_cenb_nonneg", u), -z.f_cenb(u)});
    }
    double scale = std::max(c.p_ul, 1e-300);
    out.push_back({name("Q_ul_psd", u), -min_eig(z.q_ul[u]) - 1e-9 * scale});
    out.push_back({name("Q_ul_power", u), z.q_ul[u].trace().real() - c.p_ul});
    out.push_back({name("Q_dl_psd", u), -min_eig(z.q_dl[u]) - 1e-9 * c.p_dl});
  }
  double sf = 0;
  for (int u = 0; u < nu; ++u)
    if (z.is_active(u)) sf += z.f(u);
  out.push_back({"cloud_share", sf - 1.0});
  for (int n = 0; n < c.n_cells; ++n) {
    double su = 0, sd = 0, sp = 0, sfc = 0;
    for (int i = 0; i < c.users_per_cell; ++i) {
      int u = c.user(n, i);
      if (!z.is_active(u)) continue;
      su += z.c_ul(u);
      if (!z.coop) {
        sd += z.c_dl(u);
        sp += z.q_dl[u].trace().real();
      }
      if (hybrid) sfc += z.f_cenb(u);
    }
    if (z.coop) {
      for (int u = 0; u < nu; ++u) {
        if (!z.is_active(u)) continue;
        sd += z.c_dl_coop(u, n);
        sp += z.q_dl[u].block(n * c.n_tx, n * c.n_tx, c.n_tx, c.n_tx).trace().real();
      }
    }
    out.push_back({name("backhaul_ul_share", n), su - 1.0});
    out.push_back({name("backhaul_dl_share", n), sd - 1.0});
    out.push_back({name("Q_dl_power", n), sp - c.p_dl});
    if (hybrid) out.push_back({name("cloudlet_share", n), sfc - 1.0});
  }
  return out;
}

inline double max_residual(const std::vector<Residual>& r) {
  double m = -kInf;
  for (const auto& x : r) m = std::max(m, std::isnan(x.value) ? kInf : x.value);
  return m;
}

}  // namespace offload
