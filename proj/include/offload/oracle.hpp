#pragma once

// Brute-force references. The scalar oracles evaluate rates and latencies from
// their own closed forms and share no code with the surrogate or solver paths.

#include "offload/scheduler.hpp"

#include <algorithm>
#include <bit>
#include <functional>
#include <limits>
#include <map>

namespace offload {

struct GridResult {
  bool feasible = false;
  double energy = kInf;
  Vec q_ul, q_dl, u;   // per user
  Iterate z;           // full iterate with closed-form shares
  long evaluations = 0;
};

namespace oracle_detail {

struct Scalar {
  const SystemConfig* c;
  const ChannelSet* ch;
  bool hybrid = false;
  bool uplink_only = false;

  int nu() const { return c->n_users(); }
  double h2(int j, int n) const { return std::norm(ch->ul[j][n](0, 0)); }
  double g2(int u, int m) const { return std::norm(ch->dl[u][m](0, 0)); }

  // Energy at the powers with the best shares, +inf when no share choice meets every deadline.
  // Single user per cell: each user owns its cell's backhaul and cloudlet; only the cloud is shared.
  // Rates in bits/symbol; users share spectrum only with the same index in other cells.
  double value(const double* qu, const double* qd, const double* uu, double* f = nullptr) const {
    const SystemConfig& cf = *c;
    const int n_u = nu();
    double need = 0, e = 0, nd[2] = {0, 0};
    for (int u = 0; u < n_u; ++u) {
      int n = cf.cell_of(u), i = cf.index_of(u);
      double iu = cf.n0, id = cf.n0;
      for (int m = 0; m < cf.n_cells; ++m) {
        if (m == n) continue;
        int j = cf.user(m, i);
        iu += h2(j, n) * qu[j];
        id += g2(u, m) * qd[j];
      }
      double ru = std::log2(1.0 + h2(u, n) * qu[u] / iu);
      double rd = std::log2(1.0 + g2(u, n) * qd[u] / id);
      if (!(ru > 0) || !(rd > 0)) return kInf;
      double w = hybrid ? uu[u] : 1.0;
      double sl = cf.t_max[u] - cf.b_in[u] / (cf.w_ul * ru) - cf.b_out[u] / (cf.w_dl * rd) -
                  w * (cf.b_in[u] / cf.c_ul[n] + cf.b_out[u] / cf.c_dl[n]);
      if (hybrid) sl -= (1.0 - w) * cf.v_cycles[u] / cf.f_cenb[n];
      if (w > 0) {
        if (!(sl > 0)) return kInf;
        nd[u] = w * cf.v_cycles[u] / (cf.f_cloud * sl);
      } else if (sl < 0) {
        return kInf;
      }
      need += nd[u];
      e += cf.b_in[u] * qu[u] / ru;
      if (!uplink_only) e += cf.b_out[u] * cf.d_rx[u] / rd;
    }
    if (need > 1.0) return kInf;
    if (f)
      for (int u = 0; u < n_u; ++u) f[u] = need > 0 ? nd[u] / need : 1.0 / n_u;
    return e;
  }

  double value(const Vec& qu, const Vec& qd, const Vec& uu, Vec* f = nullptr) const {
    double sh[2];
    double v = value(qu.data(), qd.data(), uu.data(), sh);
    if (f) *f = Eigen::Map<Vec>(sh, nu());
    return v;
  }
};

// Generalized pattern search with every direction in {-1,0,1}^d over the first `free_dims`
// coordinates (all when negative); steps double on success and halve on failure.
inline void pattern_search(const std::function<double(const Vec&)>& f, const Vec& hi, Vec& x, double& fx,
                           double step, long& evals, double tol = 1e-12, int free_dims = -1) {
  int d = free_dims < 0 ? static_cast<int>(x.size()) : free_dims;
  std::vector<Vec> dirs;
  int total = 1;
  for (int k = 0; k < d; ++k) total *= 3;
  for (int code = 0; code < total; ++code) {
    Vec v = Vec::Zero(x.size());
    int r = code;
    bool zero = true;
    for (int k = 0; k < d; ++k) {
      v(k) = r % 3 - 1;
      r /= 3;
      zero = zero && v(k) == 0;
    }
    if (!zero) dirs.push_back(v);
  }
  const double step0 = step;
  while (step > tol) {
    bool moved = false;
    for (const Vec& v : dirs) {
      Vec y = (x + step * v.cwiseProduct(hi)).cwiseMax(0.0).cwiseMin(hi);
      double fy = f(y);
      ++evals;
      if (fy < fx) {
        x = y;
        fx = fy;
        moved = true;
        step = std::min(2 * step, step0);
        break;
      }
    }
    if (!moved) step *= 0.5;
  }
}

struct Point {
  double qu[2] = {0, 0}, qd[2] = {0, 0}, u[2] = {1, 1}, f[2] = {0, 0};
};

// Optimal uplink powers for given downlink powers, cloud split f0 and edge/cloud split u.
// Each user's deadline leaves an uplink time budget, hence an SINR target; the smallest
// power pair meeting both targets solves a 2x2 linear system, and since every energy term
// grows with every uplink power that pair is optimal. Returns +inf when no pair exists.
inline double reduced_value(const Scalar& s, const double* qd, double f0, const double* uu, Point* out = nullptr) {
  const SystemConfig& c = *s.c;
  const int nu = s.nu();
  Point pt;
  double rho[2] = {0, 0}, gam[2] = {0, 0}, rd[2] = {0, 0};
  int n_cloud = 0;
  for (int u = 0; u < nu; ++u) {
    pt.qd[u] = qd[u];
    pt.u[u] = s.hybrid ? uu[u] : 1.0;
    n_cloud += pt.u[u] > 0;
  }
  for (int u = 0; u < nu; ++u) {
    if (pt.u[u] > 0) pt.f[u] = n_cloud == 2 ? (u == 0 ? f0 : 1.0 - f0) : 1.0;
  }
  for (int u = 0; u < nu; ++u) {
    int n = c.cell_of(u);
    double id = c.n0;
    if (nu == 2) id += s.g2(u, 1 - n) * qd[1 - u];
    rd[u] = std::log2(1.0 + s.g2(u, n) * qd[u] / id);
    if (!(rd[u] > 0)) return kInf;
    double w = pt.u[u];
    double tau = c.t_max[u] - c.b_out[u] / (c.w_dl * rd[u]) - w * (c.b_in[u] / c.c_ul[n] + c.b_out[u] / c.c_dl[n]);
    if (s.hybrid) tau -= (1.0 - w) * c.v_cycles[u] / c.f_cenb[n];
    if (w > 0) {
      if (!(pt.f[u] > 0)) return kInf;
      tau -= w * c.v_cycles[u] / (c.f_cloud * pt.f[u]);
    }
    if (!(tau > 0)) return kInf;
    rho[u] = c.b_in[u] / (c.w_ul * tau);
    if (rho[u] > 1000) return kInf;
    gam[u] = std::exp2(rho[u]) - 1.0;
  }
  if (nu == 1) {
    pt.qu[0] = gam[0] * c.n0 / s.h2(0, 0);
  } else {
    // q0 = g0 (n0 + h(1->0) q1) / h00, q1 = g1 (n0 + h(0->1) q0) / h11
    double a = gam[0] * s.h2(1, 0) / s.h2(0, 0), b0 = gam[0] * c.n0 / s.h2(0, 0);
    double cc = gam[1] * s.h2(0, 1) / s.h2(1, 1), b1 = gam[1] * c.n0 / s.h2(1, 1);
    double det = 1.0 - a * cc;
    if (!(det > 0)) return kInf;
    pt.qu[0] = (b0 + a * b1) / det;
    pt.qu[1] = (b1 + cc * b0) / det;
  }
  double e = 0;
  for (int u = 0; u < nu; ++u) {
    if (pt.qu[u] > c.p_ul) return kInf;
    if (rho[u] > 0) e += c.b_in[u] * pt.qu[u] / rho[u];
    if (!s.uplink_only) e += c.b_out[u] * c.d_rx[u] / rd[u];
  }
  if (out) *out = pt;
  return e;
}

inline GridResult grid_search(const SystemConfig& c, const ChannelSet& ch, double grid_step, bool hybrid,
                              bool uplink_only, bool refine) {
  if (c.n_tx != 1 || c.n_rx != 1) throw std::invalid_argument("oracle: scalar antennas required");
  if (c.users_per_cell != 1 || c.n_users() > 2) throw std::invalid_argument("oracle: K = 1 and N_c <= 2 required");
  if (!(grid_step > 0) || grid_step > 1) throw std::invalid_argument("oracle: grid_step in (0, 1]");
  Scalar s{&c, &ch, hybrid, uplink_only};
  const int nu = c.n_users();
  // searched coordinates: q_dl[0..nu), f0 (two users), u[0..nu) (hybrid, last)
  const int nf = nu == 2 ? 1 : 0;
  const int nfree = nu + nf;  // without u
  const int d = nfree + (hybrid ? nu : 0);
  Vec hi = Vec::Ones(d);
  hi.head(nu).setConstant(c.p_dl);
  auto f = [&](const Vec& x) {
    double uu[2] = {1, 1};
    if (hybrid)
      for (int k = 0; k < nu; ++k) uu[k] = x(nfree + k);
    return reduced_value(s, x.data(), nf ? x(nu) : 1.0, uu);
  };

  GridResult r;
  int m = static_cast<int>(std::lround(1.0 / grid_step));
  std::vector<std::vector<double>> axes(d);
  for (int k = 0; k < d; ++k) {
    bool share = nf && k == nu;
    int pts = share ? 2 * m : m;  // the cloud split gets a doubled resolution
    for (int i = 0; i <= pts; ++i) axes[k].push_back(std::min(1.0, static_cast<double>(i) / pts) * hi(k));
  }
  long total = 1;
  for (int k = 0; k < d; ++k) total *= static_cast<long>(axes[k].size());
  // refinement starts: the best few points overall, the best few u combinations and
  // the best point at every corner u in {0, 1}^N (refined with u held fixed)
  const size_t keep = 6;
  std::vector<std::pair<double, Vec>> best, fixed_u;
  std::map<long, std::pair<double, Vec>> per_u;
  std::map<long, bool> corner;
  Vec x(d);
  for (long code = 0; code < total; ++code) {
    long t = code, ukey = 0;
    bool at_corner = true;
    for (int k = 0; k < d; ++k) {
      long n = static_cast<long>(axes[k].size());
      x(k) = axes[k][t % n];
      if (k >= nfree) {
        ukey = ukey * n + t % n;
        at_corner = at_corner && (x(k) == 0.0 || x(k) == 1.0);
      }
      t /= n;
    }
    double v = f(x);
    ++r.evaluations;
    if (!std::isfinite(v)) continue;
    auto it = per_u.find(ukey);
    if (it == per_u.end() || v < it->second.first) per_u[ukey] = {v, x};
    if (hybrid && at_corner) corner[ukey] = true;
    if (best.size() < keep || v < best.back().first) {
      best.emplace_back(v, x);
      std::stable_sort(best.begin(), best.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
      if (best.size() > keep) best.pop_back();
    }
  }
  if (best.empty()) return r;
  if (hybrid) {
    std::vector<std::pair<double, Vec>> pu;
    for (auto& [k, e] : per_u) pu.push_back(e);
    std::stable_sort(pu.begin(), pu.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    for (size_t i = 0; i < pu.size() && i < keep; ++i) best.push_back(pu[i]);
    for (auto& [k, e] : per_u)
      if (corner.count(k)) fixed_u.push_back(e);
  }
  Vec xb = best.front().second;
  r.energy = best.front().first;
  if (refine) {
    // coarse pass from every start, then a fine polish of the three best
    std::vector<std::pair<double, Vec>> coarse;
    for (auto& [v, x0] : best) {
      Vec y = x0;
      double fy = v;
      pattern_search(f, hi, y, fy, grid_step, r.evaluations, 1e-6);
      coarse.emplace_back(fy, y);
    }
    for (auto& [v, x0] : fixed_u) {
      Vec y = x0;
      double fy = v;
      pattern_search(f, hi, y, fy, grid_step, r.evaluations, 1e-6, nfree);
      coarse.emplace_back(fy, y);
    }
    std::stable_sort(coarse.begin(), coarse.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    for (size_t i = 0; i < coarse.size() && i < 3; ++i) {
      Vec y = coarse[i].second;
      double fy = coarse[i].first;
      pattern_search(f, hi, y, fy, 1e-6, r.evaluations);
      if (fy < r.energy) {
        r.energy = fy;
        xb = y;
      }
    }
  }
  r.feasible = true;
  Point pt;
  double uu[2] = {1, 1};
  if (hybrid)
    for (int k = 0; k < nu; ++k) uu[k] = xb(nfree + k);
  reduced_value(s, xb.data(), nf ? xb(nu) : 1.0, uu, &pt);
  r.q_ul = Eigen::Map<Vec>(pt.qu, nu);
  r.q_dl = Eigen::Map<Vec>(pt.qd, nu);
  r.u = Eigen::Map<Vec>(pt.u, nu);
  r.z = zero_iterate(c);
  for (int u = 0; u < nu; ++u) {
    r.z.q_ul[u](0, 0) = pt.qu[u];
    r.z.q_dl[u](0, 0) = pt.qd[u];
    r.z.f(u) = pt.f[u];
    r.z.c_ul(u) = r.z.c_dl(u) = 1.0;
    r.z.u(u) = pt.u[u];
    r.z.f_cenb(u) = 1.0;
  }
  return r;
}

}  // namespace oracle_detail

// Exhaustive grid over downlink powers (step grid_step * P), the cloud split and, for the
// hybrid problem, the edge/cloud split u; uplink powers follow in closed form from the
// resulting SINR targets. Optionally refined by pattern search. Scalar antennas, one user
// per cell, N_c <= 2. Without refinement, halving grid_step never raises the result.
inline GridResult grid_p1(const SystemConfig& c, const ChannelSet& ch, double grid_step, bool uplink_only = false,
                          bool refine = true) {
  return oracle_detail::grid_search(c, ch, grid_step, false, uplink_only, refine);
}

// As grid_p1 with u also gridded; uplink-only objective.
inline GridResult grid_hybrid(const SystemConfig& c, const ChannelSet& ch, double grid_step, bool refine = true) {
  return oracle_detail::grid_search(c, ch, grid_step, true, true, refine);
}

struct ExhaustiveResult {
  int s = 0;
  std::vector<int> best;  // sorted user ids
  double energy = 0;      // uplink energy of the best subset
  int subsets_tried = 0;
};

// Offloading-energy advantage with the scheduler's tolerance: E^ul <= E^M + eta * B^I / r^ul, i.e. the energy
// slack tr(Q) - (E^M / B^I) r^ul (J/symbol) is below eta.
inline bool energy_advantage_ok(const SystemConfig& c, const ChannelSet& ch, const Iterate& z, int u, double eta) {
  if (c.b_in[u] == 0) return true;
  double r = uplink_rate(c, ch, z, u);
  return z.q_ul[u].trace().real() - local_energy(c, u) / c.b_in[u] * r <= eta;
}

// True when the p1 problem is solvable on the subset and every member passes the energy-advantage check.
inline bool subset_admissible(const SystemConfig& c, const ChannelSet& ch, const std::vector<int>& subset,
                              const SCASettings& base, double eta, double* energy) {
  SCASettings s = base;
  s.uplink_only = true;
  s.active = subset_mask(c.n_users(), subset);
  RunReport r = run(c, ch, s);
  if (!r.ok()) return false;
  if (max_residual(constraint_residuals(c, ch, r.final, Mode::p1)) > 1e-7) return false;
  for (int u : subset)
    if (!energy_advantage_ok(c, ch, r.final, u, eta)) return false;
  if (energy) *energy = total_energy(c, ch, r.final, true);
  return true;
}

// Enumerates subsets by decreasing size; returns the admissible subset of maximum
// cardinality with minimum uplink energy.
inline ExhaustiveResult exhaustive_schedule(const SystemConfig& c, const ChannelSet& ch, const SCASettings& base = {},
                                            double eta = 1e-5) {
  int nu = c.n_users();
  if (nu > 8) throw std::invalid_argument("exhaustive_schedule: at most 8 users");
  ExhaustiveResult res;
  for (int k = nu; k >= 1; --k) {
    bool found = false;
    double best_e = kInf;
    for (unsigned mask = 0; mask < (1u << nu); ++mask) {
      if (std::popcount(mask) != k) continue;
      std::vector<int> sub;
      for (int u = 0; u < nu; ++u)
        if (mask >> u & 1u) sub.push_back(u);
      ++res.subsets_tried;
      double e = 0;
      if (subset_admissible(c, ch, sub, base, eta, &e) && e < best_e) {
        best_e = e;
        res.best = sub;
        found = true;
      }
    }
    if (found) {
      res.s = k;
      res.energy = best_e;
      return res;
    }
  }
  return res;
}

}  // namespace offload
