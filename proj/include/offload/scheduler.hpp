#pragma once

#include "offload/sca.hpp"

#include <algorithm>
#include <numeric>

namespace offload {

struct ScheduleSettings {
  double eta = 1e-5;     // admission threshold on raw slacks (s and J/symbol)
  double p = 0.5, eps = 1e-3;
  double delta = 1e-7;   // majorizer-value change
  int max_outer = 100;
  double prox_scale = 1e-6;
  SolveOptions sub;
};

struct P5Result {
  Iterate z;
  RunReport report;
  double lp = 0;  // smoothed l_p objective at z
  Vec x, y;  // constraint violations of the returned iterate, per user (0 when inactive)
};

inline std::vector<char> subset_mask(int nu, const std::vector<int>& subset) {
  std::vector<char> m(nu, 0);
  for (int u : subset) m[u] = 1;
  return m;
}

// Latency and offload-energy violations max(0, .) of an iterate.
inline void slack_violations(const SystemConfig& c, const ChannelSet& ch, const Iterate& z, Vec& x, Vec& y) {
  int nu = c.n_users();
  x = Vec::Zero(nu);
  y = Vec::Zero(nu);
  for (int u = 0; u < nu; ++u) {
    if (!z.is_active(u)) continue;
    x(u) = std::max(0.0, latency_components(c, ch, z, u).total() - c.t_max[u]);
    if (c.b_in[u] > 0)
      y(u) = std::max(0.0, z.q_ul[u].trace().real() - local_energy(c, u) / c.b_in[u] * uplink_rate(c, ch, z, u));
  }
}

inline double lp_value(const Iterate& z, int nu, double p, double eps) {
  std::vector<double> xs, ys;
  for (int u = 0; u < nu; ++u)
    if (z.is_active(u)) {
      xs.push_back(z.x(u));
      ys.push_back(z.y(u));
    }
  return lp_objective(Eigen::Map<Vec>(xs.data(), xs.size()), Eigen::Map<Vec>(ys.data(), ys.size()), p, eps);
}

// Smoothed l_p slack minimization over `subset` (reweighted majorization, unit steps).
inline P5Result solve_p5(const SystemConfig& c, const ChannelSet& ch, const std::vector<int>& subset,
                         const ScheduleSettings& s = {}) {
  if (subset.empty()) throw std::invalid_argument("solve_p5: empty subset");
  int nu = c.n_users();
  Iterate z = zero_iterate(c);
  z.active = subset_mask(nu, subset);
  white_covariances(c, z);
  equal_shares(c, z);
  slack_violations(c, ch, z, z.x, z.y);

  // the loop monitors the majorizer sum w1 x^2 + w2 y^2 under the current weights
  auto w1 = std::make_shared<Vec>(Vec::Ones(nu)), w2 = std::make_shared<Vec>(Vec::Ones(nu));
  LoopSpec spec;
  spec.sub.kind = SubKind::p5;
  spec.objective = [w1, w2, nu](const Iterate& v) {
    double m = 0;
    for (int u = 0; u < nu; ++u)
      if (v.is_active(u)) m += (*w1)(u) * v.x(u) * v.x(u) + (*w2)(u) * v.y(u) * v.y(u);
    return m;
  };
  spec.weights = [&, w1, w2](const Iterate& v, Vec& a, Vec& b) {
    for (int u = 0; u < nu; ++u) {
      a(u) = v.is_active(u) ? lp_weight(v.x(u), s.p, s.eps) : 1.0;
      b(u) = v.is_active(u) ? lp_weight(v.y(u), s.p, s.eps) : 1.0;
    }
    *w1 = a;
    *w2 = b;
  };
  spec.residual = [&](const Iterate& v) { return max_residual(constraint_residuals(c, ch, v, Mode::p4)); };
  spec.delta = s.delta;
  spec.max_outer = s.max_outer;
  spec.unit_step = true;
  spec.prox_scale = s.prox_scale;
  spec.solve = s.sub;

  P5Result r;
  r.report = sca_loop(c, ch, z, spec);
  r.z = r.report.final;
  slack_violations(c, ch, r.z, r.x, r.y);
  r.lp = lp_value(r.z, nu, s.p, s.eps);
  return r;
}

// w = x / sum(x) + y / sum(y) over the subset; an all-zero block contributes 0.
inline Vec compute_w(const Vec& x, const Vec& y, const std::vector<int>& subset) {
  Vec w = Vec::Zero(x.size());
  double sx = 0, sy = 0;
  for (int u : subset) {
    sx += x(u);
    sy += y(u);
  }
  for (int u : subset) {
    if (sx > 0) w(u) += x(u) / sx;
    if (sy > 0) w(u) += y(u) / sy;
  }
  return w;
}

inline bool slacks_below(const P5Result& r, const std::vector<int>& subset, double eta) {
  for (int u : subset)
    if (!(r.x(u) < eta && r.y(u) < eta)) return false;
  return true;
}

inline bool feasibility_test(const SystemConfig& c, const ChannelSet& ch, const std::vector<int>& subset,
                             const ScheduleSettings& s = {}, P5Result* out = nullptr) {
  if (subset.empty()) return true;
  P5Result r = solve_p5(c, ch, subset, s);
  bool ok = slacks_below(r, subset, s.eta);
  if (out) *out = std::move(r);
  return ok;
}

struct ScheduleProbe {
  int count;
  bool feasible;
  int iterations;
};

struct ScheduleResult {
  int s = 0;                   // selected count
  std::vector<int> selected;   // first s entries of perm
  std::vector<int> perm;       // users sorted by ascending w
  Vec w;
  std::vector<ScheduleProbe> probes;
  Iterate solution;            // slack-minimization solution for the selected set (empty set: none)
};

inline std::vector<int> prefix(const std::vector<int>& perm, int k) {
  std::vector<int> p(perm.begin(), perm.begin() + k);
  std::sort(p.begin(), p.end());
  return p;
}

// Sort by w from the full-set solve, then bisection over prefix lengths.
inline ScheduleResult schedule(const SystemConfig& c, const ChannelSet& ch, const ScheduleSettings& s = {}) {
  int nu = c.n_users();
  std::vector<int> all(nu);
  std::iota(all.begin(), all.end(), 0);
  ScheduleResult res;
  P5Result full = solve_p5(c, ch, all, s);
  res.w = compute_w(full.x, full.y, all);
  res.perm = all;
  std::stable_sort(res.perm.begin(), res.perm.end(), [&](int a, int b) { return res.w(a) < res.w(b); });
  bool full_ok = slacks_below(full, all, s.eta);
  res.probes.push_back({nu, full_ok, full.report.iterations()});
  if (full_ok) {
    res.s = nu;
    res.selected = all;
    res.solution = full.z;
    return res;
  }
  int lo = 0, up = nu;
  Iterate best;
  while (up - lo > 1) {
    int mid = (lo + up) / 2;
    P5Result r;
    bool ok = feasibility_test(c, ch, prefix(res.perm, mid), s, &r);
    res.probes.push_back({mid, ok, r.report.iterations()});
    if (ok) {
      lo = mid;
      best = r.z;
    } else {
      up = mid;
    }
  }
  res.s = lo;
  res.selected = prefix(res.perm, lo);
  res.solution = best;
  return res;
}

}  // namespace offload
