#pragma once

#include "offload/subproblem.hpp"

#include <chrono>
#include <functional>
#include <optional>

namespace offload {

struct InfeasibleStart : std::runtime_error {
  char condition;
  InfeasibleStart(char cond, const std::string& msg) : std::runtime_error(msg), condition(cond) {}
};

struct SCASettings {
  double gamma0 = 1.0;
  double alpha = 1e-5;
  double delta = 1e-3;  // J
  int max_outer = 500;
  Mode mode = Mode::p1;  // p1 or p2
  bool uplink_only = false;
  std::optional<double> lambda_weight;  // overrides the config value in p2
  double prox_scale = 1e-6;
  double gamma_floor = 1e-8;
  bool pin_f = false, pin_c = false;  // equal-share baselines
  std::vector<char> active;           // empty: all users
  SolveOptions sub;
  std::function<void(int, double, const SubSolution&)> progress;
};

struct RunReport {
  std::vector<double> trace;        // true objective per iterate
  std::vector<double> kkt;          // subproblem certificates
  std::vector<double> residual;     // max constraint residual per iterate
  std::vector<double> step_norm;    // scaled ||Z_hat - Z|| per iteration
  std::vector<int> inner;           // Newton steps per subproblem
  Iterate final;
  std::string termination;          // delta-met | max-outer | step-underflow | infeasible-start
  char failed_condition = 0;
  double wall_time = 0;
  int iterations() const { return static_cast<int>(trace.size()) - 1; }
  bool ok() const { return termination != "infeasible-start"; }
};

// gamma(v) = gamma(v-1) (1 - alpha gamma(v-1)), gamma(0) = gamma0
inline double step_size(int v, const SCASettings& s) {
  double g = s.gamma0;
  for (int k = 0; k < v; ++k) g *= 1.0 - s.alpha * g;
  return g;
}

// ------------------------------------------------------------ iterate algebra

inline Iterate combine(const Iterate& a, const Iterate& b, double g) {
  Iterate z = a;
  for (size_t k = 0; k < a.q_ul.size(); ++k) {
    z.q_ul[k] = hermitian_part(a.q_ul[k] + g * (b.q_ul[k] - a.q_ul[k]));
    z.q_dl[k] = hermitian_part(a.q_dl[k] + g * (b.q_dl[k] - a.q_dl[k]));
  }
  z.f = a.f + g * (b.f - a.f);
  z.c_ul = a.c_ul + g * (b.c_ul - a.c_ul);
  z.c_dl = a.c_dl + g * (b.c_dl - a.c_dl);
  z.x = a.x + g * (b.x - a.x);
  z.y = a.y + g * (b.y - a.y);
  z.u = a.u + g * (b.u - a.u);
  z.f_cenb = a.f_cenb + g * (b.f_cenb - a.f_cenb);
  if (a.c_dl_coop.size()) z.c_dl_coop = a.c_dl_coop + g * (b.c_dl_coop - a.c_dl_coop);
  z.t_shared = a.t_shared + g * (b.t_shared - a.t_shared);
  z.t1 = a.t1 + g * (b.t1 - a.t1);
  z.t2 = a.t2 + g * (b.t2 - a.t2);
  return z;
}

inline double scaled_distance(const Layout& L, const Iterate& a, const Iterate& b) {
  Vec d = (pack(L, a) - pack(L, b)).cwiseQuotient(L.scale);
  return d.lpNorm<Eigen::Infinity>();
}

inline ProxWeights prox_weights(const SystemConfig& c, double obj, double k = 1e-6) {
  double e = k * std::max(std::abs(obj), 1e-12);
  double kk = c.users_per_cell, nu = c.n_users();
  double t = c.t_max.empty() ? 0.1 : c.t_max[0];
  ProxWeights g;
  g.q_ul = e / (c.p_ul * c.p_ul);
  g.q_dl = e * kk * kk / (c.p_dl * c.p_dl);
  g.f = e * nu * nu;
  g.c_ul = g.c_dl = e * kk * kk;
  g.x = e / (t * t);
  g.y = e / (c.p_ul * c.p_ul);
  g.u = e;
  g.f_cenb = e * kk * kk;
  g.t = e / (t * t);
  return g;
}

// ------------------------------------------------------------- initial points

inline void white_covariances(const SystemConfig& c, Iterate& z) {
  int nu = c.n_users();
  std::vector<int> k_act(c.n_cells, 0);
  for (int u = 0; u < nu; ++u)
    if (z.is_active(u)) ++k_act[c.cell_of(u)];
  for (int u = 0; u < nu; ++u) {
    if (!z.is_active(u)) continue;
    z.q_ul[u] = c.p_ul / c.n_tx * CMat::Identity(c.n_tx, c.n_tx);
    z.q_dl[u] = c.p_dl / (k_act[c.cell_of(u)] * c.n_tx) * CMat::Identity(c.n_tx, c.n_tx);
  }
}

// Interference-free waterfilling over the eigenmodes of H^H H / noise.
inline CMat waterfill(const CMat& h, double noise, double power) {
  Eigen::SelfAdjointEigenSolver<CMat> es(hermitian_part(h.adjoint() * h / noise));
  Vec g = es.eigenvalues().cwiseMax(0.0);
  int n = static_cast<int>(g.size());
  Vec p = Vec::Zero(n);
  for (int act = n; act >= 1; --act) {
    // strongest `act` modes
    double s = 0;
    for (int i = n - act; i < n; ++i) s += 1.0 / std::max(g(i), 1e-300);
    double mu = (power + s) / act;
    if (mu - 1.0 / std::max(g(n - act), 1e-300) >= 0) {
      for (int i = n - act; i < n; ++i) p(i) = mu - 1.0 / g(i);
      break;
    }
  }
  return hermitian_part(es.eigenvectors() * p.cast<cd>().asDiagonal() * es.eigenvectors().adjoint());
}

inline void equal_shares(const SystemConfig& c, Iterate& z) {
  int nu = c.n_users(), n_act = active_count(z, nu);
  std::vector<int> k_act(c.n_cells, 0);
  for (int u = 0; u < nu; ++u)
    if (z.is_active(u)) ++k_act[c.cell_of(u)];
  for (int u = 0; u < nu; ++u) {
    if (!z.is_active(u)) continue;
    z.f(u) = 1.0 / n_act;
    z.c_ul(u) = z.c_dl(u) = 1.0 / k_act[c.cell_of(u)];
    z.f_cenb(u) = 1.0 / k_act[c.cell_of(u)];
  }
  if (z.coop)
    for (int u = 0; u < nu; ++u)
      for (int m = 0; m < c.n_cells; ++m) z.c_dl_coop(u, m) = z.is_active(u) ? 1.0 / n_act : 0.0;
}

// Baseline pinned values: f = 1/(N_c K), c = 1/K.
inline void pinned_shares(const SystemConfig& c, Iterate& z, const SCASettings& s) {
  for (int u = 0; u < c.n_users(); ++u) {
    if (s.pin_f) z.f(u) = 1.0 / (c.n_cells * c.users_per_cell);
    if (s.pin_c) z.c_ul(u) = z.c_dl(u) = 1.0 / c.users_per_cell;
  }
}

// Shares scaled up so that every share budget is used in full.
inline void fill_share_budgets(const SystemConfig& c, Iterate& z, const SCASettings& s) {
  int nu = c.n_users();
  if (!s.pin_f) {
    double sf = 0;
    for (int u = 0; u < nu; ++u)
      if (z.is_active(u)) sf += z.f(u);
    if (sf > 0) z.f /= sf;
  }
  if (s.pin_c) return;
  for (int n = 0; n < c.n_cells; ++n) {
    double su = 0, sd = 0;
    for (int i = 0; i < c.users_per_cell; ++i) {
      int u = c.user(n, i);
      if (!z.is_active(u)) continue;
      su += z.c_ul(u);
      sd += z.c_dl(u);
    }
    for (int i = 0; i < c.users_per_cell; ++i) {
      int u = c.user(n, i);
      if (su > 0) z.c_ul(u) /= su;
      if (sd > 0) z.c_dl(u) /= sd;
    }
  }
}

inline double max_relative_violation(const SystemConfig& c, const ChannelSet& ch, const Iterate& z,
                                     bool hybrid = false) {
  double s = -kInf;
  for (int u = 0; u < c.n_users(); ++u)
    if (z.is_active(u))
      s = std::max(s, (latency_components(c, ch, z, u, hybrid).total() - c.t_max[u]) / c.t_max[u]);
  return s;
}

// ------------------------------------------------------------- generic loop

struct LoopSpec {
  SubOptions sub;
  std::function<double(const Iterate&)> objective;
  double delta = 1e-3;
  int max_outer = 500;
  double gamma0 = 1.0, alpha = 1e-5, gamma_floor = 1e-8;
  bool unit_step = false;
  double prox_scale = 1e-6;
  std::function<bool(const Iterate&)> stop;                           // extra success test
  std::function<void(const Iterate&, Vec&, Vec&)> weights;             // l_p weights
  std::function<double(const Iterate&)> s_value;                       // restore
  std::function<double(const Iterate&)> residual;                      // feasibility monitor
  std::function<void(int, double, const SubSolution&)> progress;
  SolveOptions solve;
};

inline RunReport sca_loop(const SystemConfig& c, const ChannelSet& ch, Iterate z, const LoopSpec& spec) {
  auto t0 = std::chrono::steady_clock::now();
  RunReport rep;
  double e = spec.objective(z);
  rep.trace.push_back(e);
  if (spec.residual) rep.residual.push_back(spec.residual(z));
  double gamma = spec.gamma0;
  rep.termination = "max-outer";
  Vec w1 = Vec::Ones(c.n_users()), w2 = Vec::Ones(c.n_users());
  for (int v = 0; v < spec.max_outer; ++v) {
    if (spec.stop && spec.stop(z)) {
      rep.termination = "delta-met";
      break;
    }
    SubOptions so = spec.sub;
    if (spec.s_value) so.s_anchor = spec.s_value(z);
    if (spec.weights && v > 0) spec.weights(z, w1, w2);
    auto sp = build_subproblem(c, ch, z, prox_weights(c, e, spec.prox_scale), so, &w1, &w2);
    SubSolution sol = solve(sp->prob, sp->x_anchor, spec.solve);
    Iterate zh = sp->iterate(sol.x);
    double g = spec.unit_step ? 1.0 : gamma;
    rep.step_norm.push_back(scaled_distance(sp->layout, zh, z));
    z = combine(z, zh, g);
    double en = spec.objective(z);
    rep.trace.push_back(en);
    rep.kkt.push_back(sol.kkt_residual);
    rep.inner.push_back(sol.inner_iterations);
    if (spec.residual) rep.residual.push_back(spec.residual(z));
    if (spec.progress) spec.progress(v, en, sol);
    bool done = std::abs(en - e) <= spec.delta;
    e = en;
    if (done) {
      rep.termination = "delta-met";
      break;
    }
    if (!spec.unit_step) {
      gamma *= 1.0 - spec.alpha * gamma;
      if (gamma < spec.gamma_floor) {
        rep.termination = "step-underflow";
        break;
      }
    }
  }
  rep.final = z;
  rep.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

// Drives the largest relative deadline violation below zero; returns true on success.
inline bool restore_feasibility(const SystemConfig& c, const ChannelSet& ch, Iterate& z, const SCASettings& s,
                                int max_outer = 25, bool hybrid = false, bool pin_u = false) {
  LoopSpec spec;
  spec.sub.kind = SubKind::restore;
  spec.sub.pin_f = s.pin_f;
  spec.sub.pin_c_ul = spec.sub.pin_c_dl = s.pin_c;
  spec.sub.hybrid = hybrid;
  spec.sub.pin_u = pin_u;
  spec.objective = [&](const Iterate& y) { return max_relative_violation(c, ch, y, hybrid); };
  spec.s_value = spec.objective;
  spec.stop = [&](const Iterate& y) { return max_relative_violation(c, ch, y, hybrid) <= -1e-3; };
  spec.delta = 1e-6;
  spec.unit_step = true;
  spec.max_outer = max_outer;
  spec.solve = s.sub;
  spec.solve.tol = 1e-8;
  try {
    RunReport r = sca_loop(c, ch, z, spec);
    z = r.final;
  } catch (const SubsolverError&) {
    return false;
  }
  return max_relative_violation(c, ch, z, hybrid) < 0;
}

inline const char* condition_text(char k) {
  switch (k) {
    case 'a': return "a) radio latency exceeds the deadline";
    case 'b': return "b) cloud computing capacity";
    case 'c': return "c) uplink backhaul capacity";
    case 'd': return "d) downlink backhaul capacity";
    default: return "unknown";
  }
}

// Feasible starting point. p1: white full-power covariances with shares from
// check_feasibility (then waterfilling, then a restoration SCA). p2: equal shares
// and T set 1% above the resulting latency.
inline Iterate initial_point(const SystemConfig& c, const ChannelSet& ch, const SCASettings& s) {
  Iterate z = zero_iterate(c);
  if (!s.active.empty()) z.active = s.active;
  white_covariances(c, z);
  equal_shares(c, z);
  if (s.mode == Mode::p2) {
    pinned_shares(c, z, s);
    double t = 0;
    for (int u = 0; u < c.n_users(); ++u)
      if (z.is_active(u)) t = std::max(t, latency_components(c, ch, z, u).total());
    z.t_shared = 1.01 * t;
    return z;
  }
  bool pinned = s.pin_f || s.pin_c;
  Feasibility fw = check_feasibility(c, ch, z.q_ul, z.q_dl, nullptr, z.active);
  char first = fw.failed;
  if (!pinned) {
    if (fw.ok) {
      z.f = fw.f;
      z.c_ul = fw.c_ul;
      z.c_dl = fw.c_dl;
      fill_share_budgets(c, z, s);
      return z;
    }
    Iterate w = z;
    for (int u = 0; u < c.n_users(); ++u) {
      if (!w.is_active(u)) continue;
      w.q_ul[u] = waterfill(ch.h_direct(c, u), c.n0, c.p_ul);
      w.q_dl[u] = waterfill(ch.g_direct(c, u), c.n0, z.q_dl[u].trace().real());
    }
    Feasibility ff = check_feasibility(c, ch, w.q_ul, w.q_dl, nullptr, w.active);
    if (ff.ok) {
      w.f = ff.f;
      w.c_ul = ff.c_ul;
      w.c_dl = ff.c_dl;
      fill_share_budgets(c, w, s);
      return w;
    }
  } else {
    pinned_shares(c, z, s);
    if (max_relative_violation(c, ch, z) < 0) return z;
    if (!first) first = 'a';
  }
  // condition a) at full power may still be met with less interference
  if (restore_feasibility(c, ch, z, s)) return z;
  throw InfeasibleStart(first, std::string("infeasible start: condition ") + condition_text(first));
}

inline double true_objective(const SystemConfig& c, const ChannelSet& ch, const Iterate& z, const SCASettings& s) {
  double e = total_energy(c, ch, z, s.uplink_only);
  if (s.mode == Mode::p2) e += s.lambda_weight.value_or(c.lambda_weight) * z.t_shared;
  return e;
}

// SCA loop for the deadline-constrained (p1) and latency-weighted (p2) problems.
inline RunReport run(const SystemConfig& cfg, const ChannelSet& ch, const SCASettings& s,
                     const std::optional<Iterate>& start = std::nullopt) {
  SystemConfig c = cfg;
  if (s.lambda_weight) c.lambda_weight = *s.lambda_weight;
  Iterate z;
  try {
    z = start ? *start : initial_point(c, ch, s);
  } catch (const InfeasibleStart& e) {
    RunReport r;
    r.termination = "infeasible-start";
    r.failed_condition = e.condition;
    return r;
  }
  LoopSpec spec;
  spec.sub.kind = s.mode == Mode::p2 ? SubKind::p2 : SubKind::p3;
  spec.sub.uplink_only = s.uplink_only;
  spec.sub.pin_f = s.pin_f;
  spec.sub.pin_c_ul = spec.sub.pin_c_dl = s.pin_c;
  spec.objective = [&](const Iterate& y) { return true_objective(c, ch, y, s); };
  spec.residual = [&](const Iterate& y) { return max_residual(constraint_residuals(c, ch, y, s.mode)); };
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
