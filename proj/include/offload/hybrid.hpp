#pragma once

#include "offload/sca.hpp"

namespace offload {

struct HybridSettings {
  double gamma0 = 1.0, alpha = 1e-5, delta = 1e-3;
  int max_outer = 500;
  double prox_scale = 1e-6, gamma_floor = 1e-8;
  std::optional<double> pin_u;  // 1: pure cloud, 0: pure edge
  SolveOptions sub;
  std::function<void(int, double, const SubSolution&)> progress;
};

inline Iterate hybrid_initial_point(const SystemConfig& c, const ChannelSet& ch, const HybridSettings& s) {
  bool pinned = s.pin_u.has_value();
  Iterate z;
  if (pinned && *s.pin_u == 1.0) {
    // same start as the uplink-only cloud problem, so the pinned run reproduces it
    SCASettings p1;
    p1.uplink_only = true;
    z = initial_point(c, ch, p1);
  } else {
    z = zero_iterate(c);
    white_covariances(c, z);
    equal_shares(c, z);
  }
  z.u = Vec::Constant(c.n_users(), pinned ? *s.pin_u : 0.5);
  for (int u = 0; u < c.n_users(); ++u) z.f_cenb(u) = 1.0 / c.users_per_cell;
  if (max_relative_violation(c, ch, z, true) < 0) return z;
  Iterate w = z;
  if (restore_feasibility(c, ch, w, SCASettings{}, 25, true, pinned)) return w;
  char k = check_feasibility(c, ch, z.q_ul, z.q_dl).failed;
  if (!k) k = 'a';
  throw InfeasibleStart(k, std::string("infeasible start: condition ") + condition_text(k));
}

// SCA on the relaxed edge/cloud split problem; objective is the uplink energy.
inline RunReport run_hybrid(const SystemConfig& c, const ChannelSet& ch, const HybridSettings& s = {}) {
  Iterate z;
  try {
    z = hybrid_initial_point(c, ch, s);
  } catch (const InfeasibleStart& e) {
    RunReport r;
    r.termination = "infeasible-start";
    r.failed_condition = e.condition;
    return r;
  }
  LoopSpec spec;
  spec.sub.kind = SubKind::p7;
  spec.sub.pin_u = s.pin_u.has_value();
  spec.objective = [&](const Iterate& y) { return total_energy(c, ch, y, true); };
  spec.residual = [&](const Iterate& y) { return max_residual(constraint_residuals(c, ch, y, Mode::p6)); };
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

// Cloud fractions u of the final iterate, clamped to [0, 1] within 1e-9.
inline Vec split_fractions(const RunReport& r) {
  const Vec& u = r.final.u;
  Vec out(u.size());
  for (int k = 0; k < u.size(); ++k) {
    if (u(k) < -1e-9 || u(k) > 1 + 1e-9) throw std::domain_error("split_fractions: u outside [0, 1]");
    out(k) = std::clamp(u(k), 0.0, 1.0);
  }
  return out;
}

}  // namespace offload
