#pragma once

#include "offload/subsolver.hpp"

#include <memory>

namespace offload {

// p3: energy problem with fixed deadlines; p2: weighted energy + lambda T;
// p5: l_p scheduling slacks; p7: hybrid cloudlet/cloud split; p8: network MIMO;
// restore: minimize the largest relative deadline violation s.
enum class SubKind { p3, p2, p5, p7, p8, restore };

struct SubOptions {
  SubKind kind = SubKind::p3;
  bool uplink_only = false;
  bool pin_f = false, pin_c_ul = false, pin_c_dl = false, pin_u = false;
  bool block_diag = false;  // force block-diagonal stacked covariances (p8)
  bool hybrid = false;      // restore with the cloudlet/cloud split (p7 constraints)
  double s_anchor = 0;      // restore: current value of s
};

// Owns the layout the jets point into; not movable.
struct Subproblem {
  SurrogateContext ctx;
  Layout layout;
  ConvexProblem prob;
  Vec x_anchor;
  SubOptions opt;

  Subproblem() = default;
  Subproblem(const Subproblem&) = delete;
  Subproblem& operator=(const Subproblem&) = delete;

  Iterate iterate(const Vec& x) const { return unpack(layout, x); }
};

namespace detail {

inline JetFn constant_jet(double v) {
  return [v](const Vec&, int, Jet& j) {
    j = Jet::constant(v);
    return true;
  };
}

// w * x[i] + c for a possibly pinned variable
inline JetFn scalar_affine(int i, double pinned, double w, double c) {
  return [=](const Vec& x, int order, Jet& j) {
    j = scalar_jet(i, pinned, x, order);
    j.v = w * j.v + c;
    if (order >= 1 && j.size()) j.g *= w;
    if (order >= 2 && j.size()) j.h = Mat::Zero(1, 1);
    return true;
  };
}

inline JetFn linear_jet(std::shared_ptr<LinearTerm> t) {
  return [t](const Vec& x, int order, Jet& j) {
    t->eval(x, order, j);
    if (order >= 2) j.h = Mat::Zero(j.size(), j.size());
    return true;
  };
}

inline JetFn sum_jet(SumJet s) {
  return [s](const Vec& x, int order, Jet& j) { return s.eval(x, order, j); };
}

}  // namespace detail

inline int active_count(const Iterate& z, int nu) {
  int k = 0;
  for (int u = 0; u < nu; ++u) k += z.is_active(u);
  return k;
}

inline std::unique_ptr<Subproblem> build_subproblem(const SystemConfig& c, const ChannelSet& ch,
                                                    const Iterate& anchor, const ProxWeights& gamma,
                                                    const SubOptions& opt, const Vec* w1 = nullptr,
                                                    const Vec* w2 = nullptr) {
  using namespace detail;
  auto sp = std::make_unique<Subproblem>();
  sp->opt = opt;
  sp->ctx = make_context(c, ch, anchor, gamma);
  if (w1) sp->ctx.w1 = *w1;
  if (w2) sp->ctx.w2 = *w2;
  const SurrogateContext& ctx = sp->ctx;
  const bool coop = anchor.coop;
  const SubKind kind = opt.kind;
  const bool hyb = kind == SubKind::p7 || opt.hybrid;
  const int nu = c.n_users(), nt = c.n_tx;
  const int n_act = active_count(anchor, nu);
  std::vector<int> k_act(c.n_cells, 0);
  for (int u = 0; u < nu; ++u)
    if (anchor.is_active(u)) ++k_act[c.cell_of(u)];

  // ---------------------------------------------------------------- layout
  Layout& L = sp->layout;
  L.base = anchor;
  L.basis_ul = HermBasis::full(nt);
  L.basis_dl = coop ? (opt.block_diag ? HermBasis::block_diagonal(c.n_cells * nt, nt) : HermBasis::full(c.n_cells * nt))
                    : HermBasis::full(nt);
  for (auto* v : {&L.q_ul, &L.q_dl, &L.f, &L.c_ul, &L.c_dl, &L.x, &L.y, &L.u, &L.f_cenb}) v->assign(nu, -1);
  if (coop) L.c_dl_coop.assign(nu, std::vector<int>(c.n_cells, -1));
  double t_mean = 0;
  for (int u = 0; u < nu; ++u) t_mean += c.t_max[u] / nu;
  for (int u = 0; u < nu; ++u) {
    if (!anchor.is_active(u)) continue;
    int n = c.cell_of(u);
    L.q_ul[u] = L.add(L.basis_ul.size(), c.p_ul);
    L.q_dl[u] = L.add(L.basis_dl.size(), coop ? c.p_dl / n_act : c.p_dl / k_act[n]);
    if (!opt.pin_f) L.f[u] = L.add(1, 1.0 / n_act);
    if (!opt.pin_c_ul) L.c_ul[u] = L.add(1, 1.0 / k_act[n]);
    if (coop) {
      if (!opt.pin_c_dl)
        for (int m = 0; m < c.n_cells; ++m) L.c_dl_coop[u][m] = L.add(1, 1.0 / n_act);
    } else if (!opt.pin_c_dl) {
      L.c_dl[u] = L.add(1, 1.0 / k_act[n]);
    }
    if (kind == SubKind::p5) {
      L.x[u] = L.add(1, c.t_max[u]);
      L.y[u] = L.add(1, c.p_ul);
    }
    if (hyb) {
      if (!opt.pin_u) L.u[u] = L.add(1, 1.0);
      L.f_cenb[u] = L.add(1, 1.0 / k_act[n]);
    }
  }
  if (kind == SubKind::p2) L.t_shared = L.add(1, t_mean);
  if (kind == SubKind::p8) {
    L.t1 = L.add(1, t_mean);
    L.t2 = L.add(1, t_mean);
  }
  if (kind == SubKind::restore) L.s = L.add(1, 1.0);

  ConvexProblem& P = sp->prob;
  P.n = L.n;
  P.scale = L.scale;
  sp->x_anchor = pack(L, anchor);
  if (L.s >= 0) sp->x_anchor(L.s) = opt.s_anchor;

  // ------------------------------------------------------------- objective
  double lambda = c.lambda_weight;
  if (kind == SubKind::p5) {
    auto prox = std::make_shared<ProxTerm>(make_prox(ctx, L));
    std::vector<std::tuple<int, double>> quad;
    for (int u = 0; u < nu; ++u)
      if (anchor.is_active(u)) {
        quad.emplace_back(L.x[u], ctx.w1(u));
        quad.emplace_back(L.y[u], ctx.w2(u));
      }
    P.objective = [prox, quad](const Vec& x, int order, Jet& j) {
      prox->eval(x, order, j);
      Jet q;
      for (auto [i, w] : quad) {
        q = Jet();
        q.v = w * x(i) * x(i);
        if (order >= 1) {
          q.idx = {i};
          q.resize(order);
          q.g(0) = 2 * w * x(i);
          if (order >= 2) q.h(0, 0) = 2 * w;
        }
        jet_axpy(j, 1.0, q, order);
      }
      return true;
    };
  } else if (kind == SubKind::restore) {
    SumJet s;
    s.parts.push_back(scalar_affine(L.s, 0, 1.0, 0.0));
    auto prox = std::make_shared<ProxTerm>(make_prox(ctx, L));
    s.parts.push_back([prox](const Vec& x, int order, Jet& j) {
      prox->eval(x, order, j);
      return true;
    });
    P.objective = sum_jet(s);
  } else {
    bool ul_only = opt.uplink_only || kind == SubKind::p7 || kind == SubKind::p8;
    SumJet s;
    s.parts.push_back(objective_surrogate_jet(ctx, L, ul_only));
    if (kind == SubKind::p2) s.parts.push_back(scalar_affine(L.t_shared, 0, lambda, 0.0));
    if (kind == SubKind::p8) {
      s.parts.push_back(scalar_affine(L.t1, 0, lambda, 0.0));
      s.parts.push_back(scalar_affine(L.t2, 0, lambda, 0.0));
    }
    P.objective = sum_jet(s);
  }

  // ------------------------------------------------------------ constraints
  auto add = [&](std::string name, JetFn g, double scale, bool linear) {
    P.cons.push_back({std::move(name), std::move(g), scale, linear});
  };
  auto nm = [](const char* s, int k) { return std::string(s) + "[" + std::to_string(k) + "]"; };
  auto nonneg = [&](const char* s, int idx, int k, double scale) {
    if (idx < 0) return;
    add(nm(s, k), scalar_affine(idx, 0, -1.0, 0.0), scale, true);
  };
  auto sum_cap = [&](std::string name, const std::vector<int>& idx, double cap, double scale) {
    auto t = std::make_shared<LinearTerm>();
    bool any = false;
    for (int i : idx)
      if (i >= 0) {
        t->add(i, 1.0);
        any = true;
      }
    if (!any) return;
    t->c = -cap;
    add(std::move(name), linear_jet(t), scale, true);
  };
  CMat eye_t = CMat::Identity(nt, nt);

  for (int u = 0; u < nu; ++u) {
    if (!anchor.is_active(u)) continue;
    int n = c.cell_of(u);
    double T = c.t_max[u];
    // C.1
    SumJet g1;
    g1.parts.push_back(latency_surrogate_jet(ctx, L, u, kind != SubKind::p8));
    if (hyb) {
      const Iterate& a = anchor;
      bool exact = opt.pin_u;
      double uv = a.u(u);
      if (c.v_cycles[u] > 0)
        g1.parts.push_back(ratio_bound_jet(L.u[u], a.u(u), 1.0, -1.0, L.f_cenb[u], a.f_cenb(u),
                                           c.v_cycles[u] / c.f_cenb[n], 1 - uv, a.f_cenb(u), exact));
      if (c.v_cycles[u] > 0)
        g1.parts.push_back(ratio_bound_jet(L.u[u], a.u(u), 0.0, 1.0, L.f[u], a.f(u), c.v_cycles[u] / c.f_cloud, uv,
                                           a.f(u), exact));
      if (c.b_in[u] > 0)
        g1.parts.push_back(ratio_bound_jet(L.u[u], a.u(u), 0.0, 1.0, L.c_ul[u], a.c_ul(u), c.b_in[u] / c.c_ul[n], uv,
                                           a.c_ul(u), exact));
      if (c.b_out[u] > 0)
        g1.parts.push_back(ratio_bound_jet(L.u[u], a.u(u), 0.0, 1.0, L.c_dl[u], a.c_dl(u), c.b_out[u] / c.c_dl[n],
                                           uv, a.c_dl(u), exact));
    } else {
      g1.parts.push_back(recip_scalar(L.f[u], anchor.f(u), c.v_cycles[u], c.f_cloud));
      g1.parts.push_back(recip_scalar(L.c_ul[u], anchor.c_ul(u), c.b_in[u], c.c_ul[n]));
      if (coop) {
        for (int m = 0; m < c.n_cells; ++m)
          g1.parts.push_back(recip_scalar(L.c_dl_coop[u][m], anchor.c_dl_coop(u, m), c.b_out[u], c.c_dl[m]));
      } else {
        g1.parts.push_back(recip_scalar(L.c_dl[u], anchor.c_dl(u), c.b_out[u], c.c_dl[n]));
      }
    }
    switch (kind) {
      case SubKind::p2: g1.parts.push_back(scalar_affine(L.t_shared, 0, -1.0, 0.0)); break;
      case SubKind::p8: g1.parts.push_back(scalar_affine(L.t1, 0, -1.0, 0.0)); break;
      case SubKind::restore: g1.parts.push_back(scalar_affine(L.s, 0, -T, -T)); break;
      case SubKind::p5: g1.parts.push_back(scalar_affine(L.x[u], 0, -1.0, -T)); break;
      default: g1.parts.push_back(constant_jet(-T)); break;
    }
    // p5 anchors may sit far above a tiny deadline; scale by the latency itself
    double t_scale = kind == SubKind::p5 ? std::max(T, T + anchor.x(u)) : T;
    add(nm("C1_latency", u), sum_jet(g1), t_scale, false);
    if (kind == SubKind::p8 && c.b_out[u] > 0) {
      SumJet g2;
      g2.parts.push_back(recip_of(std::make_shared<RateJet>(make_rate_jet(ctx, L, u, false)), c.b_out[u] / c.w_dl));
      g2.parts.push_back(scalar_affine(L.t2, 0, -1.0, 0.0));
      add(nm("C2_phase2", u), sum_jet(g2), T, false);
    }
    if (kind == SubKind::p5) {
      SumJet g2;
      g2.parts.push_back(energy_constraint_surrogate_jet(ctx, L, u));
      g2.parts.push_back(scalar_affine(L.y[u], 0, -1.0, 0.0));
      add(nm("C2_energy", u), sum_jet(g2), c.p_ul, false);
    }
    nonneg("f_nonneg", L.f[u], u, 1.0 / n_act);
    nonneg("c_ul_nonneg", L.c_ul[u], u, 1.0 / k_act[n]);
    if (coop) {
      for (int m = 0; m < c.n_cells; ++m) nonneg("c_dl_nonneg", L.c_dl_coop[u][m], u, 1.0 / n_act);
    } else {
      nonneg("c_dl_nonneg", L.c_dl[u], u, 1.0 / k_act[n]);
    }
    if (kind == SubKind::p5) {
      nonneg("x_nonneg", L.x[u], u, T);
      nonneg("y_nonneg", L.y[u], u, c.p_ul);
    }
    if (hyb) {
      nonneg("u_lower", L.u[u], u, 1.0);
      if (L.u[u] >= 0) add(nm("u_upper", u), scalar_affine(L.u[u], 0, 1.0, -1.0), 1.0, true);
      nonneg("f_cenb_nonneg", L.f_cenb[u], u, 1.0 / k_act[n]);
    }
    P.psd.push_back({nm("Q_ul_psd", u), &L.basis_ul, L.q_ul[u], c.p_ul});
    auto tr = std::make_shared<LinearTerm>();
    tr->add_inner(L.basis_ul, L.q_ul[u], eye_t, CMat::Zero(nt, nt));
    tr->c = -c.p_ul;
    add(nm("Q_ul_power", u), linear_jet(tr), c.p_ul, true);
    P.psd.push_back({nm("Q_dl_psd", u), &L.basis_dl, L.q_dl[u], coop ? c.p_dl / n_act : c.p_dl / k_act[n]});
  }
  for (int n = 0; n < c.n_cells; ++n) {
    std::vector<int> cu, cdl, fc;
    auto pw = std::make_shared<LinearTerm>();
    bool any_q = false;
    for (int i = 0; i < c.users_per_cell; ++i) {
      int u = c.user(n, i);
      if (!anchor.is_active(u)) continue;
      cu.push_back(L.c_ul[u]);
      fc.push_back(L.f_cenb[u]);
      if (!coop) {
        cdl.push_back(L.c_dl[u]);
        pw->add_inner(L.basis_dl, L.q_dl[u], eye_t, CMat::Zero(nt, nt));
        any_q = true;
      }
    }
    if (coop) {
      int nd = c.n_cells * nt;
      CMat sel = CMat::Zero(nd, nd);
      sel.block(n * nt, n * nt, nt, nt) = eye_t;
      for (int u = 0; u < nu; ++u) {
        if (!anchor.is_active(u)) continue;
        cdl.push_back(L.c_dl_coop[u][n]);
        pw->add_inner(L.basis_dl, L.q_dl[u], sel, CMat::Zero(nd, nd));
        any_q = true;
      }
    }
    sum_cap(nm("backhaul_ul_share", n), cu, 1.0, 1.0);
    sum_cap(nm("backhaul_dl_share", n), cdl, 1.0, 1.0);
    if (any_q) {
      pw->c = -c.p_dl;
      add(nm("Q_dl_power", n), linear_jet(pw), c.p_dl, true);
    }
    if (hyb) sum_cap(nm("cloudlet_share", n), fc, 1.0, 1.0);
  }
  {
    std::vector<int> fs;
    for (int u = 0; u < nu; ++u)
      if (anchor.is_active(u)) fs.push_back(L.f[u]);
    sum_cap("cloud_share", fs, 1.0, 1.0);
  }
  if (kind == SubKind::restore) add("s_floor", scalar_affine(L.s, 0, -1.0, -1.0), 1.0, true);

  // ----------------------------------------------------------------- center
  Iterate zc = anchor;
  for (int u = 0; u < nu; ++u) {
    if (!anchor.is_active(u)) continue;
    int n = c.cell_of(u);
    zc.q_ul[u] = c.p_ul / (2.0 * nt) * eye_t;
    int nd = static_cast<int>(anchor.q_dl[u].rows());
    zc.q_dl[u] = (coop ? c.p_dl / (2.0 * n_act * nt) : c.p_dl / (2.0 * k_act[n] * nt)) * CMat::Identity(nd, nd);
    zc.f(u) = 0.5 / n_act;
    zc.c_ul(u) = 0.5 / k_act[n];
    zc.c_dl(u) = 0.5 / k_act[n];
    if (coop)
      for (int m = 0; m < c.n_cells; ++m) zc.c_dl_coop(u, m) = 0.5 / n_act;
    zc.x(u) = anchor.x(u) + c.t_max[u];
    zc.y(u) = anchor.y(u) + c.p_ul;
    zc.u(u) = 0.5;
    zc.f_cenb(u) = 0.5 / k_act[n];
  }
  P.center = pack(L, zc);
  if (L.s >= 0) P.center(L.s) = std::max(opt.s_anchor, 0.0);

  Jet j0;
  double f0 = P.objective(sp->x_anchor, 0, j0) ? std::abs(j0.v) : 1.0;
  if (kind == SubKind::p5) f0 = std::max(f0, 1e-6 * n_act);
  if (kind == SubKind::restore) f0 = 1.0;
  P.objective_scale = std::max(f0, 1e-300);
  return sp;
}

// Variable and constraint counts of the p3 subproblem for all users active.
struct DimensionCount {
  int n = 0, m = 0;
};

inline DimensionCount p3_dimension_counts(int k, int nc, int nt) {
  return {(2 * nt * nt + 3) * k * nc, 7 * k * nc + 3 * nc + 1};
}

}  // namespace offload
