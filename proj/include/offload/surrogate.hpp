#pragma once

#include "offload/model.hpp"

#include <functional>
#include <memory>

namespace offload {

// --------------------------------------------------------------- variable layout

// Maps the decision variables onto a flat real vector. An index of -1 means the
// variable is pinned to its value in `base`.
struct Layout {
  int n = 0;
  HermBasis basis_ul, basis_dl;
  std::vector<int> q_ul, q_dl;
  std::vector<int> f, c_ul, c_dl, x, y, u, f_cenb;
  std::vector<std::vector<int>> c_dl_coop;
  int t_shared = -1, t1 = -1, t2 = -1, s = -1;
  Vec scale;  // natural magnitude of each coordinate
  Iterate base;

  int add(int count, double sc) {
    int off = n;
    n += count;
    scale.conservativeResize(n);
    scale.segment(off, count).setConstant(sc);
    return off;
  }
};

inline Vec pack(const Layout& L, const Iterate& z) {
  Vec x = Vec::Zero(L.n);
  auto put = [&](const std::vector<int>& idx, const Vec& v) {
    for (size_t k = 0; k < idx.size(); ++k)
      if (idx[k] >= 0) x(idx[k]) = v(k);
  };
  for (size_t k = 0; k < L.q_ul.size(); ++k)
    if (L.q_ul[k] >= 0) herm_coords(L.basis_ul, z.q_ul[k], x.data() + L.q_ul[k]);
  for (size_t k = 0; k < L.q_dl.size(); ++k)
    if (L.q_dl[k] >= 0) herm_coords(L.basis_dl, z.q_dl[k], x.data() + L.q_dl[k]);
  put(L.f, z.f);
  put(L.c_ul, z.c_ul);
  put(L.c_dl, z.c_dl);
  put(L.x, z.x);
  put(L.y, z.y);
  put(L.u, z.u);
  put(L.f_cenb, z.f_cenb);
  for (size_t k = 0; k < L.c_dl_coop.size(); ++k)
    for (size_t m = 0; m < L.c_dl_coop[k].size(); ++m)
      if (L.c_dl_coop[k][m] >= 0) x(L.c_dl_coop[k][m]) = z.c_dl_coop(k, m);
  if (L.t_shared >= 0) x(L.t_shared) = z.t_shared;
  if (L.t1 >= 0) x(L.t1) = z.t1;
  if (L.t2 >= 0) x(L.t2) = z.t2;
  return x;
}

inline Iterate unpack(const Layout& L, const Vec& x) {
  Iterate z = L.base;
  auto get = [&](const std::vector<int>& idx, Vec& v) {
    for (size_t k = 0; k < idx.size(); ++k)
      if (idx[k] >= 0) v(k) = x(idx[k]);
  };
  for (size_t k = 0; k < L.q_ul.size(); ++k)
    if (L.q_ul[k] >= 0) z.q_ul[k] = herm_from(L.basis_ul, x.data() + L.q_ul[k]);
  for (size_t k = 0; k < L.q_dl.size(); ++k)
    if (L.q_dl[k] >= 0) z.q_dl[k] = herm_from(L.basis_dl, x.data() + L.q_dl[k]);
  get(L.f, z.f);
  get(L.c_ul, z.c_ul);
  get(L.c_dl, z.c_dl);
  get(L.x, z.x);
  get(L.y, z.y);
  get(L.u, z.u);
  get(L.f_cenb, z.f_cenb);
  for (size_t k = 0; k < L.c_dl_coop.size(); ++k)
    for (size_t m = 0; m < L.c_dl_coop[k].size(); ++m)
      if (L.c_dl_coop[k][m] >= 0) z.c_dl_coop(k, m) = x(L.c_dl_coop[k][m]);
  if (L.t_shared >= 0) z.t_shared = x(L.t_shared);
  if (L.t1 >= 0) z.t1 = x(L.t1);
  if (L.t2 >= 0) z.t2 = x(L.t2);
  return z;
}

// Scalar variable or pinned constant.
inline Jet scalar_jet(int idx, double pinned, const Vec& x, int order) {
  Jet j;
  if (idx < 0) {
    j.v = pinned;
    return j;
  }
  j.v = x(idx);
  if (order >= 1) {
    j.idx = {idx};
    j.resize(order);
    j.g(0) = 1.0;
  }
  return j;
}

// ----------------------------------------------------------------- context

struct ProxWeights {
  double q_ul = 0, q_dl = 0, f = 0, c_ul = 0, c_dl = 0, x = 0, y = 0, u = 0, f_cenb = 0, t = 0;
};

struct SurrogateContext {
  const SystemConfig* cfg = nullptr;
  const ChannelSet* ch = nullptr;
  Iterate anchor;
  ProxWeights gamma;
  double p = 0.5, eps = 1e-3;
  Vec w1, w2;  // l_p weights for x and y

  std::vector<CMat> r_ul, r_dl, r_ul_inv, r_dl_inv;
  Vec rate_ul, rate_dl;
  std::vector<double> logdet_r_ul, logdet_r_dl;
};

inline SurrogateContext make_context(const SystemConfig& c, const ChannelSet& ch, const Iterate& anchor,
                                     const ProxWeights& gamma = {}) {
  SurrogateContext s;
  s.cfg = &c;
  s.ch = &ch;
  s.anchor = anchor;
  s.gamma = gamma;
  int nu = c.n_users();
  s.r_ul.resize(nu);
  s.r_dl.resize(nu);
  s.r_ul_inv.resize(nu);
  s.r_dl_inv.resize(nu);
  s.logdet_r_ul.assign(nu, 0);
  s.logdet_r_dl.assign(nu, 0);
  s.rate_ul = Vec::Zero(nu);
  s.rate_dl = Vec::Zero(nu);
  s.w1 = Vec::Ones(nu);
  s.w2 = Vec::Ones(nu);
  for (int u = 0; u < nu; ++u) {
    if (!anchor.is_active(u)) continue;
    s.r_ul[u] = uplink_interference_cov(c, ch, anchor, u);
    s.r_dl[u] = downlink_interference_cov(c, ch, anchor, u);
    s.r_ul_inv[u] = hermitian_part(s.r_ul[u].llt().solve(CMat::Identity(c.n_rx, c.n_rx)));
    s.r_dl_inv[u] = hermitian_part(s.r_dl[u].llt().solve(CMat::Identity(c.n_rx, c.n_rx)));
    s.logdet_r_ul[u] = logdet_pd(s.r_ul[u]) / kLn2;
    s.logdet_r_dl[u] = logdet_pd(s.r_dl[u]) / kLn2;
    s.rate_ul(u) = uplink_rate(c, ch, anchor, u);
    s.rate_dl(u) = downlink_rate(c, ch, anchor, u);
  }
  return s;
}

// l_p weights omega = (p/2)(v^2 + eps^2)^(p/2 - 1)
inline double lp_weight(double v, double p, double eps) { return 0.5 * p * std::pow(v * v + eps * eps, 0.5 * p - 1.0); }

inline void set_lp_weights_from_anchor(SurrogateContext& s) {
  int nu = s.cfg->n_users();
  for (int u = 0; u < nu; ++u) {
    s.w1(u) = lp_weight(s.anchor.x(u), s.p, s.eps);
    s.w2(u) = lp_weight(s.anchor.y(u), s.p, s.eps);
  }
}

// Conjugate gradient of E_j^ul with respect to Q_i^ul at the anchor (i interferes at j's ceNB).
inline CMat uplink_energy_cross_gradient(const SurrogateContext& s, int i, int j) {
  const SystemConfig& c = *s.cfg;
  int m = c.cell_of(j);
  const CMat& h = s.ch->ul[i][m];
  const CMat& hj = s.ch->h_direct(c, j);
  double r = s.rate_ul(j);
  double tr = s.anchor.q_ul[j].trace().real();
  if (c.b_in[j] == 0 || tr == 0 || !(r > 0)) return CMat::Zero(c.n_tx, c.n_tx);
  CMat x = s.r_ul[j] + hj * s.anchor.q_ul[j] * hj.adjoint();
  CMat xi = hermitian_part(x.llt().solve(CMat::Identity(c.n_rx, c.n_rx)));
  double coef = c.b_in[j] * tr / (kLn2 * r * r);
  return hermitian_part(coef * h.adjoint() * (s.r_ul_inv[j] - xi) * h);
}

// Conjugate gradient of the interference part r^- of user u's rate w.r.t. interferer j.
inline CMat rate_minus_gradient(const SurrogateContext& s, int u, int j, bool uplink) {
  const SystemConfig& c = *s.cfg;
  if (uplink) {
    const CMat& h = s.ch->ul[j][c.cell_of(u)];
    return hermitian_part(h.adjoint() * s.r_ul_inv[u] * h / kLn2);
  }
  const CMat& g = s.anchor.coop ? s.ch->g_stacked[u] : s.ch->dl[u][c.cell_of(j)];
  return hermitian_part(g.adjoint() * s.r_dl_inv[u] * g / kLn2);
}

inline std::vector<int> dl_interferers(const SystemConfig& c, const Iterate& z, int u) {
  if (!z.coop) return interferers(c, z, u);
  std::vector<int> out;
  for (int k = 0; k < c.n_users(); ++k)
    if (k != u && z.is_active(k)) out.push_back(k);
  return out;
}

// ------------------------------------------------------------- jet builders

struct LinearTerm {
  std::vector<int> idx;
  Vec a;
  double c = 0;

  void add(int i, double w) {
    auto it = std::lower_bound(idx.begin(), idx.end(), i);
    size_t p = it - idx.begin();
    if (it != idx.end() && *it == i) {
      a(p) += w;
      return;
    }
    idx.insert(it, i);
    Vec na(a.size() + 1);
    na.head(p) = a.head(p);
    na(p) = w;
    na.tail(a.size() - p) = a.tail(a.size() - p);
    a = na;
  }

  // adds <G, Q - Q0> for a Hermitian block at `off`
  void add_inner(const HermBasis& b, int off, const CMat& g, const CMat& q0) {
    Vec coords = herm_coords(b, g);
    Vec q0c = herm_coords(b, q0);
    for (int k = 0; k < b.size(); ++k) {
      add(off + k, coords(k));
      c -= coords(k) * q0c(k);
    }
  }

  void eval(const Vec& x, int order, Jet& out) const {
    out.v = c;
    for (size_t k = 0; k < idx.size(); ++k) out.v += a(k) * x(idx[k]);
    if (order >= 1) {
      out.idx = idx;
      out.resize(order);
      out.g = a;
    }
  }
};

// Rate surrogate r~ = r+(Q) - r-(Q_-u(v)) - sum <grad r-, Q_j - Q_j(v)>, or the exact
// own-covariance rate with interference frozen (when `own_only`).
struct RateJet {
  LogdetTerm plus;
  HermBasis basis;
  LinearTerm lin;

  bool eval(const Vec& x, int order, Jet& out) const {
    if (!logdet_jet(plus, x, out, order)) return false;
    Jet l;
    lin.eval(x, order, l);
    jet_axpy(out, 1.0, l, order);
    return true;
  }
};

inline RateJet make_rate_jet(const SurrogateContext& s, const Layout& L, int u, bool uplink, bool own_only = false) {
  const SystemConfig& c = *s.cfg;
  const ChannelSet& ch = *s.ch;
  const Iterate& z0 = s.anchor;
  RateJet r;
  const HermBasis& bas = uplink ? L.basis_ul : L.basis_dl;
  const std::vector<int>& off = uplink ? L.q_ul : L.q_dl;
  int n = c.cell_of(u);
  if (own_only) {
    r.plus.base = uplink ? s.r_ul[u] : s.r_dl[u];
    r.lin.c = -(uplink ? s.logdet_r_ul[u] : s.logdet_r_dl[u]);
  } else {
    r.plus.base = (uplink ? c.n0 : (z0.coop ? c.sigma_w2 : c.n0)) * CMat::Identity(c.n_rx, c.n_rx);
    r.lin.c = -(uplink ? s.logdet_r_ul[u] : s.logdet_r_dl[u]);
  }
  auto chan = [&](int j) -> const CMat& {
    if (uplink) return ch.ul[j][n];
    if (z0.coop) return ch.g_stacked[u];
    return ch.dl[u][c.cell_of(j)];
  };
  r.plus.a.push_back(chan(u));
  r.plus.q.push_back({&bas, off[u]});
  std::vector<int> intf = uplink ? interferers(c, z0, u) : dl_interferers(c, z0, u);
  for (int j : intf) {
    const CMat& qj = uplink ? z0.q_ul[j] : z0.q_dl[j];
    if (own_only || off[j] < 0) {
      if (!own_only) r.plus.base += chan(j) * qj * chan(j).adjoint();
      continue;
    }
    r.plus.a.push_back(chan(j));
    r.plus.q.push_back({&bas, off[j]});
    r.lin.add_inner(bas, off[j], -rate_minus_gradient(s, u, j, uplink), qj);
  }
  r.plus.base = hermitian_part(r.plus.base);
  return r;
}

// Sum of c_k / jet_k style terms and linear pieces, assembled lazily.
struct SumJet {
  std::vector<std::function<bool(const Vec&, int, Jet&)>> parts;

  bool eval(const Vec& x, int order, Jet& out) const {
    out = Jet();
    if (order >= 1) out.resize(order);
    Jet t;
    for (const auto& p : parts) {
      t = Jet();
      if (!p(x, order, t)) return false;
      if (!std::isfinite(t.v)) return false;
      jet_axpy(out, 1.0, t, order);
    }
    return true;
  }
};

using JetFn = std::function<bool(const Vec&, int, Jet&)>;

inline JetFn recip_of(std::shared_ptr<RateJet> r, double num) {
  return [r, num](const Vec& x, int order, Jet& out) {
    Jet a;
    if (!r->eval(x, order, a)) return false;
    return jet_recip(a, num, out, order);
  };
}

// num / (scale * var) with var a (possibly pinned) scalar.
inline JetFn recip_scalar(int idx, double pinned, double num, double scale) {
  return [=](const Vec& x, int order, Jet& out) {
    if (num == 0) {
      out = Jet();
      return true;
    }
    Jet a = scalar_jet(idx, pinned, x, order);
    a.v *= scale;
    if (order >= 1) a.g *= scale;
    if (order >= 2) a.h *= scale;
    return jet_recip(a, num, out, order);
  };
}

// k * bound(x, y) where x = xa + xb * var_u (affine in u) and y = share variable,
// using the convex upper bound of x/y that is tight at (xv, yv).
// With x pinned (xb == 0 or u pinned), the exact k * x / y is used instead.
inline JetFn ratio_bound_jet(int iu, double u_pinned, double xa, double xb, int iy, double y_pinned, double k,
                             double xv, double yv, bool exact) {
  return [=](const Vec& x, int order, Jet& out) {
    out = Jet();
    double uval = iu >= 0 ? x(iu) : u_pinned;
    double xx = xa + xb * uval;
    double yy = iy >= 0 ? x(iy) : y_pinned;
    if (exact || iu < 0) {
      if (xx == 0) return true;
      if (!(yy > 0) || xx < 0) return false;
      Jet a = scalar_jet(iy, y_pinned, x, order);
      return jet_recip(a, k * xx, out, order);
    }
    if (!(yy > 0) || xx < -1e-15) return false;
    double v = xx / yy + 0.5 * (xx - xv) * (xx - xv) + 0.5 / (yy * yy) - 0.5 / (yv * yv) + (yy - yv) / (yv * yv * yv);
    out.v = k * v;
    if (order < 1) return true;
    double gx = 1.0 / yy + (xx - xv);
    double gy = -xx / (yy * yy) - 1.0 / (yy * yy * yy) + 1.0 / (yv * yv * yv);
    double hxx = 1.0, hxy = -1.0 / (yy * yy), hyy = 2.0 * xx / (yy * yy * yy) + 3.0 / (yy * yy * yy * yy);
    // variables: u (via xb) and y
    std::vector<std::pair<int, int>> vars;  // (index, role) role 0 = u, 1 = y
    vars.push_back({iu, 0});
    if (iy >= 0) vars.push_back({iy, 1});
    std::sort(vars.begin(), vars.end());
    out.idx.clear();
    for (auto& p : vars) out.idx.push_back(p.first);
    out.resize(order);
    for (size_t a = 0; a < vars.size(); ++a) {
      out.g(a) = k * (vars[a].second == 0 ? xb * gx : gy);
      if (order < 2) continue;
      for (size_t b = 0; b < vars.size(); ++b) {
        int ra = vars[a].second, rb = vars[b].second;
        double h = (ra == 0 && rb == 0) ? xb * xb * hxx : (ra == 1 && rb == 1) ? hyy : xb * hxy;
        out.h(a, b) = k * h;
      }
    }
    return true;
  };
}

inline double ratio_upper_bound(double x, double y, double xv, double yv) {
  return x / y + 0.5 * (x - xv) * (x - xv) + 0.5 / (y * y) - 0.5 / (yv * yv) + (y - yv) / (yv * yv * yv);
}

// ------------------------------------------------------- surrogate functions

// Uplink energy surrogate of user u (separable part plus linearized cross terms).
inline JetFn uplink_energy_surrogate_jet(const SurrogateContext& s, const Layout& L, int u) {
  const SystemConfig& c = *s.cfg;
  double b = c.b_in[u];
  double tr0 = s.anchor.q_ul[u].trace().real();
  auto own = std::make_shared<RateJet>(make_rate_jet(s, L, u, true, true));
  auto lin = std::make_shared<LinearTerm>();
  const HermBasis& bas = L.basis_ul;
  int off = L.q_ul[u];
  double r0 = s.rate_ul(u);
  if (b > 0 && r0 > 0) lin->add_inner(bas, off, (b / r0) * CMat::Identity(c.n_tx, c.n_tx), CMat::Zero(c.n_tx, c.n_tx));
  for (int j : interferers(c, s.anchor, u)) lin->add_inner(bas, off, uplink_energy_cross_gradient(s, u, j), s.anchor.q_ul[u]);
  double num = b * tr0;
  return [own, lin, num](const Vec& x, int order, Jet& out) {
    out = Jet();
    if (num > 0) {
      Jet a;
      if (!own->eval(x, order, a)) return false;
      if (!jet_recip(a, num, out, order)) return false;
    } else if (order >= 1) {
      out.resize(order);
    }
    Jet l;
    lin->eval(x, order, l);
    jet_axpy(out, 1.0, l, order);
    return true;
  };
}

inline JetFn downlink_energy_surrogate_jet(const SurrogateContext& s, const Layout& L, int u) {
  const SystemConfig& c = *s.cfg;
  auto r = std::make_shared<RateJet>(make_rate_jet(s, L, u, false));
  return recip_of(r, c.b_out[u] * c.d_rx[u]);
}

// B^I/(W^ul r~ul) + B^O/(W^dl r~dl); terms with zero bits are dropped.
inline JetFn latency_surrogate_jet(const SurrogateContext& s, const Layout& L, int u, bool with_dl = true) {
  const SystemConfig& c = *s.cfg;
  SumJet sum;
  if (c.b_in[u] > 0) sum.parts.push_back(recip_of(std::make_shared<RateJet>(make_rate_jet(s, L, u, true)), c.b_in[u] / c.w_ul));
  if (with_dl && c.b_out[u] > 0)
    sum.parts.push_back(recip_of(std::make_shared<RateJet>(make_rate_jet(s, L, u, false)), c.b_out[u] / c.w_dl));
  return [sum](const Vec& x, int order, Jet& out) { return sum.eval(x, order, out); };
}

// tr(Q_u) - (E^M / B^I) r~ul
inline JetFn energy_constraint_surrogate_jet(const SurrogateContext& s, const Layout& L, int u) {
  const SystemConfig& c = *s.cfg;
  double em = local_energy(c, u);
  auto r = std::make_shared<RateJet>(make_rate_jet(s, L, u, true));
  auto tr = std::make_shared<LinearTerm>();
  tr->add_inner(L.basis_ul, L.q_ul[u], CMat::Identity(c.n_tx, c.n_tx), CMat::Zero(c.n_tx, c.n_tx));
  double k = c.b_in[u] > 0 ? em / c.b_in[u] : 0.0;
  return [r, tr, k](const Vec& x, int order, Jet& out) {
    tr->eval(x, order, out);
    if (k == 0) return true;
    Jet a;
    if (!r->eval(x, order, a)) return false;
    jet_axpy(out, -k, a, order);
    return true;
  };
}

// sum_k gamma_k / 2 (x_k - c_k)^2 over the listed coordinates
struct ProxTerm {
  std::vector<int> idx;
  Vec w, center;

  void add(int i, double gamma, double c) {
    if (i < 0 || gamma <= 0) return;
    idx.push_back(i);
    w.conservativeResize(w.size() + 1);
    center.conservativeResize(center.size() + 1);
    w(w.size() - 1) = gamma;
    center(center.size() - 1) = c;
  }

  void finalize() {
    std::vector<size_t> ord(idx.size());
    for (size_t k = 0; k < ord.size(); ++k) ord[k] = k;
    std::sort(ord.begin(), ord.end(), [&](size_t a, size_t b) { return idx[a] < idx[b]; });
    std::vector<int> i2;
    Vec w2(w.size()), c2(center.size());
    for (size_t k = 0; k < ord.size(); ++k) {
      i2.push_back(idx[ord[k]]);
      w2(k) = w(ord[k]);
      c2(k) = center(ord[k]);
    }
    idx = i2;
    w = w2;
    center = c2;
  }

  void eval(const Vec& x, int order, Jet& out) const {
    out = Jet();
    out.idx = idx;
    out.resize(order);
    for (size_t k = 0; k < idx.size(); ++k) {
      double d = x(idx[k]) - center(k);
      out.v += 0.5 * w(k) * d * d;
      if (order >= 1) out.g(k) = w(k) * d;
      if (order >= 2) out.h(k, k) = w(k);
    }
  }
};

inline ProxTerm make_prox(const SurrogateContext& s, const Layout& L) {
  ProxTerm p;
  Vec a = pack(L, s.anchor);
  const ProxWeights& g = s.gamma;
  auto blocks = [&](const std::vector<int>& off, int sz, double gamma) {
    for (int o : off)
      if (o >= 0)
        for (int k = 0; k < sz; ++k) p.add(o + k, gamma, a(o + k));
  };
  blocks(L.q_ul, L.basis_ul.size(), g.q_ul);
  blocks(L.q_dl, L.basis_dl.size(), g.q_dl);
  blocks(L.f, 1, g.f);
  blocks(L.c_ul, 1, g.c_ul);
  blocks(L.c_dl, 1, g.c_dl);
  blocks(L.x, 1, g.x);
  blocks(L.y, 1, g.y);
  blocks(L.u, 1, g.u);
  blocks(L.f_cenb, 1, g.f_cenb);
  for (const auto& row : L.c_dl_coop) blocks(row, 1, g.c_dl);
  for (int t : {L.t_shared, L.t1, L.t2}) p.add(t, g.t, t >= 0 ? a(t) : 0.0);
  p.finalize();
  return p;
}

// Energy objective surrogate: per-user uplink surrogates, downlink reciprocal-rate
// surrogates (unless uplink_only) and the proximal term.
inline JetFn objective_surrogate_jet(const SurrogateContext& s, const Layout& L, bool uplink_only = false) {
  const SystemConfig& c = *s.cfg;
  SumJet sum;
  for (int u = 0; u < c.n_users(); ++u) {
    if (!s.anchor.is_active(u)) continue;
    sum.parts.push_back(uplink_energy_surrogate_jet(s, L, u));
    if (!uplink_only && c.b_out[u] > 0) sum.parts.push_back(downlink_energy_surrogate_jet(s, L, u));
  }
  auto prox = std::make_shared<ProxTerm>(make_prox(s, L));
  sum.parts.push_back([prox](const Vec& x, int order, Jet& out) {
    prox->eval(x, order, out);
    return true;
  });
  return [sum](const Vec& x, int order, Jet& out) { return sum.eval(x, order, out); };
}

// -------------------------------------------------- value-level conveniences

// Layout over every active user's covariances only (shares pinned to z).
inline Layout covariance_layout(const SystemConfig& c, const Iterate& z) {
  Layout L;
  L.base = z;
  int nu = c.n_users();
  L.basis_ul = HermBasis::full(c.n_tx);
  L.basis_dl = HermBasis::full(z.coop ? c.n_cells * c.n_tx : c.n_tx);
  L.q_ul.assign(nu, -1);
  L.q_dl.assign(nu, -1);
  L.f.assign(nu, -1);
  L.c_ul.assign(nu, -1);
  L.c_dl.assign(nu, -1);
  L.x.assign(nu, -1);
  L.y.assign(nu, -1);
  L.u.assign(nu, -1);
  L.f_cenb.assign(nu, -1);
  for (int u = 0; u < nu; ++u) {
    if (!z.is_active(u)) continue;
    L.q_ul[u] = L.add(L.basis_ul.size(), c.p_ul);
    L.q_dl[u] = L.add(L.basis_dl.size(), c.p_dl);
  }
  return L;
}

inline double eval_at(const JetFn& f, const Layout& L, const Iterate& z) {
  Jet j;
  if (!f(pack(L, z), 0, j)) return kInf;
  return j.v;
}

inline double uplink_energy_surrogate(const SurrogateContext& s, const Iterate& z, int u) {
  Layout L = covariance_layout(*s.cfg, s.anchor);
  return eval_at(uplink_energy_surrogate_jet(s, L, u), L, z);
}

inline double rate_surrogate(const SurrogateContext& s, const Iterate& z, int u, bool uplink) {
  Layout L = covariance_layout(*s.cfg, s.anchor);
  RateJet r = make_rate_jet(s, L, u, uplink);
  Jet j;
  if (!r.eval(pack(L, z), 0, j)) return std::numeric_limits<double>::quiet_NaN();
  return j.v;
}

inline double latency_surrogate(const SurrogateContext& s, const Iterate& z, int u) {
  Layout L = covariance_layout(*s.cfg, s.anchor);
  return eval_at(latency_surrogate_jet(s, L, u), L, z);
}

inline double energy_constraint_surrogate(const SurrogateContext& s, const Iterate& z, int u) {
  Layout L = covariance_layout(*s.cfg, s.anchor);
  return eval_at(energy_constraint_surrogate_jet(s, L, u), L, z);
}

// Proximal term over every component of the iterate.
inline double proximal_term(const SurrogateContext& s, const Iterate& z) {
  const Iterate& a = s.anchor;
  const ProxWeights& g = s.gamma;
  double p = 0;
  for (size_t k = 0; k < z.q_ul.size(); ++k) {
    if (!a.is_active(static_cast<int>(k))) continue;
    p += g.q_ul * (z.q_ul[k] - a.q_ul[k]).squaredNorm() + g.q_dl * (z.q_dl[k] - a.q_dl[k]).squaredNorm();
    auto sq = [](double d) { return d * d; };
    p += g.f * sq(z.f(k) - a.f(k)) + g.c_ul * sq(z.c_ul(k) - a.c_ul(k)) + g.c_dl * sq(z.c_dl(k) - a.c_dl(k)) +
         g.x * sq(z.x(k) - a.x(k)) + g.y * sq(z.y(k) - a.y(k)) + g.u * sq(z.u(k) - a.u(k)) +
         g.f_cenb * sq(z.f_cenb(k) - a.f_cenb(k));
  }
  return 0.5 * p;
}

inline double objective_surrogate(const SurrogateContext& s, const Iterate& z, bool uplink_only = false) {
  SurrogateContext t = s;
  t.gamma = ProxWeights{};
  Layout L = covariance_layout(*s.cfg, s.anchor);
  return eval_at(objective_surrogate_jet(t, L, uplink_only), L, z) + proximal_term(s, z);
}

inline double lp_objective(const Vec& x, const Vec& y, double p, double eps) {
  double f = 0;
  for (int k = 0; k < x.size(); ++k) f += std::pow(x(k) * x(k) + eps * eps, 0.5 * p);
  for (int k = 0; k < y.size(); ++k) f += std::pow(y(k) * y(k) + eps * eps, 0.5 * p);
  return f;
}

// sum w1 x^2 + w2 y^2 + proximal terms on x, y
inline double lp_majorizer(const SurrogateContext& s, const Vec& x, const Vec& y) {
  double m = 0;
  for (int k = 0; k < x.size(); ++k) {
    double dx = x(k) - s.anchor.x(k), dy = y(k) - s.anchor.y(k);
    m += s.w1(k) * x(k) * x(k) + s.w2(k) * y(k) * y(k) + 0.5 * s.gamma.x * dx * dx + 0.5 * s.gamma.y * dy * dy;
  }
  return m;
}

// Hybrid C.1 left-hand side with the four ratio terms replaced by their bounds.
inline double hybrid_latency_surrogate(const SurrogateContext& s, const Iterate& z, int u) {
  const SystemConfig& c = *s.cfg;
  const Iterate& a = s.anchor;
  int n = c.cell_of(u);
  double g = latency_surrogate(s, z, u);
  auto term = [&](double xz, double yz, double xv, double yv, double k) {
    if (k == 0) return 0.0;
    if (xz == 0 && xv == 0) return 0.0;
    return k * ratio_upper_bound(xz, yz, xv, yv);
  };
  g += term(1 - z.u(u), z.f_cenb(u), 1 - a.u(u), a.f_cenb(u), c.v_cycles[u] / c.f_cenb[n]);
  g += term(z.u(u), z.f(u), a.u(u), a.f(u), c.v_cycles[u] / c.f_cloud);
  g += term(z.u(u), z.c_ul(u), a.u(u), a.c_ul(u), c.b_in[u] / c.c_ul[n]);
  g += term(z.u(u), z.c_dl(u), a.u(u), a.c_dl(u), c.b_out[u] / c.c_dl[n]);
  return g;
}

inline double hybrid_latency(const SystemConfig& c, const ChannelSet& ch, const Iterate& z, int u) {
  return latency_components(c, ch, z, u, true).total();
}

}  // namespace offload
