#pragma once

// Random instances and property checks shared by the test suites, the acceptance
// runner and `offload verify`.

#include "offload/surrogate.hpp"

#include <map>
#include <random>
#include <string>

namespace offload::testing {

inline CMat random_complex(std::mt19937_64& rng, int r, int c, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, 1.0);
  CMat m(r, c);
  for (int j = 0; j < c; ++j)
    for (int i = 0; i < r; ++i) m(i, j) = cd(nd(rng), nd(rng)) * (scale / std::sqrt(2.0));
  return m;
}

inline CMat random_hermitian(std::mt19937_64& rng, int n, double scale = 1.0) {
  CMat a = random_complex(rng, n, n, scale);
  return hermitian_part(a);
}

// Random PSD matrix with trace `tr`.
inline CMat random_psd(std::mt19937_64& rng, int n, double tr) {
  CMat a = random_complex(rng, n, n);
  CMat q = a * a.adjoint();
  return hermitian_part(q * (tr / q.trace().real()));
}

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline double rel_err(double a, double b, double floor = 1e-300) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

inline double rel_err(const Vec& a, const Vec& b, double floor = 1e-300) {
  return (a - b).norm() / std::max({a.norm(), b.norm(), floor});
}

// Central-difference gradient of f over x, perturbing coordinate k by h*scale(k).
template <class F>
Vec fd_gradient(F&& f, const Vec& x, const Vec& scale, double h = 1e-6) {
  Vec g(x.size());
  for (int k = 0; k < x.size(); ++k) {
    Vec xp = x, xm = x;
    double s = h * scale(k);
    xp(k) += s;
    xm(k) -= s;
    g(k) = (f(xp) - f(xm)) / (2 * s);
  }
  return g;
}

// Config with small dimensions and a workload fixed by seed.
inline SystemConfig small_config(int nc, int k, int nt, std::uint64_t seed = 1) {
  SystemConfig c;
  c.n_cells = nc;
  c.users_per_cell = k;
  c.n_tx = nt;
  c.n_rx = nt;
  fill_defaults(c);
  return draw_workload(c, seed);
}

// Random iterate with covariances scaled to a fraction of the budgets.
inline Iterate random_iterate(const SystemConfig& c, std::mt19937_64& rng, bool coop = false) {
  Iterate z = zero_iterate(c, coop);
  int nu = c.n_users();
  int nd = coop ? c.n_cells * c.n_tx : c.n_tx;
  for (int u = 0; u < nu; ++u) {
    z.q_ul[u] = random_psd(rng, c.n_tx, c.p_ul * uniform(rng, 0.05, 1.0));
    z.q_dl[u] = random_psd(rng, nd, c.p_dl / c.users_per_cell * uniform(rng, 0.05, 1.0));
    z.f(u) = uniform(rng, 0.1, 1.0) / nu;
    z.c_ul(u) = uniform(rng, 0.1, 1.0) / c.users_per_cell;
    z.c_dl(u) = uniform(rng, 0.1, 1.0) / c.users_per_cell;
    z.u(u) = uniform(rng, 0.0, 1.0);
    z.f_cenb(u) = uniform(rng, 0.1, 1.0) / c.users_per_cell;
    z.x(u) = uniform(rng, 0.0, 0.1);
    z.y(u) = uniform(rng, 0.0, 0.01);
  }
  if (coop)
    for (int u = 0; u < nu; ++u)
      for (int m = 0; m < c.n_cells; ++m) z.c_dl_coop(u, m) = uniform(rng, 0.1, 1.0) / nu;
  return z;
}


struct RandomCase {
  SystemConfig cfg;
  ChannelSet ch;
  Iterate anchor;
  std::vector<Iterate> evals;
};

// Small random network with a random anchor and `n_eval` evaluation points.
inline RandomCase random_case(std::mt19937_64& rng, int n_eval, bool allow_coop = true) {
  RandomCase rc;
  int nc = 1 + static_cast<int>(rng() % 3), k = 1 + static_cast<int>(rng() % 2), nt = 1 + static_cast<int>(rng() % 2);
  rc.cfg = small_config(nc, k, nt, rng());
  rc.cfg.t_max.assign(rc.cfg.n_users(), uniform(rng, 0.05, 0.5));
  rc.ch = generate_channels(rc.cfg, rng());
  bool coop = allow_coop && (rng() % 3 == 0);
  rc.anchor = random_iterate(rc.cfg, rng, coop);
  for (int e = 0; e < n_eval; ++e) rc.evals.push_back(random_iterate(rc.cfg, rng, coop));
  return rc;
}

struct Soundness {
  double min_margin = kInf;  // min over samples of surrogate - original
  double max_tight = 0;      // max |surrogate - original| at the anchor
  int samples = 0;
};

template <class Sur, class Orig>
void accumulate(Soundness& s, const RandomCase& rc, const SurrogateContext& ctx, int u, Sur&& sur, Orig&& orig) {
  double ta = sur(ctx, rc.anchor, u), oa = orig(rc.anchor, u);
  s.max_tight = std::max(s.max_tight, std::abs(ta - oa));
  for (const auto& z : rc.evals) {
    double t = sur(ctx, z, u), o = orig(z, u);
    s.min_margin = std::min(s.min_margin, std::isnan(t) ? -kInf : t - o);
    ++s.samples;
  }
}

// Latency surrogate vs B^I/(W r_ul) + B^O/(W r_dl).
inline Soundness latency_soundness(int pairs, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Soundness s;
  while (s.samples < pairs) {
    RandomCase rc = random_case(rng, 10);
    SurrogateContext ctx = make_context(rc.cfg, rc.ch, rc.anchor);
    for (int u = 0; u < rc.cfg.n_users(); ++u)
      accumulate(s, rc, ctx, u, latency_surrogate, [&](const Iterate& z, int k) {
        Latency l = latency_components(rc.cfg, rc.ch, z, k);
        return l.ul + l.dl;
      });
  }
  return s;
}

// tr(Q) - (E^M/B^I) r~ul vs tr(Q) - (E^M/B^I) r_ul.
inline Soundness energy_constraint_soundness(int pairs, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Soundness s;
  while (s.samples < pairs) {
    RandomCase rc = random_case(rng, 10, false);
    SurrogateContext ctx = make_context(rc.cfg, rc.ch, rc.anchor);
    for (int u = 0; u < rc.cfg.n_users(); ++u)
      accumulate(s, rc, ctx, u, energy_constraint_surrogate, [&](const Iterate& z, int k) {
        return z.q_ul[k].trace().real() - local_energy(rc.cfg, k) / rc.cfg.b_in[k] * uplink_rate(rc.cfg, rc.ch, z, k);
      });
  }
  return s;
}

// Hybrid C.1 left-hand side with ratio bounds vs the exact hybrid latency.
inline Soundness hybrid_soundness(int pairs, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Soundness s;
  while (s.samples < pairs) {
    RandomCase rc = random_case(rng, 10, false);
    SurrogateContext ctx = make_context(rc.cfg, rc.ch, rc.anchor);
    for (int u = 0; u < rc.cfg.n_users(); ++u)
      accumulate(s, rc, ctx, u, hybrid_latency_surrogate,
                 [&](const Iterate& z, int k) { return hybrid_latency(rc.cfg, rc.ch, z, k); });
  }
  return s;
}

// Rate surrogate must lie below the rate (margin = rate - surrogate).
inline Soundness rate_soundness(int pairs, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Soundness s;
  while (s.samples < pairs) {
    RandomCase rc = random_case(rng, 10);
    SurrogateContext ctx = make_context(rc.cfg, rc.ch, rc.anchor);
    for (int u = 0; u < rc.cfg.n_users(); ++u)
      for (bool ul : {true, false})
        accumulate(
            s, rc, ctx, u, [&](const SurrogateContext& c, const Iterate& z, int k) { return -rate_surrogate(c, z, k, ul); },
            [&](const Iterate& z, int k) {
              return -(ul ? uplink_rate(rc.cfg, rc.ch, z, k) : downlink_rate(rc.cfg, rc.ch, z, k));
            });
  }
  return s;
}

// --------------------------------------------------------------- gradients

inline Vec dense_gradient(const JetFn& f, const Vec& x) {
  Jet j;
  Vec g = Vec::Zero(x.size());
  if (!f(x, 1, j)) return Vec::Constant(x.size(), std::nan(""));
  for (int a = 0; a < j.size(); ++a) g(j.idx[a]) += j.g(a);
  return g;
}

// Relative error between a surrogate's analytic gradient at the anchor and the
// central-difference gradient of the original function (step 1e-6 * scale).
template <class Orig>
double gradient_error(const JetFn& sur, const Layout& L, const Vec& x0, Orig&& orig) {
  Vec ga = dense_gradient(sur, x0);
  Vec gf = fd_gradient([&](const Vec& x) { return orig(unpack(L, x)); }, x0, L.scale, 1e-6);
  return rel_err(ga, gf);
}

// Max relative gradient error per surrogate family over `anchors` random anchors.
inline std::map<std::string, double> gradient_suite(int anchors, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::map<std::string, double> err;
  auto upd = [&](const std::string& k, double e) { err[k] = std::max(err[k], std::isnan(e) ? kInf : e); };
  for (int a = 0; a < anchors; ++a) {
    RandomCase rc = random_case(rng, 0);
    const SystemConfig& c = rc.cfg;
    const ChannelSet& ch = rc.ch;
    SurrogateContext ctx = make_context(c, ch, rc.anchor);
    Layout L = covariance_layout(c, rc.anchor);
    Vec x0 = pack(L, rc.anchor);
    int u = static_cast<int>(rng() % c.n_users());

    upd("objective", gradient_error(objective_surrogate_jet(ctx, L), L, x0,
                                    [&](const Iterate& z) { return total_energy(c, ch, z); }));
    SumJet ul;
    for (int k = 0; k < c.n_users(); ++k) ul.parts.push_back(uplink_energy_surrogate_jet(ctx, L, k));
    JetFn ulf = [ul](const Vec& x, int o, Jet& j) { return ul.eval(x, o, j); };
    upd("uplink_energy", gradient_error(ulf, L, x0, [&](const Iterate& z) { return total_energy(c, ch, z, true); }));

    for (int j : interferers(c, rc.anchor, u)) {
      CMat g = uplink_energy_cross_gradient(ctx, u, j);
      Vec ga = herm_coords(L.basis_ul, g);
      Vec gf(ga.size());
      for (int k = 0; k < ga.size(); ++k) {
        Vec xp = x0, xm = x0;
        double h = 1e-6 * L.scale(L.q_ul[u] + k);
        xp(L.q_ul[u] + k) += h;
        xm(L.q_ul[u] + k) -= h;
        gf(k) = (uplink_energy(c, ch, unpack(L, xp), j) - uplink_energy(c, ch, unpack(L, xm), j)) / (2 * h);
      }
      upd("cross_gradient", rel_err(ga, gf));
    }

    for (bool up : {true, false}) {
      auto r = std::make_shared<RateJet>(make_rate_jet(ctx, L, u, up));
      JetFn rf = [r](const Vec& x, int o, Jet& j) { return r->eval(x, o, j); };
      upd(up ? "rate_ul" : "rate_dl", gradient_error(rf, L, x0, [&](const Iterate& z) {
            return up ? uplink_rate(c, ch, z, u) : downlink_rate(c, ch, z, u);
          }));
    }
    upd("latency", gradient_error(latency_surrogate_jet(ctx, L, u), L, x0, [&](const Iterate& z) {
          Latency l = latency_components(c, ch, z, u);
          return l.ul + l.dl;
        }));
    if (!rc.anchor.coop)
      upd("energy_constraint", gradient_error(energy_constraint_surrogate_jet(ctx, L, u), L, x0, [&](const Iterate& z) {
            return z.q_ul[u].trace().real() - local_energy(c, u) / c.b_in[u] * uplink_rate(c, ch, z, u);
          }));

    // l_p majorizer: gradient 2 w x at the anchor vs the smoothed l_p objective
    set_lp_weights_from_anchor(ctx);
    Vec xs = rc.anchor.x, ys = rc.anchor.y;
    int n = static_cast<int>(xs.size());
    Vec xy(2 * n), ga(2 * n);
    xy << xs, ys;
    for (int k = 0; k < n; ++k) {
      ga(k) = 2 * ctx.w1(k) * xs(k);
      ga(n + k) = 2 * ctx.w2(k) * ys(k);
    }
    Vec gf = fd_gradient(
        [&](const Vec& v) { return lp_objective(v.head(n), v.tail(n), ctx.p, ctx.eps); }, xy,
        Vec::Constant(2 * n, 1e-2), 1e-6);
    upd("lp_majorizer", rel_err(ga, gf));
  }
  return err;
}

}  // namespace offload::testing
