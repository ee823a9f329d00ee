#pragma once

#include "offload/surrogate.hpp"

#include <stdexcept>
#include <string>

namespace offload {

struct SubsolverError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// g(x) <= 0, with `scale` the natural magnitude of g used by the barrier.
struct Constraint {
  std::string name;
  JetFn g;
  double scale = 1.0;
  bool linear = false;  // linear constraints are never relaxed by phase I
};

// Hermitian block Q(x[offset..]) that must stay positive semidefinite.
struct PsdBlock {
  std::string name;
  const HermBasis* basis = nullptr;
  int offset = 0;
  double scale = 1.0;
};

struct ConvexProblem {
  int n = 0;
  Vec scale;       // variable scaling x = diag(scale) z
  JetFn objective;
  double objective_scale = 1.0;
  std::vector<Constraint> cons;
  std::vector<PsdBlock> psd;
  Vec center;      // strictly feasible for the linear and PSD constraints

  int n_constraints() const { return static_cast<int>(cons.size() + psd.size()); }
};

struct SolveOptions {
  double tol = 1e-10;       // relative duality-gap bound
  int max_newton = 3000;
  double mu = 10.0;
  double feas_tol = 1e-9;   // anchor acceptance, relative to constraint scale
};

enum class SolveFlag { ok, max_iterations, no_interior, anchor_returned };

struct SubSolution {
  Vec x;
  double objective = 0;
  double kkt_residual = 0;
  int inner_iterations = 0;
  SolveFlag flag = SolveFlag::ok;
};

namespace detail {

inline void scatter(const Jet& j, double w, Vec& g, Mat* h, int order) {
  for (int a = 0; a < j.size(); ++a) {
    g(j.idx[a]) += w * j.g(a);
    if (order >= 2 && h)
      for (int b = 0; b < j.size(); ++b) (*h)(j.idx[a], j.idx[b]) += w * j.h(a, b);
  }
}

// -log det(Q / scale) with derivatives in the block's coordinates.
inline bool psd_barrier(const PsdBlock& b, const Vec& x, double& val, Vec& g, Mat* h, int order) {
  CMat q = herm_from(*b.basis, x.data() + b.offset) / b.scale;
  Eigen::LLT<CMat> llt(q);
  if (llt.info() != Eigen::Success) return false;
  double ld = 0;
  for (int i = 0; i < q.rows(); ++i) {
    double d = llt.matrixLLT()(i, i).real();
    if (!(d > 0)) return false;
    ld += 2 * std::log(d);
  }
  val -= ld;
  if (order < 1) return true;
  CMat qi = hermitian_part(llt.solve(CMat::Identity(q.rows(), q.cols())));
  int m = b.basis->size();
  Vec gc = herm_coords(*b.basis, qi);
  g.segment(b.offset, m) -= gc / b.scale;
  if (order >= 2 && h) h->block(b.offset, b.offset, m, m) += trace_pair(*b.basis, *b.basis, qi, qi) / (b.scale * b.scale);
  return true;
}

struct Barrier {
  const ConvexProblem* p;
  double t = 1;
  int m = 0;  // barrier parameter count (sum of block sizes)

  // psi = t f / fs + sum -log(-g/s) + sum -logdet
  bool eval(const Vec& x, int order, double& psi, Vec& g, Mat& h) const {
    int n = p->n;
    psi = 0;
    if (order >= 1) g = Vec::Zero(n);
    if (order >= 2) h = Mat::Zero(n, n);
    Jet j;
    if (!p->objective(x, order, j) || !std::isfinite(j.v)) return false;
    double w = t / p->objective_scale;
    psi += w * j.v;
    if (order >= 1) scatter(j, w, g, &h, order);
    for (const auto& c : p->cons) {
      Jet k;
      if (!c.g(x, order, k) || !std::isfinite(k.v)) return false;
      double s = -k.v / c.scale;
      if (!(s > 0)) return false;
      psi -= std::log(s);
      if (order >= 1) {
        double inv = 1.0 / (-k.v);
        for (int a = 0; a < k.size(); ++a) {
          g(k.idx[a]) += inv * k.g(a);
          if (order >= 2)
            for (int b = 0; b < k.size(); ++b)
              h(k.idx[a], k.idx[b]) += inv * inv * k.g(a) * k.g(b) + inv * k.h(a, b);
        }
      }
    }
    for (const auto& b : p->psd)
      if (!psd_barrier(b, x, psi, g, &h, order)) return false;
    return std::isfinite(psi);
  }
};

// Damped Newton centering followed by geometric increase of t.
struct BarrierRun {
  Vec x;
  int newton = 0;
  double t = 0;
  bool stopped_early = false;
  bool max_iter = false;
};

template <class Stop>
BarrierRun barrier_solve(const ConvexProblem& p, const Vec& x0, const SolveOptions& o, Stop&& stop) {
  Barrier br{&p};
  br.m = static_cast<int>(p.cons.size());
  for (const auto& b : p.psd) br.m += b.basis->n;
  BarrierRun r;
  r.x = x0;
  br.t = 1.0;
  const Vec& d = p.scale;
  double psi;
  Vec g, gt;
  Mat h;
  for (;;) {
    double lam2_prev = kInf;
    for (int it = 0; it < 200; ++it) {
      if (r.newton >= o.max_newton) {
        r.max_iter = true;
        r.t = br.t;
        return r;
      }
      if (!br.eval(r.x, 2, psi, g, h)) throw SubsolverError("barrier evaluation left the domain");
      Vec gz = d.cwiseProduct(g);
      Mat hz = d.asDiagonal() * h * d.asDiagonal();
      hz = 0.5 * (hz + hz.transpose());
      Vec dz;
      double reg = 0;
      double diag_max = std::max(hz.diagonal().cwiseAbs().maxCoeff(), 1e-300);
      for (int k = 0; k < 12; ++k) {
        Mat hr = hz;
        if (reg > 0) hr.diagonal().array() += reg;
        Eigen::LDLT<Mat> ldlt(hr);
        if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
          dz = -ldlt.solve(gz);
          if (dz.allFinite() && gz.dot(dz) < 0) break;
        }
        dz.resize(0);
        reg = reg == 0 ? 1e-12 * diag_max : reg * 100;
      }
      if (dz.size() == 0) break;
      double lam2 = -gz.dot(dz);
      ++r.newton;
      // centering error in psi costs ~lam2/(2t) in the objective
      if (lam2 / 2 <= 1e-8) break;
      // round-off floor of psi, or the decrement stopped shrinking
      if (lam2 / 2 <= 1e3 * 2.2e-16 * std::abs(psi)) break;
      if (lam2 < 1e-5 && lam2 > 0.25 * lam2_prev) break;
      lam2_prev = lam2;
      Vec dx = d.cwiseProduct(dz);
      double a = 1.0, psi_new;
      bool moved = false;
      for (int ls = 0; ls < 80; ++ls) {
        Vec xn = r.x + a * dx;
        if (br.eval(xn, 0, psi_new, gt, h) &&
            (psi_new <= psi - 1e-4 * a * lam2 || (lam2 < 1e-6 && psi_new <= psi + 1e-14 * std::abs(psi)))) {
          r.x = xn;
          moved = true;
          break;
        }
        a *= 0.5;
      }
      if (!moved) break;
      if (stop(r.x)) {
        r.stopped_early = true;
        r.t = br.t;
        return r;
      }
    }
    if (br.m / br.t <= o.tol) break;
    br.t *= o.mu;
  }
  r.t = br.t;
  return r;
}

}  // namespace detail

inline double eval_objective(const ConvexProblem& p, const Vec& x) {
  Jet j;
  if (!p.objective(x, 0, j)) return kInf;
  return j.v;
}

// Largest scaled constraint value g/scale (PSD blocks report -min eigenvalue / scale).
inline double max_violation(const ConvexProblem& p, const Vec& x, bool nonlinear_only = false) {
  double v = -kInf;
  for (const auto& c : p.cons) {
    if (nonlinear_only && c.linear) continue;
    Jet j;
    if (!c.g(x, 0, j) || !std::isfinite(j.v)) return kInf;
    v = std::max(v, j.v / c.scale);
  }
  if (!nonlinear_only)
    for (const auto& b : p.psd) v = std::max(v, -min_eig(herm_from(*b.basis, x.data() + b.offset)) / b.scale);
  return v;
}

// Minimizes the problem starting from a feasible (possibly boundary) anchor.
// Returns the anchor itself when no strictly better interior point is found.
inline SubSolution solve(const ConvexProblem& p, const Vec& anchor, const SolveOptions& o = {}) {
  SubSolution out;
  double f0 = eval_objective(p, anchor);
  double v0 = max_violation(p, anchor);
  if (!std::isfinite(f0) || !(v0 <= o.feas_tol))
    throw SubsolverError("infeasible anchor (max scaled violation " + std::to_string(v0) + ", objective " + std::to_string(f0) + ")");
  auto anchor_result = [&](SolveFlag f) {
    out.x = anchor;
    out.objective = f0;
    out.flag = f;
    return out;
  };
  // interior start: pull the anchor slightly toward the center
  Vec xs;
  for (double th : {1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 0.1, 0.3}) {
    Vec xt = anchor + th * (p.center - anchor);
    bool ok = true;
    for (const auto& c : p.cons) {
      Jet j;
      if (!c.g(xt, 0, j) || !std::isfinite(j.v) || (c.linear && !(j.v < 0))) {
        ok = false;
        break;
      }
    }
    for (const auto& b : p.psd)
      if (ok && !(min_eig(herm_from(*b.basis, xt.data() + b.offset)) > 0)) ok = false;
    if (ok) {
      xs = xt;
      break;
    }
  }
  if (xs.size() == 0) return anchor_result(SolveFlag::no_interior);

  double sv = max_violation(p, xs, true);
  if (std::isfinite(sv) && sv >= 0) {
    // phase I: minimize s subject to g_k(x) <= s * scale_k, s >= -1
    ConvexProblem q;
    q.n = p.n + 1;
    q.scale.resize(q.n);
    q.scale << p.scale, 1e-2;
    int is = p.n;
    q.objective = [is](const Vec& x, int order, Jet& j) {
      j = scalar_jet(is, 0, x, order);
      if (order >= 2) j.h = Mat::Zero(1, 1);
      return true;
    };
    q.objective_scale = 1.0;
    q.psd = p.psd;
    for (const auto& c : p.cons) {
      if (c.linear) {
        q.cons.push_back(c);
        continue;
      }
      Constraint cc = c;
      JetFn g = c.g;
      double sc = c.scale;
      cc.g = [g, sc, is](const Vec& x, int order, Jet& j) {
        if (!g(x, order, j)) return false;
        Jet s = scalar_jet(is, 0, x, order);
        if (order >= 2) s.h = Mat::Zero(1, 1);
        jet_axpy(j, -sc, s, order);
        return true;
      };
      q.cons.push_back(cc);
    }
    q.cons.push_back({"phase1_floor", [is](const Vec& x, int order, Jet& j) {
                        j = scalar_jet(is, 0, x, order);
                        j.v = -1.0 - j.v;
                        if (order >= 1) j.g(0) = -1.0;
                        if (order >= 2) j.h = Mat::Zero(1, 1);
                        return true;
                      }, 1.0, true});
    Vec x1(q.n);
    x1 << xs, sv + std::max(0.1, std::abs(sv));
    SolveOptions o1 = o;
    o1.tol = 1e-9;
    auto r1 = detail::barrier_solve(q, x1, o1, [is](const Vec& x) { return x(is) <= -1e-3; });
    out.inner_iterations += r1.newton;
    if (!(r1.x(is) < -1e-9)) {
      out.inner_iterations += 0;
      SubSolution a = anchor_result(SolveFlag::no_interior);
      a.inner_iterations = out.inner_iterations;
      return a;
    }
    xs = r1.x.head(p.n);
  }

  auto r = detail::barrier_solve(p, xs, o, [](const Vec&) { return false; });
  out.inner_iterations += r.newton;
  double f = eval_objective(p, r.x);
  int m = static_cast<int>(p.cons.size());
  for (const auto& b : p.psd) m += b.basis->n;
  out.kkt_residual = m / r.t;
  if (!(f <= f0)) {
    SubSolution a = anchor_result(SolveFlag::anchor_returned);
    a.inner_iterations = out.inner_iterations;
    a.kkt_residual = out.kkt_residual;
    return a;
  }
  out.x = r.x;
  out.objective = f;
  out.flag = r.max_iter ? SolveFlag::max_iterations : SolveFlag::ok;
  return out;
}

}  // namespace offload
