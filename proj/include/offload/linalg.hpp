#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <iterator>
#include <limits>
#include <vector>

namespace offload {

using cd = std::complex<double>;
using CMat = Eigen::MatrixXcd;
using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

inline constexpr double kLn2 = 0.69314718055994530942;
inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Orthonormal real basis of (a subspace of) N x N Hermitian matrices.
// Element kinds: 0 = e_kk, 1 = (e_jk + e_kj)/sqrt2, 2 = i(e_jk - e_kj)/sqrt2.
struct HermBasis {
  struct Elem { int j, k, kind; };
  int n = 0;
  std::vector<Elem> e;

  int size() const { return static_cast<int>(e.size()); }

  static HermBasis full(int n) {
    HermBasis b;
    b.n = n;
    for (int k = 0; k < n; ++k) b.e.push_back({k, k, 0});
    for (int j = 0; j < n; ++j)
      for (int k = j + 1; k < n; ++k) {
        b.e.push_back({j, k, 1});
        b.e.push_back({j, k, 2});
      }
    return b;
  }

  // Only entries inside the diagonal blocks of size `blk`.
  static HermBasis block_diagonal(int n, int blk) {
    HermBasis b;
    b.n = n;
    for (int k = 0; k < n; ++k) b.e.push_back({k, k, 0});
    for (int j = 0; j < n; ++j)
      for (int k = j + 1; k < n; ++k) {
        if (j / blk != k / blk) continue;
        b.e.push_back({j, k, 1});
        b.e.push_back({j, k, 2});
      }
    return b;
  }
};

inline CMat herm_from(const HermBasis& b, const double* p) {
  const double s = std::sqrt(0.5);
  CMat q = CMat::Zero(b.n, b.n);
  for (int a = 0; a < b.size(); ++a) {
    const auto& el = b.e[a];
    if (el.kind == 0) {
      q(el.k, el.k) += p[a];
    } else if (el.kind == 1) {
      q(el.j, el.k) += s * p[a];
      q(el.k, el.j) += s * p[a];
    } else {
      q(el.j, el.k) += cd(0, s * p[a]);
      q(el.k, el.j) -= cd(0, s * p[a]);
    }
  }
  return q;
}

// <E_a, G> = Re tr(E_a^H G) for every basis element.
inline void herm_coords(const HermBasis& b, const CMat& g, double* out) {
  const double s = std::sqrt(0.5);
  for (int a = 0; a < b.size(); ++a) {
    const auto& el = b.e[a];
    if (el.kind == 0)
      out[a] = g(el.k, el.k).real();
    else if (el.kind == 1)
      out[a] = s * (g(el.j, el.k).real() + g(el.k, el.j).real());
    else
      out[a] = s * (g(el.j, el.k).imag() - g(el.k, el.j).imag());
  }
}

inline Vec herm_coords(const HermBasis& b, const CMat& g) {
  Vec v(b.size());
  herm_coords(b, g, v.data());
  return v;
}

namespace detail {
struct Entry { cd a; int p, q; };

inline int basis_entries(const HermBasis::Elem& el, Entry* out) {
  const double s = std::sqrt(0.5);
  if (el.kind == 0) {
    out[0] = {1.0, el.k, el.k};
    return 1;
  }
  if (el.kind == 1) {
    out[0] = {s, el.j, el.k};
    out[1] = {s, el.k, el.j};
    return 2;
  }
  out[0] = {cd(0, s), el.j, el.k};
  out[1] = {cd(0, -s), el.k, el.j};
  return 2;
}
}  // namespace detail

// T(a,b) = Re tr(L E_a M E_b).
inline Mat trace_pair(const HermBasis& ba, const HermBasis& bb, const CMat& L, const CMat& M) {
  Mat t(ba.size(), bb.size());
  detail::Entry ea[2], eb[2];
  for (int a = 0; a < ba.size(); ++a) {
    int na = detail::basis_entries(ba.e[a], ea);
    for (int b = 0; b < bb.size(); ++b) {
      int nb = detail::basis_entries(bb.e[b], eb);
      cd acc = 0;
      // tr(L e_p e_q^T M e_r e_s^T) = L(s,p) M(q,r)
      for (int i = 0; i < na; ++i)
        for (int k = 0; k < nb; ++k)
          acc += ea[i].a * eb[k].a * L(eb[k].q, ea[i].p) * M(ea[i].q, eb[k].p);
      t(a, b) = acc.real();
    }
  }
  return t;
}

inline CMat hermitian_part(const CMat& m) { return 0.5 * (m + m.adjoint()); }

// log det of a Hermitian positive definite matrix; NaN when not PD.
inline double logdet_pd(const CMat& x) {
  Eigen::LLT<CMat> llt(hermitian_part(x));
  if (llt.info() != Eigen::Success) return std::numeric_limits<double>::quiet_NaN();
  double s = 0;
  const auto& l = llt.matrixLLT();
  for (int i = 0; i < x.rows(); ++i) {
    double d = l(i, i).real();
    if (!(d > 0)) return std::numeric_limits<double>::quiet_NaN();
    s += 2.0 * std::log(d);
  }
  return s;
}

// Value / gradient / Hessian of a scalar function over a sparse index set.
struct Jet {
  double v = 0;
  std::vector<int> idx;
  Vec g;
  Mat h;

  int size() const { return static_cast<int>(idx.size()); }

  static Jet constant(double v) {
    Jet j;
    j.v = v;
    return j;
  }

  void resize(int order) {
    int m = size();
    if (order >= 1) g = Vec::Zero(m);
    if (order >= 2) h = Mat::Zero(m, m);
  }
};

// acc += w * b, merging index sets.
inline void jet_axpy(Jet& acc, double w, const Jet& b, int order) {
  acc.v += w * b.v;
  if (order < 1 || b.idx.empty()) return;
  std::vector<int> merged;
  merged.reserve(acc.idx.size() + b.idx.size());
  std::set_union(acc.idx.begin(), acc.idx.end(), b.idx.begin(), b.idx.end(), std::back_inserter(merged));
  if (merged.size() != acc.idx.size()) {
    std::vector<int> pos(acc.idx.size());
    for (size_t i = 0, k = 0; i < acc.idx.size(); ++i) {
      while (merged[k] != acc.idx[i]) ++k;
      pos[i] = static_cast<int>(k);
    }
    Vec g = Vec::Zero(merged.size());
    Mat h;
    if (order >= 2) h = Mat::Zero(merged.size(), merged.size());
    for (size_t i = 0; i < pos.size(); ++i) {
      g(pos[i]) = acc.g(i);
      if (order >= 2)
        for (size_t k = 0; k < pos.size(); ++k) h(pos[i], pos[k]) = acc.h(i, k);
    }
    acc.idx = std::move(merged);
    acc.g = std::move(g);
    if (order >= 2) acc.h = std::move(h);
  }
  if (acc.g.size() != static_cast<int>(acc.idx.size())) acc.resize(order);
  std::vector<int> pos(b.idx.size());
  for (size_t i = 0, k = 0; i < b.idx.size(); ++i) {
    while (acc.idx[k] != b.idx[i]) ++k;
    pos[i] = static_cast<int>(k);
  }
  for (size_t i = 0; i < pos.size(); ++i) {
    acc.g(pos[i]) += w * b.g(i);
    if (order >= 2)
      for (size_t k = 0; k < pos.size(); ++k) acc.h(pos[i], pos[k]) += w * b.h(i, k);
  }
}

// c / a for a > 0. Returns false outside the domain.
inline bool jet_recip(const Jet& a, double c, Jet& out, int order) {
  if (!(a.v > 0) || !std::isfinite(a.v)) return false;
  out.idx = a.idx;
  out.v = c / a.v;
  if (order >= 1) out.g = (-c / (a.v * a.v)) * a.g;
  if (order >= 2) out.h = (2.0 * c / (a.v * a.v * a.v)) * (a.g * a.g.transpose()) - (c / (a.v * a.v)) * a.h;
  return true;
}

// Block of Hermitian variables inside a flat real vector.
struct HermVar {
  const HermBasis* basis = nullptr;
  int offset = 0;
};

// f = logdet(B + sum_k A_k Q_k A_k^H) / ln2 with Q_k = herm(x[offset_k..]).
// Index sets of the blocks must be disjoint and increasing in offset.
struct LogdetTerm {
  CMat base;
  std::vector<CMat> a;
  std::vector<HermVar> q;
};

inline bool logdet_jet(const LogdetTerm& t, const Vec& x, Jet& out, int order) {
  CMat xm = t.base;
  std::vector<CMat> qs(t.q.size());
  for (size_t k = 0; k < t.q.size(); ++k) {
    qs[k] = herm_from(*t.q[k].basis, x.data() + t.q[k].offset);
    xm.noalias() += t.a[k] * qs[k] * t.a[k].adjoint();
  }
  xm = hermitian_part(xm);
  Eigen::LLT<CMat> llt(xm);
  if (llt.info() != Eigen::Success) return false;
  double ld = 0;
  for (int i = 0; i < xm.rows(); ++i) {
    double d = llt.matrixLLT()(i, i).real();
    if (!(d > 0)) return false;
    ld += 2.0 * std::log(d);
  }
  out.v = ld / kLn2;
  if (order < 1) return true;
  // order blocks by offset so idx is sorted
  std::vector<size_t> ord(t.q.size());
  for (size_t k = 0; k < ord.size(); ++k) ord[k] = k;
  std::sort(ord.begin(), ord.end(), [&](size_t i, size_t j) { return t.q[i].offset < t.q[j].offset; });
  std::vector<int> start(t.q.size());
  out.idx.clear();
  for (size_t kk : ord) {
    start[kk] = static_cast<int>(out.idx.size());
    for (int a = 0; a < t.q[kk].basis->size(); ++a) out.idx.push_back(t.q[kk].offset + a);
  }
  out.resize(order);
  CMat y = llt.solve(CMat::Identity(xm.rows(), xm.cols()));
  std::vector<CMat> ya(t.q.size());
  for (size_t k = 0; k < t.q.size(); ++k) {
    ya[k] = y * t.a[k];
    CMat m = t.a[k].adjoint() * ya[k];
    herm_coords(*t.q[k].basis, m, out.g.data() + start[k]);
  }
  out.g /= kLn2;
  if (order < 2) return true;
  for (size_t k = 0; k < t.q.size(); ++k)
    for (size_t l = k; l < t.q.size(); ++l) {
      CMat L = t.a[l].adjoint() * ya[k];  // A_l^H Y A_k
      CMat M = t.a[k].adjoint() * ya[l];  // A_k^H Y A_l
      Mat blk = -trace_pair(*t.q[k].basis, *t.q[l].basis, L, M) / kLn2;
      out.h.block(start[k], start[l], blk.rows(), blk.cols()) = blk;
      if (l != k) out.h.block(start[l], start[k], blk.cols(), blk.rows()) = blk.transpose();
    }
  return true;
}

// ---------------------------------------------------------------- projections

inline Vec project_simplex_cap(const Vec& v, double cap = 1.0) {
  Vec w = v.cwiseMax(0.0);
  if (w.sum() <= cap) return w;
  // Euclidean projection onto {w >= 0, sum w = cap}
  std::vector<double> s(v.data(), v.data() + v.size());
  std::sort(s.begin(), s.end(), std::greater<double>());
  double acc = 0, theta = 0;
  for (size_t i = 0; i < s.size(); ++i) {
    acc += s[i];
    double th = (acc - cap) / static_cast<double>(i + 1);
    if (i + 1 == s.size() || s[i + 1] <= th) {
      theta = th;
      break;
    }
  }
  return (v.array() - theta).max(0.0).matrix();
}

// Projection onto {Q >= 0, tr Q <= cap}: eigenvalues go through project_simplex_cap.
inline CMat project_psd_trace(const CMat& m, double cap) {
  Eigen::SelfAdjointEigenSolver<CMat> es(hermitian_part(m));
  Vec lam = project_simplex_cap(es.eigenvalues(), cap);
  CMat q = es.eigenvectors() * lam.cast<cd>().asDiagonal() * es.eigenvectors().adjoint();
  return hermitian_part(q);
}

// Joint projection of several matrices onto {Q_k >= 0, sum_k tr Q_k <= cap}.
inline std::vector<CMat> project_psd_sum_trace(const std::vector<CMat>& ms, double cap) {
  std::vector<Eigen::SelfAdjointEigenSolver<CMat>> es;
  std::vector<double> all;
  for (const auto& m : ms) {
    es.emplace_back(hermitian_part(m));
    for (int i = 0; i < m.rows(); ++i) all.push_back(es.back().eigenvalues()(i));
  }
  Vec lam = project_simplex_cap(Eigen::Map<Vec>(all.data(), all.size()), cap);
  std::vector<CMat> out;
  int p = 0;
  for (auto& e : es) {
    int n = static_cast<int>(e.eigenvalues().size());
    Vec l = lam.segment(p, n);
    p += n;
    out.push_back(hermitian_part(e.eigenvectors() * l.cast<cd>().asDiagonal() * e.eigenvectors().adjoint()));
  }
  return out;
}

// Dykstra alternating projection for stacked covariances: each Q_j PSD and,
// for every diagonal block n of size blk, sum_j tr([Q_j]_n) <= caps[n].
inline std::vector<CMat> project_block_trace(const std::vector<CMat>& ms, int blk, const std::vector<double>& caps,
                                             double tol = 1e-8, int max_iter = 1000) {
  const size_t J = ms.size();
  const int nb = static_cast<int>(caps.size());
  std::vector<CMat> x = ms, p(J), q(J);
  for (size_t j = 0; j < J; ++j) {
    p[j] = CMat::Zero(ms[j].rows(), ms[j].cols());
    q[j] = p[j];
  }
  for (int it = 0; it < max_iter; ++it) {
    // PSD cone
    std::vector<CMat> y(J);
    for (size_t j = 0; j < J; ++j) {
      CMat z = x[j] + p[j];
      Eigen::SelfAdjointEigenSolver<CMat> es(hermitian_part(z));
      Vec l = es.eigenvalues().cwiseMax(0.0);
      y[j] = es.eigenvectors() * l.cast<cd>().asDiagonal() * es.eigenvectors().adjoint();
      p[j] = z - y[j];
    }
    // per-block trace halfspaces (disjoint coordinates, exact)
    std::vector<CMat> xn(J);
    for (size_t j = 0; j < J; ++j) xn[j] = y[j] + q[j];
    for (int n = 0; n < nb; ++n) {
      double tr = 0;
      for (size_t j = 0; j < J; ++j) tr += xn[j].block(n * blk, n * blk, blk, blk).trace().real();
      if (tr > caps[n]) {
        double sh = (tr - caps[n]) / static_cast<double>(J * blk);
        for (size_t j = 0; j < J; ++j)
          for (int d = 0; d < blk; ++d) xn[j](n * blk + d, n * blk + d) -= sh;
      }
    }
    double change = 0;
    for (size_t j = 0; j < J; ++j) {
      q[j] = y[j] + q[j] - xn[j];
      change = std::max(change, (xn[j] - x[j]).norm());
      x[j] = hermitian_part(xn[j]);
    }
    if (change < tol) break;
  }
  // finish on the PSD side so the output is exactly PSD; scale down any residual trace excess
  for (size_t j = 0; j < J; ++j) {
    Eigen::SelfAdjointEigenSolver<CMat> es(hermitian_part(x[j]));
    Vec l = es.eigenvalues().cwiseMax(0.0);
    x[j] = hermitian_part(es.eigenvectors() * l.cast<cd>().asDiagonal() * es.eigenvectors().adjoint());
  }
  for (int n = 0; n < nb; ++n) {
    double tr = 0;
    for (size_t j = 0; j < J; ++j) tr += x[j].block(n * blk, n * blk, blk, blk).trace().real();
    if (tr > caps[n] && tr > 0) {
      double s = std::sqrt(caps[n] / tr);
      for (size_t j = 0; j < J; ++j) {
        x[j].middleRows(n * blk, blk) *= s;
        x[j].middleCols(n * blk, blk) *= s;
      }
    }
  }
  return x;
}

inline double min_eig(const CMat& m) {
  Eigen::SelfAdjointEigenSolver<CMat> es(hermitian_part(m), Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

}  // namespace offload
