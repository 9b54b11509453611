#pragma once

#include <string>
#include <vector>

#include "chaos.hpp"
#include "decomposition.hpp"

namespace ptf {

// A polynomial written as outer(In_0, ..., In_{m-1}); the outer polynomial's
// variable j stands for inner[j].
struct Composite {
  Polynomial outer;
  std::vector<ChaosDecomposition> inner;

  int args() const { return static_cast<int>(inner.size()); }

  static Composite constant(double c) {
    Composite k;
    if (c != 0.0) k.outer = Polynomial::constant(c);
    return k;
  }
  static Composite identity(const SymTensor& f) {
    Composite k;
    k.outer = Polynomial::variable(0, 1);
    k.inner.push_back(ChaosDecomposition::single(f));
    return k;
  }
};

inline Polynomial shift_vars(const Polynomial& p, int by) {
  Polynomial out(p.dim() + by);
  for (auto& [m, c] : p.terms()) {
    Index k = m;
    for (auto& i : k) i += by;
    out.add_sorted(k, c);
  }
  return out;
}

inline Composite composite_product(const Composite& a, const Composite& b) {
  Composite out;
  out.outer = a.outer * shift_vars(b.outer, a.args());
  out.inner = a.inner;
  out.inner.insert(out.inner.end(), b.inner.begin(), b.inner.end());
  return out;
}

inline void composite_accumulate(Composite& acc, const Composite& b, double c) {
  acc.outer += shift_vars(b.outer, acc.args()) * c;
  acc.inner.insert(acc.inner.end(), b.inner.begin(), b.inner.end());
}

// Explicit chaos form of outer(inner...).
inline ChaosDecomposition expand(const Composite& k, int n) {
  ChaosDecomposition out(n);
  for (auto& [mono, c] : k.outer.terms()) {
    ChaosDecomposition t(n);
    t.add(SymTensor::scalar(c));
    for (int j : mono) t = chaos_product(t, k.inner[j]);
    out += t;
  }
  out.prune();
  return out;
}

inline double coeff_l1(const Polynomial& p) {
  double s = 0;
  for (auto& [m, c] : p.terms()) s += std::abs(c);
  return s;
}

struct ManyOptions {
  Mode mode = Mode::Practical;
  double eta1 = 0.1;
  double ratio = 0.5;
  int levels = 64;
  std::vector<double> user_schedule;
  double C = 1.0, Cprime = 1.0;
  DecomposeOptions decompose;
};

struct ManyLevelReport {
  int degree = 0;
  int k = 0;
  int t = 0;
  double eps = 0;
  int triples = 0;
  double max_reg_eigenregularity = 0;
  double schedule_next = 0;  // eta_{t+1}
  std::string schedule_note;
};

struct ManyReport {
  std::vector<ManyLevelReport> levels;
};

inline ParamSchedule make_schedule(const ManyOptions& o, int degree, int k, double eps) {
  if (!o.user_schedule.empty()) return schedule_from_list(o.user_schedule, eps, o.mode);
  if (o.mode == Mode::Practical) return practical_schedule(eps, o.eta1, o.ratio, o.levels);
  if (degree > 2)
    throw CapError("certified schedule for degree " + std::to_string(degree) +
                   " needs the functions N_beta, M_beta, which have no closed form; use practical mode or --schedule");
  return certified_schedule(k, eps, o.C, o.Cprime);
}

// lists[s][q] is the degree-q slice of input s (order-q tensor, Var 1 or zero).
inline std::vector<std::vector<Composite>> multi_regularize_many_wieners(const std::vector<std::vector<SymTensor>>& lists, int d,
                                                                          double tau, const ManyOptions& opt,
                                                                          ManyReport* report = nullptr) {
  const std::size_t k = lists.size();
  std::vector<std::vector<Composite>> out(k, std::vector<Composite>(d + 1));
  auto slice = [&](std::size_t s, int q) -> SymTensor {
    if (q < static_cast<int>(lists[s].size())) {
      if (lists[s][q].order() != q) throw InputError("multi_regularize_many_wieners: slice order mismatch");
      return lists[s][q];
    }
    return SymTensor(q, 1);
  };
  for (std::size_t s = 0; s < k; ++s)
    for (int q = 1; q < static_cast<int>(lists[s].size()); ++q) {
      double v = wiener_variance(lists[s][q]);
      if (!lists[s][q].empty() && std::abs(v - 1.0) > 1e-6)
        throw InputError("multi_regularize_many_wieners: slice variance must be 1 (got " + std::to_string(v) + ")");
    }
  if (d <= 1) {
    for (std::size_t s = 0; s < k; ++s) {
      out[s][0] = Composite::constant(slice(s, 0).get({}));
      if (d == 1) {
        auto f1 = slice(s, 1);
        if (!f1.empty()) out[s][1] = Composite::identity(f1);
      }
    }
    return out;
  }

  std::vector<std::size_t> idx;
  std::vector<SymTensor> top;
  for (std::size_t s = 0; s < k; ++s) {
    auto f = slice(s, d);
    if (!f.empty()) {
      idx.push_back(s);
      top.push_back(f);
    }
  }
  const double eps = d == 2 ? tau : tau / 8.0;
  MultiWiener mw;
  ManyLevelReport lr;
  lr.degree = d;
  lr.k = static_cast<int>(idx.size());
  lr.eps = eps;
  if (!top.empty()) {
    auto sched = make_schedule(opt, d, static_cast<int>(top.size()), eps);
    mw = multi_regularize_one_wiener(top, sched, eps, opt.decompose);
    lr.t = mw.t;
    lr.schedule_next = sched.at(mw.t + 1);
    lr.schedule_note = sched.note;
    for (auto& P : mw.parts) {
      lr.triples += static_cast<int>(P.triples.size());
      lr.max_reg_eigenregularity = std::max(lr.max_reg_eigenregularity, P.eigenregularity);
    }
  }
  if (report) report->levels.push_back(lr);

  // lower slices, and every P and Q as its own single-slice input
  std::vector<std::vector<SymTensor>> next;
  for (std::size_t s = 0; s < k; ++s) {
    std::vector<SymTensor> l;
    for (int q = 0; q < d; ++q) l.push_back(slice(s, q));
    next.push_back(std::move(l));
  }
  struct Ref {
    std::size_t p, q;
  };
  std::vector<std::vector<Ref>> refs(mw.parts.size());
  for (std::size_t j = 0; j < mw.parts.size(); ++j)
    for (auto& t : mw.parts[j].triples) {
      auto single = [&](const SymTensor& f) {
        std::vector<SymTensor> l;
        for (int q = 0; q < d; ++q) l.push_back(q == f.order() ? f : SymTensor(q, f.dim()));
        next.push_back(std::move(l));
        return next.size() - 1;
      };
      std::size_t a = single(t.P);
      std::size_t b = single(t.Q);
      refs[j].push_back({a, b});
    }
  double L = double(k);
  for (auto& P : mw.parts) L += double(P.triples.size());
  const double tau_next = d == 2 ? tau : tau / (16.0 * L);
  auto rec = multi_regularize_many_wieners(next, d - 1, tau_next, opt, report);
  for (std::size_t s = 0; s < k; ++s)
    for (int q = 0; q < d; ++q) out[s][q] = rec[s][q];
  for (std::size_t j = 0; j < mw.parts.size(); ++j) {
    const auto& P = mw.parts[j];
    Composite acc;
    for (std::size_t i = 0; i < P.triples.size(); ++i) {
      const auto& t = P.triples[i];
      auto pq = composite_product(rec[refs[j][i].p][t.P.order()], rec[refs[j][i].q][t.Q.order()]);
      composite_accumulate(acc, pq, t.a);
    }
    if (P.a_reg > 0.0 && !P.R_reg.empty()) composite_accumulate(acc, Composite::identity(P.R_reg), P.a_reg);
    acc.outer.prune(0.0);
    out[idx[j]][d] = std::move(acc);
  }
  return out;
}

struct RegularizeOptions {
  ManyOptions many;
  double tau_inner = 0.0;  // 0: (1/d)(tau/d)^{3d}
  double tau_inner_floor = 1e-12;
  bool compute_gap = true;
};

struct DecompositionResult {
  int n = 1;
  int d = 0;
  double mean = 0.0;
  std::vector<double> scale;      // c_q, so p = mean + sum_q c_q p_q with Var p_q = 1
  std::vector<Composite> h;       // h[q] represents p_q
  std::vector<int> m;             // number of inner polynomials per level
  std::vector<std::vector<double>> inner_eigenregularity;
  double max_inner_eigenregularity = 0.0;
  int num = 0;
  double coeff = 0.0;
  double var_gap = -1.0;          // Var[p - p~]
  double gap_bound = 0.0;         // (tau/d)^{3d}
  double tau = 0.0, tau_inner = 0.0;
  Mode mode = Mode::Practical;
  ManyReport report;

  // p~ = mean + sum_q c_q h_q(A_q) as one composite.
  Composite assembled() const {
    Composite acc = Composite::constant(mean);
    for (std::size_t q = 1; q < h.size(); ++q)
      if (scale[q] != 0.0) composite_accumulate(acc, h[q], scale[q]);
    return acc;
  }
};

inline DecompositionResult regularize_poly(const Polynomial& p, double tau, const RegularizeOptions& opt = {}) {
  if (!p.is_multilinear()) throw InputError("regularize_poly: input must be multilinear (linearize first)");
  auto dec = to_chaos(p);
  double var = variance(dec);
  if (std::abs(var - 1.0) > 1e-9) throw InputError("regularize_poly: Var[p] must be 1 (got " + std::to_string(var) + ")");
  DecompositionResult res;
  res.n = dec.n;
  res.d = p.degree();
  res.tau = tau;
  res.mode = opt.many.mode;
  res.mean = mean(dec);
  const int d = res.d;
  res.gap_bound = std::pow(tau / d, 3.0 * d);
  double ti = opt.tau_inner > 0 ? opt.tau_inner : std::pow(tau / d, 3.0 * d) / d;
  if (opt.many.mode == Mode::Practical) ti = std::max(ti, opt.tau_inner_floor);
  res.tau_inner = ti;
  std::vector<SymTensor> slices(d + 1);
  res.scale.assign(d + 1, 0.0);
  slices[0] = SymTensor(0, dec.n);
  for (int q = 1; q <= d; ++q) {
    auto f = dec.at(q);
    double c = std::sqrt(wiener_variance(f));
    res.scale[q] = c;
    slices[q] = c > 0 ? f * (1.0 / c) : SymTensor(q, dec.n);
  }
  auto many = multi_regularize_many_wieners({slices}, d, ti, opt.many, &res.report);
  res.h = many[0];
  res.m.assign(d + 1, 0);
  res.inner_eigenregularity.assign(d + 1, {});
  for (int q = 1; q <= d; ++q) {
    res.m[q] = res.h[q].args();
    res.num += res.m[q];
    res.coeff += coeff_l1(res.h[q].outer);
    for (auto& A : res.h[q].inner) {
      double e = eigenregularity(A);
      res.inner_eigenregularity[q].push_back(e);
      res.max_inner_eigenregularity = std::max(res.max_inner_eigenregularity, e);
    }
  }
  if (opt.compute_gap) {
    auto approx = expand(res.assembled(), dec.n);
    approx *= -1.0;
    approx += dec;
    res.var_gap = variance(approx);
  }
  return res;
}

}  // namespace ptf
