#pragma once

#include <cmath>
#include <vector>

#include "boolean_count.hpp"

namespace ptf {

inline Polynomial hypercube_product(const Polynomial& a, const Polynomial& b, std::size_t max_terms) {
  Polynomial out(std::max(a.dim(), b.dim()));
  for (auto& [ka, ca] : a.terms())
    for (auto& [kb, cb] : b.terms()) {
      Index m;
      std::set_symmetric_difference(ka.begin(), ka.end(), kb.begin(), kb.end(), std::back_inserter(m));
      out.add_sorted(m, ca * cb);
    }
  if (out.terms().size() > max_terms)
    throw CapError("exact_raw_moment: expansion has " + std::to_string(out.terms().size()) + " terms, cap " + std::to_string(max_terms));
  return out;
}

// E_{x uniform on {-1,1}^n}[p(x)^k]: expand with x_i^2 = 1, read off the constant term.
inline double exact_raw_moment(const Polynomial& p, int k, std::size_t max_terms = 2'000'000) {
  if (k < 1) throw InputError("exact_raw_moment: k must be >= 1");
  const Polynomial q = reduce_hypercube(p);
  // the last factor only needs the constant term
  Polynomial acc = q;
  for (int i = 1; i < k - 1; ++i) acc = hypercube_product(acc, q, max_terms);
  if (k == 1) return q.constant_term();
  KahanSum s;
  for (auto& [key, c] : acc.terms()) s.add(c * q.coeff(key));
  return s.value();
}

struct MomentOptions {
  BooleanOptions boolean;
  std::size_t max_terms = 2'000'000;  // cap for the exact fourth moment used in c_d
  long long max_breakpoints = 200'000;
};

struct MomentResult {
  double value = 0;
  double norm = 0;         // ||p||_2
  double c_lower = 0;      // lower bound on E|q|^k for q = p/||p||_2
  bool c_from_exact_m4 = false;
  double M = 0;            // truncation radius for q
  double tail = 0;         // bound on E[|q|^k; |q| > M]
  long long breakpoints = 0;
  double additive_budget = 0;  // for E|q|^k
  double relative_budget = 0;  // additive_budget / c_lower
  std::vector<std::string> notes;
};

// E[|q|^k ; |q| > M] under the hypercube tail exp(-(d/2e) t^{2/d}), valid for M >= (2e)^{d/2}.
inline double moment_tail_bound(int d, int k, double M) {
  const double e2 = 2 * std::numbers::e;
  if (M < std::pow(e2, d / 2.0)) return INFINITY;
  auto tail = [&](double t) { return std::exp(-(d / e2) * std::pow(t, 2.0 / d)); };
  auto f = [&](double t) { return k * std::pow(t, k - 1) * tail(t); };
  double integral = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, M, std::numeric_limits<double>::infinity(), 15, 1e-12);
  return std::pow(M, k) * tail(M) + integral;
}

inline MomentResult absolute_moment(const Polynomial& p_in, int k, double eps, const MomentOptions& opt = {}) {
  if (k < 1) throw InputError("absolute_moment: k must be >= 1");
  if (!(eps > 0 && eps < 1)) throw InputError("absolute_moment: eps must lie in (0,1)");
  MomentResult r;
  Polynomial q = reduce_hypercube(p_in);
  double sq = 0;
  for (auto& [key, c] : q.terms()) sq += c * c;
  if (sq == 0) throw InputError("absolute_moment: polynomial is zero on the hypercube");
  r.norm = std::sqrt(sq);
  q *= 1 / r.norm;
  const int d = std::max(1, q.degree());

  // E|q| >= (E q^2)^{3/2} / (E q^4)^{1/2} and E|q|^k >= (E|q|)^k.
  double m4 = std::pow(9.0, d);
  try {
    m4 = exact_raw_moment(q, 4, opt.max_terms);
    r.c_from_exact_m4 = true;
  } catch (const CapError&) {
    r.notes.push_back("E q^4 replaced by the hypercontractive bound 9^d");
  }
  r.c_lower = std::pow(1 / std::sqrt(m4), k);
  const double a = eps * r.c_lower;  // additive target for E|q|^k

  double l1 = 0;
  for (auto& [key, c] : q.terms()) l1 += std::abs(c);
  r.M = l1;
  double lo = std::pow(2 * std::numbers::e, d / 2.0), hi = std::max(lo, l1);
  if (moment_tail_bound(d, k, hi) <= a / 4) {
    for (int it = 0; it < 60; ++it) {
      double mid = 0.5 * (lo + hi);
      (moment_tail_bound(d, k, mid) <= a / 4 ? hi : lo) = mid;
    }
    if (hi < l1) {
      r.M = hi;
      r.tail = moment_tail_bound(d, k, hi);
    }
  }

  // Breakpoints with equal |t|^k increments W = M^k/N, midpoint rule per slice.
  const double Mk = std::pow(r.M, k);
  const long long N = std::max<long long>(1, static_cast<long long>(std::ceil(Mk / (a / 2))));
  if (N > opt.max_breakpoints)
    throw CapError("absolute_moment: " + std::to_string(N) + " breakpoints exceed cap " + std::to_string(opt.max_breakpoints));
  r.breakpoints = N;
  std::vector<double> t(N + 1), w(N + 1);
  for (long long j = 0; j <= N; ++j) {
    w[j] = Mk * double(j) / double(N);
    t[j] = r.M * std::pow(double(j) / double(N), 1.0 / k);
  }
  const double count_eps = std::clamp(a / (8 * Mk), 1e-12, 0.5);

  // up[j] ~ Pr[q >= t_j], dn[j] ~ Pr[q <= -t_j] (j >= 1); dn[0] ~ Pr[q < 0].
  std::vector<double> up(N + 1), dn(N + 1), up_err(N + 1), dn_err(N + 1);
  parallel_for(std::size_t(2 * (N + 1)), [&](std::size_t idx) {
    const long long j = static_cast<long long>(idx / 2);
    Polynomial s = (idx % 2 == 0 ? q : q * -1.0) - Polynomial::constant(t[j]);
    BooleanResult br = count_boolean(s, count_eps, opt.boolean);
    if (idx % 2 == 0) up[j] = br.value, up_err[j] = br.total_budget();
    else dn[j] = br.value, dn_err[j] = br.total_budget();
  });
  dn[0] = 1 - up[0];
  dn_err[0] = up_err[0];

  // Mass in slice j on each side times the midpoint value (w_{j-1}+w_j)/2; the last
  // slice runs to M and absorbs the mass beyond it (zero when M is the L1 radius).
  KahanSum v, err;
  for (int side = 0; side < 2; ++side) {
    const auto& P = side == 0 ? up : dn;
    const auto& E = side == 0 ? up_err : dn_err;
    for (long long j = 1; j <= N; ++j) {
      double mass = P[j - 1] - (j == N ? 0.0 : P[j]);
      v.add(0.5 * (w[j - 1] + w[j]) * std::max(0.0, mass));
    }
    // summation by parts: sum_j v_j (P_{j-1} - P_j) has weight (v_{j+1} - v_j) on P_j
    err.add(0.5 * (w[0] + w[1]) * E[0]);
    for (long long j = 1; j < N; ++j) err.add((0.5 * (w[j] + w[j + 1]) - 0.5 * (w[j - 1] + w[j])) * E[j]);
  }
  r.additive_budget = err.value() + Mk / (2.0 * N) + r.tail / 2;
  r.relative_budget = r.additive_budget / r.c_lower;
  r.value = (v.value() + r.tail / 2) * std::pow(r.norm, k);
  return r;
}

}  // namespace ptf
