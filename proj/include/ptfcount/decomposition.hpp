#pragma once

#include <Eigen/Dense>
#include <cfloat>
#include <cmath>
#include <string>
#include <vector>

#include "chaos.hpp"
#include "tensor_algebra.hpp"

namespace ptf {

enum class Mode { Certified, Practical };

inline const char* mode_name(Mode m) { return m == Mode::Certified ? "certified" : "practical"; }

// eta[0] = 1 >= eta[1] > ... > eta[K] > eta[K+1] = 0.
struct ParamSchedule {
  std::vector<double> eta{1.0};
  double eps = 0.0;
  Mode mode = Mode::Practical;
  std::string beta = "1/x";
  double C = 1.0, Cprime = 1.0;
  std::string note;

  int levels() const { return static_cast<int>(eta.size()) - 1; }
  double at(int i) const {
    if (i <= 0) return 1.0;
    return i < static_cast<int>(eta.size()) ? eta[i] : 0.0;
  }
};

inline ParamSchedule schedule_from_list(const std::vector<double>& etas, double eps, Mode mode = Mode::Practical) {
  ParamSchedule s;
  s.eps = eps;
  s.mode = mode;
  double prev = 1.0;
  for (double e : etas) {
    if (!(e > 0.0 && e <= 1.0)) throw InputError("schedule values must lie in (0,1]");
    if (!(e < prev) && !(s.eta.size() == 1 && e == 1.0)) throw InputError("schedule must be strictly decreasing");
    s.eta.push_back(e);
    prev = e;
  }
  s.note = "user schedule";
  return s;
}

// Geometric schedule eta_i = eta1 * ratio^{i-1}.
inline ParamSchedule practical_schedule(double eps, double eta1 = 0.1, double ratio = 0.5, int levels = 64) {
  ParamSchedule s;
  s.eps = eps;
  s.mode = Mode::Practical;
  for (int i = 0; i < levels; ++i) s.eta.push_back(eta1 * std::pow(ratio, i));
  s.note = "practical geometric schedule, eta1=" + std::to_string(eta1) + " ratio=" + std::to_string(ratio);
  return s;
}

// eta_{t+1} = beta(C k^2/eps eta_t^{-2} log^2(1/eps) + C' k^3 (4/eta_t)^{C' eta_t^{-2} log(1/eps)})
// with beta(x) = 1/x, evaluated in log space. Levels are kept while representable
// as normal doubles.
inline ParamSchedule certified_schedule(int k, double eps, double C, double Cprime, int max_levels = 1 << 20) {
  if (!(C >= 1.0 && Cprime >= 1.0)) throw InputError("certified mode requires explicit constants C, C' >= 1");
  ParamSchedule s;
  s.eps = eps;
  s.mode = Mode::Certified;
  s.C = C;
  s.Cprime = Cprime;
  const double L = std::log(1.0 / eps);
  double log_eta = 0.0;
  for (int t = 0; t < max_levels; ++t) {
    const double eta = std::exp(log_eta);
    const double a = std::log(C) + 2 * std::log(double(k)) - std::log(eps) - 2 * log_eta + 2 * std::log(L);
    const double b = std::log(Cprime) + 3 * std::log(double(k)) + Cprime * L / (eta * eta) * (std::log(4.0) - log_eta);
    const double hi = std::max(a, b), lo = std::min(a, b);
    log_eta = -(hi + std::log1p(std::exp(lo - hi)));
    if (!(log_eta > std::log(DBL_MIN))) {
      s.note = "certified schedule truncated: eta_" + std::to_string(t + 1) + " = exp(" + std::to_string(log_eta) +
               ") is below double precision";
      break;
    }
    s.eta.push_back(std::exp(log_eta));
  }
  return s;
}

inline double wiener_variance(const SymTensor& f) { return factorial(f.order()) * f.norm2(); }

inline double eigenregularity(const SymTensor& f) {
  if (f.order() <= 1) return 0.0;
  double v = wiener_variance(f);
  if (v <= 0.0) return 0.0;
  return lambda_max(f).lambda_max / std::sqrt(v);
}

inline double eigenregularity(const ChaosDecomposition& F) {
  double v = variance(F);
  if (v <= 0.0) return 0.0;
  double m = 0.0;
  for (std::size_t q = 2; q < F.levels.size(); ++q) m = std::max(m, lambda_max(F.levels[q]).lambda_max);
  return m / std::sqrt(v);
}

struct PartitionOptions {
  int exhaustive_max_n = 20;
};

struct PartitionChoice {
  SymTensor nu1, nu2;
  std::vector<char> in_a1;  // per variable, 1 if in A1
  double value = 0.0;       // <f, nu1 ⊗ nu2>
  double space_mean = 0.0;  // average of <f, nu1 ⊗ nu2> over the sample space
  std::size_t space_size = 0;
  bool exhaustive = false;
};

namespace detail {

// Multiplication in GF(2^m) modulo a fixed primitive polynomial.
inline std::uint32_t gf_mul(std::uint32_t a, std::uint32_t b, int m) {
  static const std::uint32_t poly[] = {0, 0x3, 0x7, 0xb, 0x13, 0x25, 0x43, 0x89, 0x11d, 0x211, 0x409, 0x805, 0x1053, 0x201b, 0x4443, 0x8003, 0x1002d};
  std::uint32_t r = 0;
  while (b) {
    if (b & 1) r ^= a;
    b >>= 1;
    a <<= 1;
    if (a >> m) a ^= poly[m];
  }
  return r;
}

}  // namespace detail

// Chooses A1 ⊔ A2 maximizing <f, nu1 ⊗ nu2> with nu1 = alpha|A1, nu2 = beta|A2,
// over either all 2^n assignments or a q-wise independent space: seeds are
// polynomials of degree < q over GF(2^m), variable i gets the low bit of the
// seed evaluated at field element i.
inline PartitionChoice derandomized_partition(const SymTensor& alpha, const SymTensor& beta, const SymTensor& f,
                                              const PartitionOptions& opt = {}) {
  const int q1 = alpha.order(), q2 = beta.order(), q = f.order();
  if (q1 + q2 != q) throw InputError("derandomized_partition: orders do not add up");
  auto sup = f.support();
  const int ns = static_cast<int>(sup.size());
  std::map<int, int> pos;
  for (int i = 0; i < ns; ++i) pos[sup[i]] = i;
  const int words = (ns + 63) / 64;

  struct Term {
    std::vector<std::uint64_t> ma, mb;
    double w;
  };
  std::vector<Term> terms;
  for (auto& [key, v] : f.entries())
    for (auto& [a, b] : sub_multisets(key, q1)) {
      double av = alpha.get(a), bv = beta.get(b);
      if (av == 0.0 || bv == 0.0) continue;
      Term t{std::vector<std::uint64_t>(words, 0), std::vector<std::uint64_t>(words, 0),
             orbit_size(a) * orbit_size(b) * v * av * bv};
      for (int i : a) t.ma[pos[i] / 64] |= std::uint64_t{1} << (pos[i] % 64);
      for (int i : b) t.mb[pos[i] / 64] |= std::uint64_t{1} << (pos[i] % 64);
      terms.push_back(std::move(t));
    }

  auto value_of = [&](const std::vector<std::uint64_t>& z) {
    double s = 0.0;
    for (auto& t : terms) {
      bool ok = true;
      for (int w = 0; w < words && ok; ++w) ok = (z[w] & t.ma[w]) == t.ma[w] && (z[w] & t.mb[w]) == 0;
      if (ok) s += t.w;
    }
    return s;
  };

  int m = 1;
  while ((1 << m) < std::max(ns, 2)) ++m;
  if (m > 16) throw CapError("derandomized_partition: support too large for the GF(2^m) table");
  PartitionChoice best;
  best.value = -INFINITY;
  std::vector<std::uint64_t> z(std::max(words, 1)), bestz;
  KahanSum total;
  auto consider = [&]() {
    double v = value_of(z);
    total.add(v);
    ++best.space_size;
    if (v > best.value) {
      best.value = v;
      bestz = z;
    }
  };
  const bool exhaustive = ns <= std::min(opt.exhaustive_max_n, m * q);
  best.exhaustive = exhaustive;
  if (exhaustive) {
    const std::uint64_t total_n = std::uint64_t{1} << ns;
    for (std::uint64_t a = 0; a < total_n; ++a) {
      std::fill(z.begin(), z.end(), 0);
      if (words) z[0] = a;
      consider();
    }
  } else {
    const std::uint64_t seeds = std::uint64_t{1} << (m * q);
    if (seeds > (std::uint64_t{1} << 32)) throw CapError("derandomized_partition: sample space too large");
    std::vector<std::uint32_t> coef(q);
    for (std::uint64_t s = 0; s < seeds; ++s) {
      for (int j = 0; j < q; ++j) coef[j] = static_cast<std::uint32_t>((s >> (m * j)) & ((1u << m) - 1));
      std::fill(z.begin(), z.end(), 0);
      for (int i = 0; i < ns; ++i) {
        std::uint32_t acc = 0;
        for (int j = q - 1; j >= 0; --j) acc = detail::gf_mul(acc, static_cast<std::uint32_t>(i), m) ^ coef[j];
        if (acc & 1u) z[i / 64] |= std::uint64_t{1} << (i % 64);
      }
      consider();
    }
  }
  if (best.space_size == 0) throw InputError("derandomized_partition: empty candidate space");
  best.space_mean = total.value() / double(best.space_size);
  best.in_a1.assign(f.dim(), 0);
  std::vector<char> keep1(f.dim(), 0), keep2(f.dim(), 0);
  for (int i = 0; i < ns; ++i) {
    bool in1 = (bestz[i / 64] >> (i % 64)) & 1;
    best.in_a1[sup[i]] = in1;
    (in1 ? keep1 : keep2)[sup[i]] = 1;
  }
  best.nu1 = restrict_to(alpha, keep1);
  best.nu2 = restrict_to(beta, keep2);
  return best;
}

struct SplitOptions {
  PartitionOptions partition;
  double var_tol = 1e-9;
};

struct SplitOutcome {
  bool eigenregular = true;
  double lambda = 0.0;  // lambda_max of the input
  SymTensor P, Q, R;
  double c = 0.0;
  PartitionChoice partition;
};

inline void require_unit_multilinear(const SymTensor& f, double tol, const char* who) {
  if (!f.multilinear()) throw InputError(std::string(who) + ": input must be multilinear");
  double v = wiener_variance(f);
  if (std::abs(v - 1.0) > tol) throw InputError(std::string(who) + ": Var must be 1 (got " + std::to_string(v) + ")");
}

inline SplitOutcome split_one_wiener(const SymTensor& f, double eta, const SplitOptions& opt = {}) {
  require_unit_multilinear(f, opt.var_tol, "split_one_wiener");
  const int q = f.order();
  if (q < 2) throw InputError("split_one_wiener: order must be >= 2");
  SplitOutcome out;
  auto rep = lambda_max(f);
  out.lambda = rep.lambda_max;
  if (rep.lambda_max < eta) return out;
  auto symnorm = [](const SymTensor& t) {
    auto s = symmetrize(expand(t));
    double nn = s.norm();
    return nn > 0 ? s * (1.0 / nn) : s;
  };
  auto alpha = symnorm(rep.left), beta = symnorm(rep.right);
  out.partition = derandomized_partition(alpha, beta, f, opt.partition);
  const auto& nu1 = out.partition.nu1;
  const auto& nu2 = out.partition.nu2;
  if (nu1.empty() || nu2.empty() || out.partition.value <= 0.0)
    throw InternalError("split_one_wiener: partition search found no positive correlation");
  const int q1 = nu1.order(), q2 = nu2.order();
  out.P = nu1 * (1.0 / (std::sqrt(factorial(q1)) * nu1.norm()));
  out.Q = nu2 * (1.0 / (std::sqrt(factorial(q2)) * nu2.norm()));
  auto pq = outer_sym(out.P, out.Q);
  out.c = factorial(q) * inner(f, pq);
  out.R = f - out.c * pq;
  out.R.prune();
  out.eigenregular = false;
  return out;
}

struct Triple {
  double a = 0.0;
  SymTensor P, Q;
  int level = 1;
};

inline SymTensor product_tensor(const Triple& t) { return outer_sym(t.P, t.Q); }

enum class WienerStatus { SmallRemainder, EigenregularRemainder };

inline const char* status_name(WienerStatus s) {
  return s == WienerStatus::SmallRemainder ? "small-remainder" : "eigenregular-remainder";
}

struct WienerDecomposition {
  int q = 0;
  std::vector<Triple> triples;
  SymTensor R_reg, R_neg;
  double a_reg = 1.0;  // input = sum a PQ + a_reg R_reg + R_neg
  int level = 0;
  double eigenregularity = 0.0;  // of R_reg
  WienerStatus status = WienerStatus::SmallRemainder;
  std::vector<int> per_level_count;
  std::vector<double> per_level_coeff_sq;
  std::vector<double> gs_residuals;  // sequential Gram-Schmidt residual norms of the products
  ParamSchedule schedule;
  int hits = 0;

  SymTensor reconstruct() const {
    SymTensor s = a_reg * R_reg + R_neg;
    for (auto& t : triples) s += t.a * product_tensor(t);
    return s;
  }
  SymTensor product_part() const {
    SymTensor s(q, R_neg.dim());
    for (auto& t : triples) s += t.a * product_tensor(t);
    return s;
  }
};

struct DecomposeOptions {
  SplitOptions split;
  double max_iter_const = 8.0;
};

// Iteration bound m <= c (4^q / eta^2) log(1/eps).
inline double decompose_iteration_bound(int q, double eta, double eps, double c = 8.0) {
  return std::ceil(c * std::pow(4.0, q) / (eta * eta) * std::log(1.0 / eps));
}

inline WienerDecomposition decompose_one_wiener(const SymTensor& f, double eta, double eps, const DecomposeOptions& opt = {}) {
  require_unit_multilinear(f, opt.split.var_tol, "decompose_one_wiener");
  const int q = f.order();
  const double qf = factorial(q);
  WienerDecomposition out;
  out.q = q;
  out.level = 1;
  std::vector<SymTensor> prods;
  std::vector<SymTensor> ortho;  // Gram-Schmidt basis of the products
  Eigen::VectorXd coef;
  SymTensor g = f;
  const double bound = decompose_iteration_bound(q, eta, eps, opt.max_iter_const);
  while (true) {
    const double vg = wiener_variance(g);
    if (vg <= eps) {
      out.status = WienerStatus::SmallRemainder;
      out.R_neg = g;
      out.R_reg = SymTensor(q, f.dim());
      break;
    }
    if (double(prods.size()) >= bound) throw InternalError("decompose_one_wiener: iteration bound exceeded");
    SymTensor zg = g * (1.0 / std::sqrt(vg));
    auto s = split_one_wiener(zg, eta, {opt.split.partition, 1e-6});
    if (s.eigenregular) {
      out.status = WienerStatus::EigenregularRemainder;
      out.R_reg = g;
      out.R_neg = SymTensor(q, f.dim());
      out.eigenregularity = s.lambda;
      break;
    }
    Triple t{0.0, s.P, s.Q, 1};
    out.triples.push_back(t);
    prods.push_back(product_tensor(t));
    // Gram-Schmidt residual of the new product against the previous ones
    SymTensor r = prods.back();
    for (auto& o : ortho) r -= (qf * inner(r, o)) * o;
    double rn = std::sqrt(qf * r.norm2());
    out.gs_residuals.push_back(rn);
    if (rn > 0) ortho.push_back(r * (1.0 / rn));
    // project I_q(f) onto span of the products via the normal equations
    const int m = static_cast<int>(prods.size());
    Eigen::MatrixXd G(m, m);
    Eigen::VectorXd b(m);
    for (int i = 0; i < m; ++i) {
      b(i) = qf * inner(f, prods[i]);
      for (int j = 0; j <= i; ++j) G(i, j) = G(j, i) = qf * inner(prods[i], prods[j]);
    }
    coef = G.ldlt().solve(b);
    g = f;
    for (int i = 0; i < m; ++i) {
      out.triples[i].a = coef(i);
      g -= coef(i) * prods[i];
    }
    g.prune();
  }
  double csq = 0;
  for (auto& t : out.triples) csq += t.a * t.a;
  out.per_level_count = {static_cast<int>(out.triples.size())};
  out.per_level_coeff_sq = {csq};
  return out;
}

// Decompose result as (triples, remainder) regardless of status.
inline const SymTensor& remainder_of(const WienerDecomposition& d) {
  return d.status == WienerStatus::SmallRemainder ? d.R_neg : d.R_reg;
}

inline WienerDecomposition regularize_one_wiener(const SymTensor& f, const ParamSchedule& sched, double eps,
                                                 const DecomposeOptions& opt = {}) {
  require_unit_multilinear(f, opt.split.var_tol, "regularize_one_wiener");
  const int q = f.order();
  WienerDecomposition out;
  out.q = q;
  out.schedule = sched;
  out.R_reg = SymTensor(q, f.dim());
  out.R_neg = SymTensor(q, f.dim());
  SymTensor g = f;
  for (int i = 1;; ++i) {
    const double vg = wiener_variance(g);
    if (vg <= eps) {
      out.R_neg = g;
      out.level = i - 1;
      out.status = WienerStatus::SmallRemainder;
      return out;
    }
    if (i > sched.levels()) {
      if (sched.mode == Mode::Certified)
        throw CapError("regularize_one_wiener: certified schedule exhausted at level " + std::to_string(i) + "; " + sched.note);
      throw InternalError("regularize_one_wiener: schedule exhausted");
    }
    const double lam = 1.0 / std::sqrt(vg);
    auto dec = decompose_one_wiener(g * lam, sched.at(i), eps, opt);
    double csq = 0;
    for (auto& t : dec.triples) csq += (t.a / lam) * (t.a / lam);
    auto add_triples = [&] {
      for (auto t : dec.triples) {
        t.a /= lam;
        t.level = i;
        out.triples.push_back(t);
      }
      out.per_level_count.push_back(static_cast<int>(dec.triples.size()));
      out.per_level_coeff_sq.push_back(csq);
      out.gs_residuals.insert(out.gs_residuals.end(), dec.gs_residuals.begin(), dec.gs_residuals.end());
    };
    if (dec.status == WienerStatus::SmallRemainder) {
      add_triples();
      out.R_neg = dec.R_neg * (1.0 / lam);
      out.level = i - 1;
      out.status = WienerStatus::SmallRemainder;
      return out;
    }
    if (wiener_variance(dec.product_part()) <= eps) {
      out.R_neg = dec.product_part() * (1.0 / lam);
      out.R_reg = dec.R_reg * (1.0 / lam);
      out.level = i - 1;
      out.status = WienerStatus::EigenregularRemainder;
      out.eigenregularity = eigenregularity(out.R_reg);
      return out;
    }
    add_triples();
    g = dec.R_reg * (1.0 / lam);
  }
}

struct MultiWiener {
  std::vector<WienerDecomposition> parts;
  int t = 0;
};

inline MultiWiener multi_regularize_one_wiener(const std::vector<SymTensor>& fs, const ParamSchedule& sched, double eps,
                                               const DecomposeOptions& opt = {}) {
  const std::size_t r = fs.size();
  MultiWiener out;
  out.parts.resize(r);
  std::vector<SymTensor> g(fs.begin(), fs.end());
  std::vector<char> live(r, 1);
  for (std::size_t s = 0; s < r; ++s) {
    require_unit_multilinear(fs[s], opt.split.var_tol, "multi_regularize_one_wiener");
    auto& P = out.parts[s];
    P.q = fs[s].order();
    P.schedule = sched;
    P.R_reg = SymTensor(P.q, fs[s].dim());
    P.R_neg = SymTensor(P.q, fs[s].dim());
    P.a_reg = 0.0;
  }
  auto any_live = [&] {
    for (char c : live)
      if (c) return true;
    return false;
  };
  for (int i = 1;; ++i) {
    // (a)
    for (std::size_t s = 0; s < r; ++s)
      if (live[s] && wiener_variance(g[s]) <= eps) {
        out.parts[s].R_neg = g[s];
        out.parts[s].status = WienerStatus::SmallRemainder;
        live[s] = 0;
      }
    if (!any_live()) {
      out.t = i - 1;
      break;
    }
    if (i > sched.levels()) {
      if (sched.mode == Mode::Certified)
        throw CapError("multi_regularize_one_wiener: certified schedule exhausted at level " + std::to_string(i) + "; " + sched.note);
      throw InternalError("multi_regularize_one_wiener: schedule exhausted");
    }
    // (b)
    std::vector<WienerDecomposition> dec(r);
    std::vector<double> lam(r, 1.0), pv(r, 0.0);
    for (std::size_t s = 0; s < r; ++s)
      if (live[s]) {
        lam[s] = 1.0 / std::sqrt(wiener_variance(g[s]));
        dec[s] = decompose_one_wiener(g[s] * lam[s], sched.at(i), eps, opt);
        pv[s] = wiener_variance(dec[s].product_part());
      }
    auto add_triples = [&](std::size_t s) {
      auto& P = out.parts[s];
      double csq = 0;
      for (auto t : dec[s].triples) {
        t.a /= lam[s];
        t.level = i;
        csq += t.a * t.a;
        P.triples.push_back(t);
      }
      P.per_level_count.push_back(static_cast<int>(dec[s].triples.size()));
      P.per_level_coeff_sq.push_back(csq);
      P.gs_residuals.insert(P.gs_residuals.end(), dec[s].gs_residuals.begin(), dec[s].gs_residuals.end());
    };
    // (c)
    for (std::size_t s = 0; s < r; ++s)
      if (live[s] && dec[s].status == WienerStatus::SmallRemainder) {
        add_triples(s);
        out.parts[s].R_neg = dec[s].R_neg * (1.0 / lam[s]);
        out.parts[s].status = WienerStatus::SmallRemainder;
        live[s] = 0;
      }
    if (!any_live()) {
      out.t = i - 1;
      break;
    }
    // (d)
    bool all_small = true;
    for (std::size_t s = 0; s < r; ++s)
      if (live[s] && pv[s] > eps) all_small = false;
    if (all_small) {
      for (std::size_t s = 0; s < r; ++s)
        if (live[s]) {
          auto& P = out.parts[s];
          P.R_neg = dec[s].product_part() * (1.0 / lam[s]);
          SymTensor R = dec[s].R_reg * (1.0 / lam[s]);
          P.a_reg = std::sqrt(wiener_variance(R));
          P.R_reg = P.a_reg > 0 ? R * (1.0 / P.a_reg) : R;
          P.status = WienerStatus::EigenregularRemainder;
          P.eigenregularity = eigenregularity(P.R_reg);
        }
      out.t = i - 1;
      break;
    }
    // (e)
    for (std::size_t s = 0; s < r; ++s)
      if (live[s] && pv[s] > eps) {
        ++out.parts[s].hits;
        add_triples(s);
        g[s] = dec[s].R_reg * (1.0 / lam[s]);
      }
  }
  for (auto& P : out.parts) P.level = out.t;
  return out;
}

}  // namespace ptf
