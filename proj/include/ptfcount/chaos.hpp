#pragma once

#include <Eigen/Dense>
#include <vector>

#include "polynomial.hpp"
#include "tensor_algebra.hpp"

namespace ptf {

inline int default_max_degree = 8;

// F = sum_q I_q(f_q); levels[q] has order q.
struct ChaosDecomposition {
  int n = 1;
  std::vector<SymTensor> levels;

  ChaosDecomposition() = default;
  explicit ChaosDecomposition(int dim) : n(dim) {}
  static ChaosDecomposition single(const SymTensor& f) {
    ChaosDecomposition c(f.dim());
    c.add(f);
    return c;
  }

  int degree() const {
    for (int q = static_cast<int>(levels.size()) - 1; q >= 0; --q)
      if (!levels[q].empty()) return q;
    return 0;
  }
  SymTensor& level(int q) {
    while (static_cast<int>(levels.size()) <= q) levels.emplace_back(static_cast<int>(levels.size()), n);
    return levels[q];
  }
  SymTensor at(int q) const {
    if (q < static_cast<int>(levels.size())) return levels[q];
    return SymTensor(q, n);
  }
  void add(const SymTensor& f, double s = 1.0) {
    n = std::max(n, f.dim());
    auto& l = level(f.order());
    l.set_dim(n);
    for (auto& [k, v] : f.entries()) l.add(k, s * v);
  }
  ChaosDecomposition& operator+=(const ChaosDecomposition& o) {
    for (auto& l : o.levels) add(l);
    return *this;
  }
  ChaosDecomposition& operator*=(double s) {
    for (auto& l : levels) l *= s;
    return *this;
  }
  friend ChaosDecomposition operator+(ChaosDecomposition a, const ChaosDecomposition& b) { return a += b; }
  friend ChaosDecomposition operator*(ChaosDecomposition a, double s) { return a *= s; }
  void prune() {
    for (auto& l : levels) l.prune();
  }
};

// Coefficients of the monic probabilists' Hermite polynomial He_m in powers of x.
inline std::vector<double> hermite_coeffs(int m) {
  std::vector<double> c(m + 1, 0.0);
  for (int k = 0; 2 * k <= m; ++k)
    c[m - 2 * k] = ((k % 2) ? -1.0 : 1.0) * factorial(m) / (factorial(k) * factorial(m - 2 * k) * std::pow(2.0, k));
  return c;
}

// x^a = sum_k a!/(k!(a-2k)!2^k) He_{a-2k}(x); returned indexed by Hermite degree.
inline std::vector<double> power_in_hermite(int a) {
  std::vector<double> c(a + 1, 0.0);
  for (int k = 0; 2 * k <= a; ++k) c[a - 2 * k] = factorial(a) / (factorial(k) * factorial(a - 2 * k) * std::pow(2.0, k));
  return c;
}

// Uses I_q(Sym(⊗_j e_j^{⊗b_j})) = prod_j He_{b_j}(x_j).
inline ChaosDecomposition to_chaos(const Polynomial& p, int max_degree = default_max_degree) {
  if (p.degree() > max_degree) throw CapError("degree " + std::to_string(p.degree()) + " exceeds cap " + std::to_string(max_degree));
  ChaosDecomposition out(std::max(1, p.dim()));
  out.level(p.degree());
  for (auto& [mono, c] : p.terms()) {
    auto rs = runs(mono);
    std::vector<std::vector<double>> ex;
    for (auto& [v, a] : rs) ex.push_back(power_in_hermite(a));
    std::vector<int> b(rs.size());
    auto rec = [&](auto&& self, std::size_t j, double w) -> void {
      if (w == 0.0) return;
      if (j == rs.size()) {
        Index key;
        for (std::size_t t = 0; t < rs.size(); ++t)
          for (int s = 0; s < b[t]; ++s) key.push_back(rs[t].first);
        auto& l = out.level(static_cast<int>(key.size()));
        l.set_dim(out.n);
        l.add(key, c * w / orbit_size(key));
        return;
      }
      for (int m = 0; m < static_cast<int>(ex[j].size()); ++m) {
        b[j] = m;
        self(self, j + 1, w * ex[j][m]);
      }
    };
    rec(rec, 0, 1.0);
  }
  out.prune();
  return out;
}

inline Polynomial from_chaos(const ChaosDecomposition& dec) {
  Polynomial out(dec.n);
  for (auto& l : dec.levels)
    for (auto& [key, v] : l.entries()) {
      auto rs = runs(key);
      std::vector<std::vector<double>> he;
      for (auto& [var, m] : rs) he.push_back(hermite_coeffs(m));
      std::vector<int> e(rs.size());
      auto rec = [&](auto&& self, std::size_t j, double w) -> void {
        if (w == 0.0) return;
        if (j == rs.size()) {
          Index mono;
          for (std::size_t t = 0; t < rs.size(); ++t)
            for (int s = 0; s < e[t]; ++s) mono.push_back(rs[t].first);
          out.add_sorted(mono, w);
          return;
        }
        for (int a = 0; a < static_cast<int>(he[j].size()); ++a) {
          e[j] = a;
          self(self, j + 1, w * he[j][a]);
        }
      };
      rec(rec, 0, v * orbit_size(key));
    }
  out.prune(1e-14);
  return out;
}

inline double mean(const ChaosDecomposition& dec) { return dec.at(0).get({}); }

inline double variance(const ChaosDecomposition& dec) {
  KahanSum s;
  for (std::size_t q = 1; q < dec.levels.size(); ++q) s.add(factorial(static_cast<int>(q)) * dec.levels[q].norm2());
  return s.value();
}

// E[I_q(f)^2] summed per level; E[I_p I_q] vanishes for p != q.
inline double covariance(const ChaosDecomposition& F, const ChaosDecomposition& G) {
  KahanSum s;
  const std::size_t m = std::min(F.levels.size(), G.levels.size());
  for (std::size_t q = 1; q < m; ++q) s.add(factorial(static_cast<int>(q)) * inner(F.levels[q], G.levels[q]));
  return s.value();
}

inline ChaosDecomposition ito_multiply(const SymTensor& f, const SymTensor& g) {
  const int p = f.order(), q = g.order();
  ChaosDecomposition out(std::max(f.dim(), g.dim()));
  out.level(p + q);
  for (int r = 0; r <= std::min(p, q); ++r) {
    auto c = contract_sym(f, g, r);
    if (!c.empty()) out.add(c, factorial(r) * binom(p, r) * binom(q, r));
  }
  out.prune();
  return out;
}

inline ChaosDecomposition chaos_product(const ChaosDecomposition& F, const ChaosDecomposition& G) {
  ChaosDecomposition out(std::max(F.n, G.n));
  for (auto& f : F.levels)
    for (auto& g : G.levels)
      if (!f.empty() && !g.empty()) out += ito_multiply(f, g);
  out.prune();
  return out;
}

// <D I_p(f), D I_q(g)> in chaos form.
inline ChaosDecomposition malliavin_inner(const SymTensor& f, const SymTensor& g) {
  const int p = f.order(), q = g.order();
  ChaosDecomposition out(std::max(f.dim(), g.dim()));
  if (p == 0 || q == 0) return out;
  for (int r = 1; r <= std::min(p, q); ++r) {
    auto c = contract_sym(f, g, r);
    if (!c.empty()) out.add(c, p * q * factorial(r - 1) * binom(p - 1, r - 1) * binom(q - 1, r - 1));
  }
  out.prune();
  return out;
}

inline ChaosDecomposition malliavin_inner(const ChaosDecomposition& F, const ChaosDecomposition& G) {
  ChaosDecomposition out(std::max(F.n, G.n));
  for (std::size_t p = 1; p < F.levels.size(); ++p)
    for (std::size_t q = 1; q < G.levels.size(); ++q)
      if (!F.levels[p].empty() && !G.levels[q].empty()) out += malliavin_inner(F.levels[p], G.levels[q]);
  out.prune();
  return out;
}

// E[<D I_p(f), D I_q(g)>^2] from contraction norms.
inline double malliavin_inner_second_moment(const SymTensor& f, const SymTensor& g) {
  const int p = f.order(), q = g.order();
  if (p == 0 || q == 0) return 0.0;
  const double pq = static_cast<double>(p) * q;
  KahanSum s;
  if (p != q) {
    for (int r = 1; r <= std::min(p, q); ++r) {
      double a = factorial(r - 1) * binom(p - 1, r - 1) * binom(q - 1, r - 1);
      s.add(pq * pq * a * a * factorial(p + q - 2 * r) * contract_sym(f, g, r).norm2());
    }
    return s.value();
  }
  double fg = inner(f, g);
  s.add(pq * factorial(p) * factorial(p) * fg * fg);
  for (int r = 1; r <= p - 1; ++r) {
    double b = binom(p - 1, r - 1);
    double fr = factorial(r - 1);
    s.add(pq * pq * fr * fr * b * b * b * b * factorial(2 * p - 2 * r) * contract_sym(f, g, r).norm2());
  }
  return s.value();
}

struct CltCertificate {
  int r = 0;
  Eigen::MatrixXd C;
  Eigen::MatrixXd varY;
  double alpha_dd = 0.0;
  double bound = 0.0;
};

// Y(a,b) = <DF_a, -DL^{-1}F_b> = sum_{p,q} (1/q) <D I_p(a_p), D I_q(b_q)>.
inline ChaosDecomposition stein_y(const ChaosDecomposition& Fa, const ChaosDecomposition& Fb) {
  ChaosDecomposition y(std::max(Fa.n, Fb.n));
  for (std::size_t p = 1; p < Fa.levels.size(); ++p)
    for (std::size_t q = 1; q < Fb.levels.size(); ++q)
      if (!Fa.levels[p].empty() && !Fb.levels[q].empty())
        y += malliavin_inner(Fa.levels[p], Fb.levels[q]) * (1.0 / static_cast<double>(q));
  y.prune();
  return y;
}

inline CltCertificate clt_error_certificate(const std::vector<ChaosDecomposition>& Fs, double alpha_dd) {
  CltCertificate cert;
  const int r = static_cast<int>(Fs.size());
  cert.r = r;
  cert.alpha_dd = alpha_dd;
  cert.C = Eigen::MatrixXd::Zero(r, r);
  cert.varY = Eigen::MatrixXd::Zero(r, r);
  for (auto& F : Fs) {
    double scale = std::sqrt(std::max(variance(F), 1.0));
    if (std::abs(mean(F)) > 1e-12 * scale) throw InputError("CLT certificate requires mean-zero inputs");
  }
  double total = 0.0;
  for (int a = 0; a < r; ++a)
    for (int b = 0; b < r; ++b) {
      cert.C(a, b) = covariance(Fs[a], Fs[b]);
      cert.varY(a, b) = std::max(0.0, variance(stein_y(Fs[a], Fs[b])));
      total += std::sqrt(cert.varY(a, b));
    }
  cert.bound = 0.5 * alpha_dd * total;
  return cert;
}

}  // namespace ptf
