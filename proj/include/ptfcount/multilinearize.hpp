#pragma once

#include <cmath>
#include <limits>

#include "chaos.hpp"

namespace ptf {

struct LinearizeOptions {
  double max_k = 1e6;           // clamp for K
  long long k_override = 0;     // use this K instead of the formula when > 0
  double max_entries = 5e7;     // cap on tensor entries of the output
};

struct LinearizeResult {
  Polynomial q;                 // multilinear, over n*K variables
  ChaosDecomposition q_chaos;
  long long K = 1;
  double K_formula = 1;         // d^2 (d/delta)^{3d}, before clamping
  bool clamped = false;
  double delta = 0;             // requested
  double delta_achieved = 0;    // delta implied by the K actually used
  double var_q_tilde = 0;       // Var of the substituted polynomial (= Var p)
  double var_diff = 0;          // Var[q~ - q]
  double var_bound = 0;         // (d^2/K) Var[q~]
};

inline double linearize_k(int d, double delta) {
  return double(d) * d * std::pow(double(d) / delta, 3.0 * d);
}

// x_i -> (y_{i,1}+...+y_{i,K})/sqrt(K), y_{i,j} at flat index i*K + j (0-based),
// then drop every repeated-index tensor entry.
inline LinearizeResult linearize(const Polynomial& p, double delta, const LinearizeOptions& opt = {}) {
  if (!(delta > 0.0 && delta < 1.0)) throw InputError("linearize: delta must lie in (0,1)");
  auto dec = to_chaos(p);
  const double var = variance(dec);
  if (std::abs(var - 1.0) > 1e-9) throw InputError("linearize: Var[p] must be 1 (got " + std::to_string(var) + ")");
  const int d = std::max(1, p.degree());
  LinearizeResult res;
  res.delta = delta;
  res.K_formula = linearize_k(d, delta);
  double K = res.K_formula;
  if (opt.k_override > 0) {
    K = double(opt.k_override);
  } else if (!(K <= opt.max_k)) {
    K = opt.max_k;
    res.clamped = true;
  }
  K = std::floor(K);
  if (K < 1 || K > double(std::numeric_limits<int>::max()) / std::max(1, p.dim())) throw CapError("linearize: K overflow");
  res.K = static_cast<long long>(K);
  // K = d^2 (d/delta')^{3d}  =>  delta' = d (d^2/K)^{1/(3d)}
  res.delta_achieved = d * std::pow(double(d) * d / K, 1.0 / (3.0 * d));
  const int n = std::max(1, p.dim());
  const int kk = static_cast<int>(res.K);

  double entries = 0;
  for (auto& l : dec.levels)
    for (auto& [key, v] : l.entries()) {
      double c = 1;
      for (auto [var_i, m] : runs(key)) c *= binom(kk, m);
      entries += c;
    }
  if (entries > opt.max_entries) throw CapError("linearize: output would have " + std::to_string(entries) + " tensor entries");

  res.q_chaos = ChaosDecomposition(n * kk);
  KahanSum dropped;
  for (std::size_t j = 0; j < dec.levels.size(); ++j) {
    const auto& f = dec.levels[j];
    auto& g = res.q_chaos.level(static_cast<int>(j));
    g.set_dim(n * kk);
    const double scale = std::pow(double(kk), -0.5 * double(j));
    for (auto& [key, v] : f.entries()) {
      auto rs = runs(key);
      bool fits = true;
      for (auto [var_i, m] : rs) fits = fits && m <= kk;
      if (!fits) continue;
      // choose m distinct copies for each variable of multiplicity m
      std::vector<std::vector<int>> pick(rs.size());
      for (std::size_t t = 0; t < rs.size(); ++t) {
        pick[t].resize(rs[t].second);
        for (int s = 0; s < rs[t].second; ++s) pick[t][s] = s;
      }
      const double val = v * scale;
      while (true) {
        Index y;
        for (std::size_t t = 0; t < rs.size(); ++t)
          for (int c : pick[t]) y.push_back(rs[t].first * kk + c);
        std::sort(y.begin(), y.end());
        g.add(y, val);
        // advance the combination odometer
        std::size_t t = 0;
        for (; t < rs.size(); ++t) {
          auto& cmb = pick[t];
          const int m = static_cast<int>(cmb.size());
          int s = m - 1;
          while (s >= 0 && cmb[s] == kk - m + s) --s;
          if (s >= 0) {
            ++cmb[s];
            for (int u = s + 1; u < m; ++u) cmb[u] = cmb[u - 1] + 1;
            break;
          }
          for (int u = 0; u < m; ++u) cmb[u] = u;
        }
        if (t == rs.size()) break;
      }
    }
    dropped.add(factorial(static_cast<int>(j)) * (f.norm2() - g.norm2()));
  }
  res.var_q_tilde = var;
  res.var_diff = std::max(0.0, dropped.value());
  res.var_bound = double(d) * d / double(res.K) * var;
  res.q = from_chaos(res.q_chaos);
  res.q.set_dim(n * kk);
  return res;
}

}  // namespace ptf
