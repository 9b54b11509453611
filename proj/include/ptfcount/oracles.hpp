#pragma once

// Ground-truth engines for tests. Nothing here calls into the chaos,
// decomposition or counting code.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "parallel.hpp"
#include "polynomial.hpp"
#include "tensor_algebra.hpp"

namespace ptf::oracle {

// Flat term list for fast repeated evaluation.
struct CompiledPoly {
  std::vector<double> coef;
  std::vector<std::uint32_t> start;
  std::vector<int> vars;
  int n = 0;

  explicit CompiledPoly(const Polynomial& p) : n(p.dim()) {
    for (auto& [k, c] : p.terms()) {
      coef.push_back(c);
      start.push_back(static_cast<std::uint32_t>(vars.size()));
      vars.insert(vars.end(), k.begin(), k.end());
    }
    start.push_back(static_cast<std::uint32_t>(vars.size()));
  }
  double operator()(const double* x) const {
    double s = 0.0;
    for (std::size_t t = 0; t < coef.size(); ++t) {
      double v = coef[t];
      for (std::uint32_t j = start[t]; j < start[t + 1]; ++j) v *= x[vars[j]];
      s += v;
    }
    return s;
  }
};

// E over N(0,I) using E[x^a] = (a-1)!! for even a.
inline double gaussian_expectation(const Polynomial& p) {
  double s = 0.0;
  for (auto& [k, c] : p.terms()) {
    double m = c;
    std::size_t i = 0;
    while (i < k.size() && m != 0.0) {
      std::size_t j = i;
      while (j < k.size() && k[j] == k[i]) ++j;
      int a = static_cast<int>(j - i);
      if (a % 2) m = 0.0;
      for (int t = a - 1; t > 1; t -= 2) m *= t;
      i = j;
    }
    s += m;
  }
  return s;
}

inline double gaussian_variance(const Polynomial& p) {
  double mu = gaussian_expectation(p);
  return gaussian_expectation(p * p) - mu * mu;
}

struct BooleanCount {
  std::uint64_t satisfying = 0;
  std::uint64_t total = 0;
  double value() const { return static_cast<double>(satisfying) / static_cast<double>(total); }
};

inline BooleanCount enumerate_boolean(const Polynomial& p, int max_n = 24) {
  const int n = p.dim();
  if (n > max_n) throw CapError("enumerate_boolean: n = " + std::to_string(n) + " exceeds cap " + std::to_string(max_n));
  CompiledPoly cp(p);
  BooleanCount bc;
  bc.total = std::uint64_t{1} << n;
  std::vector<double> x(std::max(n, 1));
  for (std::uint64_t m = 0; m < bc.total; ++m) {
    for (int i = 0; i < n; ++i) x[i] = (m >> i) & 1 ? 1.0 : -1.0;
    if (cp(x.data()) >= 0.0) ++bc.satisfying;
  }
  return bc;
}

// E over uniform {-1,1}^n of f(p(x)).
template <class F>
double enumerate_mean(const Polynomial& p, F&& f, int max_n = 24) {
  const int n = p.dim();
  if (n > max_n) throw CapError("enumeration cap exceeded");
  CompiledPoly cp(p);
  std::vector<double> x(std::max(n, 1));
  const std::uint64_t total = std::uint64_t{1} << n;
  KahanSum s;
  for (std::uint64_t m = 0; m < total; ++m) {
    for (int i = 0; i < n; ++i) x[i] = (m >> i) & 1 ? 1.0 : -1.0;
    s.add(f(cp(x.data())));
  }
  return s.value() / static_cast<double>(total);
}

struct McResult {
  double estimate = 0.0;
  double stderr_ = 0.0;
  std::uint64_t samples = 0;
  std::uint64_t seed = 0;
  int streams = 0;
};

// Standard normal pairs by Box-Muller from a counter-based stream.
struct NormalStream {
  CounterRng rng;
  double spare = 0.0;
  bool has = false;
  NormalStream(std::uint64_t seed, std::uint64_t stream) : rng(seed, stream) {}
  double operator()() {
    if (has) {
      has = false;
      return spare;
    }
    double u = rng.uniform(), v = rng.uniform();
    double r = std::sqrt(-2.0 * std::log(u));
    spare = r * std::sin(2.0 * std::numbers::pi * v);
    has = true;
    return r * std::cos(2.0 * std::numbers::pi * v);
  }
};

// Samples are split over a fixed number of streams; stream s draws its
// samples from CounterRng(seed, s).
inline McResult mc_gaussian(const Polynomial& p, std::uint64_t samples, std::uint64_t seed, int streams = 64) {
  if (samples < 1) throw InputError("mc_gaussian: samples must be >= 1");
  CompiledPoly cp(p);
  const int n = std::max(p.dim(), 1);
  std::vector<std::uint64_t> hits(streams, 0);
  parallel_for(static_cast<std::size_t>(streams), [&](std::size_t s) {
    std::uint64_t cnt = samples / streams + (s < samples % streams ? 1 : 0);
    NormalStream g(seed, s);
    std::vector<double> x(n);
    std::uint64_t h = 0;
    for (std::uint64_t i = 0; i < cnt; ++i) {
      for (int j = 0; j < n; ++j) x[j] = g();
      if (cp(x.data()) >= 0.0) ++h;
    }
    hits[s] = h;
  });
  std::uint64_t tot = 0;
  for (auto h : hits) tot += h;
  McResult r;
  r.samples = samples;
  r.seed = seed;
  r.streams = streams;
  r.estimate = static_cast<double>(tot) / static_cast<double>(samples);
  r.stderr_ = std::sqrt(r.estimate * (1.0 - r.estimate) / static_cast<double>(samples));
  return r;
}

// Alternating power iteration on every dense ordered flattening.
inline double brute_lambda_max(const SymTensor& f, int restarts = 4) {
  const int q = f.order(), n = f.dim();
  if (q <= 1) return 0.0;
  auto entry = [&](const std::vector<int>& idx) {
    std::vector<int> s = idx;
    std::sort(s.begin(), s.end());
    auto it = f.entries().find(s);
    return it == f.entries().end() ? 0.0 : it->second;
  };
  double best = 0.0;
  for (int k = 1; k < q; ++k) {
    std::size_t R = 1, C = 1;
    for (int i = 0; i < k; ++i) R *= n;
    for (int i = k; i < q; ++i) C *= n;
    std::vector<double> M(R * C);
    std::vector<int> idx(q);
    for (std::size_t r = 0; r < R; ++r)
      for (std::size_t c = 0; c < C; ++c) {
        std::size_t a = r, b = c;
        for (int i = k - 1; i >= 0; --i) idx[i] = static_cast<int>(a % n), a /= n;
        for (int i = q - 1; i >= k; --i) idx[i] = static_cast<int>(b % n), b /= n;
        M[r * C + c] = entry(idx);
      }
    for (int s = 0; s < restarts; ++s) {
      CounterRng rng(12345 + s, static_cast<std::uint64_t>(k));
      std::vector<double> v(C), u(R);
      for (auto& x : v) x = rng.uniform() - 0.5;
      double sigma = 0.0;
      for (int it = 0; it < 20000; ++it) {
        for (std::size_t r = 0; r < R; ++r) {
          double t = 0.0;
          for (std::size_t c = 0; c < C; ++c) t += M[r * C + c] * v[c];
          u[r] = t;
        }
        double nu = 0.0;
        for (double x : u) nu += x * x;
        nu = std::sqrt(nu);
        if (nu == 0.0) break;
        for (auto& x : u) x /= nu;
        for (std::size_t c = 0; c < C; ++c) {
          double t = 0.0;
          for (std::size_t r = 0; r < R; ++r) t += M[r * C + c] * u[r];
          v[c] = t;
        }
        double nv = 0.0;
        for (double x : v) nv += x * x;
        nv = std::sqrt(nv);
        if (nv == 0.0) break;
        for (auto& x : v) x /= nv;
        bool done = std::abs(nv - sigma) <= 1e-15 * nv;
        sigma = nv;
        if (done && it > 10) break;
      }
      best = std::max(best, sigma);
    }
  }
  return best;
}

}  // namespace ptf::oracle
