#pragma once

#include <random>
#include <vector>

#include "ptfcount/polynomial.hpp"
#include "ptfcount/tensor_algebra.hpp"

namespace testutil {

using ptf::Index;
using ptf::Polynomial;
using ptf::SymTensor;

inline SymTensor random_tensor(std::mt19937_64& rng, int q, int n, double density = 0.6, bool multilinear = false) {
  SymTensor t(q, n);
  std::uniform_real_distribution<double> val(-1.0, 1.0), coin(0.0, 1.0);
  Index k(q, 0);
  auto rec = [&](auto&& self, int pos, int lo) -> void {
    if (pos == q) {
      if (multilinear && ptf::has_repeat(k)) return;
      if (coin(rng) < density) t.set(k, val(rng));
      return;
    }
    for (int i = lo; i < n; ++i) {
      k[pos] = i;
      self(self, pos + 1, i);
    }
  };
  rec(rec, 0, 0);
  return t;
}

inline Polynomial random_poly(std::mt19937_64& rng, int d, int n, int terms, bool multilinear = false) {
  Polynomial p(n);
  std::uniform_int_distribution<int> deg(0, d), var(0, n - 1);
  std::uniform_real_distribution<double> val(-2.0, 2.0);
  for (int t = 0; t < terms; ++t) {
    int k = t == 0 ? d : deg(rng);
    Index m;
    for (int i = 0; i < k; ++i) m.push_back(var(rng));
    if (multilinear) {
      std::sort(m.begin(), m.end());
      m.erase(std::unique(m.begin(), m.end()), m.end());
    }
    p.add(m, val(rng));
  }
  return p;
}

// Dense row-major flattening over all ordered tuples, built directly from entries.
inline std::vector<double> dense_flat(const SymTensor& f, int k, int n) {
  const int q = f.order();
  std::size_t R = 1, C = 1;
  for (int i = 0; i < k; ++i) R *= n;
  for (int i = k; i < q; ++i) C *= n;
  std::vector<double> M(R * C, 0.0);
  Index idx(q);
  for (std::size_t r = 0; r < R; ++r)
    for (std::size_t c = 0; c < C; ++c) {
      std::size_t a = r, b = c;
      for (int i = k - 1; i >= 0; --i) idx[i] = int(a % n), a /= n;
      for (int i = q - 1; i >= k; --i) idx[i] = int(b % n), b /= n;
      M[r * C + c] = f.get(idx);
    }
  return M;
}

// Partial derivative of an explicit polynomial.
inline Polynomial derivative(const Polynomial& p, int i) {
  Polynomial out(p.dim());
  for (auto& [m, c] : p.terms()) {
    int cnt = int(std::count(m.begin(), m.end(), i));
    if (!cnt) continue;
    Index r = m;
    r.erase(std::find(r.begin(), r.end(), i));
    out.add(r, c * cnt);
  }
  return out;
}

}  // namespace testutil
