#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ptf {

// Sorted multiset of 0-based variable indices. Used both as a monomial key
// (x_{i1}...x_{ik}) and as the canonical key of a symmetric tensor orbit.
using Index = std::vector<int>;

class InputError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class CapError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class InternalError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

inline double factorial(int n) {
  double r = 1.0;
  for (int i = 2; i <= n; ++i) r *= i;
  return r;
}

inline double binom(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  k = std::min(k, n - k);
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return std::round(r);
}

// (value, multiplicity) runs of a sorted index.
inline std::vector<std::pair<int, int>> runs(const Index& key) {
  std::vector<std::pair<int, int>> out;
  for (int v : key) {
    if (!out.empty() && out.back().first == v)
      ++out.back().second;
    else
      out.emplace_back(v, 1);
  }
  return out;
}

// Number of distinct orderings of a multiset: q! / prod(mult!).
inline double orbit_size(const Index& key) {
  double r = factorial(static_cast<int>(key.size()));
  for (auto [v, m] : runs(key)) r /= factorial(m);
  return std::round(r);
}

inline bool has_repeat(const Index& key) {
  for (std::size_t i = 1; i < key.size(); ++i)
    if (key[i] == key[i - 1]) return true;
  return false;
}

inline Index merge_sorted(const Index& a, const Index& b) {
  Index out(a.size() + b.size());
  std::merge(a.begin(), a.end(), b.begin(), b.end(), out.begin());
  return out;
}

inline Index sorted(Index v) {
  std::sort(v.begin(), v.end());
  return v;
}

// Distinct sub-multisets of size r of a sorted key, paired with their complements.
inline std::vector<std::pair<Index, Index>> sub_multisets(const Index& key, int r) {
  std::vector<std::pair<Index, Index>> out;
  auto rs = runs(key);
  std::vector<int> take(rs.size(), 0);
  auto rec = [&](auto&& self, std::size_t pos, int left) -> void {
    if (pos == rs.size()) {
      if (left != 0) return;
      Index k, rest;
      for (std::size_t i = 0; i < rs.size(); ++i) {
        for (int t = 0; t < take[i]; ++t) k.push_back(rs[i].first);
        for (int t = take[i]; t < rs[i].second; ++t) rest.push_back(rs[i].first);
      }
      out.emplace_back(std::move(k), std::move(rest));
      return;
    }
    for (int t = 0; t <= std::min(left, rs[pos].second); ++t) {
      take[pos] = t;
      self(self, pos + 1, left - t);
    }
    take[pos] = 0;
  };
  rec(rec, 0, r);
  return out;
}

// Neumaier-compensated accumulator.
struct KahanSum {
  double s = 0.0, c = 0.0;
  void add(double x) {
    double t = s + x;
    if (std::abs(s) >= std::abs(x))
      c += (s - t) + x;
    else
      c += (x - t) + s;
    s = t;
  }
  double value() const { return s + c; }
};

}  // namespace ptf
