#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <map>
#include <unordered_map>
#include <vector>

#include "core.hpp"

namespace ptf {

// Symmetric order-q tensor over R^n. One entry per orbit, keyed by the sorted
// index; the stored value is the tensor entry at any permutation of the key.
class SymTensor {
public:
  using Entries = std::map<Index, double>;

  SymTensor() = default;
  SymTensor(int order, int dim) : q_(order), n_(dim) {}

  static SymTensor scalar(double c) {
    SymTensor t(0, 1);
    t.set({}, c);
    return t;
  }
  // Unit basis vector e_i as an order-1 tensor.
  static SymTensor basis(int i, int n) {
    SymTensor t(1, n);
    t.set({i}, 1.0);
    return t;
  }

  int order() const { return q_; }
  int dim() const { return n_; }
  void set_dim(int n) { n_ = std::max(n_, n); }
  const Entries& entries() const { return c_; }
  bool empty() const { return c_.empty(); }
  std::size_t nnz() const { return c_.size(); }

  double get(const Index& idx) const {
    auto it = c_.find(sorted(idx));
    return it == c_.end() ? 0.0 : it->second;
  }
  void set(Index idx, double v) {
    check(idx);
    std::sort(idx.begin(), idx.end());
    if (v == 0.0)
      c_.erase(idx);
    else
      c_[std::move(idx)] = v;
  }
  void add(const Index& sorted_idx, double v) {
    if (v == 0.0) return;
    auto [it, fresh] = c_.emplace(sorted_idx, v);
    if (!fresh) {
      it->second += v;
      if (it->second == 0.0) c_.erase(it);
    }
  }

  bool multilinear() const {
    for (auto& [k, v] : c_)
      if (has_repeat(k)) return false;
    return true;
  }

  // Frobenius norm squared over the full (orbit-expanded) tensor.
  double norm2() const {
    KahanSum s;
    for (auto& [k, v] : c_) s.add(orbit_size(k) * v * v);
    return s.value();
  }
  double norm() const { return std::sqrt(norm2()); }

  // Support variables.
  std::vector<int> support() const {
    std::vector<int> s;
    for (auto& [k, v] : c_) s.insert(s.end(), k.begin(), k.end());
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
    return s;
  }

  void prune(double rel_tol = 1e-12) {
    double thr = rel_tol * norm();
    for (auto it = c_.begin(); it != c_.end();)
      it = std::abs(it->second) < thr ? c_.erase(it) : std::next(it);
  }

  SymTensor& operator+=(const SymTensor& o) {
    same_order(o);
    n_ = std::max(n_, o.n_);
    for (auto& [k, v] : o.c_) add(k, v);
    return *this;
  }
  SymTensor& operator-=(const SymTensor& o) {
    same_order(o);
    n_ = std::max(n_, o.n_);
    for (auto& [k, v] : o.c_) add(k, -v);
    return *this;
  }
  SymTensor& operator*=(double s) {
    if (s == 0.0) c_.clear();
    for (auto& [k, v] : c_) v *= s;
    return *this;
  }
  friend SymTensor operator+(SymTensor a, const SymTensor& b) { return a += b; }
  friend SymTensor operator-(SymTensor a, const SymTensor& b) { return a -= b; }
  friend SymTensor operator*(SymTensor a, double s) { return a *= s; }
  friend SymTensor operator*(double s, SymTensor a) { return a *= s; }

private:
  void check(const Index& idx) const {
    if (static_cast<int>(idx.size()) != q_) throw InputError("index length does not match tensor order");
    for (int i : idx)
      if (i < 0 || i >= n_) throw InputError("tensor index out of range");
  }
  void same_order(const SymTensor& o) const {
    if (o.q_ != q_) throw InputError("tensor order mismatch");
  }

  int q_ = 0;
  int n_ = 1;
  Entries c_;
};

// Unsymmetrized tensor keyed by ordered index tuples.
struct RawTensor {
  int order = 0;
  int dim = 1;
  std::map<Index, double> entries;
};

// All distinct orderings of a sorted key.
inline std::vector<Index> orderings(const Index& key) {
  std::vector<Index> out;
  Index k = key;
  do out.push_back(k);
  while (std::next_permutation(k.begin(), k.end()));
  return out;
}

inline RawTensor expand(const SymTensor& f) {
  RawTensor t{f.order(), f.dim(), {}};
  for (auto& [k, v] : f.entries())
    for (auto& o : orderings(k)) t.entries[o] = v;
  return t;
}

inline SymTensor symmetrize(const RawTensor& t) {
  SymTensor out(t.order, t.dim);
  for (auto& [idx, v] : t.entries) {
    if (static_cast<int>(idx.size()) != t.order) throw InputError("entry length does not match order");
    for (int i : idx)
      if (i < 0 || i >= t.dim) throw InputError("entry index out of range");
    Index k = sorted(idx);
    out.add(k, v / orbit_size(k));
  }
  out.prune();
  return out;
}

inline double inner(const SymTensor& f, const SymTensor& g) {
  if (f.order() != g.order()) throw InputError("inner: order mismatch");
  const auto& a = f.nnz() <= g.nnz() ? f : g;
  const auto& b = f.nnz() <= g.nnz() ? g : f;
  KahanSum s;
  for (auto& [k, v] : a.entries()) {
    auto it = b.entries().find(k);
    if (it != b.entries().end()) s.add(orbit_size(k) * v * it->second);
  }
  return s.value();
}

inline void check_contract(const SymTensor& f, const SymTensor& g, int r) {
  if (r < 0 || r > std::min(f.order(), g.order())) throw InputError("contraction index out of range");
}

// (f ⊗_r g)(a, b) = sum over ordered k of f(a, k) g(k, b).
inline RawTensor contract(const SymTensor& f, const SymTensor& g, int r) {
  check_contract(f, g, r);
  const int p = f.order(), q = g.order();
  std::map<Index, std::vector<std::pair<Index, double>>> fk;
  for (auto& [key, v] : f.entries())
    for (auto& o : orderings(key)) fk[Index(o.begin() + (p - r), o.end())].emplace_back(Index(o.begin(), o.begin() + (p - r)), v);
  RawTensor out{p + q - 2 * r, std::max(f.dim(), g.dim()), {}};
  for (auto& [key, v] : g.entries())
    for (auto& o : orderings(key)) {
      auto it = fk.find(Index(o.begin(), o.begin() + r));
      if (it == fk.end()) continue;
      for (auto& [a, fv] : it->second) {
        Index t = a;
        t.insert(t.end(), o.begin() + r, o.end());
        out.entries[t] += fv * v;
      }
    }
  for (auto it = out.entries.begin(); it != out.entries.end();)
    it = it->second == 0.0 ? out.entries.erase(it) : std::next(it);
  return out;
}

struct IndexHash {
  std::size_t operator()(const Index& k) const noexcept {
    std::size_t h = 1469598103934665603ull;
    for (int i : k) h = (h ^ static_cast<std::size_t>(i + 1)) * 1099511628211ull;
    return h;
  }
};

// Sym(f ⊗_r g) computed orbit-wise without expanding permutations.
inline SymTensor contract_sym(const SymTensor& f, const SymTensor& g, int r) {
  check_contract(f, g, r);
  struct Part {
    Index rest;
    double w;
  };
  std::unordered_map<Index, std::vector<Part>, IndexHash> gk;
  for (auto& [key, v] : g.entries())
    for (auto& [k, rest] : sub_multisets(key, r)) gk[k].push_back({rest, v * orbit_size(rest)});
  SymTensor out(f.order() + g.order() - 2 * r, std::max(f.dim(), g.dim()));
  std::map<Index, KahanSum> acc;
  for (auto& [key, v] : f.entries())
    for (auto& [k, a] : sub_multisets(key, r)) {
      auto it = gk.find(k);
      if (it == gk.end()) continue;
      const double w = v * orbit_size(a) * orbit_size(k);
      for (auto& part : it->second) {
        Index t = merge_sorted(a, part.rest);
        acc[t].add(w * part.w / orbit_size(t));
      }
    }
  for (auto& [t, s] : acc) out.add(t, s.value());
  out.prune();
  return out;
}

inline SymTensor outer_sym(const SymTensor& f, const SymTensor& g) { return contract_sym(f, g, 0); }

// Order-k flattening over ordered index tuples present in the support.
struct Flattening {
  int split = 1;
  std::vector<Index> rows, cols;
  Eigen::SparseMatrix<double> entries;
};

inline Flattening flattening(const SymTensor& f, int k) {
  const int q = f.order();
  if (k < 1 || k > q - 1) throw InputError("flattening split out of range");
  Flattening fl;
  fl.split = k;
  std::map<Index, int> ri, ci;
  std::vector<Eigen::Triplet<double>> trip;
  for (auto& [key, v] : f.entries())
    for (auto& o : orderings(key)) {
      Index a(o.begin(), o.begin() + k), b(o.begin() + k, o.end());
      auto [ra, fr] = ri.emplace(a, static_cast<int>(ri.size()));
      if (fr) fl.rows.push_back(a);
      auto [cb, fc] = ci.emplace(b, static_cast<int>(ci.size()));
      if (fc) fl.cols.push_back(b);
      trip.emplace_back(ra->second, cb->second, v);
    }
  fl.entries.resize(static_cast<int>(ri.size()), static_cast<int>(ci.size()));
  fl.entries.setFromTriplets(trip.begin(), trip.end());
  return fl;
}

struct EigenReport {
  double lambda_max = 0.0;
  int split = 0;
  SymTensor left, right;
};

namespace detail {

struct TopSingular {
  double sigma = 0.0;
  Eigen::VectorXd u, v;
};

inline TopSingular top_singular(const Eigen::SparseMatrix<double>& M) {
  TopSingular ts;
  const Eigen::Index m = M.rows(), n = M.cols();
  if (m == 0 || n == 0) return ts;
  if (static_cast<double>(m) * static_cast<double>(n) <= 4.0e6) {
    Eigen::MatrixXd D(M);
    Eigen::BDCSVD<Eigen::MatrixXd> svd(D, Eigen::ComputeThinU | Eigen::ComputeThinV);
    ts.sigma = svd.singularValues()(0);
    ts.u = svd.matrixU().col(0);
    ts.v = svd.matrixV().col(0);
    return ts;
  }
  if (std::min(m, n) <= 2000) {
    const bool left = m <= n;
    Eigen::SparseMatrix<double> Gs = left ? Eigen::SparseMatrix<double>(M * M.transpose())
                                          : Eigen::SparseMatrix<double>(M.transpose() * M);
    Eigen::MatrixXd G(Gs);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G);
    const Eigen::Index top = G.rows() - 1;
    ts.sigma = std::sqrt(std::max(0.0, es.eigenvalues()(top)));
    Eigen::VectorXd w = es.eigenvectors().col(top);
    if (left) {
      ts.u = w;
      ts.v = M.transpose() * w;
      ts.v /= std::max(ts.v.norm(), 1e-300);
    } else {
      ts.v = w;
      ts.u = M * w;
      ts.u /= std::max(ts.u.norm(), 1e-300);
    }
    return ts;
  }
  // Large sparse case: power iteration on M^T M from a fixed start.
  Eigen::VectorXd v = Eigen::VectorXd::Ones(n) / std::sqrt(static_cast<double>(n));
  double prev = 0.0;
  for (int it = 0; it < 20000; ++it) {
    Eigen::VectorXd u = M * v;
    Eigen::VectorXd w = M.transpose() * u;
    double nw = w.norm();
    if (nw == 0.0) break;
    v = w / nw;
    double s = std::sqrt(nw);
    if (std::abs(s - prev) <= 1e-15 * s) break;
    prev = s;
  }
  ts.u = M * v;
  ts.sigma = ts.u.norm();
  if (ts.sigma > 0) ts.u /= ts.sigma;
  ts.v = v;
  return ts;
}

}  // namespace detail

// Largest top singular value over all flattenings, with tensor witnesses.
// Rows and columns are indexed by multisets; scaling by sqrt(orbit sizes)
// makes the reduced matrix have the same singular values as the full one.
inline EigenReport lambda_max(const SymTensor& f) {
  EigenReport rep;
  const int q = f.order();
  if (q <= 1 || f.empty()) return rep;
  for (int k = 1; k <= q / 2; ++k) {
    std::map<Index, int> ri, ci;
    std::vector<Index> rk, ck;
    std::vector<Eigen::Triplet<double>> trip;
    for (auto& [key, v] : f.entries())
      for (auto& [a, b] : sub_multisets(key, k)) {
        auto [ra, fr] = ri.emplace(a, static_cast<int>(ri.size()));
        if (fr) rk.push_back(a);
        auto [cb, fc] = ci.emplace(b, static_cast<int>(ci.size()));
        if (fc) ck.push_back(b);
        trip.emplace_back(ra->second, cb->second, v * std::sqrt(orbit_size(a) * orbit_size(b)));
      }
    Eigen::SparseMatrix<double> M(static_cast<int>(rk.size()), static_cast<int>(ck.size()));
    M.setFromTriplets(trip.begin(), trip.end());
    auto ts = detail::top_singular(M);
    if (ts.sigma <= rep.lambda_max * (1.0 + 1e-12)) continue;
    rep.lambda_max = ts.sigma;
    rep.split = k;
    rep.left = SymTensor(k, f.dim());
    rep.right = SymTensor(q - k, f.dim());
    // sign convention: first nonzero left entry in key order is positive
    double sign = 0.0;
    std::vector<std::size_t> order(rk.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return rk[x] < rk[y]; });
    for (std::size_t i : order)
      if (std::abs(ts.u(static_cast<Eigen::Index>(i))) > 1e-14) {
        sign = ts.u(static_cast<Eigen::Index>(i)) > 0 ? 1.0 : -1.0;
        break;
      }
    if (sign == 0.0) sign = 1.0;
    for (std::size_t i = 0; i < rk.size(); ++i)
      rep.left.add(rk[i], sign * ts.u(static_cast<Eigen::Index>(i)) / std::sqrt(orbit_size(rk[i])));
    for (std::size_t j = 0; j < ck.size(); ++j)
      rep.right.add(ck[j], sign * ts.v(static_cast<Eigen::Index>(j)) / std::sqrt(orbit_size(ck[j])));
    rep.left.prune();
    rep.right.prune();
  }
  return rep;
}

inline SymTensor zero_diagonal(const SymTensor& f) {
  SymTensor out(f.order(), f.dim());
  for (auto& [k, v] : f.entries())
    if (!has_repeat(k)) out.add(k, v);
  return out;
}

// Restrict to keys whose variables all lie in `keep` (a 0/1 mask).
inline SymTensor restrict_to(const SymTensor& f, const std::vector<char>& keep) {
  SymTensor out(f.order(), f.dim());
  for (auto& [k, v] : f.entries()) {
    bool ok = true;
    for (int i : k)
      if (i >= static_cast<int>(keep.size()) || !keep[i]) {
        ok = false;
        break;
      }
    if (ok) out.add(k, v);
  }
  return out;
}

}  // namespace ptf
