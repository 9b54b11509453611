#pragma once

#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "core.hpp"

namespace ptf {

// Sparse real polynomial; a monomial is the sorted multiset of its variables,
// so x1^2 x3 has key {0,0,2}.
class Polynomial {
public:
  using Terms = std::map<Index, double>;

  Polynomial() = default;
  explicit Polynomial(int n) : n_(n) {}

  static Polynomial constant(double c, int n = 0) {
    Polynomial p(n);
    p.add({}, c);
    return p;
  }
  static Polynomial variable(int i, int n = 0) {
    Polynomial p(n);
    p.add({i}, 1.0);
    return p;
  }

  int dim() const { return n_; }
  void set_dim(int n) { n_ = std::max(n_, n); }

  int degree() const {
    int d = 0;
    for (auto& [k, c] : t_) d = std::max<int>(d, static_cast<int>(k.size()));
    return d;
  }

  const Terms& terms() const { return t_; }
  bool empty() const { return t_.empty(); }

  double coeff(const Index& mono) const {
    auto it = t_.find(sorted(mono));
    return it == t_.end() ? 0.0 : it->second;
  }

  void add(Index mono, double c) {
    std::sort(mono.begin(), mono.end());
    if (!mono.empty()) {
      if (mono.front() < 0) throw InputError("negative variable index");
      n_ = std::max(n_, mono.back() + 1);
    }
    if (c == 0.0) return;
    auto [it, fresh] = t_.emplace(std::move(mono), c);
    if (!fresh) {
      it->second += c;
      if (it->second == 0.0) t_.erase(it);
    }
  }

  void add_sorted(const Index& mono, double c) {
    if (c == 0.0) return;
    if (!mono.empty()) n_ = std::max(n_, mono.back() + 1);
    auto [it, fresh] = t_.emplace(mono, c);
    if (!fresh) {
      it->second += c;
      if (it->second == 0.0) t_.erase(it);
    }
  }

  double constant_term() const { return coeff({}); }

  bool is_multilinear() const {
    for (auto& [k, c] : t_)
      if (has_repeat(k)) return false;
    return true;
  }

  // Drop |c| < tol * max|c|.
  void prune(double rel_tol) {
    double m = 0.0;
    for (auto& [k, c] : t_) m = std::max(m, std::abs(c));
    for (auto it = t_.begin(); it != t_.end();)
      it = std::abs(it->second) < rel_tol * m ? t_.erase(it) : std::next(it);
  }

  double eval(const std::vector<double>& x) const {
    double s = 0.0;
    for (auto& [k, c] : t_) {
      double v = c;
      for (int i : k) v *= x[i];
      s += v;
    }
    return s;
  }

  Polynomial& operator+=(const Polynomial& o) {
    set_dim(o.n_);
    for (auto& [k, c] : o.t_) add_sorted(k, c);
    return *this;
  }
  Polynomial& operator-=(const Polynomial& o) {
    set_dim(o.n_);
    for (auto& [k, c] : o.t_) add_sorted(k, -c);
    return *this;
  }
  Polynomial& operator*=(double s) {
    if (s == 0.0) {
      t_.clear();
      return *this;
    }
    for (auto& [k, c] : t_) c *= s;
    return *this;
  }

  friend Polynomial operator+(Polynomial a, const Polynomial& b) { return a += b; }
  friend Polynomial operator-(Polynomial a, const Polynomial& b) { return a -= b; }
  friend Polynomial operator*(Polynomial a, double s) { return a *= s; }
  friend Polynomial operator*(double s, Polynomial a) { return a *= s; }

  friend Polynomial operator*(const Polynomial& a, const Polynomial& b) {
    Polynomial out(std::max(a.n_, b.n_));
    for (auto& [ka, ca] : a.t_)
      for (auto& [kb, cb] : b.t_) out.add_sorted(merge_sorted(ka, kb), ca * cb);
    return out;
  }

  Polynomial pow(int k) const {
    Polynomial r = constant(1.0, n_);
    for (int i = 0; i < k; ++i) r = r * *this;
    return r;
  }

  // Max |coefficient difference|, used for approximate equality.
  friend double max_abs_diff(const Polynomial& a, const Polynomial& b) {
    double m = 0.0;
    for (auto& [k, c] : (a - b).t_) m = std::max(m, std::abs(c));
    return m;
  }

  friend bool operator==(const Polynomial& a, const Polynomial& b) { return a.t_ == b.t_; }

  // Text format: one term per line, "<coeff> <i1> ... <ik>" with 1-based indices.
  std::string to_text() const {
    std::ostringstream os;
    os.precision(17);
    for (auto& [k, c] : t_) {
      os << c;
      for (int i : k) os << ' ' << (i + 1);
      os << '\n';
    }
    return os.str();
  }

private:
  int n_ = 0;
  Terms t_;
};

}  // namespace ptf
