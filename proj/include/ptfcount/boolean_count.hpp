#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "gaussian_count.hpp"
#include "parallel.hpp"
#include "polynomial.hpp"

namespace ptf {

// x_i^2 = 1 on the hypercube: keep each variable with odd multiplicity.
inline Polynomial reduce_hypercube(const Polynomial& p) {
  Polynomial out(p.dim());
  for (auto& [k, c] : p.terms()) {
    Index m;
    for (auto& [v, mult] : runs(k))
      if (mult % 2) m.push_back(v);
    out.add_sorted(m, c);
  }
  return out;
}

inline void require_multilinear(const Polynomial& p, const char* who) {
  if (!p.is_multilinear()) throw InputError(std::string(who) + ": polynomial is not multilinear");
}

inline double influence(const Polynomial& p, int i) {
  require_multilinear(p, "influence");
  double s = 0;
  for (auto& [k, c] : p.terms())
    if (std::binary_search(k.begin(), k.end(), i)) s += c * c;
  return s;
}

// Uniform-hypercube variance of a multilinear polynomial.
inline double hypercube_variance(const Polynomial& p) {
  double s = 0;
  for (auto& [k, c] : p.terms())
    if (!k.empty()) s += c * c;
  return s;
}

inline Polynomial restrict_var(const Polynomial& p, int i, double s) {
  Polynomial out(p.dim());
  for (auto& [k, c] : p.terms()) {
    auto it = std::lower_bound(k.begin(), k.end(), i);
    if (it != k.end() && *it == i) {
      Index m(k.begin(), it);
      m.insert(m.end(), it + 1, k.end());
      out.add_sorted(m, c * s);
    } else {
      out.add_sorted(k, c);
    }
  }
  return out;
}

enum class LeafLabel { Plus, Minus, Fail, Regular };

inline const char* label_name(LeafLabel l) {
  switch (l) {
    case LeafLabel::Plus: return "+1";
    case LeafLabel::Minus: return "-1";
    case LeafLabel::Fail: return "fail";
    case LeafLabel::Regular: return "regular";
  }
  return "?";
}

struct TreeNode {
  int var = -1;                 // -1 for leaves
  int child[2] = {-1, -1};      // child[0]: x_var = -1, child[1]: x_var = +1
  int depth = 0;
  LeafLabel label = LeafLabel::Fail;
  bool exact = false;           // sign constant on the whole subcube
  Polynomial p;                 // restricted polynomial (leaves only)
  std::vector<std::pair<int, int>> path;  // (variable, sign) from the root
};

struct TreeOptions {
  double decide_threshold = 0.0;  // 0: Chernoff value for tau
  int max_depth = 24;
  double zero_tol = 1e-12;        // relative to the L1 norm of the root polynomial
};

struct TreeStats {
  long long leaves = 0, regular = 0, decided = 0, fail = 0;
  int max_depth = 0;
  double regular_mass = 0, decided_mass = 0, inexact_decided_mass = 0, fail_mass = 0;
  double depth_bound = 0;  // (1/tau)(d log(1/tau))^d
};

struct RegularityTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
  std::vector<int> leaves;      // leaf indices in depth-first order, -1 branch first
  double tau = 0, threshold = 0;
  TreeStats stats;

  double weight(int leaf) const { return std::ldexp(1.0, -nodes[leaf].depth); }
};

// Hypercontractive tail: Pr[|q| >= t ||q||_2] <= exp(-(d/2e) t^{2/d}) for t >= (2e)^{d/2}.
inline double chernoff_threshold(int d, double tau) {
  const double e2 = 2 * std::numbers::e;
  double t = std::pow(e2 / d * std::log(1 / tau), d / 2.0);
  return std::max(t, std::pow(e2, d / 2.0));
}

inline double tree_depth_bound(int d, double tau) {
  return (1 / tau) * std::pow(d * std::log(1 / tau), d);
}

inline RegularityTree construct_tree(const Polynomial& p0, double tau, const TreeOptions& opt = {}) {
  require_multilinear(p0, "construct_tree");
  if (!(tau > 0 && tau < 1)) throw InputError("construct_tree: tau must lie in (0,1)");
  const int d = std::max(1, p0.degree());
  RegularityTree t;
  t.tau = tau;
  t.threshold = opt.decide_threshold > 0 ? opt.decide_threshold : chernoff_threshold(d, tau);
  t.stats.depth_bound = tree_depth_bound(d, tau);
  double l1 = 0;
  for (auto& [k, c] : p0.terms()) l1 += std::abs(c);
  const double ztol = opt.zero_tol * l1;
  const int depth_cap = static_cast<int>(std::min<double>(opt.max_depth, t.stats.depth_bound));

  struct Work {
    int node;
    Polynomial p;
  };
  t.nodes.push_back({});
  std::vector<Work> stack{{0, p0}};
  while (!stack.empty()) {
    Work w = std::move(stack.back());
    stack.pop_back();
    TreeNode& nd = t.nodes[w.node];
    const double mu = w.p.constant_term();
    double rest = 0, var = 0;
    for (auto& [k, c] : w.p.terms())
      if (!k.empty()) rest += std::abs(c), var += c * c;

    auto make_leaf = [&](LeafLabel l, bool exact) {
      nd.label = l;
      nd.exact = exact;
      nd.p = std::move(w.p);
      t.leaves.push_back(w.node);
    };
    if (mu - rest >= -ztol) { make_leaf(LeafLabel::Plus, true); continue; }
    if (mu + rest < -ztol) { make_leaf(LeafLabel::Minus, true); continue; }
    if (std::abs(mu) >= t.threshold * std::sqrt(var)) {
      make_leaf(mu >= 0 ? LeafLabel::Plus : LeafLabel::Minus, false);
      continue;
    }
    int best = -1;
    double best_inf = -1;
    std::map<int, double> inf;
    for (auto& [k, c] : w.p.terms())
      for (int v : k) inf[v] += c * c;
    for (auto& [v, s] : inf)
      if (s > best_inf) best = v, best_inf = s;
    if (best_inf <= tau * var) { make_leaf(LeafLabel::Regular, false); continue; }
    if (nd.depth >= depth_cap) { make_leaf(LeafLabel::Fail, false); continue; }

    nd.var = best;
    const int depth = nd.depth;
    const auto path = nd.path;
    for (int s = 1; s >= 0; --s) {  // push +1 first so the -1 branch is visited first
      TreeNode ch;
      ch.depth = depth + 1;
      ch.path = path;
      ch.path.push_back({best, s ? 1 : -1});
      t.nodes[w.node].child[s] = static_cast<int>(t.nodes.size());
      t.nodes.push_back(std::move(ch));
      stack.push_back({t.nodes[w.node].child[s], restrict_var(w.p, best, s ? 1.0 : -1.0)});
    }
  }

  for (int l : t.leaves) {
    const TreeNode& nd = t.nodes[l];
    const double wgt = t.weight(l);
    ++t.stats.leaves;
    t.stats.max_depth = std::max(t.stats.max_depth, nd.depth);
    switch (nd.label) {
      case LeafLabel::Regular: ++t.stats.regular; t.stats.regular_mass += wgt; break;
      case LeafLabel::Fail: ++t.stats.fail; t.stats.fail_mass += wgt; break;
      default:
        ++t.stats.decided;
        t.stats.decided_mass += wgt;
        if (!nd.exact) t.stats.inexact_decided_mass += wgt;
    }
  }
  return t;
}

struct BooleanOptions {
  Mode mode = Mode::Practical;
  double tau = 0.0;       // 0: (eps/d)^2 practical, (eps/2d)^{4d+1} certified
  double leaf_eps = 0.0;  // 0: eps/2 practical, tau certified
  TreeOptions tree;
  GaussianOptions gaussian;
};

struct BooleanResult : CountResult {
  TreeStats tree;
};

inline BooleanResult count_boolean(const Polynomial& p_in, double eps, const BooleanOptions& opt = {}) {
  if (!(eps > 0 && eps < 1)) throw InputError("count_boolean: eps must lie in (0,1)");
  BooleanResult res;
  res.mode = opt.mode;
  res.method = "regularity-tree";
  Polynomial p = p_in;
  if (!p.is_multilinear()) {
    p = reduce_hypercube(p);
    res.notes.push_back("reduced x_i^2 = 1 to a multilinear polynomial");
  }
  const int d = std::max(1, p.degree());
  const bool cert = opt.mode == Mode::Certified;
  const double tau = opt.tau > 0 ? opt.tau : cert ? std::pow(eps / (2.0 * d), 4.0 * d + 1) : std::pow(eps / d, 2.0);
  const double leaf_eps = opt.leaf_eps > 0 ? opt.leaf_eps : cert ? tau : eps / 2;
  res.params = {{"eps", eps}, {"d", double(d)}, {"tau", tau}, {"leaf_eps", leaf_eps}};

  const double var = hypercube_variance(p);
  if (var > 0) p *= 1.0 / std::sqrt(var);

  auto tree = construct_tree(p, tau, opt.tree);
  res.tree = tree.stats;
  res.params.push_back({"decide_threshold", tree.threshold});
  res.params.push_back({"depth_bound", tree.stats.depth_bound});
  if (cert && tree.stats.fail_mass > tau)
    throw CapError("count_boolean: fail-leaf mass " + std::to_string(tree.stats.fail_mass) + " exceeds tau = " + std::to_string(tau) +
                   " at depth cap " + std::to_string(opt.tree.max_depth));

  std::vector<int> reg;
  for (int l : tree.leaves)
    if (tree.nodes[l].label == LeafLabel::Regular) reg.push_back(l);
  std::vector<CountResult> sub(reg.size());
  GaussianOptions go = opt.gaussian;
  go.mode = opt.mode;
  parallel_for(reg.size(), [&](std::size_t i) { sub[i] = count_gaussian(tree.nodes[reg[i]].p, leaf_eps, go); });

  KahanSum v, gauss_err;
  std::size_t ri = 0;
  for (int l : tree.leaves) {
    const auto& nd = tree.nodes[l];
    if (nd.label == LeafLabel::Plus) v.add(tree.weight(l));
    if (nd.label == LeafLabel::Regular) {
      v.add(tree.weight(l) * sub[ri].value);
      gauss_err.add(tree.weight(l) * sub[ri].total_budget());
      ++ri;
    }
  }
  res.value = std::clamp(v.value(), 0.0, 1.0);

  res.budget.push_back({"decided leaves", tau * tree.stats.inexact_decided_mass,
                        "mislabel probability <= tau on leaves decided by the tail bound"});
  res.budget.push_back({"fail leaves", tree.stats.fail_mass, "fail leaves contribute 0"});
  res.budget.push_back({"invariance", d * std::pow(tau, 1.0 / (4.0 * d + 1)) * tree.stats.regular_mass,
                        "d tau^{1/(4d+1)} per unit of regular-leaf mass, O(1) taken as 1"});
  res.budget.push_back({"gaussian leaves", gauss_err.value(), "weighted sum of the leaf count budgets"});
  if (!reg.empty()) res.notes.push_back(std::to_string(reg.size()) + " regular leaves counted under N(0,1)^n");
  return res;
}

}  // namespace ptf
