#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>

#include "helpers.hpp"
#include "ptfcount/decomposition.hpp"
#include "ptfcount/oracles.hpp"
#include "ptfcount/regularize.hpp"

using namespace ptf;
using testutil::random_tensor;

namespace {

SymTensor pair(int i, int j, int n) {
  SymTensor t(2, n);
  t.set({i, j}, 0.5);  // Sym(e_i ⊗ e_j)
  return t;
}

SymTensor unit(const SymTensor& f) { return f * (1.0 / std::sqrt(wiener_variance(f))); }

// Random multilinear tensor normalized to Var 1.
SymTensor random_unit(std::mt19937_64& rng, int q, int n, double density = 0.7) {
  SymTensor f;
  do f = random_tensor(rng, q, n, density, true);
  while (f.empty());
  return unit(f);
}

double chaos_var(const SymTensor& f) { return wiener_variance(f); }

bool disjoint(const SymTensor& a, const SymTensor& b) {
  auto sa = a.support(), sb = b.support();
  for (int i : sa)
    if (std::find(sb.begin(), sb.end(), i) != sb.end()) return false;
  return true;
}

Polynomial poly(std::initializer_list<std::pair<Index, double>> terms) {
  Polynomial p;
  for (auto& [m, c] : terms) p.add(m, c);
  return p;
}

}  // namespace

TEST(Split, PairExample) {
  auto f = unit(pair(0, 1, 2));
  auto s = split_one_wiener(f, 0.4);
  ASSERT_FALSE(s.eigenregular);
  EXPECT_NEAR(s.c, 1.0, 1e-12);
  EXPECT_LT(s.R.norm(), 1e-12);
  EXPECT_NEAR(chaos_var(s.P), 1.0, 1e-12);
  EXPECT_NEAR(chaos_var(s.Q), 1.0, 1e-12);
  EXPECT_TRUE(disjoint(s.P, s.Q));
  // E[x1 x2 · P · Q] = 1, so {P,Q} = {x1, x2} up to a common sign
  EXPECT_NEAR(std::abs(s.P.get({0}) + s.P.get({1})), 1.0, 1e-12);
}

TEST(Split, EigenregularBelowThreshold) {
  SymTensor d(2, 8);
  for (int i = 0; i < 8; ++i)
    for (int j = i + 1; j < 8; ++j) d.set({i, j}, 1.0);
  d = unit(d);
  double lam = lambda_max(d).lambda_max;
  auto s = split_one_wiener(d, lam * 1.01);
  EXPECT_TRUE(s.eigenregular);
  EXPECT_NEAR(s.lambda, lam, 1e-12);
}

TEST(Split, RejectsBadInput) {
  SymTensor f(2, 2);
  f.set({0, 0}, 1.0 / std::sqrt(2.0));
  EXPECT_THROW(split_one_wiener(f, 0.1), InputError);
  EXPECT_THROW(split_one_wiener(2.0 * pair(0, 1, 2), 0.1), InputError);  // Var 4
}

TEST(Split, PropertiesOnRandomInputs) {
  std::mt19937_64 rng(21);
  int splits = 0;
  for (int it = 0; it < 60; ++it) {
    int q = 2 + int(rng() % 3), n = q + 1 + int(rng() % 4);
    auto f = random_unit(rng, q, n);
    double eta = 0.05;
    auto s = split_one_wiener(f, eta);
    if (s.eigenregular) {
      EXPECT_LT(s.lambda, eta);
      continue;
    }
    ++splits;
    EXPECT_EQ(s.P.order() + s.Q.order(), q);
    EXPECT_GT(s.P.order(), 0);
    EXPECT_GT(s.Q.order(), 0);
    EXPECT_NEAR(chaos_var(s.P), 1.0, 1e-9);
    EXPECT_NEAR(chaos_var(s.Q), 1.0, 1e-9);
    EXPECT_TRUE(disjoint(s.P, s.Q));
    EXPECT_GE(s.c, eta / std::pow(2.0, q) - 1e-12);
    auto pq = outer_sym(s.P, s.Q);
    // E[PQ R] = 0 and Var R = 1 - c^2
    EXPECT_NEAR(factorial(q) * inner(pq, s.R), 0.0, 1e-9);
    EXPECT_NEAR(chaos_var(s.R), 1.0 - s.c * s.c, 1e-9);
    EXPECT_LT((f - (s.c * pq + s.R)).norm(), 1e-10);
    // the product of disjointly supported unit chaoses has unit variance
    EXPECT_NEAR(chaos_var(pq), 1.0, 1e-9);
  }
  EXPECT_GT(splits, 20);
}

TEST(Partition, PairAnchor) {
  auto f = pair(0, 1, 2);
  auto ch = derandomized_partition(SymTensor::basis(0, 2), SymTensor::basis(1, 2), f);
  EXPECT_NEAR(ch.value, 0.5, 1e-15);
  EXPECT_TRUE(ch.in_a1[0]);
  EXPECT_FALSE(ch.in_a1[1]);
  // <f, e1 ⊗ e2> = 1/2, averaged over 2^2 assignments gives 1/8
  EXPECT_NEAR(ch.space_mean, 0.5 / 4.0, 1e-15);
}

// Oracle: space mean equals 2^{-q} <f, alpha ⊗ beta> for multilinear inputs; best >= mean.
TEST(Partition, SpaceMeanAndMaxAboveMean) {
  std::mt19937_64 rng(22);
  for (int it = 0; it < 40; ++it) {
    int q1 = 1 + int(rng() % 2), q2 = 1 + int(rng() % 2), q = q1 + q2;
    int n = q + int(rng() % 5);
    auto f = random_unit(rng, q, n);
    auto a = random_unit(rng, q1, n, 0.9), b = random_unit(rng, q2, n, 0.9);
    a = a * (1.0 / a.norm());
    b = b * (1.0 / b.norm());
    PartitionOptions opt;
    if (it % 2) opt.exhaustive_max_n = 0;  // force the q-wise space
    auto ch = derandomized_partition(a, b, f, opt);
    double full = inner(f, outer_sym(a, b));
    EXPECT_NEAR(ch.space_mean, full / std::pow(2.0, q), 1e-10);
    EXPECT_GE(ch.value, ch.space_mean - 1e-12);
    EXPECT_NEAR(ch.value, inner(f, outer_sym(ch.nu1, ch.nu2)), 1e-10);
    EXPECT_TRUE(disjoint(ch.nu1, ch.nu2));
  }
}

TEST(Partition, FieldMultiplication) {
  // x * x^{-1} = 1 in GF(2^4): brute-force inverse exists for every nonzero element
  for (std::uint32_t a = 1; a < 16; ++a) {
    int found = 0;
    for (std::uint32_t b = 1; b < 16; ++b) found += detail::gf_mul(a, b, 4) == 1;
    EXPECT_EQ(found, 1);
  }
}

TEST(Decompose, SinglePair) {
  auto f = unit(pair(0, 1, 2));
  auto d = decompose_one_wiener(f, 0.1, 1e-6);
  EXPECT_EQ(d.triples.size(), 1u);
  EXPECT_EQ(d.status, WienerStatus::SmallRemainder);
  EXPECT_LT(d.R_neg.norm(), 1e-12);
  EXPECT_NEAR(std::abs(d.triples[0].a), 1.0, 1e-12);
}

TEST(Decompose, TwoOrthogonalPairs) {
  auto f = unit(pair(0, 1, 4) + pair(2, 3, 4));
  auto d = decompose_one_wiener(f, 0.1, 1e-6);
  ASSERT_EQ(d.triples.size(), 2u);
  for (auto& t : d.triples) EXPECT_NEAR(std::abs(t.a), 1.0 / std::sqrt(2.0), 1e-12);
  EXPECT_LT(d.R_neg.norm(), 1e-12);
  EXPECT_LT((d.reconstruct() - f).norm(), 1e-12);
}

TEST(Decompose, EigenregularAtEntry) {
  SymTensor d8(2, 8);
  for (int i = 0; i < 8; ++i)
    for (int j = i + 1; j < 8; ++j) d8.set({i, j}, 1.0);
  d8 = unit(d8);
  double lam = lambda_max(d8).lambda_max;
  auto d = decompose_one_wiener(d8, lam + 0.01, 1e-6);
  EXPECT_TRUE(d.triples.empty());
  EXPECT_EQ(d.status, WienerStatus::EigenregularRemainder);
  EXPECT_LT((d.R_reg - d8).norm(), 1e-15);
}

TEST(Decompose, Invariants) {
  std::mt19937_64 rng(23);
  for (int it = 0; it < 25; ++it) {
    int q = 2 + int(rng() % 2), n = 4 + int(rng() % 3);
    auto f = random_unit(rng, q, n);
    const double eta = 0.2, eps = 1e-3;
    auto d = decompose_one_wiener(f, eta, eps);
    const double qf = factorial(q);
    const auto& R = remainder_of(d);
    auto prod = d.product_part();
    EXPECT_LT((d.reconstruct() - f).norm(), 1e-10);
    EXPECT_NEAR(qf * inner(prod, R), 0.0, 1e-9);
    EXPECT_NEAR(chaos_var(prod) + chaos_var(R), 1.0, 1e-9);
    if (d.status == WienerStatus::SmallRemainder) EXPECT_LE(chaos_var(R), eps);
    else EXPECT_LT(lambda_max(R).lambda_max / std::sqrt(chaos_var(R)), eta);
    const int m = static_cast<int>(d.triples.size());
    const double zeta = eta / std::pow(2.0, q);
    double csq = 0;
    for (auto& t : d.triples) {
      EXPECT_TRUE(disjoint(t.P, t.Q));
      csq += t.a * t.a;
    }
    if (m > 0) EXPECT_LE(csq, std::pow(1.0 / zeta, 4.0 * (m - 1)) * (1 + 1e-9));
    for (double r : d.gs_residuals) EXPECT_GE(r, zeta - 1e-12);
    if (m >= 1 && m <= 4) {
      // sigma_min of the product Gram matrix (unit vectors in the chaos norm)
      Eigen::MatrixXd G(m, m);
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) G(i, j) = qf * inner(product_tensor(d.triples[i]), product_tensor(d.triples[j]));
      double smin = std::sqrt(std::max(0.0, Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(G).eigenvalues().minCoeff()));
      EXPECT_GE(smin, std::pow(zeta, 2.0 * m - 2) - 1e-12);
    }
  }
}

TEST(Regularize, PairGivesZeroRemainders) {
  auto f = unit(pair(0, 1, 2));
  auto r = regularize_one_wiener(f, practical_schedule(1e-6), 1e-6);
  EXPECT_EQ(r.status, WienerStatus::SmallRemainder);
  EXPECT_LT(r.R_reg.norm(), 1e-15);
  EXPECT_LT(r.R_neg.norm(), 1e-12);
  EXPECT_LT((r.reconstruct() - f).norm(), 1e-12);
}

// The diagonal example sum_i e_i ⊗ e_i is not multilinear; a Paley conference
// matrix of order 6 plays the same role: flat spectrum, lambda_max = 1/sqrt(12).
TEST(Regularize, FlatSpectrumWithLargeFirstThreshold) {
  SymTensor c6(2, 6);
  auto chi = [](int a) { a = ((a % 5) + 5) % 5; return (a == 1 || a == 4) ? 1.0 : -1.0; };
  for (int j = 1; j < 6; ++j) c6.set({0, j}, 1.0);
  for (int i = 1; i < 6; ++i)
    for (int j = i + 1; j < 6; ++j) c6.set({i, j}, chi(j - i));
  c6 = unit(c6);
  double lam = lambda_max(c6).lambda_max;
  EXPECT_NEAR(lam, 1.0 / std::sqrt(12.0), 1e-12);
  auto r = regularize_one_wiener(c6, schedule_from_list({0.3, 0.01}, 1e-3), 1e-3);
  EXPECT_EQ(r.level, 0);
  EXPECT_TRUE(r.triples.empty());
  EXPECT_EQ(r.status, WienerStatus::EigenregularRemainder);
  EXPECT_LT((r.R_reg - c6).norm(), 1e-15);
  EXPECT_LE(r.eigenregularity, r.schedule.at(r.level + 1));
}

TEST(Regularize, InvariantsRandom) {
  std::mt19937_64 rng(24);
  for (int it = 0; it < 15; ++it) {
    int q = 2 + int(rng() % 2), n = 4 + int(rng() % 3);
    auto f = random_unit(rng, q, n);
    const double eps = 1e-3;
    auto sched = practical_schedule(eps, 0.4, 0.5, 30);
    auto r = regularize_one_wiener(f, sched, eps);
    EXPECT_LT((r.reconstruct() - f).norm(), 1e-9);
    EXPECT_LE(chaos_var(r.R_neg), eps * (1 + 1e-9));
    if (!r.R_reg.empty()) EXPECT_LE(r.eigenregularity, sched.at(r.level + 1) + 1e-12);
    for (auto& t : r.triples) EXPECT_TRUE(disjoint(t.P, t.Q));
    for (std::size_t i = 0; i < r.per_level_coeff_sq.size(); ++i) {
      double zeta = sched.at(int(i) + 1) / std::pow(2.0, q);
      int m = r.per_level_count[i];
      if (m > 0) EXPECT_LE(r.per_level_coeff_sq[i], std::pow(1.0 / zeta, 4.0 * (m - 1)) * (1 + 1e-9) / (1 - 0));
    }
  }
}

TEST(Regularize, CertifiedScheduleIsTinyAndTruncated) {
  auto s = certified_schedule(1, 0.1, 1.0, 1.0);
  ASSERT_GE(s.levels(), 1);
  // first step from eta_0 = 1: 1 / (C k^2/eps log^2(1/eps) + C' k^3 4^{C' log(1/eps)})
  double L = std::log(10.0);
  EXPECT_NEAR(s.eta[1], 1.0 / (10.0 * L * L + std::pow(4.0, L)), 1e-12);
  EXPECT_FALSE(s.note.empty());
  for (int i = 1; i <= s.levels(); ++i) EXPECT_LT(s.eta[i], s.eta[i - 1]);
  EXPECT_THROW(certified_schedule(1, 0.1, 0.5, 1.0), InputError);
}

TEST(MultiRegularize, SingleInputMatchesRegularize) {
  std::mt19937_64 rng(25);
  for (int it = 0; it < 6; ++it) {
    auto f = random_unit(rng, 2, 5);
    const double eps = 1e-3;
    auto sched = practical_schedule(eps, 0.4, 0.5, 30);
    auto a = regularize_one_wiener(f, sched, eps);
    auto b = multi_regularize_one_wiener({f}, sched, eps).parts[0];
    ASSERT_EQ(a.triples.size(), b.triples.size());
    for (std::size_t i = 0; i < a.triples.size(); ++i) EXPECT_NEAR(a.triples[i].a, b.triples[i].a, 1e-12);
    EXPECT_LT((a.reconstruct() - b.reconstruct()).norm(), 1e-12);
    EXPECT_LT((b.reconstruct() - f).norm(), 1e-10);
  }
}

TEST(MultiRegularize, TwoOrthogonalPairs) {
  auto f1 = unit(pair(0, 1, 4)), f2 = unit(pair(2, 3, 4));
  auto m = multi_regularize_one_wiener({f1, f2}, practical_schedule(1e-6), 1e-6);
  for (auto& P : m.parts) {
    EXPECT_EQ(P.triples.size(), 1u);
    EXPECT_LT(P.R_neg.norm(), 1e-12);
    EXPECT_TRUE(P.R_reg.empty());
    EXPECT_EQ(P.level, m.t);
  }
  EXPECT_LT((m.parts[0].reconstruct() - f1).norm(), 1e-12);
  EXPECT_LT((m.parts[1].reconstruct() - f2).norm(), 1e-12);
}

TEST(MultiRegularize, CommonCertificate) {
  SymTensor d8(2, 8);
  for (int i = 0; i < 8; ++i)
    for (int j = i + 1; j < 8; ++j) d8.set({i, j}, 1.0);
  d8 = unit(d8);
  auto f2 = unit(pair(0, 1, 8) + 0.2 * pair(2, 3, 8));
  auto sched = schedule_from_list({0.3, 0.2, 0.1, 0.05}, 1e-3);
  auto m = multi_regularize_one_wiener({d8, f2}, sched, 1e-3);
  for (auto& P : m.parts) {
    EXPECT_EQ(P.level, m.t);
    if (P.a_reg > 0) EXPECT_LE(P.eigenregularity, sched.at(m.t + 1) + 1e-12);
    EXPECT_LE(chaos_var(P.R_neg), 1e-3 * (1 + 1e-9));
  }
  EXPECT_LT((m.parts[0].reconstruct() - d8).norm(), 1e-10);
  EXPECT_LT((m.parts[1].reconstruct() - f2).norm(), 1e-10);
}

TEST(ManyWieners, LowDegreePassThrough) {
  SymTensor f1(1, 3);
  f1.set({2}, 1.0);
  auto out = multi_regularize_many_wieners({{SymTensor::scalar(0.7), f1}}, 1, 0.1, {});
  EXPECT_EQ(out[0][0].args(), 0);
  EXPECT_DOUBLE_EQ(out[0][0].outer.constant_term(), 0.7);
  ASSERT_EQ(out[0][1].args(), 1);
  EXPECT_LT((out[0][1].inner[0].at(1) - f1).norm(), 1e-15);
}

TEST(RegularizePoly, DegreeOne) {
  auto p = poly({{{0}, 0.6}, {{1}, 0.8}});
  auto r = regularize_poly(p, 0.1);
  EXPECT_EQ(r.m[1], 1);
  EXPECT_EQ(r.max_inner_eigenregularity, 0.0);
  EXPECT_NEAR(r.var_gap, 0.0, 1e-15);
}

TEST(RegularizePoly, Product) {
  auto r = regularize_poly(poly({{{0, 1}, 1.0}}), 0.1);
  EXPECT_EQ(r.m[2], 2);
  EXPECT_NEAR(r.var_gap, 0.0, 1e-15);
  EXPECT_EQ(r.h[2].outer.degree(), 2);
  for (auto& A : r.h[2].inner) {
    EXPECT_EQ(A.degree(), 1);
    EXPECT_NEAR(variance(A), 1.0, 1e-12);
  }
}

TEST(RegularizePoly, TripleProductExact) {
  auto r = regularize_poly(poly({{{0, 1, 2}, 1.0}}), 0.1);
  EXPECT_LE(r.var_gap, r.gap_bound);
  EXPECT_NEAR(r.var_gap, 0.0, 1e-15);
  for (auto& A : r.h[3].inner) EXPECT_LE(A.degree(), 1);
  EXPECT_EQ(r.max_inner_eigenregularity, 0.0);
}

TEST(RegularizePoly, RejectsBadInput) {
  EXPECT_THROW(regularize_poly(poly({{{0, 0}, 1.0}}), 0.1), InputError);
  EXPECT_THROW(regularize_poly(poly({{{0, 1}, 2.0}}), 0.1), InputError);
}

TEST(RegularizePoly, CertifiedHighDegreeIsCapped) {
  RegularizeOptions o;
  o.many.mode = Mode::Certified;
  EXPECT_THROW(regularize_poly(poly({{{0, 1, 2}, 1.0}}), 0.1, o), CapError);
}

TEST(RegularizePoly, RandomInvariants) {
  std::mt19937_64 rng(26);
  for (int it = 0; it < 8; ++it) {
    auto p = testutil::random_poly(rng, 3, 5, 8, true);
    double v = oracle::gaussian_variance(p);
    if (v < 1e-6) continue;
    p = p * (1.0 / std::sqrt(v));
    auto r = regularize_poly(p, 0.5);
    EXPECT_LE(r.var_gap, std::max(r.gap_bound, 1e-9));
    for (int q = 1; q <= r.d; ++q) {
      EXPECT_TRUE(r.h[q].outer.is_multilinear());
      EXPECT_LE(r.h[q].outer.degree(), r.d);
      for (auto& A : r.h[q].inner) EXPECT_NEAR(variance(A), 1.0, 1e-9);
      // p~_q lies in W^q
      auto e = expand(r.h[q], r.n);
      for (int s = 0; s <= e.degree(); ++s)
        if (s != q) EXPECT_LT(e.at(s).norm(), 1e-9);
    }
  }
}
