// Acceptance checks: one PASS/FAIL line per criterion, exit status 1 if any fails.
// Usage: acceptance [criterion numbers...]   (default: all)

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <set>
#include <string>

#include "helpers.hpp"
#include "ptfcount/boolean_count.hpp"
#include "ptfcount/chaos.hpp"
#include "ptfcount/decomposition.hpp"
#include "ptfcount/gaussian_count.hpp"
#include "ptfcount/io.hpp"
#include "ptfcount/moments.hpp"
#include "ptfcount/multilinearize.hpp"
#include "ptfcount/oracles.hpp"

using namespace ptf;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::vector<std::filesystem::path> corpus_files(const std::string& sub) {
  std::vector<std::filesystem::path> out;
  for (auto& e : std::filesystem::directory_iterator(std::string(PTF_CORPUS) + "/" + sub))
    if (e.path().extension() == ".poly") out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

Outcome algebraic_identities() {
  std::mt19937_64 rng(101);
  double worst = 0;
  const int N = 500;
  for (int it = 0; it < N; ++it) {
    const int n = 1 + int(rng() % 6);
    // Ito multiplication vs direct product
    auto f = testutil::random_tensor(rng, int(rng() % 5), n), g = testutil::random_tensor(rng, int(rng() % 5), n);
    auto F = from_chaos(ChaosDecomposition::single(f)), G = from_chaos(ChaosDecomposition::single(g));
    worst = std::max(worst, max_abs_diff(from_chaos(ito_multiply(f, g)), F * G));
    // E[I_p I_q] = 0 for p != q
    if (f.order() != g.order()) worst = std::max(worst, std::abs(oracle::gaussian_expectation(F * G)));
    // round trip and variance formula
    auto p = testutil::random_poly(rng, 1 + int(rng() % 4), n, 8);
    auto c = to_chaos(p);
    worst = std::max(worst, max_abs_diff(from_chaos(c), p));
    KahanSum v;
    for (std::size_t q = 1; q < c.levels.size(); ++q) v.add(factorial(int(q)) * c.levels[q].norm2());
    worst = std::max(worst, std::abs(v.value() - oracle::gaussian_variance(p)));
  }
  return {worst <= 1e-9, std::to_string(N) + " instances, max abs error " + fmt("%.2e", worst)};
}

Outcome malliavin_formulas() {
  std::mt19937_64 rng(102);
  double worst = 0;
  for (int it = 0; it < 200; ++it) {
    const int n = 1 + int(rng() % 4);
    auto f = testutil::random_tensor(rng, 1 + int(rng() % 3), n), g = testutil::random_tensor(rng, 1 + int(rng() % 3), n);
    auto mi = from_chaos(malliavin_inner(f, g));
    const double symbolic = oracle::gaussian_expectation(mi * mi);
    worst = std::max(worst, std::abs(malliavin_inner_second_moment(f, g) - symbolic) / std::max(1.0, std::abs(symbolic)));
  }
  auto e1 = SymTensor::basis(0, 1);
  SymTensor e11(2, 1);
  e11.set({0, 0}, 1.0);
  const double a48 = malliavin_inner_second_moment(e11, e11), a4 = malliavin_inner_second_moment(e1, e11);
  const bool anchors = a48 == 48.0 && a4 == 4.0;
  return {worst <= 1e-9 && anchors,
          "200 pairs, max error " + fmt("%.2e", worst) + " (relative above 1); anchors " + fmt("%g", a48) + ", " + fmt("%g", a4)};
}

// Sparse sum of weighted disjoint blocks (singletons, pairs, triples) shared across the tuple.
std::vector<Polynomial> eigenregular_tuple(std::mt19937_64& rng, int r) {
  std::vector<Index> blocks;
  int v = 0;
  for (int i = 0; i < 4; ++i) blocks.push_back({v++});
  for (int i = 0; i < 45; ++i, v += 2) blocks.push_back({v, v + 1});
  for (int i = 0; i < 12; ++i, v += 3) blocks.push_back({v, v + 1, v + 2});
  std::uniform_real_distribution<double> w(0.6, 1.0), u(0, 1);
  while (true) {
    std::vector<Polynomial> out;
    bool ok = true;
    for (int a = 0; a < r && ok; ++a) {
      Polynomial p(v);
      for (auto& b : blocks)
        if (u(rng) < 0.7) p.add(b, (rng() & 1 ? 1 : -1) * w(rng));
      auto dec = to_chaos(p);
      const double var = variance(dec);
      if (var <= 0) { ok = false; break; }
      p *= 1 / std::sqrt(var);
      ok = eigenregularity(to_chaos(p)) <= 0.1;
      out.push_back(p);
    }
    if (ok) return out;
  }
}

Outcome clt_soundness() {
  std::mt19937_64 rng(103);
  const std::uint64_t S = 1'000'000;
  const double tanh_dd = 4 / (3 * std::sqrt(3.0));
  int fails = 0;
  double worst_ratio = 0;
  for (int it = 0; it < 50; ++it) {
    const int r = 2 + it % 2;
    auto Fs = eigenregular_tuple(rng, r);
    std::vector<ChaosDecomposition> decs;
    for (auto& p : Fs) decs.push_back(to_chaos(p));
    auto cert2 = clt_error_certificate(decs, 2.0), certT = clt_error_certificate(decs, tanh_dd);
    std::vector<oracle::CompiledPoly> cp(Fs.begin(), Fs.end());
    const int n = Fs[0].dim();
    std::mt19937_64 g(1000 + it);
    std::normal_distribution<double> nd;
    std::vector<double> x(n);
    KahanSum s2, s2sq, sT, sTsq;
    for (std::uint64_t s = 0; s < S; ++s) {
      for (auto& xi : x) xi = nd(g);
      double a2 = 0, aT = 0;
      for (auto& c : cp) {
        const double y = c(x.data());
        a2 += y * y;
        aT += std::tanh(y + 0.3);
      }
      s2.add(a2), s2sq.add(a2 * a2), sT.add(aT), sTsq.add(aT * aT);
    }
    auto stats = [&](KahanSum& m, KahanSum& m2) {
      const double mu = m.value() / S;
      return std::pair{mu, std::sqrt(std::max(0.0, m2.value() / S - mu * mu) / S)};
    };
    auto [mf2, se2] = stats(s2, s2sq);
    auto [mfT, seT] = stats(sT, sTsq);
    // Gaussian side, exact: E sum G_a^2 = trace C; E tanh(G_a + 0.3) by 1-D quadrature
    const double mg2 = cert2.C.trace();
    double mgT = 0;
    for (int a = 0; a < r; ++a) {
      const double sd = std::sqrt(cert2.C(a, a));
      auto f = [&](double z) { return std::tanh(sd * z + 0.3) * std::exp(-z * z / 2) / std::sqrt(2 * std::numbers::pi); };
      mgT += boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, -std::numeric_limits<double>::infinity(),
                                                                           std::numeric_limits<double>::infinity(), 15, 1e-13);
    }
    const double d2 = std::abs(mf2 - mg2), dT = std::abs(mfT - mgT);
    if (d2 > cert2.bound + 4 * se2) ++fails;
    if (dT > certT.bound + 4 * seT) ++fails;
    worst_ratio = std::max({worst_ratio, d2 / (cert2.bound + 4 * se2), dT / (certT.bound + 4 * seT)});
  }
  return {fails == 0, "50 tuples x 2 test functions, " + std::to_string(fails) + " violations, worst |diff|/(cert+4se) " + fmt("%.3f", worst_ratio)};
}

Outcome decomposition_contracts() {
  std::mt19937_64 rng(104);
  int checked = 0, fails = 0;
  long long products = 0;
  std::string first;
  auto check = [&](bool ok, const std::string& what) {
    if (!ok && fails++ == 0) first = what;
  };
  const double eps = 1e-3, eta = 0.2;
  const auto sched = practical_schedule(eps, 0.4, 0.5, 30);
  for (int it = 0; it < 200; ++it) {
    // dense random multilinear levels 1..d
    const int d = 2 + int(rng() % 3), n = d + int(rng() % (11 - d));
    const double density = 0.2 + 0.6 * double(rng() % 1000) / 1000;
    Polynomial p(n);
    for (int q = 1; q <= d; ++q) p += from_chaos(ChaosDecomposition::single(testutil::random_tensor(rng, q, n, density, true)));
    auto dec = to_chaos(p);
    for (std::size_t q = 2; q < dec.levels.size(); ++q) {
      if (dec.levels[q].empty()) continue;
      auto f = dec.levels[q] * (1 / std::sqrt(wiener_variance(dec.levels[q])));
      const double qf = factorial(int(q));
      ++checked;
      auto w = decompose_one_wiener(f, eta, eps);
      const auto& R = remainder_of(w);
      const int m = int(w.triples.size());
      double csq = 0;
      for (auto& t : w.triples) csq += t.a * t.a;
      products += m;
      check((w.reconstruct() - f).norm() <= 1e-9, "decompose reconstruction");
      check(std::abs(qf * inner(w.product_part(), R)) <= 1e-9, "decompose orthogonality");
      check(m <= decompose_iteration_bound(int(q), eta, eps, 8.0), "decompose iteration bound");
      if (m > 0) check(csq <= std::pow(std::pow(2.0, q) / eta, 4.0 * (m - 1)) * (1 + 1e-9), "decompose coefficient bound");

      auto rg = regularize_one_wiener(f, sched, eps);
      check((rg.reconstruct() - f).norm() <= 1e-9, "regularize reconstruction");
      check(wiener_variance(rg.R_neg) <= eps * (1 + 1e-9), "Var[R_neg] <= eps");
      if (!rg.R_reg.empty()) check(rg.eigenregularity <= sched.at(rg.level + 1) + 1e-12, "R_reg eigenregularity");
      for (std::size_t l = 0; l < rg.per_level_count.size(); ++l) {
        const double e = sched.at(int(l) + 1);
        const int ml = rg.per_level_count[l];
        check(ml <= decompose_iteration_bound(int(q), e, eps, 8.0), "regularize iteration bound");
        if (ml > 0) check(rg.per_level_coeff_sq[l] <= std::pow(std::pow(2.0, q) / e, 4.0 * (ml - 1)) * (1 + 1e-9), "regularize coefficient bound");
      }
    }
  }
  return {fails == 0 && checked > 0, std::to_string(checked) + " Wiener levels from 200 inputs (" + std::to_string(products) +
                                         " products), " + std::to_string(fails) + " violations" +
                                         (first.empty() ? "" : " (first: " + first + ")")};
}

Outcome gaussian_corpus() {
  const double eps = 0.05;
  int fails = 0, count = 0;
  double worst = 0;
  bool anchors = true;
  for (auto& f : corpus_files("gaussian")) {
    auto p = read_polynomial_file(f.string());
    auto r = count_gaussian(p, eps);
    auto mc = oracle::mc_gaussian(p, 10'000'000, 2024 + count);
    const double diff = std::abs(r.value - mc.estimate);
    worst = std::max(worst, diff);
    if (diff > eps + 4 * mc.stderr_) ++fails;
    ++count;
  }
  // the four named members of the corpus
  for (auto name : {"g01_x1.poly", "g02_x1sq_minus_1.poly", "g03_two_products.poly", "g04_triple.poly"})
    anchors = anchors && std::filesystem::exists(std::string(PTF_CORPUS) + "/gaussian/" + name);
  return {fails == 0 && count == 30 && anchors,
          std::to_string(count) + " polynomials vs MC(1e7), " + std::to_string(fails) + " outside eps + 4 se, max |diff| " + fmt("%.4f", worst)};
}

Outcome boolean_corpus() {
  const double eps = 0.05;
  int fails = 0, count = 0;
  double worst = 0;
  for (auto& f : corpus_files("boolean")) {
    auto p = read_polynomial_file(f.string());
    const double diff = std::abs(count_boolean(p, eps).value - oracle::enumerate_boolean(p).value());
    worst = std::max(worst, diff);
    if (diff > eps) ++fails;
    ++count;
  }
  Polynomial sum3, pairs3;
  for (int i = 0; i < 3; ++i) sum3.add({i}, 1.0);
  pairs3.add({0, 1}, 1.0), pairs3.add({0, 2}, 1.0), pairs3.add({1, 2}, 1.0);
  const double a = count_boolean(sum3, eps).value, b = count_boolean(pairs3, eps).value;
  const bool anchors = std::abs(a - 0.5) <= eps && std::abs(b - 0.25) <= eps;
  return {fails == 0 && count == 30 && anchors, std::to_string(count) + " polynomials vs enumeration, " + std::to_string(fails) +
                                                    " outside eps, max |diff| " + fmt("%.4f", worst) + "; anchors " + fmt("%.4f", a) +
                                                    ", " + fmt("%.4f", b)};
}

Outcome moments() {
  const double eps = 0.05;
  std::mt19937_64 rng(107);
  int fails = 0, checks = 0;
  double worst = 0;
  auto judge = [&](double v, double truth) {
    ++checks;
    const double rel = std::abs(v / truth - 1);
    worst = std::max(worst, rel);
    if (rel > eps) ++fails;
  };
  for (int it = 0; it < 12; ++it) {
    const int n = 4 + int(rng() % 13);
    auto p = testutil::random_poly(rng, 1 + int(rng() % 3), n, 6 + int(rng() % 8), true);
    p.set_dim(n);
    for (int k : {2, 4}) judge(absolute_moment(p, k, eps).value, exact_raw_moment(p, k));
    for (int k : {1, 3}) judge(absolute_moment(p, k, eps).value, oracle::enumerate_mean(p, [k](double v) { return std::pow(std::abs(v), k); }));
  }
  Polynomial s;
  for (int i = 0; i < 3; ++i) s.add({i}, 1.0);
  judge(absolute_moment(s, 1, eps).value, 1.5);
  return {fails == 0, std::to_string(checks) + " moment checks (k <= 4, n <= 16), max relative error " + fmt("%.4f", worst)};
}

Polynomial substitute(const Polynomial& p, int K) {
  const int n = std::max(1, p.dim());
  Polynomial out(n * K);
  for (auto& [mono, c] : p.terms()) {
    Polynomial t = Polynomial::constant(c, n * K);
    for (int v : mono) {
      Polynomial s(n * K);
      for (int j = 0; j < K; ++j) s.add({v * K + j}, 1 / std::sqrt(double(K)));
      t = t * s;
    }
    out += t;
  }
  return out;
}

Outcome multilinearize() {
  std::mt19937_64 rng(108);
  int done = 0, fails = 0;
  double worst = 0;
  while (done < 100) {
    const int d = 2 + int(rng() % 2), n = 1 + int(rng() % 3);
    auto p = testutil::random_poly(rng, d, n, 5);
    if (p.is_multilinear()) continue;
    const double v = oracle::gaussian_variance(p);
    if (v < 1e-6) continue;
    p *= 1 / std::sqrt(v);
    LinearizeOptions o;
    o.k_override = 2 + int(rng() % 4);
    auto r = linearize(p, 0.5, o);
    auto qt = substitute(p, int(r.K));
    const double var_qt = oracle::gaussian_variance(qt), diff = oracle::gaussian_variance(qt - r.q);
    const double bound = double(p.degree()) * p.degree() / double(r.K) * var_qt;
    worst = std::max(worst, diff / bound);
    if (diff > bound * (1 + 1e-12) || !r.q.is_multilinear()) ++fails;
    ++done;
  }
  const double k = linearize_k(2, 0.5);
  return {fails == 0 && k == 16384.0, "100 inputs, max Var[q~-q]/((d^2/K)Var[q~]) " + fmt("%.3f", worst) + "; K(2, 1/2) = " + fmt("%.0f", k)};
}

Outcome lambda_max_check() {
  std::mt19937_64 rng(109);
  double worst = 0;
  for (int it = 0; it < 300; ++it) {
    const int q = 2 + int(rng() % 3), n = 2 + int(rng() % 7);
    auto f = testutil::random_tensor(rng, q, n);
    worst = std::max(worst, std::abs(lambda_max(f).lambda_max - oracle::brute_lambda_max(f)));
  }
  SymTensor e1e2(2, 2);
  e1e2.set({0, 1}, 0.5);
  SymTensor r1(3, 3);
  r1.set({1, 1, 1}, 1.0);
  const double a = lambda_max(r1).lambda_max, b = lambda_max(e1e2).lambda_max;
  const bool anchors = std::abs(a - 1) <= 1e-12 && std::abs(b - 0.5) <= 1e-12;
  return {worst <= 1e-6 && anchors, "300 tensors, max |engine - brute| " + fmt("%.2e", worst) + "; anchors " + fmt("%.6f", a) + ", " + fmt("%.6f", b)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"algebraic identities", algebraic_identities},
      {"Malliavin formulas", malliavin_formulas},
      {"CLT certificate soundness", clt_soundness},
      {"decomposition contracts", decomposition_contracts},
      {"Gaussian counting corpus", gaussian_corpus},
      {"Boolean counting corpus", boolean_corpus},
      {"absolute moments", moments},
      {"multilinearize", multilinearize},
      {"lambda_max", lambda_max_check},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  bool all = true;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = int(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (id == 1 && secs >= 60) o.pass = false, o.detail += "; over the 60 s limit";
    if (id == 5 && secs > 600) o.pass = false, o.detail += "; over the 10 min limit";
    std::printf("criterion %d %s: %s: %s [%.1f s]\n", id, o.pass ? "PASS" : "FAIL", criteria[i].first.c_str(), o.detail.c_str(), secs);
    std::fflush(stdout);
    all = all && o.pass;
  }
  return all ? 0 : 1;
}
