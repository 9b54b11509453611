#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/Polynomials>
#include <boost/math/special_functions/bessel.hpp>
#include <boost/math/special_functions/erf.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/random/sobol.hpp>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "multilinearize.hpp"
#include "parallel.hpp"
#include "regularize.hpp"

namespace ptf {

struct BudgetItem {
  std::string name;
  double value = 0.0;
  std::string note;
};

struct CountResult {
  double value = 0.0;
  std::vector<BudgetItem> budget;
  Mode mode = Mode::Practical;
  std::string method;
  std::vector<std::pair<std::string, double>> params;
  std::vector<std::string> notes;

  double total_budget() const {
    double s = 0;
    for (auto& b : budget) s += b.value;
    return s;
  }
  double param(const std::string& k) const {
    for (auto& [n, v] : params)
      if (n == k) return v;
    return NAN;
  }
};

inline double normal_cdf(double x) { return 0.5 * boost::math::erfc(-x / std::numbers::sqrt2); }

// Pr[a <= Z <= b] without cancellation in either tail.
inline double normal_mass(double a, double b) {
  if (!(a < b)) return 0.0;
  if (a >= 0) return 0.5 * (boost::math::erfc(a / std::numbers::sqrt2) - boost::math::erfc(b / std::numbers::sqrt2));
  if (b <= 0) return 0.5 * (boost::math::erfc(-b / std::numbers::sqrt2) - boost::math::erfc(-a / std::numbers::sqrt2));
  return 1.0 - normal_cdf(a) - (1.0 - normal_cdf(b));
}

inline double normal_quantile(double u) { return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * u); }

// ---------------------------------------------------------------------------
// coefficient and covariance rounding

inline double rounding_step(int r, int d, double eps) {
  return std::sqrt(std::pow(eps / d, 3.0 * d) / (d * std::pow(double(r), d)));
}

inline Polynomial round_coefficients(const Polynomial& h, int r, int d, double eps) {
  const double step = rounding_step(std::max(r, 1), std::max(d, 1), eps);
  Polynomial out(h.dim());
  for (auto& [m, c] : h.terms()) out.add_sorted(m, step * std::round(c / step));
  return out;
}

struct CovarianceMatrix {
  Eigen::MatrixXd S;
  bool psd = true;
  bool rational = false;
  long long denominator = 1;
  double spectral_shift = 0.0;  // ||Sigma - Sigma'||_2 after rounding and repair
};

inline CovarianceMatrix build_covariance(const std::vector<ChaosDecomposition>& inners, double tol = 1e-6) {
  const int r = static_cast<int>(inners.size());
  CovarianceMatrix out;
  out.S = Eigen::MatrixXd::Zero(r, r);
  for (int a = 0; a < r; ++a) {
    double v = variance(inners[a]);
    if (std::abs(v - 1.0) > tol) throw InputError("build_covariance: inner variance must be 1 (got " + std::to_string(v) + ")");
    out.S(a, a) = 1.0;
    for (int b = 0; b < a; ++b) out.S(a, b) = out.S(b, a) = covariance(inners[a], inners[b]);
  }
  return out;
}

inline CovarianceMatrix round_psd(const CovarianceMatrix& sigma, double delta) {
  if (!(delta > 0)) throw InputError("round_psd: delta must be positive");
  const long long D = static_cast<long long>(std::ceil(1.0 / delta));
  auto rationalize = [&](const Eigen::MatrixXd& M) {
    Eigen::MatrixXd R = M.unaryExpr([&](double x) { return std::round(x * D) / double(D); });
    return Eigen::MatrixXd(0.5 * (R + R.transpose()));
  };
  CovarianceMatrix out;
  out.rational = true;
  out.denominator = D;
  out.S = rationalize(sigma.S);
  const double tol = 1e-12;
  for (int it = 0; it < 2; ++it) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(out.S);
    if (out.S.rows() == 0 || es.eigenvalues().minCoeff() >= -tol) break;
    Eigen::VectorXd lam = es.eigenvalues().cwiseMax(0.0);
    out.S = rationalize(es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose());
  }
  if (out.S.rows() > 0) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(out.S);
    out.psd = es.eigenvalues().minCoeff() >= -tol;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> diff(out.S - sigma.S);
    out.spectral_shift = diff.eigenvalues().cwiseAbs().maxCoeff();
  }
  return out;
}

// Sigma = L L^T with L = V_+ Lambda_+^{1/2}; columns ordered by increasing eigenvalue.
inline Eigen::MatrixXd whiten(const Eigen::MatrixXd& S, double rel_tol = 1e-12) {
  const int r = static_cast<int>(S.rows());
  if (r == 0) return Eigen::MatrixXd(0, 0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
  const double top = std::max(1.0, es.eigenvalues().maxCoeff());
  std::vector<int> keep;
  for (int i = 0; i < r; ++i)
    if (es.eigenvalues()(i) > rel_tol * top) keep.push_back(i);
  Eigen::MatrixXd L(r, static_cast<int>(keep.size()));
  for (std::size_t j = 0; j < keep.size(); ++j) L.col(j) = es.eigenvectors().col(keep[j]) * std::sqrt(es.eigenvalues()(keep[j]));
  return L;
}

// ---------------------------------------------------------------------------
// mollifier

namespace detail {

struct FlatPoly {
  std::vector<double> coef;
  std::vector<std::vector<int>> vars;
  int degree = 0;
  explicit FlatPoly(const Polynomial& p) {
    for (auto& [k, c] : p.terms()) {
      coef.push_back(c);
      vars.push_back(k);
      degree = std::max<int>(degree, static_cast<int>(k.size()));
    }
  }
  double eval(const double* x) const {
    double s = 0.0;
    for (std::size_t t = 0; t < coef.size(); ++t) {
      double v = coef[t];
      for (int j : vars[t]) v *= x[j];
      s += v;
    }
    return s;
  }
  // Coefficients (low to high) of t -> p(y0 + t v).
  void line(const Eigen::VectorXd& y0, const Eigen::VectorXd& v, std::vector<double>& out) const {
    out.assign(degree + 1, 0.0);
    std::vector<double> acc(degree + 1);
    for (std::size_t t = 0; t < coef.size(); ++t) {
      acc.assign(degree + 1, 0.0);
      acc[0] = coef[t];
      int deg = 0;
      for (int j : vars[t]) {
        for (int k = deg + 1; k >= 1; --k) acc[k] = acc[k] * y0(j) + acc[k - 1] * v(j);
        acc[0] *= y0(j);
        ++deg;
      }
      for (int k = 0; k <= deg; ++k) out[k] += acc[k];
    }
  }
};

inline double sphere_area(int r) { return 2.0 * std::pow(std::numbers::pi, r / 2.0) / std::tgamma(r / 2.0); }

}  // namespace detail

// C_r with int b^2 = 1 for b = sqrt(C_r)(1 - |x|^2) on the unit ball, by radial quadrature.
inline double bump_constant(int r) {
  auto f = [r](double rho) { return (1 - rho * rho) * (1 - rho * rho) * std::pow(rho, r - 1); };
  double radial = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, 0.0, 1.0);
  return 1.0 / (detail::sphere_area(r) * radial);
}

// Fourier transform (unitary, angular frequency) of b at radius k.
inline double bump_hat(int r, double Cr, double k) {
  const double nu = r / 2.0 + 1.0;
  if (k < 1e-6) return std::sqrt(Cr) * std::pow(2.0, 1.0 - nu) / std::tgamma(nu + 1.0);
  return std::sqrt(Cr) * 2.0 * boost::math::cyl_bessel_j(nu, k) / std::pow(k, nu);
}

// Radius R (in units of 1/c) with int_{|y| > R} B_1 <= mass, from |J_nu(x)| <= 0.7858 x^{-1/3}.
inline double bump_tail_radius(int r, double Cr, double mass) {
  const double coef = detail::sphere_area(r) * 4.0 * Cr * 0.7858 * 0.7858 * 3.0 / 8.0;
  return std::max(1.0, std::pow(coef / mass, 3.0 / 8.0));
}

struct MollifiedIndicator {
  int r = 1;
  Polynomial phi;
  detail::FlatPoly flat{Polynomial()};
  double c = 1.0;
  double W = 0.0;
  double xi = 1e-3;
  double Cr = 0.0;
  std::vector<double> nodes;    // r coordinates per node
  std::vector<double> weights;  // B_c(y) dy, normalized to sum 1
  double kernel_mass = 0.0;     // grid mass of B_c before normalization

  double B(const double* y) const {
    double k2 = 0;
    for (int i = 0; i < r; ++i) k2 += y[i] * y[i];
    double bh = bump_hat(r, Cr, c * std::sqrt(k2));
    return std::pow(c, r) * bh * bh;
  }
};

inline MollifiedIndicator make_mollifier(const Polynomial& phi, int r, double c, double xi, double max_nodes = 2e6) {
  if (r < 1) throw InputError("make_mollifier: r must be >= 1");
  if (!(c > 0) || !(xi > 0)) throw InputError("make_mollifier: c and xi must be positive");
  MollifiedIndicator m;
  m.r = r;
  m.phi = phi;
  m.flat = detail::FlatPoly(phi);
  m.c = c;
  m.xi = xi;
  m.Cr = bump_constant(r);
  const double R = bump_tail_radius(r, m.Cr, xi / 2.0);
  m.W = R / c;
  // midpoint nodes (i + 1/2) h, symmetric about 0
  const double h = 1.0 / (8.0 * c);
  const int half = static_cast<int>(std::ceil(m.W / h));
  const int per = 2 * half;
  if (std::pow(double(per), r) > max_nodes)
    throw CapError("make_mollifier: kernel grid needs " + std::to_string(std::pow(double(per), r)) + " nodes");
  std::vector<int> idx(r, -half);
  std::vector<double> y(r);
  KahanSum total;
  while (true) {
    double rad2 = 0;
    for (int i = 0; i < r; ++i) {
      y[i] = (idx[i] + 0.5) * h;
      rad2 += y[i] * y[i];
    }
    if (rad2 <= m.W * m.W) {
      double w = m.B(y.data()) * std::pow(h, r);
      m.nodes.insert(m.nodes.end(), y.begin(), y.end());
      m.weights.push_back(w);
      total.add(w);
    }
    int i = 0;
    for (; i < r; ++i) {
      if (++idx[i] < half) break;
      idx[i] = -half;
    }
    if (i == r) break;
  }
  m.kernel_mass = total.value();
  for (auto& w : m.weights) w /= m.kernel_mass;
  return m;
}

// (g * B_c)(x) for g = 1[phi >= 0].
inline double eval_mollified(const MollifiedIndicator& m, const double* x) {
  KahanSum s;
  std::vector<double> z(std::max(m.r, m.phi.dim()), 0.0);
  for (std::size_t k = 0; k < m.weights.size(); ++k) {
    for (int i = 0; i < m.r; ++i) z[i] = x[i] - m.nodes[k * m.r + i];
    if (m.flat.eval(z.data()) >= 0.0) s.add(m.weights[k]);
  }
  return std::clamp(s.value(), 0.0, 1.0);
}

struct GridInfo {
  double Z = 0, h = 0, cells = 0;
  int dims = 0;
};

// E[g~(G)], G ~ N(0, Sigma), by midpoint rule on [-Z,Z]^s in whitened coordinates.
inline double integrate_gaussian(const MollifiedIndicator& m, const CovarianceMatrix& sigma, double eps, double max_grid,
                                 GridInfo* info = nullptr) {
  if (sigma.S.rows() != m.r) throw InputError("integrate_gaussian: dimension mismatch");
  Eigen::MatrixXd L = whiten(sigma.S);
  const int s = static_cast<int>(L.cols());
  GridInfo gi;
  gi.dims = s;
  std::vector<double> x(m.r, 0.0);
  if (s == 0) {
    if (info) *info = gi;
    return eval_mollified(m, x.data());
  }
  gi.Z = -normal_quantile(eps / (8.0 * s));
  const double lip = 2.0 * m.c * L.operatorNorm();
  gi.h = eps / (4.0 * lip * std::sqrt(double(s)));
  const long long per = static_cast<long long>(std::ceil(2.0 * gi.Z / gi.h));
  gi.cells = std::pow(double(per), s);
  if (gi.cells > max_grid)
    throw CapError("integrate_gaussian: grid needs " + std::to_string(gi.cells) + " cells (cap " + std::to_string(max_grid) + ")");
  const double h = 2.0 * gi.Z / double(per);
  std::vector<double> mass(per), centre(per);
  for (long long i = 0; i < per; ++i) {
    double a = -gi.Z + i * h;
    mass[i] = normal_mass(a, a + h);
    centre[i] = a + h / 2;
  }
  const std::size_t cells = static_cast<std::size_t>(gi.cells);
  std::vector<double> vals(cells);
  parallel_for(cells, [&](std::size_t cell) {
    Eigen::VectorXd z(s);
    double w = 1.0;
    std::size_t c = cell;
    for (int i = 0; i < s; ++i) {
      z(i) = centre[c % per];
      w *= mass[c % per];
      c /= per;
    }
    Eigen::VectorXd y = L * z;
    vals[cell] = w * eval_mollified(m, y.data());
  });
  KahanSum total;
  for (double v : vals) total.add(v);
  if (info) *info = gi;
  return std::clamp(total.value(), 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// sharp indicator: exact along one whitened direction, QMC over the rest

struct SharpIntegration {
  double value = 0.0;
  double error = 0.0;
  int dims = 0;
  std::uint64_t points = 0;
  int shifts = 0;
  std::string method;
};

namespace detail {

inline double poly_at(const std::vector<double>& a, double t) {
  double s = 0;
  for (int k = static_cast<int>(a.size()) - 1; k >= 0; --k) s = s * t + a[k];
  return s;
}

// Gaussian mass of {t : a(t) >= 0}.
inline double nonneg_mass(std::vector<double> a) {
  double scale = 0;
  for (double x : a) scale = std::max(scale, std::abs(x));
  if (scale == 0.0) return 1.0;
  while (a.size() > 1 && std::abs(a.back()) <= 1e-13 * scale) a.pop_back();
  const int deg = static_cast<int>(a.size()) - 1;
  if (deg == 0) return a[0] >= 0 ? 1.0 : 0.0;
  std::vector<double> roots;
  if (deg == 1) {
    roots.push_back(-a[0] / a[1]);
  } else {
    Eigen::VectorXd c(deg + 1);
    for (int k = 0; k <= deg; ++k) c(k) = a[k];
    Eigen::PolynomialSolver<double, Eigen::Dynamic> solver(c);
    for (int i = 0; i < solver.roots().size(); ++i) {
      auto z = solver.roots()(i);
      if (std::abs(z.imag()) <= 1e-9 * (1.0 + std::abs(z.real()))) roots.push_back(z.real());
    }
  }
  std::sort(roots.begin(), roots.end());
  roots.erase(std::unique(roots.begin(), roots.end(), [](double x, double y) { return std::abs(x - y) < 1e-12; }), roots.end());
  double mass = 0;
  double lo = -INFINITY;
  for (std::size_t i = 0; i <= roots.size(); ++i) {
    double hi = i < roots.size() ? roots[i] : INFINITY;
    double probe = std::isinf(lo) ? (std::isinf(hi) ? 0.0 : hi - 1.0) : (std::isinf(hi) ? lo + 1.0 : 0.5 * (lo + hi));
    if (poly_at(a, probe) >= 0) mass += normal_mass(lo, hi);
    lo = hi;
  }
  return std::clamp(mass, 0.0, 1.0);
}

}  // namespace detail

// Pr[phi(L z) >= 0], z ~ N(0, I_s): the last coordinate (largest variance) is
// integrated exactly via real roots, the rest by Sobol points under seeded
// Cranley-Patterson shifts. Error = 3 standard errors across shifts.
inline SharpIntegration integrate_sharp(const Polynomial& phi, const Eigen::MatrixXd& L, std::uint64_t points, int shifts,
                                        std::uint64_t seed) {
  SharpIntegration out;
  const int s = static_cast<int>(L.cols());
  const int r = static_cast<int>(L.rows());
  out.dims = s;
  detail::FlatPoly fp(phi);
  std::vector<double> line;
  if (s == 0) {
    std::vector<double> x(std::max(r, phi.dim()), 0.0);
    out.value = phi.eval(x) >= 0 ? 1.0 : 0.0;
    out.method = "constant";
    return out;
  }
  Eigen::VectorXd v = L.col(s - 1);
  if (s == 1) {
    fp.line(Eigen::VectorXd::Zero(r), v, line);
    out.value = detail::nonneg_mass(line);
    out.method = "exact-1d";
    out.points = 1;
    return out;
  }
  shifts = std::max(shifts, 2);
  const std::uint64_t per = std::max<std::uint64_t>(1, points / shifts);
  const int q = s - 1;
  std::vector<double> means(shifts);
  parallel_for(static_cast<std::size_t>(shifts), [&](std::size_t sh) {
    boost::random::sobol gen(q);
    CounterRng rng(seed, sh);
    std::vector<double> shift(q);
    for (auto& x : shift) x = rng.uniform();
    const double span = double(gen.max()) - double(gen.min()) + 1.0;
    Eigen::VectorXd z(q);
    std::vector<double> ln;
    KahanSum acc;
    for (std::uint64_t k = 0; k < per; ++k) {
      for (int i = 0; i < q; ++i) {
        double u = (double(gen() - gen.min()) + 0.5) / span + shift[i];
        u -= std::floor(u);
        z(i) = normal_quantile(std::clamp(u, 1e-16, 1.0 - 1e-16));
      }
      Eigen::VectorXd y0 = L.leftCols(q) * z;
      fp.line(y0, v, ln);
      acc.add(detail::nonneg_mass(ln));
    }
    means[sh] = acc.value() / double(per);
  });
  double mu = 0;
  for (double m : means) mu += m;
  mu /= shifts;
  double var = 0;
  for (double m : means) var += (m - mu) * (m - mu);
  var /= (shifts - 1);
  out.value = std::clamp(mu, 0.0, 1.0);
  out.error = 3.0 * std::sqrt(var / shifts);
  out.points = per * shifts;
  out.shifts = shifts;
  out.method = "conditional-qmc";
  return out;
}

// ---------------------------------------------------------------------------
// pipeline

enum class Integrator { Auto, Sharp, Grid };

struct GaussianOptions {
  Mode mode = Mode::Practical;
  double tau = 0.0;            // 0: tau = eps
  long long max_k = 0;         // practical cap on the linearization K, 0 = practical_k(d)
  Integrator integrator = Integrator::Auto;
  std::uint64_t qmc_points = 1 << 14;
  int qmc_shifts = 8;
  std::uint64_t seed = 1;
  double max_grid = 1e7;
  double covariance_delta = 1e-9;
  double c_override = 0.0;     // mollifier width for the grid path, 0 = formula
  double xi = 0.0;             // kernel tolerance, 0 = eps/8
  int clt_max_inners = 48;
  RegularizeOptions regularize;
  LinearizeOptions linearize;
};

// Copies per variable used by practical linearization. The decomposition of the
// substituted polynomial grows quickly with K at degree >= 3.
inline long long practical_k(int d) { return d <= 2 ? 32 : d == 3 ? 8 : 4; }

// tau with (tau/d)^{3d} = v: sign disagreement of two polynomials whose difference has variance v (constant 1).
inline double sign_disagreement_tau(double var_gap, int d) {
  if (var_gap <= 0) return 0.0;
  return d * std::pow(var_gap, 1.0 / (3.0 * d));
}

inline CountResult count_gaussian(const Polynomial& p, double eps, const GaussianOptions& opt = {}) {
  if (!(eps > 0 && eps < 1)) throw InputError("count_gaussian: eps must lie in (0,1)");
  CountResult res;
  res.mode = opt.mode;
  const double tau = opt.tau > 0 ? opt.tau : eps;
  res.params.push_back({"eps", eps});
  res.params.push_back({"tau", tau});
  auto dec0 = to_chaos(p);
  const double var0 = variance(dec0);
  if (var0 <= 1e-300) {
    res.value = mean(dec0) >= 0 ? 1.0 : 0.0;
    res.method = "constant";
    res.notes.push_back("Var[p] = 0: exact answer from the sign of the constant");
    return res;
  }
  Polynomial q = p * (1.0 / std::sqrt(var0));
  const int d = std::max(1, p.degree());
  res.params.push_back({"d", double(d)});

  // 1. multilinearize
  if (!q.is_multilinear()) {
    LinearizeOptions lo = opt.linearize;
    if (opt.mode == Mode::Practical && lo.k_override <= 0) {
      const long long cap = opt.max_k > 0 ? opt.max_k : practical_k(d);
      double kf = linearize_k(d, tau);
      if (kf > double(cap)) {
        lo.k_override = cap;
        res.notes.push_back("linearization K capped at " + std::to_string(cap) + " (formula value " + std::to_string(kf) + ")");
      }
    }
    auto lin = linearize(q, tau, lo);
    if (opt.mode == Mode::Certified && lin.clamped)
      throw CapError("count_gaussian: certified linearization needs K = " + std::to_string(lin.K_formula) + " copies per variable");
    res.params.push_back({"K", double(lin.K)});
    res.budget.push_back({"linearization", sign_disagreement_tau(lin.var_diff, d),
                          "Var[q~ - q] = " + std::to_string(lin.var_diff) + " bounds the sign disagreement, O(1) taken as 1"});
    double vq = variance(lin.q_chaos);
    q = lin.q * (1.0 / std::sqrt(vq));
  } else {
    res.budget.push_back({"linearization", 0.0, "input already multilinear"});
  }

  // 2. regularize
  auto reg = regularize_poly(q, tau, opt.regularize);
  res.params.push_back({"tau_inner", reg.tau_inner});
  res.params.push_back({"num", double(reg.num)});
  res.params.push_back({"coeff", reg.coeff});
  res.params.push_back({"max_inner_eigenregularity", reg.max_inner_eigenregularity});
  res.budget.push_back({"decomposition", sign_disagreement_tau(reg.var_gap, d), "Var[p - p~] = " + std::to_string(reg.var_gap)});

  // 3. outer polynomial, rounded
  Composite comp = reg.assembled();
  const int r = comp.args();
  Polynomial phi = round_coefficients(comp.outer, r, d, eps);
  {
    Composite delta = comp;
    delta.outer = phi - comp.outer;
    double vr = variance(expand(delta, reg.n));
    res.budget.push_back({"coefficient_rounding", sign_disagreement_tau(vr, d), "step " + std::to_string(rounding_step(std::max(r, 1), d, eps))});
  }
  res.params.push_back({"r", double(r)});
  double S = 0;
  for (auto& [m, c] : phi.terms())
    if (!m.empty()) S += c * c;
  res.params.push_back({"S", S});

  // mollifier parameters (Omega(1) constants taken as 1)
  const double B = std::max(std::exp(double(d)), std::pow(std::log(std::max(r, 1) * d / eps), d / 2.0));
  const double delta = std::pow(eps / (d * B * std::sqrt(double(std::max(r, 1))) * std::pow(std::max(S, 1e-300), 1.0 / (2 * d))), d);
  const double c = opt.c_override > 0 ? opt.c_override : std::max(r, 1) / (delta * std::sqrt(eps));
  res.params.push_back({"B", B});
  res.params.push_back({"delta", delta});
  res.params.push_back({"c", c});

  // 4. covariance and CLT certificate
  CovarianceMatrix sigma = build_covariance(comp.inner);
  bool nonlinear = false;
  for (auto& A : comp.inner) nonlinear = nonlinear || A.degree() >= 2;
  if (!nonlinear) {
    res.budget.push_back({"clt", 0.0, "all inner polynomials have degree <= 1, so they are exactly jointly Gaussian"});
  } else if (r <= opt.clt_max_inners) {
    auto cert = clt_error_certificate(comp.inner, 4.0 * c * c);
    res.budget.push_back({"clt", cert.bound, "Stein certificate with alpha'' <= 4c^2"});
  } else {
    res.budget.push_back({"clt", 1.0, "certificate not computed for " + std::to_string(r) + " inner polynomials; trivial bound"});
  }

  const bool grid = opt.integrator == Integrator::Grid || opt.mode == Mode::Certified;
  if (grid) {
    CovarianceMatrix sr = round_psd(sigma, opt.covariance_delta);
    if (!sr.psd) res.notes.push_back("covariance psd repair did not converge");
    const double xi = opt.xi > 0 ? opt.xi : eps / 8;
    auto moll = make_mollifier(phi, std::max(r, 1), c, xi);
    GridInfo gi;
    CovarianceMatrix use = sr;
    if (r == 0) use.S = Eigen::MatrixXd::Zero(1, 1);
    res.value = integrate_gaussian(moll, use, eps, opt.max_grid, &gi);
    res.method = "mollified-grid";
    res.params.push_back({"Z", gi.Z});
    res.params.push_back({"W", moll.W});
    res.params.push_back({"cells", gi.cells});
    const double rr = std::max(r, 1);
    res.budget.push_back({"truncation", eps / 4, "mass outside [-Z,Z]^s"});
    res.budget.push_back({"quadrature", eps / 4, "midpoint rule, Lipschitz constant 2c"});
    res.budget.push_back({"kernel", xi, "B_c tail and kernel grid"});
    res.budget.push_back({"mollification_tail", rr * d * std::exp(-std::pow(B, 2.0 / d)), "r d exp(-B^{2/d})"});
    res.budget.push_back({"mollification_anticoncentration", d * B * std::sqrt(rr) * std::pow(std::max(S, 1e-300), 1.0 / (2 * d)) * std::pow(delta, 1.0 / d),
                          "d B sqrt(r) S^{1/2d} delta^{1/d}"});
    res.budget.push_back({"mollification_boundary", rr * rr / (c * c * delta * delta), "r^2/(c^2 delta^2)"});
    res.budget.push_back({"covariance_rounding", 2 * c * rr * (opt.covariance_delta + 3 * std::sqrt(opt.covariance_delta * sigma.S.operatorNorm())),
                          "2c r (delta + 3 sqrt(delta ||Sigma||))"});
  } else {
    Eigen::MatrixXd L = whiten(sigma.S);
    if (r == 0) L = Eigen::MatrixXd(0, 0);
    auto si = integrate_sharp(phi, L, opt.qmc_points, opt.qmc_shifts, opt.seed);
    res.value = si.value;
    res.method = si.method;
    res.params.push_back({"Z", 0.0});
    res.params.push_back({"W", 0.0});
    res.params.push_back({"whitened_dims", double(si.dims)});
    res.params.push_back({"qmc_points", double(si.points)});
    res.params.push_back({"seed", double(opt.seed)});
    res.budget.push_back({"quadrature", si.error, si.method == "conditional-qmc" ? "3 standard errors over seeded random shifts" : "exact"});
    res.notes.push_back("sharp indicator integrated directly; mollifier parameters reported only");
  }
  res.value = std::clamp(res.value, 0.0, 1.0);
  return res;
}

}  // namespace ptf
