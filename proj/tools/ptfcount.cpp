#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "ptfcount/boolean_count.hpp"
#include "ptfcount/gaussian_count.hpp"
#include "ptfcount/io.hpp"
#include "ptfcount/moments.hpp"
#include "ptfcount/oracles.hpp"
#include "ptfcount/regularize.hpp"

using json = nlohmann::ordered_json;
using namespace ptf;

namespace {

struct Common {
  double eps = 0.05;
  double tau = 0.0;
  std::string mode = "practical";
  std::uint64_t seed = 1;
  long long max_k = 0;
  double max_grid = 1e7;
  std::string schedule;
  std::string integrator = "auto";

  Mode mode_enum() const { return mode == "certified" ? Mode::Certified : Mode::Practical; }

  json config() const {
    return {{"eps", eps}, {"tau", tau}, {"mode", mode}, {"seed", seed}, {"max_k", max_k},
            {"max_grid", max_grid}, {"schedule", schedule}, {"integrator", integrator}, {"threads", thread_count()}};
  }
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--eps", c.eps, "target additive error")->check(CLI::Range(1e-12, 0.999999));
  app->add_option("--tau", c.tau, "regularity parameter, 0 = default for the mode")->check(CLI::NonNegativeNumber);
  app->add_option("--mode", c.mode, "certified or practical")->check(CLI::IsMember({"certified", "practical"}));
  app->add_option("--seed", c.seed, "seed for randomized integration");
  app->add_option("--max-k", c.max_k, "cap on linearization copies per variable, 0 = by degree")->check(CLI::NonNegativeNumber);
  app->add_option("--max-grid", c.max_grid, "cap on grid cells for mollified integration")->check(CLI::PositiveNumber);
  app->add_option("--schedule", c.schedule, "file with an explicit eigenregularity schedule")->check(CLI::ExistingFile);
  app->add_option("--integrator", c.integrator, "auto, sharp or grid")->check(CLI::IsMember({"auto", "sharp", "grid"}));
}

std::vector<double> read_schedule(const std::string& path) {
  std::ifstream f(path);
  std::vector<double> out;
  std::string tok;
  while (f >> tok) {
    if (tok[0] == '#') {
      std::getline(f, tok);
      continue;
    }
    try {
      out.push_back(std::stod(tok));
    } catch (const std::exception&) {
      throw InputError("schedule " + path + ": bad value \"" + tok + "\"");
    }
  }
  if (out.empty()) throw InputError("schedule " + path + " is empty");
  return out;
}

GaussianOptions gaussian_options(const Common& c) {
  GaussianOptions o;
  o.mode = c.mode_enum();
  o.tau = c.tau;
  o.max_k = c.max_k;
  o.seed = c.seed;
  o.max_grid = c.max_grid;
  o.integrator = c.integrator == "grid" ? Integrator::Grid : c.integrator == "sharp" ? Integrator::Sharp : Integrator::Auto;
  o.regularize.many.mode = o.mode;
  if (!c.schedule.empty()) o.regularize.many.user_schedule = read_schedule(c.schedule);
  return o;
}

json budget_json(const CountResult& r) {
  json b = json::array();
  for (auto& it : r.budget) b.push_back({{"name", it.name}, {"value", it.value}, {"note", it.note}});
  return b;
}

json count_json(const CountResult& r) {
  json params = json::object();
  for (auto& [k, v] : r.params) params[k] = v;
  return {{"value", r.value}, {"budget", budget_json(r)}, {"total_budget", r.total_budget()}, {"mode", mode_name(r.mode)},
          {"method", r.method}, {"params", params}, {"notes", r.notes}};
}

json tree_json(const TreeStats& t) {
  return {{"leaves", t.leaves}, {"regular", t.regular}, {"decided", t.decided}, {"fail", t.fail}, {"max_depth", t.max_depth},
          {"regular_mass", t.regular_mass}, {"fail_mass", t.fail_mass}, {"depth_bound", t.depth_bound}};
}

BooleanOptions boolean_options(const Common& c) {
  BooleanOptions o;
  o.mode = c.mode_enum();
  o.tau = c.tau;
  o.gaussian = gaussian_options(c);
  o.gaussian.tau = 0;
  return o;
}

Polynomial normalized(const Polynomial& p, double& var) {
  var = variance(to_chaos(p));
  if (var <= 0) throw InputError("polynomial is constant");
  return (p - Polynomial::constant(p.constant_term())) * (1 / std::sqrt(var));
}

json cmd_eigreg(const Polynomial& p) {
  auto dec = to_chaos(p);
  const double var = variance(dec);
  json levels = json::array();
  for (std::size_t q = 1; q < dec.levels.size(); ++q) {
    const auto& f = dec.levels[q];
    if (f.empty()) continue;
    auto e = lambda_max(f);
    const double vq = factorial(int(q)) * f.norm2();
    levels.push_back({{"q", q}, {"norm", std::sqrt(f.norm2())}, {"variance", vq}, {"lambda_max", e.lambda_max}, {"split", e.split},
                      {"eigenregularity", vq > 0 ? e.lambda_max / std::sqrt(vq) : 0.0}});
  }
  return {{"mean", mean(dec)}, {"variance", var}, {"levels", levels}, {"eigenregularity", eigenregularity(dec)}};
}

json cmd_decompose(const Polynomial& p, const Common& c) {
  double var;
  Polynomial q = normalized(p, var);
  json out = {{"variance", var}};
  if (!q.is_multilinear()) {
    const int d = q.degree();
    LinearizeOptions lo;
    lo.k_override = c.max_k > 0 ? c.max_k : practical_k(d);
    const double tau = c.tau > 0 ? c.tau : c.eps;
    if (c.mode_enum() == Mode::Certified && linearize_k(d, tau) > double(lo.k_override))
      throw CapError("decompose: certified linearization needs K = " + std::to_string(linearize_k(d, tau)));
    auto lin = linearize(q, tau, lo);
    out["linearized"] = {{"K", lin.K}, {"var_diff", lin.var_diff}, {"var_bound", lin.var_bound}};
    q = lin.q * (1 / std::sqrt(variance(lin.q_chaos)));
  }
  RegularizeOptions ro;
  ro.many.mode = c.mode_enum();
  if (!c.schedule.empty()) ro.many.user_schedule = read_schedule(c.schedule);
  auto r = regularize_poly(q, c.tau > 0 ? c.tau : c.eps, ro);
  json levels = json::array();
  for (std::size_t l = 1; l < r.h.size(); ++l)
    levels.push_back({{"q", l}, {"scale", r.scale[l]}, {"m", r.m[l]}, {"inner_eigenregularity", r.inner_eigenregularity[l]}});
  json many = json::array();
  for (auto& lv : r.report.levels)
    many.push_back({{"degree", lv.degree}, {"k", lv.k}, {"t", lv.t}, {"eps", lv.eps}, {"triples", lv.triples},
                    {"max_reg_eigenregularity", lv.max_reg_eigenregularity}, {"schedule_next", lv.schedule_next}, {"schedule", lv.schedule_note}});
  out.update({{"n", r.n}, {"d", r.d}, {"mean", r.mean}, {"levels", levels}, {"num", r.num}, {"coeff", r.coeff},
              {"max_inner_eigenregularity", r.max_inner_eigenregularity}, {"var_gap", r.var_gap}, {"gap_bound", r.gap_bound},
              {"tau", r.tau}, {"tau_inner", r.tau_inner}, {"mode", mode_name(r.mode)}, {"report", many}});
  return out;
}

json cmd_clt(const std::vector<std::string>& files, double alpha_dd) {
  std::vector<ChaosDecomposition> Fs;
  json centred = json::array();
  for (auto& f : files) {
    auto dec = to_chaos(read_polynomial_file(f));
    centred.push_back(mean(dec));
    dec.levels[0] = SymTensor(0, dec.n);
    Fs.push_back(dec);
  }
  auto cert = clt_error_certificate(Fs, alpha_dd);
  auto mat = [](const Eigen::MatrixXd& M) {
    json a = json::array();
    for (int i = 0; i < M.rows(); ++i) {
      json row = json::array();
      for (int j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
      a.push_back(row);
    }
    return a;
  };
  return {{"r", cert.r}, {"alpha_dd", alpha_dd}, {"removed_means", centred}, {"covariance", mat(cert.C)}, {"var_y", mat(cert.varY)},
          {"bound", cert.bound}};
}

json cmd_moment(const Polynomial& p, int k, const Common& c, bool exact) {
  if (exact) return {{"k", k}, {"exact", true}, {"value", exact_raw_moment(p, k)}};
  MomentOptions mo;
  mo.boolean = boolean_options(c);
  mo.boolean.tau = 0;
  auto r = absolute_moment(p, k, c.eps, mo);
  return {{"k", k}, {"exact", false}, {"value", r.value}, {"norm", r.norm}, {"c_lower", r.c_lower},
          {"c_from_exact_fourth_moment", r.c_from_exact_m4}, {"M", r.M}, {"tail", r.tail}, {"breakpoints", r.breakpoints},
          {"additive_budget", r.additive_budget}, {"relative_budget", r.relative_budget}, {"notes", r.notes}};
}

json cmd_verify(const std::string& dir, const std::string& measure, const Common& c, std::uint64_t samples, bool& all_pass) {
  std::vector<std::filesystem::path> files;
  for (auto& e : std::filesystem::directory_iterator(dir))
    if (e.path().extension() == ".poly") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw InputError("verify: no .poly files in " + dir);
  json rows = json::array();
  all_pass = true;
  for (auto& f : files) {
    auto p = read_polynomial_file(f.string());
    json row = {{"file", f.filename().string()}};
    double engine, oracle_v, tol;
    if (measure == "boolean") {
      engine = count_boolean(p, c.eps, boolean_options(c)).value;
      oracle_v = oracle::enumerate_boolean(p).value();
      tol = c.eps;
    } else {
      engine = count_gaussian(p, c.eps, gaussian_options(c)).value;
      auto mc = oracle::mc_gaussian(p, samples, c.seed);
      oracle_v = mc.estimate;
      tol = c.eps + 4 * mc.stderr_;
      row["stderr"] = mc.stderr_;
    }
    const bool pass = std::abs(engine - oracle_v) <= tol;
    all_pass = all_pass && pass;
    row.update({{"engine", engine}, {"oracle", oracle_v}, {"diff", engine - oracle_v}, {"tolerance", tol}, {"pass", pass}});
    rows.push_back(row);
  }
  return {{"measure", measure}, {"samples", measure == "boolean" ? 0 : samples}, {"results", rows}, {"all_pass", all_pass}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deterministic approximate counting for polynomial threshold functions"};
  app.require_subcommand(1);
  Common c;
  std::string file, dir, measure = "gaussian";
  std::vector<std::string> files;
  double alpha_dd = 1.0;
  int k = 1;
  bool exact = false;
  std::uint64_t samples = 1'000'000;

  auto* cg = app.add_subcommand("count-gaussian", "Pr[p(x) >= 0] for x ~ N(0,1)^n");
  auto* cb = app.add_subcommand("count-boolean", "Pr[p(x) >= 0] for x uniform on {-1,1}^n");
  auto* de = app.add_subcommand("decompose", "regularize p into eigenregular inner polynomials");
  auto* eg = app.add_subcommand("eigreg", "per-chaos-level lambda_max and eigenregularity");
  auto* cl = app.add_subcommand("clt-bound", "CLT certificate for a tuple of polynomials");
  auto* mo = app.add_subcommand("moment", "k-th absolute moment over {-1,1}^n");
  auto* ve = app.add_subcommand("verify", "compare engines against oracles over a corpus directory");
  for (auto* s : {cg, cb, de, eg, mo}) s->add_option("file", file, "polynomial file")->required()->check(CLI::ExistingFile);
  for (auto* s : {cg, cb, de, mo, ve}) add_common(s, c);
  cl->add_option("files", files, "polynomial files")->required()->check(CLI::ExistingFile);
  cl->add_option("--alpha-dd", alpha_dd, "bound on the second derivatives of the test function")->check(CLI::NonNegativeNumber);
  mo->add_option("--k", k, "moment order")->check(CLI::PositiveNumber);
  mo->add_flag("--exact", exact, "exact raw moment by expansion");
  ve->add_option("dir", dir, "corpus directory")->required()->check(CLI::ExistingDirectory);
  ve->add_option("--measure", measure, "gaussian or boolean")->check(CLI::IsMember({"gaussian", "boolean"}));
  ve->add_option("--samples", samples, "Monte Carlo samples for the Gaussian oracle")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  json out;
  int rc = 0;
  try {
    if (cg->parsed()) {
      out = count_json(count_gaussian(read_polynomial_file(file), c.eps, gaussian_options(c)));
    } else if (cb->parsed()) {
      auto r = count_boolean(read_polynomial_file(file), c.eps, boolean_options(c));
      out = count_json(r);
      out["tree"] = tree_json(r.tree);
    } else if (de->parsed()) {
      out = cmd_decompose(read_polynomial_file(file), c);
    } else if (eg->parsed()) {
      out = cmd_eigreg(read_polynomial_file(file));
    } else if (cl->parsed()) {
      out = cmd_clt(files, alpha_dd);
    } else if (mo->parsed()) {
      out = cmd_moment(read_polynomial_file(file), k, c, exact);
    } else if (ve->parsed()) {
      bool ok = true;
      out = cmd_verify(dir, measure, c, samples, ok);
      rc = ok ? 0 : 1;
    }
  } catch (const InputError& e) {
    std::cout << json{{"error", "input"}, {"message", e.what()}}.dump(2) << "\n";
    return 2;
  } catch (const CapError& e) {
    std::cout << json{{"error", "cap"}, {"message", e.what()}}.dump(2) << "\n";
    return 3;
  }
  json report = {{"command", app.get_subcommands().front()->get_name()}};
  if (!file.empty()) report["file"] = file;
  report["config"] = c.config();
  report.update(out);
  std::cout << report.dump(2) << "\n";
  return rc;
}
