#include <gtest/gtest.h>

#include <json.hpp>

#include <array>
#include <cstdio>
#include <fstream>
#include <sys/wait.h>

namespace {

struct Run {
  int code = -1;
  std::string out;
};

Run run(const std::string& args) {
  Run r;
  std::string cmd = std::string(PTF_CLI) + " " + args + " 2>/dev/null";
  FILE* f = popen(cmd.c_str(), "r");
  std::array<char, 4096> buf;
  std::size_t n;
  while ((n = fread(buf.data(), 1, buf.size(), f)) > 0) r.out.append(buf.data(), n);
  int st = pclose(f);
  r.code = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  return r;
}

std::string corpus(const std::string& rel) { return std::string(PTF_CORPUS) + "/" + rel; }

std::string temp_file(const std::string& name, const std::string& text) {
  std::string path = ::testing::TempDir() + name;
  std::ofstream(path) << text;
  return path;
}

}  // namespace

TEST(Cli, CountGaussianReport) {
  auto r = run("count-gaussian --eps 0.1 " + corpus("gaussian/g01_x1.poly"));
  ASSERT_EQ(r.code, 0);
  auto j = nlohmann::json::parse(r.out);
  EXPECT_NEAR(j["value"].get<double>(), 0.5, 0.1);
  EXPECT_TRUE(j["budget"].is_array());
  EXPECT_EQ(j["config"]["eps"].get<double>(), 0.1);
  EXPECT_EQ(j["config"]["mode"], "practical");
}

TEST(Cli, ReportsAreStableAcrossRuns) {
  auto a = run("count-gaussian --seed 3 " + corpus("gaussian/g06_product_shift.poly"));
  auto b = run("count-gaussian --seed 3 " + corpus("gaussian/g06_product_shift.poly"));
  ASSERT_EQ(a.code, 0);
  EXPECT_EQ(a.out, b.out);
}

TEST(Cli, CountBooleanHasTreeStats) {
  auto r = run("count-boolean " + corpus("boolean/b02_pairs3.poly"));
  ASSERT_EQ(r.code, 0);
  auto j = nlohmann::json::parse(r.out);
  EXPECT_NEAR(j["value"].get<double>(), 0.25, 0.05);
  for (auto key : {"leaves", "regular", "decided", "fail", "max_depth"}) EXPECT_TRUE(j["tree"].contains(key)) << key;
}

TEST(Cli, EigregAndDecompose) {
  auto e = run("eigreg " + corpus("gaussian/g03_two_products.poly"));
  ASSERT_EQ(e.code, 0);
  auto j = nlohmann::json::parse(e.out);
  EXPECT_NEAR(j["levels"][0]["lambda_max"].get<double>(), 0.5, 1e-9);
  auto d = run("decompose " + corpus("gaussian/g04_triple.poly"));
  ASSERT_EQ(d.code, 0);
  EXPECT_TRUE(nlohmann::json::parse(d.out).contains("var_gap"));
}

TEST(Cli, CltBound) {
  auto f1 = temp_file("clt1.poly", "1 1 2\n");
  auto f2 = temp_file("clt2.poly", "1 3 4\n");
  auto r = run("clt-bound --alpha-dd 1 " + f1 + " " + f2);
  ASSERT_EQ(r.code, 0);
  auto j = nlohmann::json::parse(r.out);
  EXPECT_GE(j["bound"].get<double>(), 0.0);
  EXPECT_EQ(j["r"].get<int>(), 2);
}

TEST(Cli, Moment) {
  auto r = run("moment --k 1 --eps 0.05 " + corpus("boolean/b01_sum3.poly"));
  ASSERT_EQ(r.code, 0);
  EXPECT_NEAR(nlohmann::json::parse(r.out)["value"].get<double>(), 1.5, 0.075);
  auto x = run("moment --k 2 --exact " + corpus("boolean/b01_sum3.poly"));
  EXPECT_DOUBLE_EQ(nlohmann::json::parse(x.out)["value"].get<double>(), 3.0);
}

TEST(Cli, VerifyBooleanCorpus) {
  auto r = run("verify --measure boolean " + std::string(PTF_CORPUS) + "/boolean");
  ASSERT_EQ(r.code, 0);
  auto j = nlohmann::json::parse(r.out);
  EXPECT_TRUE(j["all_pass"].get<bool>());
  EXPECT_EQ(j["results"].size(), 30u);
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(run("no-such-command").code, 2);
  EXPECT_EQ(run("count-gaussian --bogus-flag 1 " + corpus("gaussian/g01_x1.poly")).code, 2);
  EXPECT_EQ(run("count-gaussian " + temp_file("bad.poly", "1 0\n")).code, 2);
  auto capped = run("count-gaussian --mode certified " + corpus("gaussian/g02_x1sq_minus_1.poly"));
  EXPECT_EQ(capped.code, 3);
  EXPECT_EQ(nlohmann::json::parse(capped.out)["error"], "cap");
  EXPECT_EQ(run("--help").code, 0);
}
