#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#ifndef CDH_CLI_PATH
#error "CDH_CLI_PATH must name the cdh_cli executable"
#endif

namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

struct CliRun {
  int code = -1;
  std::string out, err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch() {
  fs::path d = fs::temp_directory_path() / ("cdh_cli_test_" + std::to_string(::getpid()));
  fs::create_directories(d);
  return d;
}

CliRun run(const std::string& args) {
  const fs::path d = scratch();
  const fs::path o = d / "stdout", e = d / "stderr";
  const std::string cmd = std::string("'") + CDH_CLI_PATH + "' " + args + " >'" + o.string() + "' 2>'" + e.string() + "'";
  const int st = std::system(cmd.c_str());
  CliRun r;
  r.code = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  r.out = slurp(o);
  r.err = slurp(e);
  return r;
}

json strip_times(json j) {
  for (auto& c : j["checks"]) c.erase("wall_time_ms");
  return j;
}

fs::path write_file(const std::string& name, const std::string& text) {
  fs::path p = scratch() / name;
  std::ofstream(p) << text;
  return p;
}

}  // namespace

TEST(Cli, ListSuites) {
  CliRun r = run("list-suites");
  EXPECT_EQ(r.code, 0);
  for (const char* s : {"algebra", "forms", "cauchy", "mb", "leray", "dbar", "psh", "maxmod"}) EXPECT_NE(r.out.find(s), std::string::npos) << s;
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("frobnicate").code, 2);
  CliRun r = run("verify nope");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("unknown suite"), std::string::npos);
  EXPECT_EQ(run("verify psh --format xml").code, 2);
  EXPECT_EQ(run("verify mb --p 3").code, 2);
}

TEST(Cli, VerifyAlgebraReportShape) {
  CliRun r = run("verify algebra --seed 3");
  ASSERT_EQ(r.code, 0) << r.err;
  json j = json::parse(r.out);
  EXPECT_EQ(j["suite"], "algebra");
  EXPECT_TRUE(j["pass"].get<bool>());
  EXPECT_EQ(j["config"]["seed"], 3);
  std::vector<std::string> ids;
  for (const auto& c : j["checks"]) {
    for (const char* k : {"id", "paper_ref", "inputs", "result", "golden", "abs_error", "tol", "pass", "nodes", "seed", "wall_time_ms"})
      EXPECT_TRUE(c.contains(k)) << k;
    EXPECT_FALSE(c["paper_ref"].get<std::string>().empty());
    ids.push_back(c["id"]);
  }
  EXPECT_GE(ids.size(), 8u);
  EXPECT_TRUE(std::is_sorted(ids.begin(), ids.end()));
}

TEST(Cli, DeterministicRerun) {
  CliRun a = run("verify algebra --seed 11"), b = run("verify algebra --seed 11"), c = run("verify algebra --seed 12");
  ASSERT_EQ(a.code, 0);
  EXPECT_EQ(strip_times(json::parse(a.out)).dump(), strip_times(json::parse(b.out)).dump());
  EXPECT_NE(strip_times(json::parse(a.out)).dump(), strip_times(json::parse(c.out)).dump());
}

TEST(Cli, FormsSuiteReportsExactFailures) {
  CliRun r = run("verify forms");
  EXPECT_EQ(r.code, 1);
  json j = json::parse(r.out);
  std::vector<std::string> failed;
  for (const auto& c : j["checks"])
    if (!c["pass"].get<bool>()) failed.push_back(c["id"]);
  const std::vector<std::string> expect{"forms.kappa_substitution.p3.v0", "forms.kappa_substitution.p3.v1", "forms.kappa_substitution.p3.v2",
                                        "forms.kappa_substitution.p3.v3", "forms.w_volume.p3"};
  EXPECT_EQ(failed, expect);
  for (const auto& c : j["checks"])
    if (c["id"] == "forms.w_volume.p3") {
      EXPECT_EQ(c["inputs"]["exact_volume_coefficient"], "47/135");
    }
  EXPECT_NE(r.err.find("[w-volume-element]"), std::string::npos);
}

TEST(Cli, ConfigPrecedence) {
  fs::path cfg = write_file("cfg.json", R"({"seed": 5, "nodes": 7, "p": 3})");
  CliRun a = run("verify psh --config '" + cfg.string() + "'");
  ASSERT_EQ(a.code, 0) << a.err;
  json ja = json::parse(a.out);
  EXPECT_EQ(ja["config"]["seed"], 5);
  EXPECT_EQ(ja["config"]["nodes"], 7);
  EXPECT_EQ(ja["config"]["p"], 3);
  CliRun b = run("verify psh --seed 9 --config '" + cfg.string() + "'");
  json jb = json::parse(b.out);
  EXPECT_EQ(jb["config"]["seed"], 9);
  EXPECT_EQ(jb["config"]["p"], 3);
}

TEST(Cli, MalformedConfigNamesLineOrField) {
  CliRun a = run("verify algebra --config '" + write_file("a.json", "{\"seed\": 1,\n \"nodes\": }").string() + "'");
  EXPECT_EQ(a.code, 2);
  EXPECT_NE(a.err.find("line 2"), std::string::npos) << a.err;
  CliRun b = run("verify algebra --config '" + write_file("b.json", R"({"sed": 1})").string() + "'");
  EXPECT_EQ(b.code, 2);
  EXPECT_NE(b.err.find("'sed'"), std::string::npos) << b.err;
  CliRun c = run("verify algebra --config '" + write_file("c.json", R"({"nodes": "many"})").string() + "'");
  EXPECT_EQ(c.code, 2);
  EXPECT_NE(c.err.find("'nodes'"), std::string::npos) << c.err;
  EXPECT_EQ(run("verify algebra --config /nonexistent/cfg.json").code, 2);
}

TEST(Cli, OutputFilesAndCsv) {
  fs::path out = scratch() / "psh_report.json";
  CliRun r = run("verify psh --format csv --out '" + out.string() + "'");
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(r.out.rfind("id,paper_ref,pass", 0), 0u);
  json j = json::parse(slurp(out));
  EXPECT_EQ(j["checks"].size(), 3u);
  EXPECT_EQ(slurp(scratch() / "psh_report.csv"), r.out);
}

TEST(Cli, EvalKernelTheta) {
  CliRun r = run("eval-kernel --kind theta --zeta 1,0,0,0 --z 0,0,0,0");
  ASSERT_EQ(r.code, 0) << r.err;
  json j = json::parse(r.out);
  ASSERT_FALSE(j["form"]["terms"].empty());
  for (const auto& t : j["form"]["terms"]) {
    EXPECT_EQ(t["dx"].size(), 3u);
    for (double c : t["coeff"].get<std::vector<double>>()) EXPECT_TRUE(std::isfinite(c));
  }
  CliRun chk = run("eval-kernel --kind theta_check --zeta 1,0,0,0 --z 0,0,0,0");
  EXPECT_EQ(json::parse(chk.out)["form"]["dim"], 8);
}

TEST(Cli, EvalKernelSingularInput) {
  CliRun r = run("eval-kernel --kind theta --zeta 0.5,0,0,0 --z 0.5,0,0,0");
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.err.find("singular"), std::string::npos);
  EXPECT_EQ(run("eval-kernel --zeta 1,0,0 --z 0,0,0,0").code, 2);
}

TEST(Cli, EvalKernelLerayComparison) {
  CliRun r = run("eval-kernel --kind leray_phi --psi difference --compare --zeta 0.6,0.2,-0.1,0.3 --z 0.1,0,0.2,0");
  ASSERT_EQ(r.code, 0) << r.err;
  json j = json::parse(r.out);
  EXPECT_LT(j["max_abs_diff"].get<double>(), 1e-9);
  EXPECT_EQ(j["form"]["terms"].size(), j["theta"]["terms"].size());
  CliRun v = run("eval-kernel --kind leray_phi --psi v_rho --compare --zeta 0.6,0.2,-0.1,0.3 --z 0.1,0,0.2,0");
  EXPECT_GT(json::parse(v.out)["max_abs_diff"].get<double>(), 1e-6);
}

TEST(Cli, SolveInstances) {
  CliRun z = run("solve --rhs zero --point 0.1,0,0,0 --point 0,0.2,0,0 --nodes 3");
  ASSERT_EQ(z.code, 0) << z.err;
  json j = json::parse(z.out);
  EXPECT_EQ(j["samples"].size(), 2u);
  for (const auto& s : j["samples"])
    for (double c : s["u"].get<std::vector<double>>()) EXPECT_EQ(c, 0.0);
  CliRun n3 = run("solve --n 3");
  EXPECT_EQ(n3.code, 2);
  EXPECT_NE(n3.err.find("n = 3"), std::string::npos);
  EXPECT_EQ(run("solve --n 2").code, 2);
  EXPECT_EQ(run("solve --rhs '(mul z' --point 0,0,0,0").code, 2);
}
