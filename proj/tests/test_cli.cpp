#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "sonine/cli.hpp"
#include "sonine/error.hpp"

using namespace sonine;
using namespace sonine::cli;
namespace fs = std::filesystem;

namespace {

const std::string kConfigs = SONINE_CONFIG_DIR;

struct Result {
  int code;
  nlohmann::json summary;
  std::string out;
  std::string err;
};

Result invoke(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run(args, out, err);
  Result r{code, nullptr, out.str(), err.str()};
  if (!r.out.empty()) r.summary = nlohmann::json::parse(r.out);
  return r;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("sonine_cli_test_" + name);
  fs::remove_all(p);
  return p;
}

fs::path write_config(const std::string& name, const std::string& text) {
  const fs::path dir = scratch("cfg");
  fs::create_directories(dir);
  const fs::path p = dir / name;
  std::ofstream(p) << text;
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("config parsing") {
  const RunConfig c = parse_config(R"(# comment
[kernel]
preset = abel-linear   # trailing comment
b = 2
normalization = gamma
[weight]
w = "1 + s*t"
[forcing]
f = "t"   # comment after a quoted value
exact = "t"
c = 0.5
[mesh]
N = 32
grading = 3
[quadrature]
jacobi_n = 24
[solver]
strategy = first-kind-g
)");
  CHECK(c.alpha == "0.5+0.2*t");
  CHECK(c.horizon == 2.0);
  CHECK(*c.normalization == "gamma");
  CHECK(c.w == "1 + s*t");
  CHECK(c.has_forcing);
  CHECK(*c.f == "t");
  CHECK(c.c == 0.5);
  CHECK(c.N == 32);
  CHECK(*c.grading == 3.0);
  CHECK(c.jacobi_n == 24);
  CHECK(c.strategy == "first-kind-g");
  CHECK(c.tol_csc == 1e-12);
}

TEST_CASE("config errors") {
  CHECK_THROWS_AS(parse_config("[kernel]\npreset = abel-const\nfoo = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[nope]\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[weight]\nw = \"1\"\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[kernel]\npreset = abel-const\nalpha = \"0.5\"\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[kernel]\npreset = nope\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[kernel]\npreset = abel-const\n[mesh]\nN = -3\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[kernel]\npreset = abel-const\n[mesh]\nN = 1.5\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[kernel]\npreset = abel-const\nb = 0\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[kernel]\npreset = abel-const\npreset = abel-sin\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("preset = abel-const\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[kernel]\nalpha = \"0.5\n"), ConfigError);
  try {
    (void)parse_config("[kernel]\nalpha = \"0.5 + *t\"\n");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.offset() == 6);
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
}

TEST_CASE("verify") {
  const fs::path out = scratch("verify");
  const Result ok = invoke({"verify", "--config", kConfigs + "/abel-const-verify.ini", "--out", out.string()});
  CHECK(ok.code == kExitOk);
  CHECK(ok.summary["command"] == "verify");
  CHECK(ok.summary["status"] == "pass");
  CHECK(ok.summary["max_residual"].get<double>() <= 1e-12);
  CHECK(ok.err.find("CSC max_residual") != std::string::npos);
  CHECK(fs::exists(out / "verify_csc.csv"));
  CHECK(fs::exists(out / "verify_wsc1.csv"));
  CHECK(fs::exists(out / "verify_wsc2.csv"));
  // stdout carries only the summary line
  CHECK(std::count(ok.out.begin(), ok.out.end(), '\n') == 1);

  const Result bad = invoke({"verify", "--config", kConfigs + "/weight-violates-i.ini", "--out", out.string()});
  CHECK(bad.code == kExitVerify);
  CHECK(bad.summary["status"] == "fail");
  CHECK(bad.summary.dump().find("(i)") != std::string::npos);

  const Result variable = invoke({"verify", "--config", kConfigs + "/bilinear-verify.ini", "--out", out.string()});
  CHECK(variable.code == kExitOk);
  CHECK(variable.err.find("WSC2 skipped") != std::string::npos);
}

TEST_CASE("config and usage errors exit 2") {
  const fs::path bad = write_config("bad.ini", "[kernel]\nalpha = \"0.5 + *t\"\n");
  const Result r = invoke({"verify", "--config", bad.string(), "--out", scratch("x").string()});
  CHECK(r.code == kExitConfig);
  CHECK(r.summary["status"] == "config_error");
  CHECK(r.err.find("offset 6") != std::string::npos);

  const fs::path nof = write_config("nof.ini", "[kernel]\npreset = abel-const\n");
  CHECK(invoke({"solve", "--kind", "vie1", "--config", nof.string()}).code == kExitConfig);
  CHECK(invoke({"solve", "--kind", "bogus", "--config", nof.string()}).code == kExitConfig);
  CHECK(invoke({"solve", "--config", nof.string()}).code == kExitConfig);
  CHECK(invoke({"verify", "--config", "/does/not/exist.ini"}).code == kExitConfig);
  CHECK(invoke({}).code == kExitConfig);

  const fs::path noexact = write_config("noexact.ini", "[kernel]\npreset = abel-const\n[forcing]\nf = \"t\"\n");
  CHECK(invoke({"converge", "--kind", "vie1", "--config", noexact.string(), "--out", scratch("y").string()}).code ==
        kExitConfig);

  const fs::path uni =
      write_config("uni.ini", "[kernel]\npreset = abel-const\n[forcing]\nf = \"0\"\nc = 1\n[mesh]\nuniform = true\n");
  const Result u = invoke({"solve", "--kind", "ode", "--config", uni.string(), "--out", scratch("z").string()});
  CHECK(u.code == kExitConfig);
  CHECK(u.err.find("graded") != std::string::npos);

  const fs::path plainpde = write_config("plainpde.ini",
                                         "[kernel]\npreset = abel-const\nnormalization = plain\n[forcing]\nf = \"0\"\n");
  CHECK(invoke({"solve", "--kind", "pde", "--config", plainpde.string(), "--out", scratch("w").string()}).code ==
        kExitConfig);
}

TEST_CASE("numerical failures exit 4") {
  // w(t,t) > 0 but w(0,t) has a pole inside the horizon
  const fs::path cfg = write_config(
      "pole.ini", "[kernel]\npreset = abel-const\n[weight]\nw = \"1 + s*t\"\n[forcing]\nf = \"1/(t-0.5)^2\"\n[mesh]\nN = 8\nuniform = true\n");
  const Result r = invoke({"solve", "--kind", "vie1", "--config", cfg.string(), "--out", scratch("n").string()});
  CHECK(r.code == kExitNumerical);
  CHECK(r.summary["status"] == "numerical_failure");
}

TEST_CASE("solve: nonlocal ODE with the Gamma normalization") {
  const fs::path out = scratch("ode");
  const Result r = invoke({"solve", "--kind", "ode", "--config", kConfigs + "/ode-gamma.ini", "--out", out.string()});
  CHECK(r.code == kExitOk);
  CHECK(r.summary["status"] == "ok");
  CHECK(r.summary["error"].get<double>() <= 1e-2);
  CHECK(r.summary["error_norm"] == "max");
  const std::string sol = slurp(out / "solution.csv");
  CHECK(sol.rfind("t,u,residual\n", 0) == 0);
  CHECK(slurp(out / "residual.csv").rfind("t,residual\n", 0) == 0);
}

TEST_CASE("solve: singular solution reports an L1 error") {
  const Result r =
      invoke({"solve", "--kind", "ode", "--config", kConfigs + "/ode-singular.ini", "--out", scratch("os").string()});
  CHECK(r.code == kExitOk);
  CHECK(r.summary["error_norm"] == "l1_relative");
  CHECK(r.summary["error"].get<double>() <= 1e-2);
}

TEST_CASE("solve: pde") {
  const fs::path out = scratch("pde");
  const Result r =
      invoke({"solve", "--kind", "pde", "--config", kConfigs + "/pde-manufactured.ini", "--out", out.string()});
  CHECK(r.code == kExitOk);
  REQUIRE(r.summary.contains("error"));
  CHECK(r.summary["error"].get<double>() <= 5e-2);
  CHECK(r.summary["M"] == 32);
  CHECK(slurp(out / "solution.csv").rfind("x,t,u\n", 0) == 0);
}

TEST_CASE("converge") {
  SUBCASE("manufactured weighted problem") {
    const fs::path out = scratch("conv");
    const Result r = invoke({"converge", "--kind", "vie1", "--config", kConfigs + "/vie1-manufactured.ini",
                             "--doublings", "2", "--out", out.string()});
    CHECK(r.code == kExitOk);
    for (const auto& o : r.summary["orders"]) CHECK(o.get<double>() >= 0.8);
    const std::string csv = slurp(out / "converge.csv");
    CHECK(csv.rfind("N,error,order\n64,", 0) == 0);
  }
  SUBCASE("exactly representable solution") {
    const Result r = invoke({"converge", "--kind", "vie1", "--config", kConfigs + "/vie1-linear.ini", "--doublings",
                             "2", "--out", scratch("lin").string()});
    CHECK(r.code == kExitOk);
    CHECK(r.summary["order"] == "exact");
    CHECK(r.summary["error"].get<double>() < 1e-12);
  }
  SUBCASE("no doublings") {
    const fs::path out = scratch("zero");
    const Result r = invoke({"converge", "--kind", "vie1", "--config", kConfigs + "/vie1-linear.ini", "--doublings",
                             "0", "--out", out.string()});
    CHECK(r.code == kExitOk);
    CHECK(r.summary["order"].is_null());
    const std::string csv = slurp(out / "converge.csv");
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 2);
  }
}

TEST_CASE("reruns are byte identical") {
  const fs::path a = scratch("rerun_a"), b = scratch("rerun_b");
  for (const auto& dir : {a, b}) {
    invoke({"solve", "--kind", "vie1", "--config", kConfigs + "/vie1-manufactured.ini", "--out", dir.string()});
    invoke({"converge", "--kind", "pde", "--config", kConfigs + "/pde-manufactured.ini", "--doublings", "1", "--out",
            dir.string()});
  }
  for (const char* f : {"solution.csv", "residual.csv", "converge.csv"}) {
    CAPTURE(f);
    CHECK(slurp(a / f) == slurp(b / f));
    CHECK_FALSE(slurp(a / f).empty());
  }
}
