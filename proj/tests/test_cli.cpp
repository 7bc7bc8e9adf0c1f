#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <set>
#include <string>
#include <sys/wait.h>

#include "doctest.h"
#include "job.hpp"
#include "opeflow/specfun.hpp"
#include "opeflow/wick.hpp"

using namespace ope;
using namespace ope::job;

namespace {

JobConfig pair_job(const char* a, const char* b, const char* target, int order) {
  JobConfig cfg;
  cfg.ops = {a, b};
  cfg.points = {{0, 0, 0, 0}, {1, 0, 0, 0}};
  cfg.target = target;
  cfg.order = order;
  return cfg;
}

int run_tool(const std::string& args) {
  const std::string cmd = std::string(OPE_BINARY) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("config files with overrides") {
  const JobConfig cfg = parse_config(
      "[job]\n"
      "mass = 2\n"
      "ops = phi, phi^3\n"
      "points = 0 0 0 0; 1 0 0 0\n"
      "target = phi^2\n"
      "order = 1\n"
      "method = numeric\n"
      "[quad]\n"
      "rel_tol = 1e-5\n"
      "seed = 9\n"
      "[table]\n"
      "separations = 0.5, 1, 2\n");
  CHECK(cfg.mass == 2.0);
  CHECK(cfg.ops == std::vector<std::string>{"phi", "phi^3"});
  REQUIRE(cfg.points.size() == 2);
  CHECK(cfg.points[1][0] == 1.0);
  CHECK(cfg.method == Method::numeric);
  CHECK(*cfg.rel_tol == 1e-5);
  CHECK(*cfg.seed == 9);
  CHECK(cfg.separations == std::vector<double>{0.5, 1.0, 2.0});
  const DeformOptions o = job_options(cfg);
  CHECK(o.plan.rel_tol == 1e-5);
  CHECK(o.seed == 9);
}

TEST_CASE("config errors carry line and column") {
  try {
    parse_config("[job]\nmass = 1\nops = phi, phi*d7phi\n");
    FAIL("expected a usage error");
  } catch (const UsageError& e) {
    CHECK(e.line() == 3);
    CHECK(e.column() == 17);
  }
  try {
    parse_config("[job]\nmass = heavy\n");
    FAIL("expected a usage error");
  } catch (const UsageError& e) {
    CHECK(e.line() == 2);
  }
  CHECK_THROWS_AS(parse_config("[job]\nmas = 1\n"), UsageError);
  CHECK_THROWS_AS(parse_config("[jobs]\nmass = 1\n"), UsageError);
  CHECK_THROWS_AS(parse_points("0 0 0; 1 0 0 0"), UsageError);
}

TEST_CASE("job validation names the violated invariant") {
  JobConfig cfg = pair_job("phi", "phi", "phi^2", 1);
  cfg.points.pop_back();
  CHECK_THROWS_WITH_AS(validate(cfg), doctest::Contains("points count"), UsageError);
  cfg = pair_job("phi", "phi", "phi^2", 3);
  CHECK_THROWS_WITH_AS(validate(cfg), doctest::Contains("order"), UsageError);
  cfg = pair_job("phi", "phi", "phi^2", 1);
  cfg.points[1] = cfg.points[0];
  CHECK_THROWS_WITH_AS(validate(cfg), doctest::Contains("distinct"), UsageError);
  cfg = pair_job("phi", "phi", "all<=x", 0);
  CHECK_THROWS_AS(validate(cfg), UsageError);
}

TEST_CASE("rendering prints 17 significant digits") {
  Document d;
  d["a"] = 0.1;
  d["b"] = 3;
  d["c"] = std::vector<double>{1.0 / 3.0};
  d["d"] = std::nan("");
  const std::string text = render(d);
  CHECK(text.find("0.10000000000000001") != std::string::npos);
  CHECK(text.find("0.33333333333333331") != std::string::npos);
  CHECK(text.find("\"b\": 3") != std::string::npos);
  CHECK(text.find("\"nan\"") != std::string::npos);
}

TEST_CASE("all<=4 at order 0 lists exactly the nonvanishing entries") {
  const Document doc = run_compute(pair_job("phi", "phi", "all<=4", 0));
  std::set<std::string> got;
  for (const auto& r : doc["results"]) {
    const std::string t = r["target"].get<std::string>();
    CHECK(format_operator(parse_operator(t)) == t);  // printed names re-parse
    got.insert(t);
    if (t == "1") CHECK(r["symbolic"].get<std::string>() == "1*C(x1-x2)");
  }
  std::set<std::string> expected;
  for (const auto& t : enumerate_operators(4))
    if (!zeroth_order({parse_operator("phi"), parse_operator("phi")}, t, 1).is_zero())
      expected.insert(format_operator(t));
  CHECK(got == expected);
  CHECK(got.count("phi^2"));
  CHECK(got.count("phi*d1phi"));
  CHECK_FALSE(got.count("phi^4"));
}

TEST_CASE("compute documents for the worked examples") {
  JobConfig cfg = pair_job("phi", "phi", "phi^4", 1);
  cfg.method = Method::symbolic;
  const Document zero = run_compute(cfg);
  const auto& r = zero["results"][0];
  CHECK(r["symbolic"].get<std::string>() == "0");
  CHECK(r["value"].get<double>() == 0.0);
  CHECK(r["counter_terms"]["ir"].get<std::string>() != "0");

  cfg = pair_job("phi", "phi", "phi^2", 1);
  cfg.method = Method::numeric;
  const Document k0 = run_compute(cfg);
  const double v = k0["results"][0]["value"].get<double>();
  CHECK(std::abs(v + bessel_k0(1.0) / (16 * kPi * kPi)) <= 1e-3 * std::abs(v));
  CHECK(k0["results"][0]["regions"].size() == 6);
}

TEST_CASE("identical jobs give byte-identical documents") {
  JobConfig cfg = pair_job("phi", "phi^3", "phi^2", 1);
  const std::string a = render(run_compute(cfg));
  const std::string b = render(run_compute(cfg));
  CHECK(a == b);
  cfg.monte_carlo = true;
  cfg.mc_samples = 5000;
  CHECK(render(run_compute(cfg)) == render(run_compute(cfg)));
}

TEST_CASE("tables over separations") {
  JobConfig cfg;
  cfg.ops = {"phi", "phi"};
  cfg.target = "phi^2";
  cfg.order = 1;
  cfg.method = Method::symbolic;
  cfg.separations = {0.5, 2.0};
  cfg.masses = {1.0, 2.0};
  const std::string csv = run_table(cfg);
  CHECK(csv.rfind("separation,mass,target,order,value,err\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
  CHECK(csv.find("2,2,phi^2,1,") != std::string::npos);
  cfg.separations.clear();
  CHECK_THROWS_AS(run_table(cfg), UsageError);
}

TEST_CASE("exit codes of the command-line tool") {
  CHECK(run_tool("--help") == 0);
  CHECK(run_tool("") == 1);
  CHECK(run_tool("compute --ops phi --points '0 0 0 0; 1 0 0 0'") == 1);
  CHECK(run_tool("compute --ops phi,phi7 --points '0 0 0 0; 1 0 0 0'") == 1);
  CHECK(run_tool("verify nosuch") == 1);
  CHECK(run_tool("compute --ops phi,phi^3 --points '0 0 0 0; 1 0 0 0' --method symbolic") == 2);
  CHECK(run_tool("compute --ops phi,phi --points '0 0 0 0; 1 0 0 0' --target phi^4 --method symbolic") == 0);
  CHECK(run_tool("verify wick") == 0);
}
