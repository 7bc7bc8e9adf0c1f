// ope: compute OPE coefficients, tabulate them over separations, and run the
// verification suites.
//
// Exit status: 0 ok, 1 usage, 2 computation failure, 3 verification failure.

#include <cstdio>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "job.hpp"
#include "opeflow/quad.hpp"

namespace {

using ope::job::JobConfig;

struct Flags {
  std::string config;
  double mass = 1.0;
  std::vector<std::string> ops;
  std::string points, target, method, separations, masses, output;
  int order = 1;
  double rho_frac = 0, r_far = 0, rel_tol = 0;
  std::size_t max_evals = 0, mc_samples = 0, inner_samples = 0;
  std::uint64_t seed = 0;
  bool monte_carlo = false, timing = false;
};

struct Registered {
  CLI::Option *mass, *ops, *points, *target, *order, *method, *rho_frac, *r_far, *rel_tol, *max_evals, *mc_samples,
      *inner_samples, *seed, *monte_carlo, *output, *timing, *separations, *masses;
};

Registered add_job_flags(CLI::App* cmd, Flags& f, bool table) {
  Registered r{};
  cmd->add_option("-c,--config", f.config, "INI config file; flags override its values");
  r.mass = cmd->add_option("--mass", f.mass, "field mass m > 0");
  r.ops = cmd->add_option("--ops", f.ops, "operators, e.g. --ops phi --ops phi^3 (or one comma-separated list)")
              ->delimiter(',');
  r.points = cmd->add_option("--points", f.points, "points as 'x0 x1 x2 x3; y0 y1 y2 y3; ...'");
  r.target = cmd->add_option("--target", f.target, "target operator or all<=D");
  r.order = cmd->add_option("--order", f.order, "perturbative order 0, 1 or 2");
  r.method = cmd->add_option("--method", f.method, "symbolic, numeric or auto");
  r.rho_frac = cmd->add_option("--rho-frac", f.rho_frac, "ball radius / minimum distance");
  r.r_far = cmd->add_option("--r-far", f.r_far, "far-field radius");
  r.rel_tol = cmd->add_option("--rel-tol", f.rel_tol, "relative tolerance of the quadrature");
  r.max_evals = cmd->add_option("--max-evals", f.max_evals, "evaluation budget of the quadrature");
  r.mc_samples = cmd->add_option("--mc-samples", f.mc_samples, "Monte Carlo samples");
  r.inner_samples = cmd->add_option("--inner-samples", f.inner_samples, "inner samples of the order-2 path");
  r.seed = cmd->add_option("--seed", f.seed, "Monte Carlo seed");
  r.monte_carlo = cmd->add_flag("--monte-carlo", f.monte_carlo, "use Monte Carlo at order 1");
  r.output = cmd->add_option("-o,--output", f.output, "output file (default: standard output)");
  r.timing = table ? nullptr : cmd->add_flag("--timing", f.timing, "include wall-clock times in the document");
  if (table) {
    r.separations = cmd->add_option("--separations", f.separations, "separations, e.g. '0.5,1,2'");
    r.masses = cmd->add_option("--masses", f.masses, "masses, e.g. '1,2' (default: --mass)");
  }
  return r;
}

JobConfig build_config(const Flags& f, const Registered& r) {
  JobConfig cfg = f.config.empty() ? JobConfig{} : ope::job::load_config(f.config);
  auto given = [](const CLI::Option* o) { return o != nullptr && o->count() > 0; };
  if (given(r.mass)) cfg.mass = f.mass;
  if (given(r.ops)) cfg.ops = f.ops;
  if (given(r.points)) cfg.points = ope::job::parse_points(f.points);
  if (given(r.target)) cfg.target = f.target;
  if (given(r.order)) cfg.order = f.order;
  if (given(r.method)) {
    try {
      cfg.method = ope::parse_method(f.method);
    } catch (const std::invalid_argument& e) {
      throw ope::job::UsageError(e.what());
    }
  }
  if (given(r.rho_frac)) cfg.rho_frac = f.rho_frac;
  if (given(r.r_far)) cfg.r_far = f.r_far;
  if (given(r.rel_tol)) cfg.rel_tol = f.rel_tol;
  if (given(r.max_evals)) cfg.max_evals = f.max_evals;
  if (given(r.mc_samples)) cfg.mc_samples = f.mc_samples;
  if (given(r.inner_samples)) cfg.inner_samples = f.inner_samples;
  if (given(r.seed)) cfg.seed = f.seed;
  if (given(r.monte_carlo)) cfg.monte_carlo = f.monte_carlo;
  if (given(r.output)) cfg.output = f.output;
  if (given(r.timing)) cfg.timing = f.timing;
  if (given(r.separations)) cfg.separations = ope::job::parse_numbers(f.separations);
  if (given(r.masses)) cfg.masses = ope::job::parse_numbers(f.masses);
  return cfg;
}

int emit(const std::string& text, const std::string& path) {
  if (path.empty()) {
    std::fwrite(text.data(), 1, text.size(), stdout);
    return 0;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out || !(out << text)) {
    std::cerr << "ope: cannot write '" << path << "'\n";
    return 2;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"OPE coefficients of massive Euclidean phi^4 theory"};
  app.require_subcommand(1);

  Flags compute_flags, table_flags;
  auto* compute = app.add_subcommand("compute", "compute coefficients for one configuration");
  const Registered compute_reg = add_job_flags(compute, compute_flags, false);
  auto* table = app.add_subcommand("table", "tabulate coefficients over separations (CSV)");
  const Registered table_reg = add_job_flags(table, table_flags, true);

  std::string suite = "all", verify_out;
  auto* verify = app.add_subcommand("verify", "run a verification suite");
  std::vector<std::string> suites = ope::verify::suite_names();
  suites.push_back("all");
  verify->add_option("suite", suite, "suite name")->check(CLI::IsMember(suites));
  verify->add_option("-o,--output", verify_out, "output file (default: standard output)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (*compute) {
      const JobConfig cfg = build_config(compute_flags, compute_reg);
      return emit(ope::job::render(ope::job::run_compute(cfg)), cfg.output);
    }
    if (*table) {
      const JobConfig cfg = build_config(table_flags, table_reg);
      return emit(ope::job::run_table(cfg), cfg.output);
    }
    const ope::verify::Report report = ope::verify::run_suite(suite);
    const int rc = emit(ope::job::render(ope::job::verify_document(suite, report)), verify_out);
    if (rc != 0) return rc;
    return report.ok() ? 0 : 3;
  } catch (const ope::job::UsageError& e) {
    std::cerr << "ope: " << e.what() << "\n";
    return 1;
  } catch (const ope::ParseError& e) {
    std::cerr << "ope: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "ope: invalid input: " << e.what() << "\n";
    return 1;
  } catch (const ope::DivergenceError& e) {
    std::cerr << "ope: divergence: " << e.what() << "\n";
    return 2;
  } catch (const ope::QuadratureError& e) {
    const auto& w = e.where();
    std::cerr << "ope: quadrature failure at (" << w[0] << ", " << w[1] << ", " << w[2] << ", " << w[3]
              << "): " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "ope: computation failed: " << e.what() << "\n";
    return 2;
  }
}
