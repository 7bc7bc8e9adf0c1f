#pragma once

// Job configuration, result documents and CSV tables for the `ope` tool.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "opeflow/deform.hpp"
#include "opeflow/verify.hpp"

namespace ope::job {

using Document = nlohmann::ordered_json;

/// Bad configuration or arguments. line/column are 0 when unknown.
class UsageError : public std::runtime_error {
 public:
  UsageError(const std::string& msg, int line = 0, int column = 0);
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

struct JobConfig {
  double mass = 1.0;
  std::vector<std::string> ops;
  std::vector<Vec4> points;
  std::string target = "phi^2";  // an operator or "all<=D"
  int order = 1;
  Method method = Method::automatic;

  std::optional<double> rho_frac;
  std::optional<double> r_far;
  std::optional<double> rel_tol;
  std::optional<std::size_t> max_evals;
  std::optional<std::size_t> mc_samples;
  std::optional<std::size_t> inner_samples;
  std::optional<std::uint64_t> seed;
  bool monte_carlo = false;

  std::string output;  // empty: standard output
  bool timing = false;

  std::vector<double> separations;  // table only
  std::vector<double> masses;       // table only; empty means {mass}
};

/// Reads the INI file. Sections: [job], [quad], [output], [table].
/// Operator-string errors report the line and column in the file.
JobConfig load_config(const std::string& path);

/// Same, from text; `origin` names the source in messages.
JobConfig parse_config(const std::string& text, const std::string& origin = "<config>");

std::vector<Vec4> parse_points(const std::string& text);
std::vector<double> parse_numbers(const std::string& text);

/// Throws UsageError naming the violated invariant.
void validate(const JobConfig& cfg);

std::vector<CompositeOp> job_operators(const JobConfig& cfg);
std::vector<CompositeOp> job_targets(const JobConfig& cfg, const std::vector<CompositeOp>& ops);
DeformOptions job_options(const JobConfig& cfg);

Document run_compute(const JobConfig& cfg);
/// CSV with header separation,mass,target,order,value,err.
std::string run_table(const JobConfig& cfg);
Document verify_document(const std::string& suite, const verify::Report& report);

/// Serializes with every floating-point number at 17 significant digits.
std::string render(const Document& doc);

}  // namespace ope::job
