#pragma once

// Verification suites shared by the command-line tool and the acceptance
// binary. Each check carries the acceptance criterion it belongs to.

#include <string>
#include <vector>

namespace ope::verify {

struct Check {
  int criterion = 0;  // 1..9 for the numbered criteria, 10 for the order-2 properties
  std::string suite;
  std::string name;
  std::string expected;  // human-readable target
  double measured = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  double seconds = 0.0;
};

struct Report {
  std::vector<Check> checks;
  bool ok() const;
  void append(const Report& other);
};

/// wick, bessel, integrals, examples, slopes, oracle, invariance, order2.
const std::vector<std::string>& suite_names();

/// Throws std::invalid_argument for an unknown suite; "all" runs every suite.
Report run_suite(const std::string& name);

/// Criterion titles used by the acceptance report.
std::string criterion_title(int criterion);

}  // namespace ope::verify
