#pragma once

// Perturbative OPE coefficients from the deformation recursion
//
//   (C_{r+1})_{A_1..A_N}^B(x) = -1/(4! (r+1)) int d^4y [ main - uv - ir ]
//
//   main = (C_r)_{L A_1..A_N}^B(y, x)
//   uv   = sum_i sum_{[C] <= [A_i]} sum_s (C_s)_{L A_i}^C(y, x_i) (C_{r-s})_{A_1..C..A_N}^B(x)
//   ir   = sum_{[C] < [B]} sum_s (C_s)_{A_1..A_N}^C(x) (C_{r-s})_{L C}^B(y, x_N)
//
// with L = phi^4. Order 0 is exact (Wick); order 1 is a y-integral of an
// exact order-0 bracket; order 2 nests one more integral.

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "opeflow/core.hpp"
#include "opeflow/expr.hpp"
#include "opeflow/quad.hpp"
#include "opeflow/wick.hpp"

namespace ope {

enum class Method { symbolic, numeric, automatic };

Method parse_method(const std::string& s);
std::string to_string(Method m);

class MissingEntryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class BasisCapError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DeformOptions {
  QuadPlan plan;                    // centers are filled in per call
  std::size_t mc_samples = 20000;   // outer samples of the nested order-2 path
  std::size_t inner_samples = 1024; // inner samples per outer point
  std::uint64_t seed = 1;
  int basis_cap = 8;                // largest operator dimension the C-sums may need
  bool monte_carlo = false;         // use Monte Carlo instead of adaptive quadrature at order 1
};

struct CoeffKey {
  std::vector<CompositeOp> ops;
  CompositeOp target;
  int order = 0;

  friend auto operator<=>(const CoeffKey&, const CoeffKey&) = default;
  friend bool operator==(const CoeffKey&, const CoeffKey&) = default;
};

std::string format_key(const CoeffKey& k);

struct CoeffEntry {
  std::optional<CoeffExpr> symbolic;  // exact, in ext labels of the configuration
  std::optional<NumericCoeff> numeric;
  double value = 0.0;
  double abs_error = 0.0;
};

/// Coefficients at one point configuration, keyed by (ops, target, order).
/// Entries are written once.
class CoeffTable {
 public:
  CoeffTable(PointConfig points, double mass);

  const PointConfig& points() const { return points_; }
  double mass() const { return mass_; }
  const CoeffEntry* find(const CoeffKey& k) const;
  void insert(const CoeffKey& k, CoeffEntry e);
  std::size_t size() const { return entries_.size(); }
  const std::map<CoeffKey, CoeffEntry>& entries() const { return entries_; }

 private:
  PointConfig points_;
  double mass_;
  std::map<CoeffKey, CoeffEntry> entries_;
};

/// One bracket group. For an order-0 integrand only `symbolic` is used.
struct IntegrandPart {
  CoeffExpr symbolic;                                // y-dependent exact part (label y)
  std::vector<std::pair<double, CoeffExpr>> scaled;  // numeric x-only factor times exact part
  CoeffExpr nested;  // inner integrand: y is the inner variable, ext(N) the outer one; -1/4! included

  bool is_zero() const { return symbolic.is_zero() && scaled.empty() && nested.is_zero(); }
};

IntegrandPart combine(const IntegrandPart& a, const IntegrandPart& b, const Rational& sb);

struct Integrand {
  int order = 0;  // r: the order of the coefficients inside the bracket
  std::size_t n_points = 0;
  IntegrandPart main, uv, ir;
  std::vector<std::string> audit;  // C-sum entries kept by counting but exactly zero

  IntegrandPart assembled() const;
};

/// Assembles the bracket for (C_{r+1})_{ops}^{target}. Lower-order entries at
/// the configuration itself (orders 1..r) must already be in `table`.
Integrand build_integrand(const std::vector<CompositeOp>& ops, const PointConfig& points,
                          const CompositeOp& target, int r, const CoeffTable& table,
                          const DeformOptions& opts = {});

/// Pointwise evaluation of an integrand part at the insertion point. Parts
/// with a nested integral are estimated by Monte Carlo with a seed derived
/// from (seed, y), so the value is a deterministic function of y.
class PartEvaluator {
 public:
  PartEvaluator(const IntegrandPart& part, const PointConfig& points, double mass, const DeformOptions& opts);
  double operator()(const Vec4& y) const;
  bool exact() const { return !has_nested_; }

 private:
  std::vector<Vec4> ext_;
  double mass_;
  BoundExpr symbolic_;
  std::vector<std::pair<double, BoundExpr>> scaled_;
  CompiledExpr nested_;
  bool has_nested_ = false;
  DeformOptions opts_;
};

struct SlopeReport {
  std::vector<double> uv_slope;   // per external point, least-squares fit of log2|f| vs log2 r
  std::vector<double> ir_slopes;  // consecutive slopes about the base point
  std::size_t ir_nonzero = 0;
  bool uv_ok = false;
  bool ir_ok = false;
};

/// UV: r = 2^-k d (k = 2..10, d = half the minimum distance) about each
/// point; IR: r = 2^k D (k = 3..8, D = diameter) about the base point. Both
/// along a fixed generic direction.
SlopeReport slope_diagnostics(const std::function<double(const Vec4&)>& f, const PointConfig& points,
                              double uv_bound = -3.9, double ir_bound = -6.0);

struct CoefficientResult {
  CoeffKey key;
  std::optional<CoeffExpr> symbolic;
  std::optional<NumericCoeff> numeric;
  double value = 0.0;
  double abs_error = 0.0;
  std::string path;  // "wick", "symbolic", "quadrature", "monte-carlo", "nested-monte-carlo", "zero"
  bool experimental = false;
  std::optional<Integrand> integrand;
  std::optional<SlopeReport> slopes;
};

/// (C_order)_{ops}^{target} at table.points(). Fills the table bottom-up with
/// every lower-order entry the recursion needs and records the result.
CoefficientResult coefficient(const std::vector<CompositeOp>& ops, const CompositeOp& target, int order,
                              Method method, CoeffTable& table, const DeformOptions& opts = {});

/// Exact bracket of the order-1 coefficient for operators at arbitrary
/// labels; the base point is the label of the last operator and y is the
/// insertion point.
Integrand first_order_bracket(const std::vector<LabeledOp>& ops, const CompositeOp& target, int basis_cap);

/// True if the coefficient vanishes for field-parity reasons at any order
/// (and by counting at order 0).
bool vanishes_identically(const std::vector<CompositeOp>& ops, const CompositeOp& target, int order);

}  // namespace ope
