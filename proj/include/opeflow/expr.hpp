#pragma once

// Exact symbolic coefficient functions: rational-weighted sums of products
// of propagator derivatives, coordinate-difference monomials and (after
// integration) Bessel K_0 factors over labeled points.

#include <boost/multiprecision/cpp_int.hpp>
#include <compare>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "opeflow/core.hpp"

namespace ope {

using Rational = boost::multiprecision::cpp_rational;

/// Either the integration variable y or an external point x_i.
struct PointLabel {
  int id = 0;  // -1 is y, i >= 0 is external point i

  static constexpr PointLabel y() { return PointLabel{-1}; }
  static constexpr PointLabel ext(int i) { return PointLabel{i}; }
  bool is_y() const { return id < 0; }
  int index() const { return id; }

  friend auto operator<=>(const PointLabel&, const PointLabel&) = default;
};

std::string format_label(PointLabel p);

enum class FactorKind : int {
  PropDeriv = 0,  // (d^w C)(x_a - x_b)
  Monomial = 1,   // (x_a - x_b)^w
  BesselK0 = 2,   // K_0(m |x_a - x_b|)
};

struct Factor {
  FactorKind kind = FactorKind::PropDeriv;
  MultiIndex w{};
  PointLabel a{};
  PointLabel b{};

  static Factor prop(const MultiIndex& w, PointLabel a, PointLabel b) {
    return {FactorKind::PropDeriv, w, a, b};
  }
  static Factor monomial(const MultiIndex& w, PointLabel a, PointLabel b) {
    return {FactorKind::Monomial, w, a, b};
  }
  static Factor bessel_k0(PointLabel a, PointLabel b) { return {FactorKind::BesselK0, {}, a, b}; }

  bool involves(PointLabel p) const { return a == p || b == p; }

  friend bool operator==(const Factor&, const Factor&) = default;
  friend std::strong_ordering operator<=>(const Factor& l, const Factor& r);
};

/// weight * pi^pi_power * m^mass_power * prod(factors).
struct Term {
  Rational weight{1};
  int pi_power = 0;
  int mass_power = 0;
  std::vector<Factor> factors;  // canonical multiset

  bool depends_on(PointLabel p) const;

  friend bool operator==(const Term&, const Term&) = default;
};

class CoeffExpr {
 public:
  CoeffExpr() = default;

  static CoeffExpr constant(const Rational& q);
  static CoeffExpr from_factor(const Factor& f, const Rational& weight = 1);
  /// Canonicalizes an arbitrary term list (orientation, monomial merge, like-term merge).
  static CoeffExpr from_terms(std::vector<Term> terms);

  const std::vector<Term>& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }
  std::size_t size() const { return terms_.size(); }
  bool depends_on(PointLabel p) const;
  int max_external_index() const;

  /// Terms that do / do not depend on the label.
  CoeffExpr filter(PointLabel p, bool depending) const;

  /// Maps ext(i) to ext_map[i] and, if given, y to y_map.
  CoeffExpr relabeled(std::span<const PointLabel> ext_map, std::optional<PointLabel> y_map = std::nullopt) const;

  friend bool operator==(const CoeffExpr&, const CoeffExpr&) = default;

 private:
  std::vector<Term> terms_;  // sorted, unique keys, nonzero weights
};

CoeffExpr add(const CoeffExpr& e1, const CoeffExpr& e2);
CoeffExpr sub(const CoeffExpr& e1, const CoeffExpr& e2);
CoeffExpr scale(const CoeffExpr& e, const Rational& q);
CoeffExpr multiply(const CoeffExpr& e1, const CoeffExpr& e2);

CoeffExpr operator+(const CoeffExpr& a, const CoeffExpr& b);
CoeffExpr operator-(const CoeffExpr& a, const CoeffExpr& b);
CoeffExpr operator*(const CoeffExpr& a, const CoeffExpr& b);

/// Deterministic text form: sorted terms, weights as p/q.
std::string to_string(const CoeffExpr& e);
std::string to_string(const Factor& f);

class EvalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numeric value at the given external points and optional y.
double eval(const CoeffExpr& e, std::span<const Vec4> ext, const std::optional<Vec4>& y, double m);

/// Flattened form for repeated evaluation; thread-safe to evaluate.
class BoundExpr;

class CompiledExpr {
 public:
  CompiledExpr() = default;
  CompiledExpr(const CoeffExpr& e, double m);

  double operator()(std::span<const Vec4> ext, const Vec4* y) const;
  bool empty() const { return terms_.empty(); }
  double mass() const { return mass_; }

  /// Fixes the external points; factors not involving y are evaluated once.
  BoundExpr bind(std::span<const Vec4> ext) const;

 private:
  friend class BoundExpr;
  struct FlatTerm {
    double weight;
    std::vector<std::pair<int, int>> factors;  // (unique factor index, multiplicity)
  };
  double mass_ = 1.0;
  std::vector<Factor> unique_;
  std::vector<FlatTerm> terms_;
};

class BoundExpr {
 public:
  BoundExpr() = default;
  double operator()(const Vec4& y) const;
  bool empty() const { return terms_.empty(); }

 private:
  friend class CompiledExpr;
  struct YFactor {
    FactorKind kind;
    MultiIndex w;
    Vec4 other;  // the non-y endpoint
    bool y_first;
  };
  struct FlatTerm {
    double weight;  // includes all y-independent factors
    std::vector<std::pair<int, int>> factors;
  };
  double mass_ = 1.0;
  std::vector<YFactor> yfactors_;
  std::vector<FlatTerm> terms_;
};

class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& msg, CoeffExpr residue);
  const CoeffExpr& residue() const { return residue_; }

 private:
  CoeffExpr residue_;
};

/// Closed-form y-integral over R^4 using the identity table
///   int d^4y d^w C(y - a)             = 1/m^2 if |w| = 0, else 0
///   int d^4y C(y - a) C(y - b)         = K_0(m |a - b|) / (8 pi^2)
/// Returns nullopt when some term does not match. Throws DivergenceError if
/// any term is independent of y.
std::optional<CoeffExpr> integrate_y_symbolic(const CoeffExpr& e);

}  // namespace ope
