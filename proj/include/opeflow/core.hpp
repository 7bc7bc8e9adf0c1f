#pragma once

// Multi-indices, composite operators, point configurations and model
// parameters shared by every other module.

#include <array>
#include <compare>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ope {

inline constexpr int kSpacetimeDim = 4;

using Vec4 = std::array<double, kSpacetimeDim>;

Vec4 operator+(const Vec4& a, const Vec4& b);
Vec4 operator-(const Vec4& a, const Vec4& b);
Vec4 operator*(double s, const Vec4& a);
double dot(const Vec4& a, const Vec4& b);
double norm(const Vec4& a);

/// Standard multi-index w = (w_1, ..., w_4) with |w| and w!.
struct MultiIndex {
  std::array<int, kSpacetimeDim> c{};

  constexpr MultiIndex() = default;
  constexpr MultiIndex(int a, int b, int d, int e) : c{a, b, d, e} {}

  static constexpr MultiIndex unit(int mu) {
    MultiIndex w;
    w.c[static_cast<std::size_t>(mu)] = 1;
    return w;
  }

  int order() const { return c[0] + c[1] + c[2] + c[3]; }
  std::uint64_t factorial() const;
  bool is_zero() const { return order() == 0; }
  /// Componentwise w <= other.
  bool leq(const MultiIndex& other) const;

  int operator[](int mu) const { return c[static_cast<std::size_t>(mu)]; }

  friend MultiIndex operator+(const MultiIndex& a, const MultiIndex& b);
  friend MultiIndex operator-(const MultiIndex& a, const MultiIndex& b);
  friend bool operator==(const MultiIndex&, const MultiIndex&) = default;
  /// Graded order: first by |w|, then d1 before d2 before d3 before d4.
  friend std::strong_ordering operator<=>(const MultiIndex& a, const MultiIndex& b);
};

/// (v_1 + ... + v_r)! / (v_1! ... v_r!) for multi-indices. Throws on overflow.
std::uint64_t multinomial_weight(std::span<const MultiIndex> parts);

/// Monomial d^{w_1}phi ... d^{w_n}phi. The empty product is the identity.
class CompositeOp {
 public:
  CompositeOp() = default;
  explicit CompositeOp(std::vector<MultiIndex> factors);

  static CompositeOp identity() { return {}; }
  /// phi^n without derivatives.
  static CompositeOp phi_power(int n);
  /// The interaction operator phi^4.
  static CompositeOp interaction() { return phi_power(4); }

  const std::vector<MultiIndex>& factors() const { return factors_; }
  int field_count() const { return static_cast<int>(factors_.size()); }
  int derivative_count() const;
  int dimension() const { return field_count() + derivative_count(); }
  bool is_identity() const { return factors_.empty(); }
  bool is_even() const { return field_count() % 2 == 0; }

  friend bool operator==(const CompositeOp&, const CompositeOp&) = default;
  friend std::strong_ordering operator<=>(const CompositeOp& a, const CompositeOp& b);

 private:
  std::vector<MultiIndex> factors_;  // canonical, non-decreasing
};

inline int dimension(const CompositeOp& op) { return op.dimension(); }

/// Even-field-count operators with dimension <= max_dim, sorted by
/// (dimension, canonical order). Includes the identity.
std::vector<CompositeOp> enumerate_basis(int max_dim);

/// All operators (either parity) with dimension <= max_dim, same order.
std::vector<CompositeOp> enumerate_operators(int max_dim);

bool basis_less(const CompositeOp& a, const CompositeOp& b);

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& msg, int line, int column);
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

/// Parses the operator grammar, e.g. "phi^4", "phi*d1phi", "d1d1phi*phi", "1".
CompositeOp parse_operator(std::string_view text, int line = 1);
/// Canonical textual form; parse_operator(format_operator(op)) == op.
std::string format_operator(const CompositeOp& op);
std::string format_multi_index(const MultiIndex& w);

/// Ordered positions in R^4 with a distinguished base point (default: last).
class PointConfig {
 public:
  PointConfig() = default;
  explicit PointConfig(std::vector<Vec4> points);
  PointConfig(std::vector<Vec4> points, std::size_t base);

  const std::vector<Vec4>& points() const { return points_; }
  std::size_t size() const { return points_.size(); }
  const Vec4& operator[](std::size_t i) const { return points_[i]; }
  std::size_t base() const { return base_; }
  double min_distance() const;
  double diameter() const;
  PointConfig translated(const Vec4& shift) const;
  PointConfig scaled(double lambda) const;

 private:
  std::vector<Vec4> points_;
  std::size_t base_ = 0;
};

/// Minimum pairwise distance over a point list; +inf for fewer than two.
double min_pairwise_distance(std::span<const Vec4> pts);
double configuration_diameter(std::span<const Vec4> pts);

struct ModelParams {
  double mass = 1.0;

  explicit ModelParams(double m = 1.0) : mass(m) {
    if (!(m > 0.0)) throw std::invalid_argument("mass must be positive");
  }
};

}  // namespace ope
