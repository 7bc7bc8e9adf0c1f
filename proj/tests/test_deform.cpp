#include <cmath>

#include "doctest.h"
#include "opeflow/deform.hpp"
#include "opeflow/specfun.hpp"

using namespace ope;

namespace {

const CompositeOp kPhi = CompositeOp::phi_power(1);
const CompositeOp kPhi2 = CompositeOp::phi_power(2);
const CompositeOp kPhi3 = CompositeOp::phi_power(3);
const CompositeOp kPhi4 = CompositeOp::phi_power(4);
const PointLabel kY = PointLabel::y();
const PointLabel kX1 = PointLabel::ext(0);
const PointLabel kX2 = PointLabel::ext(1);

PointConfig pair_at(double sep) { return PointConfig({{0, 0, 0, 0}, {sep, 0, 0, 0}}); }

CoeffExpr prop(PointLabel a, PointLabel b) { return CoeffExpr::from_factor(Factor::prop({}, a, b)); }

DeformOptions fast_options() {
  DeformOptions o;
  o.plan.rel_tol = 1e-5;
  return o;
}

}  // namespace

TEST_CASE("method names") {
  CHECK(parse_method("symbolic") == Method::symbolic);
  CHECK(parse_method("auto") == Method::automatic);
  CHECK(to_string(parse_method("numeric")) == "numeric");
  CHECK_THROWS_AS(parse_method("fast"), std::invalid_argument);
}

TEST_CASE("order-1 bracket for phi phi -> phi^2 is a single bubble") {
  const auto b = first_order_bracket({{kPhi, kX1}, {kPhi, kX2}}, kPhi2, 8);
  CHECK(b.uv.symbolic.is_zero());
  CHECK(b.ir.symbolic.is_zero());
  CHECK(b.assembled().symbolic == scale(prop(kY, kX1) * prop(kY, kX2), 12));
}

TEST_CASE("order-1 bracket for phi phi^3 -> phi^2") {
  const auto b = first_order_bracket({{kPhi, kX1}, {kPhi3, kX2}}, kPhi2, 8);
  const CoeffExpr c2 = prop(kY, kX2) * prop(kY, kX2);
  const CoeffExpr expected = scale(c2 * (prop(kY, kX1) - prop(kX1, kX2)), 72);
  CHECK(b.assembled().symbolic == expected);
  // the subtraction contains the odd channel (C0)_{phi^4 phi^3}^{phi} = 24 C^3
  CHECK(b.uv.symbolic.filter(kX1, false) == scale(c2 * prop(kY, kX2), 24));
}

TEST_CASE("phi phi -> phi^4 vanishes exactly at order 1") {
  CoeffTable table(pair_at(1.0), 1.0);
  const auto r = coefficient({kPhi, kPhi}, kPhi4, 1, Method::symbolic, table, fast_options());
  REQUIRE(r.symbolic);
  CHECK(r.symbolic->is_zero());
  CHECK(r.value == 0.0);

  CoeffTable numeric_table(pair_at(1.0), 1.0);
  DeformOptions o;
  o.plan.rel_tol = 1e-6;
  const auto n = coefficient({kPhi, kPhi}, kPhi4, 1, Method::numeric, numeric_table, o);
  REQUIRE(n.numeric);
  double largest = 0.0;
  for (const auto& rc : n.numeric->breakdown) largest = std::max(largest, std::abs(rc.value));
  CHECK(largest > 0.0);
  CHECK(std::abs(n.value) <= 1e-6 * largest);
}

TEST_CASE("phi phi -> phi^2 at order 1 is -K0/(16 pi^2)") {
  for (double sep : {0.5, 1.0, 2.0}) {
    const double expected = -bessel_k0(sep) / (16 * kPi * kPi);
    CoeffTable t1(pair_at(sep), 1.0);
    const auto s = coefficient({kPhi, kPhi}, kPhi2, 1, Method::symbolic, t1);
    CHECK(s.path == "symbolic");
    CHECK(s.value == doctest::Approx(expected).epsilon(1e-13));

    CoeffTable t2(pair_at(sep), 1.0);
    const auto n = coefficient({kPhi, kPhi}, kPhi2, 1, Method::numeric, t2, fast_options());
    CHECK(n.path == "quadrature");
    CHECK(std::abs(n.value - expected) <= 1e-3 * std::abs(expected));
    CHECK(std::abs(n.value - expected) <= 5 * n.abs_error + 1e-12);
  }
}

TEST_CASE("monte carlo path agrees with the closed form") {
  CoeffTable t(pair_at(1.0), 1.0);
  DeformOptions o;
  o.monte_carlo = true;
  o.mc_samples = 200000;
  const auto r = coefficient({kPhi, kPhi}, kPhi2, 1, Method::numeric, t, o);
  CHECK(r.path == "monte-carlo");
  const double expected = -bessel_k0(1.0) / (16 * kPi * kPi);
  CHECK(std::abs(r.value - expected) <= 5 * r.abs_error);
}

TEST_CASE("order-1 slopes for phi phi^3 -> phi^2") {
  CoeffTable t(pair_at(1.0), 1.0);
  const auto r = coefficient({kPhi, kPhi3}, kPhi2, 1, Method::automatic, t, fast_options());
  CHECK(r.path == "quadrature");
  REQUIRE(r.slopes);
  CHECK(r.slopes->uv_ok);
  CHECK(r.slopes->ir_ok);
  CHECK(r.slopes->ir_nonzero >= 2);
  for (double s : r.slopes->uv_slope) CHECK(s >= -3.9);
  // the unsubtracted main term alone is not integrable near x2
  const auto main = CompiledExpr(r.integrand->main.symbolic, 1.0).bind(t.points().points());
  const auto bad = slope_diagnostics([&](const Vec4& y) { return main(y); }, t.points());
  CHECK(bad.uv_slope[1] <= -5.5);
  CHECK_FALSE(bad.uv_ok);
}

TEST_CASE("slope diagnostics on model functions") {
  const PointConfig pts = pair_at(1.0);
  const auto mild = slope_diagnostics(
      [&](const Vec4& y) { return std::pow(norm(y - pts[0]) * norm(y - pts[1]), -2.0) * std::exp(-norm(y)); }, pts);
  CHECK(mild.uv_ok);
  CHECK(mild.ir_ok);
  const auto flat = slope_diagnostics([](const Vec4&) { return 1.0; }, pts);
  CHECK_FALSE(flat.ir_ok);
  const auto zero = slope_diagnostics([](const Vec4&) { return 0.0; }, pts);
  CHECK_FALSE(zero.ir_ok);
}

TEST_CASE("missing lower-order entries and the basis cap are reported") {
  CoeffTable table(pair_at(1.0), 1.0);
  CHECK_THROWS_AS(build_integrand({kPhi, kPhi3}, table.points(), kPhi2, 1, table), MissingEntryError);
  CHECK_THROWS_AS(first_order_bracket({{kPhi, kX1}, {kPhi3, kX2}}, kPhi2, 2), BasisCapError);
  DeformOptions o;
  o.basis_cap = 2;
  CHECK_THROWS_AS(coefficient({kPhi, kPhi3}, kPhi2, 1, Method::automatic, table, o), BasisCapError);
}

TEST_CASE("table entries are written once and filled bottom-up") {
  CoeffTable table(pair_at(1.0), 1.0);
  const auto r = coefficient({kPhi, kPhi}, kPhi2, 0, Method::automatic, table);
  CHECK(r.path == "wick");
  CHECK(r.value == 1.0);
  CHECK_THROWS_AS(table.insert(r.key, {}), std::logic_error);
  const auto again = coefficient({kPhi, kPhi}, kPhi2, 0, Method::automatic, table);
  CHECK(again.path == "table");

  DeformOptions o = fast_options();
  o.mc_samples = 200;
  o.inner_samples = 64;
  coefficient({kPhi, kPhi3}, kPhi2, 2, Method::automatic, table, o);
  CHECK(table.find({{kPhi, kPhi2}, kPhi2, 1}) == nullptr);
  CHECK(table.find({{kPhi, kPhi}, kPhi2, 1}) != nullptr);  // needed by the phi^4 phi^3 -> phi channel
  CHECK(table.find({{kPhi, kPhi3}, kPhi2, 2}) != nullptr);
}

TEST_CASE("parity zeros at every order") {
  CHECK(vanishes_identically({kPhi, kPhi2}, kPhi2, 1));
  CHECK(vanishes_identically({kPhi, kPhi}, kPhi4, 0));
  CHECK_FALSE(vanishes_identically({kPhi, kPhi}, kPhi4, 1));
  CoeffTable table(pair_at(1.0), 1.0);
  const auto r = coefficient({kPhi, kPhi2}, kPhi2, 2, Method::automatic, table);
  CHECK(r.path == "zero");
  CHECK(r.value == 0.0);
}

TEST_CASE("order-1 translation and rotation invariance") {
  const PointConfig base = pair_at(1.0);
  CoeffTable t0(base, 1.0);
  const double v0 = coefficient({kPhi, kPhi3}, kPhi2, 1, Method::numeric, t0, fast_options()).value;
  CoeffTable t1(base.translated({0.3, -1.2, 0.7, 2.0}), 1.0);
  const double v1 = coefficient({kPhi, kPhi3}, kPhi2, 1, Method::numeric, t1, fast_options()).value;
  CHECK(v1 == doctest::Approx(v0).epsilon(1e-7));
  CoeffTable t2(PointConfig({{0, 0, 0, 0}, {0, 0.6, 0, 0.8}}), 1.0);
  const double v2 = coefficient({kPhi, kPhi3}, kPhi2, 1, Method::numeric, t2, fast_options()).value;
  CHECK(v2 == doctest::Approx(v0).epsilon(1e-6));
}

TEST_CASE("order-1 permutation of the non-base operators") {
  const PointConfig a({{0, 0, 0, 0}, {1, 0, 0, 0}, {0.2, 0.9, 0, 0}});
  const PointConfig b({{1, 0, 0, 0}, {0, 0, 0, 0}, {0.2, 0.9, 0, 0}});
  const std::vector<CompositeOp> ops{kPhi, kPhi3, kPhi2};
  const std::vector<CompositeOp> swapped{kPhi3, kPhi, kPhi2};
  const auto sa = first_order_bracket({{kPhi, kX1}, {kPhi3, kX2}, {kPhi2, PointLabel::ext(2)}}, kPhi2, 8);
  const auto sb = first_order_bracket({{kPhi3, kX2}, {kPhi, kX1}, {kPhi2, PointLabel::ext(2)}}, kPhi2, 8);
  CHECK(sa.assembled().symbolic == sb.assembled().symbolic);
  CoeffTable ta(a, 1.0), tb(b, 1.0);
  const double va = coefficient(ops, kPhi2, 0, Method::automatic, ta).value;
  const double vb = coefficient(swapped, kPhi2, 0, Method::automatic, tb).value;
  CHECK(va == doctest::Approx(vb).epsilon(1e-14));
}

TEST_CASE("order-2 phi phi -> phi^2 is finite, seed stable and translation invariant") {
  DeformOptions o;
  o.mc_samples = 4000;
  o.inner_samples = 256;
  CoeffTable t(pair_at(1.0), 1.0);
  const auto r = coefficient({kPhi, kPhi}, kPhi2, 2, Method::automatic, t, o);
  CHECK(r.experimental);
  CHECK(r.path == "nested-monte-carlo");
  CHECK(std::isfinite(r.value));
  CHECK(std::isfinite(r.abs_error));
  CHECK(r.abs_error > 0.0);

  CoeffTable again(pair_at(1.0), 1.0);
  CHECK(coefficient({kPhi, kPhi}, kPhi2, 2, Method::automatic, again, o).value == r.value);

  DeformOptions o2 = o;
  o2.seed = 99;
  CoeffTable t2(pair_at(1.0), 1.0);
  const auto r2 = coefficient({kPhi, kPhi}, kPhi2, 2, Method::automatic, t2, o2);
  CHECK(std::abs(r2.value - r.value) <= 3 * std::hypot(r.abs_error, r2.abs_error));

  CoeffTable t3(pair_at(1.0).translated({0.5, 0.5, -0.25, 1.0}), 1.0);
  const auto r3 = coefficient({kPhi, kPhi}, kPhi2, 2, Method::automatic, t3, o);
  CHECK(std::abs(r3.value - r.value) <= 3 * std::hypot(r.abs_error, r3.abs_error));

  CoeffTable t4(pair_at(1.0), 1.0);
  CHECK_THROWS_AS(coefficient({kPhi, kPhi}, kPhi2, 2, Method::symbolic, t4, o), std::runtime_error);
}
