#include <cmath>
#include <random>

#include "doctest.h"
#include "opeflow/expr.hpp"
#include "opeflow/specfun.hpp"

using namespace ope;

namespace {

const PointLabel Y = PointLabel::y();
const PointLabel X1 = PointLabel::ext(0);
const PointLabel X2 = PointLabel::ext(1);
const PointLabel X3 = PointLabel::ext(2);

CoeffExpr C(PointLabel a, PointLabel b, MultiIndex w = {}) {
  return CoeffExpr::from_factor(Factor::prop(w, a, b));
}

CoeffExpr random_expr(std::mt19937& rng) {
  std::uniform_int_distribution<int> pick(0, 3), small(-3, 3), wpick(0, 1);
  const PointLabel labels[] = {Y, X1, X2, X3};
  CoeffExpr e;
  const int nterms = 1 + pick(rng);
  for (int t = 0; t < nterms; ++t) {
    CoeffExpr term = CoeffExpr::constant(Rational(small(rng), 1 + pick(rng)));
    const int nf = pick(rng);
    for (int f = 0; f < nf; ++f) {
      PointLabel a = labels[pick(rng)], b = labels[pick(rng)];
      if (a == b) b = a == X1 ? X2 : X1;
      if (wpick(rng)) {
        term = term * C(a, b, MultiIndex{wpick(rng), 0, wpick(rng), 0});
      } else {
        term = term * CoeffExpr::from_factor(Factor::monomial(MultiIndex{wpick(rng), 1, 0, 0}, a, b));
      }
    }
    e = e + term;
  }
  return e;
}

const std::vector<Vec4> kExt{{0.1, 0.3, -0.2, 0.0}, {0.9, -0.4, 0.2, 0.5}, {-0.7, 0.1, 0.6, -0.3}};
const Vec4 kY{0.35, 0.8, -0.45, 0.25};

double ev(const CoeffExpr& e) { return eval(e, kExt, kY, 1.1); }

}  // namespace

TEST_CASE("add, scale and multiply on simple expressions") {
  const auto a = C(Y, X1);
  const auto b = C(Y, X2);
  CHECK((a + a) == scale(a, 2));
  CHECK((a - a).is_zero());
  CHECK((a * b) == (b * a));
  CHECK(((a + b) * a) == (a * a + b * a));
  CHECK(to_string(CoeffExpr{}) == "0");
  CHECK(to_string(scale(a * a, Rational(-1, 2))) == "-1/2*C(y-x1)^2");
}

TEST_CASE("orientation of propagator derivatives") {
  // d^w C(x1 - y) = (-1)^|w| d^w C(y - x1)
  const MultiIndex w = MultiIndex::unit(0);
  CHECK(C(X1, Y, w) == scale(C(Y, X1, w), -1));
  CHECK(C(X1, Y) == C(Y, X1));
  CHECK(ev(C(X1, Y, w)) == doctest::Approx(propagator_deriv(kExt[0] - kY, 1.1, w)));
}

TEST_CASE("monomials merge and evaluate") {
  const auto m1 = CoeffExpr::from_factor(Factor::monomial(MultiIndex::unit(0), X1, X2));
  const auto m2 = CoeffExpr::from_factor(Factor::monomial(MultiIndex{1, 1, 0, 0}, X1, X2));
  const auto prod = m1 * m2;
  REQUIRE(prod.size() == 1);
  REQUIRE(prod.terms()[0].factors.size() == 1);
  CHECK(prod.terms()[0].factors[0].w == MultiIndex{2, 1, 0, 0});
  const Vec4 d = kExt[0] - kExt[1];
  CHECK(ev(prod) == doctest::Approx(d[0] * d[0] * d[1]));
  // A monomial of a point with itself is 1 for w = 0 and 0 otherwise.
  CHECK(CoeffExpr::from_factor(Factor::monomial(MultiIndex{}, X1, X1)) == CoeffExpr::constant(1));
  CHECK(CoeffExpr::from_factor(Factor::monomial(MultiIndex::unit(1), X1, X1)).is_zero());
}

TEST_CASE("ring axioms hold numerically on random expressions") {
  std::mt19937 rng(42);
  for (int trial = 0; trial < 100; ++trial) {
    const auto a = random_expr(rng), b = random_expr(rng), c = random_expr(rng);
    CHECK((a + b) == (b + a));
    CHECK((a * b) == (b * a));
    CHECK(((a + b) + c) == (a + (b + c)));
    CHECK(((a * b) * c) == (a * (b * c)));
    CHECK((a * (b + c)) == (a * b + a * c));
    const double va = ev(a), vb = ev(b);
    CHECK(ev(a + b) == doctest::Approx(va + vb).epsilon(1e-12));
    CHECK(ev(a * b) == doctest::Approx(va * vb).epsilon(1e-12));
    CompiledExpr ce(a * b, 1.1);
    CHECK(ce(kExt, &kY) == doctest::Approx(va * vb).epsilon(1e-12));
    CHECK(CoeffExpr::from_terms(a.terms()) == a);
  }
}

TEST_CASE("relabeling and filtering") {
  const auto e = C(Y, X1) * C(X1, X2) + C(Y, X2);
  const std::vector<PointLabel> swap{X2, X1};
  const auto r = e.relabeled(swap);
  CHECK(r == C(Y, X2) * C(X2, X1) + C(Y, X1));
  CHECK(e.filter(X1, true) == C(Y, X1) * C(X1, X2));
  CHECK(e.filter(X1, false) == C(Y, X2));
  CHECK(e.max_external_index() == 1);
  CHECK(e.depends_on(Y));
}

TEST_CASE("evaluation errors") {
  CHECK_THROWS_AS(eval(C(Y, X1), kExt, std::nullopt, 1.0), EvalError);
  const std::vector<Vec4> one{{0, 0, 0, 0}};
  CHECK_THROWS_AS(eval(C(X1, X3), one, std::nullopt, 1.0), EvalError);
}

TEST_CASE("symbolic y integration table") {
  // int C(y - a) = 1/m^2
  auto i1 = integrate_y_symbolic(scale(C(Y, X1), 3));
  REQUIRE(i1);
  CHECK(eval(*i1, kExt, std::nullopt, 2.0) == doctest::Approx(3.0 / 4.0));
  // total derivatives integrate to zero
  auto i2 = integrate_y_symbolic(C(Y, X1, MultiIndex::unit(2)));
  REQUIRE(i2);
  CHECK(i2->is_zero());
  // bubble: K0(m |a - b|) / (8 pi^2), times any external factor
  auto i3 = integrate_y_symbolic(C(Y, X1) * C(Y, X2) * C(X1, X2));
  REQUIRE(i3);
  const double r = norm(kExt[0] - kExt[1]);
  const double expect = bessel_k0(1.1 * r) / (8 * kPi * kPi) * propagator(kExt[0] - kExt[1], 1.1);
  CHECK(eval(*i3, kExt, std::nullopt, 1.1) == doctest::Approx(expect).epsilon(1e-13));
  // unsupported shapes
  CHECK_FALSE(integrate_y_symbolic(C(Y, X1) * C(Y, X2) * C(Y, X3)));
  CHECK_FALSE(integrate_y_symbolic(C(Y, X1) * C(Y, X1)));
  // y-independent remainder is a divergence
  CHECK_THROWS_AS(integrate_y_symbolic(C(Y, X1) + C(X1, X2)), DivergenceError);
}

TEST_CASE("bound expressions match full evaluation") {
  std::mt19937 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const auto e = random_expr(rng);
    const CompiledExpr ce(e, 0.8);
    const auto bound = ce.bind(kExt);
    CHECK(bound(kY) == doctest::Approx(eval(e, kExt, kY, 0.8)).epsilon(1e-13));
  }
}

TEST_CASE("the integration label can be relabeled") {
  const auto e = C(Y, X1) * C(X1, X2);
  const std::vector<PointLabel> keep{X1, X2};
  const auto moved = e.relabeled(keep, X3);
  CHECK(moved == C(X3, X1) * C(X1, X2));
  CHECK_FALSE(moved.depends_on(Y));
  const std::vector<PointLabel> to_y{Y, X2};
  CHECK(C(X1, X2).relabeled(to_y) == C(Y, X2));
}
