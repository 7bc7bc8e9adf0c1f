#include <algorithm>
#include <random>
#include <set>

#include "doctest.h"
#include "opeflow/core.hpp"

using namespace ope;

TEST_CASE("dimension of composite operators") {
  CHECK(dimension(CompositeOp::identity()) == 0);
  CHECK(dimension(CompositeOp::phi_power(4)) == 4);
  CHECK(dimension(parse_operator("phi*d1phi")) == 3);
  CHECK(dimension(parse_operator("d1d2phi*d3phi")) == 5);
}

TEST_CASE("multinomial weight") {
  const MultiIndex e1 = MultiIndex::unit(0);
  CHECK(multinomial_weight(std::vector<MultiIndex>{MultiIndex{}}) == 1);
  CHECK(multinomial_weight(std::vector<MultiIndex>{e1, e1}) == 2);
  CHECK(multinomial_weight(std::vector<MultiIndex>{{2, 0, 0, 0}, e1}) == 3);
  // factorizes over directions: (1,1)+(1,0) -> 2!/(1!1!) * 1 = 2
  CHECK(multinomial_weight(std::vector<MultiIndex>{{1, 1, 0, 0}, e1}) == 2);
  CHECK(MultiIndex{2, 1, 0, 3}.factorial() == 2 * 1 * 1 * 6);
  CHECK(MultiIndex{2, 1, 0, 3}.order() == 6);
}

TEST_CASE("enumerate_basis small cases") {
  auto b0 = enumerate_basis(0);
  REQUIRE(b0.size() == 1);
  CHECK(b0[0].is_identity());

  auto b2 = enumerate_basis(2);
  REQUIRE(b2.size() == 2);
  CHECK(b2[1] == CompositeOp::phi_power(2));

  auto b3 = enumerate_basis(3);
  REQUIRE(b3.size() == 6);
  const char* expected[] = {"1", "phi^2", "phi*d1phi", "phi*d2phi", "phi*d3phi", "phi*d4phi"};
  for (std::size_t i = 0; i < 6; ++i) CHECK(format_operator(b3[i]) == expected[i]);
}

namespace {

// Independent brute force: all sorted n-tuples of multi-indices with |w| <= D.
std::set<std::vector<std::array<int, 4>>> brute_force_basis(int max_dim) {
  std::vector<std::array<int, 4>> alphabet;
  for (int a = 0; a <= max_dim; ++a)
    for (int b = 0; b <= max_dim; ++b)
      for (int c = 0; c <= max_dim; ++c)
        for (int d = 0; d <= max_dim; ++d)
          if (a + b + c + d <= max_dim) alphabet.push_back({a, b, c, d});
  std::set<std::vector<std::array<int, 4>>> out;
  std::vector<std::array<int, 4>> cur;
  auto rec = [&](auto&& self, int budget) -> void {
    if (cur.size() % 2 == 0) {
      auto sorted = cur;
      std::sort(sorted.begin(), sorted.end());
      out.insert(sorted);
    }
    for (const auto& w : alphabet) {
      const int cost = 1 + w[0] + w[1] + w[2] + w[3];
      if (cost > budget) continue;
      cur.push_back(w);
      self(self, budget - cost);
      cur.pop_back();
    }
  };
  rec(rec, max_dim);
  return out;
}

}  // namespace

TEST_CASE("basis completeness against brute force") {
  for (int d = 0; d <= 6; ++d) {
    const auto basis = enumerate_basis(d);
    const auto expected = brute_force_basis(d);
    std::set<std::vector<std::array<int, 4>>> got;
    for (const auto& op : basis) {
      std::vector<std::array<int, 4>> f;
      for (const auto& w : op.factors()) f.push_back(w.c);
      std::sort(f.begin(), f.end());
      got.insert(f);
      CHECK(op.is_even());
      CHECK(op.dimension() <= d);
    }
    CHECK(got.size() == basis.size());  // no duplicates
    CHECK(got == expected);
    CHECK(std::is_sorted(basis.begin(), basis.end(), basis_less));
  }
}

TEST_CASE("canonicalization is idempotent and permutation invariant") {
  std::mt19937 rng(7);
  std::uniform_int_distribution<int> comp(0, 2);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<MultiIndex> f;
    const int n = 1 + trial % 5;
    for (int i = 0; i < n; ++i) f.emplace_back(comp(rng), comp(rng), comp(rng), comp(rng));
    CompositeOp a(f);
    std::shuffle(f.begin(), f.end(), rng);
    CompositeOp b(f);
    CHECK(a == b);
    CHECK(CompositeOp(a.factors()) == a);
    CHECK(a.dimension() == b.dimension());
    CHECK(std::is_sorted(a.factors().begin(), a.factors().end()));
  }
}

TEST_CASE("operator string parsing") {
  CHECK(parse_operator("phi^4") == CompositeOp::phi_power(4));
  CHECK(parse_operator("1").is_identity());
  CHECK(parse_operator("d1phi*phi") == parse_operator("phi*d1phi"));
  CHECK(parse_operator("d1d1phi*phi").factors()[1] == MultiIndex{2, 0, 0, 0});
  CHECK(parse_operator(" phi * phi ") == CompositeOp::phi_power(2));
  CHECK(parse_operator("d2phi^2").field_count() == 2);

  CHECK_THROWS_AS(parse_operator("psi"), ParseError);
  CHECK_THROWS_AS(parse_operator("d5phi"), ParseError);
  CHECK_THROWS_AS(parse_operator("phi^"), ParseError);
  CHECK_THROWS_AS(parse_operator("phi phi"), ParseError);
  try {
    parse_operator("phi*d7phi", 3);
    FAIL("expected parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
    CHECK(e.column() == 6);
  }
}

TEST_CASE("formatted operators re-parse to the same canonical operator") {
  for (const auto& op : enumerate_operators(5)) {
    CHECK(parse_operator(format_operator(op)) == op);
  }
}

TEST_CASE("point configurations") {
  PointConfig cfg({{0, 0, 0, 0}, {1, 0, 0, 0}, {0, 2, 0, 0}});
  CHECK(cfg.base() == 2);
  CHECK(cfg.min_distance() == doctest::Approx(1.0));
  CHECK(cfg.diameter() == doctest::Approx(std::sqrt(5.0)));
  CHECK_THROWS_AS(PointConfig({{0, 0, 0, 0}, {0, 0, 0, 0}}), std::invalid_argument);
  CHECK_THROWS_AS(ModelParams(0.0), std::invalid_argument);
  const auto shifted = cfg.translated({1, 1, 1, 1});
  CHECK(shifted.min_distance() == doctest::Approx(cfg.min_distance()));
}
