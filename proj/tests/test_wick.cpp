#include <cmath>
#include <functional>
#include <random>

#include "doctest.h"
#include "opeflow/specfun.hpp"
#include "opeflow/wick.hpp"

using namespace ope;

namespace {

const PointLabel Y = PointLabel::y();
const PointLabel X1 = PointLabel::ext(0);
const PointLabel X2 = PointLabel::ext(1);

CoeffExpr C(PointLabel a, PointLabel b, MultiIndex w = {}) {
  return CoeffExpr::from_factor(Factor::prop(w, a, b));
}
CoeffExpr k(long n) { return CoeffExpr::constant(n); }

CompositeOp op(const char* s) { return parse_operator(s); }

// A classical field configuration phi(z) = c + b.z + z.A.z / 2. Derivatives
// of order > 2 vanish, so Taylor expansions of it terminate.
struct QuadraticField {
  double c;
  Vec4 b;
  double A[4][4];

  double deriv(const MultiIndex& u, const Vec4& z) const {
    switch (u.order()) {
      case 0: {
        double q = 0;
        for (int i = 0; i < 4; ++i)
          for (int j = 0; j < 4; ++j) q += z[i] * A[i][j] * z[j];
        return c + dot(b, z) + 0.5 * q;
      }
      case 1: {
        int mu = 0;
        while (u[mu] == 0) ++mu;
        double s = b[mu];
        for (int j = 0; j < 4; ++j) s += A[mu][j] * z[j];
        return s;
      }
      case 2: {
        int mu = 0;
        while (u[mu] == 0) ++mu;
        int nu = mu;
        if (u[mu] == 1) {
          ++nu;
          while (u[nu] == 0) ++nu;
        }
        return A[mu][nu];
      }
      default:
        return 0.0;
    }
  }
};

struct Slot {
  int owner;
  MultiIndex u;
  Vec4 at;
};

// Brute-force Wick sum: every set of cross-operator pairings, contracted
// pairs become propagator derivatives, uncontracted slots take the classical
// field value. No symmetry factors are used; each slot pairing is visited once.
double brute_force_wick(const std::vector<Slot>& slots, const QuadraticField& phi, double m) {
  const std::size_t n = slots.size();
  std::vector<bool> used(n, false);
  std::function<double(std::size_t)> rec = [&](std::size_t i) -> double {
    while (i < n && used[i]) ++i;
    if (i == n) return 1.0;
    used[i] = true;
    // slot i left uncontracted
    double total = phi.deriv(slots[i].u, slots[i].at) * rec(i + 1);
    for (std::size_t j = i + 1; j < n; ++j) {
      if (used[j] || slots[j].owner == slots[i].owner) continue;
      used[j] = true;
      const double sign = slots[j].u.order() % 2 ? -1.0 : 1.0;
      const double prop = sign * propagator_deriv(slots[i].at - slots[j].at, m, slots[i].u + slots[j].u);
      total += prop * rec(i + 1);
      used[j] = false;
    }
    used[i] = false;
    return total;
  };
  return rec(0);
}

std::vector<MultiIndex> alphabet_upto2() {
  std::vector<MultiIndex> out;
  for (int a = 0; a <= 2; ++a)
    for (int b = 0; b <= 2; ++b)
      for (int c = 0; c <= 2; ++c)
        for (int d = 0; d <= 2; ++d)
          if (a + b + c + d <= 2) out.emplace_back(a, b, c, d);
  return out;
}

// All targets with at most `max_fields` factors, each of derivative order <= 2.
std::vector<CompositeOp> targets_upto(int max_fields) {
  const auto alpha = alphabet_upto2();
  std::vector<CompositeOp> out;
  std::vector<MultiIndex> cur;
  std::function<void(std::size_t)> rec = [&](std::size_t start) {
    out.emplace_back(cur);
    if (static_cast<int>(cur.size()) == max_fields) return;
    for (std::size_t i = start; i < alpha.size(); ++i) {
      cur.push_back(alpha[i]);
      rec(i);
      cur.pop_back();
    }
  };
  rec(0);
  return out;
}

double monomial_value(const CompositeOp& target, const QuadraticField& phi, const Vec4& base) {
  double v = 1.0;
  for (const auto& w : target.factors()) v *= phi.deriv(w, base);
  return v;
}

QuadraticField random_field(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1, 1);
  QuadraticField f{u(rng), {u(rng), u(rng), u(rng), u(rng)}, {}};
  for (int i = 0; i < 4; ++i)
    for (int j = i; j < 4; ++j) f.A[i][j] = f.A[j][i] = u(rng);
  return f;
}

}  // namespace

TEST_CASE("free two-point product") {
  const std::vector<CompositeOp> phiphi{op("phi"), op("phi")};
  CHECK(zeroth_order(phiphi, op("phi^2"), 1) == k(1));
  CHECK(zeroth_order(phiphi, CompositeOp::identity(), 1) == C(X1, X2));
  // phi(x1) = phi(x2) + (x1 - x2)^mu d_mu phi(x2) + ...
  const auto d1 = zeroth_order(phiphi, op("phi*d1phi"), 1);
  CHECK(d1 == CoeffExpr::from_factor(Factor::monomial(MultiIndex::unit(0), X1, X2)));
  CHECK(zeroth_order(phiphi, op("phi^4"), 1).is_zero());
}

TEST_CASE("worked examples with one interaction insertion") {
  const CompositeOp L = CompositeOp::interaction();
  {
    const std::vector<LabeledOp> ops{{L, Y}, {op("phi"), X1}, {op("phi"), X2}};
    CHECK(zeroth_order(ops, L, X2) == scale(C(X1, Y), 4) + scale(C(X2, Y), 4) + C(X1, X2));
    CHECK(zeroth_order(ops, op("phi^2"), X2) == scale(C(Y, X1) * C(Y, X2), 12));
  }
  {
    const std::vector<LabeledOp> ops{{L, Y}, {op("phi*d1phi"), X2}};
    CHECK(zeroth_order(ops, L, X2) == scale(C(X2, Y, MultiIndex::unit(0)), 4));
  }
  {
    const std::vector<LabeledOp> ops{{L, Y}, {op("phi^2"), X2}};
    CHECK(zeroth_order(ops, L, X2) == scale(C(X2, Y), 8));
  }
  {
    const std::vector<LabeledOp> ops{{L, Y}, {op("phi"), X1}, {op("phi^3"), X2}};
    const auto expect = scale(C(Y, X2) * C(Y, X2) * C(Y, X2), 24) +
                        scale(C(Y, X1) * C(Y, X2) * C(Y, X2), 72) +
                        scale(C(Y, X2) * C(Y, X2) * C(X1, X2), 36);
    CHECK(zeroth_order(ops, op("phi^2"), X2) == expect);
  }
  {
    const std::vector<LabeledOp> ops{{L, Y}, {op("phi^3"), X2}};
    CHECK(zeroth_order(ops, op("phi^3"), X2) == scale(C(Y, X2) * C(Y, X2), 36));
  }
}

TEST_CASE("counting rules") {
  CHECK(vanishes_by_counting({op("phi"), op("phi")}, op("phi^4")));
  CHECK(vanishes_by_counting({op("phi"), op("phi^2")}, op("phi^2")));  // parity
  CHECK_FALSE(vanishes_by_counting({op("phi"), op("phi")}, CompositeOp::identity()));
  // phi^4 with phi^0: four fields at one point cannot pair among themselves
  CHECK(vanishes_by_counting({op("phi^4"), CompositeOp::identity()}, CompositeOp::identity()));
  CHECK(vanishes_by_counting({op("phi^4"), op("phi^2")}, CompositeOp::identity()));
  CHECK_FALSE(vanishes_by_counting({op("phi^4"), op("phi^2")}, op("phi^2")));
  CHECK(zeroth_order({op("phi^4"), op("phi^2")}, CompositeOp::identity(), 1).is_zero());
}

TEST_CASE("contraction pattern enumeration counts") {
  const std::vector<LabeledOp> ops{{op("phi^4"), Y}, {op("phi"), X1}, {op("phi^3"), X2}};
  const auto slots = field_slots(ops);
  CHECK(slots.size() == 8);
  // 3 pairings: 24 (y-x2 x3) + 4*18 (x1-y) + 3*12 (x1-x2) = 132 patterns, plus
  // those pairing x1 with x2 and one y-x2, etc. Count by direct recursion.
  std::function<long(std::vector<bool>&, std::size_t, int)> count = [&](std::vector<bool>& used, std::size_t i,
                                                                         int left) -> long {
    if (left == 0) return 1;
    while (i < slots.size() && used[i]) ++i;
    if (i == slots.size()) return 0;
    long total = count(used, i + 1, left);
    used[i] = true;
    for (std::size_t j = i + 1; j < slots.size(); ++j) {
      if (used[j] || slots[j].owner == slots[i].owner) continue;
      used[j] = true;
      total += count(used, i + 1, left - 1);
      used[j] = false;
    }
    used[i] = false;
    return total;
  };
  for (int kpairs = 0; kpairs <= 4; ++kpairs) {
    std::vector<bool> used(slots.size(), false);
    CHECK(static_cast<long>(contraction_patterns(slots, kpairs).size()) == count(used, 0, kpairs));
  }
}

TEST_CASE("grouped enumeration agrees with the slot-level reference") {
  const std::vector<std::vector<LabeledOp>> cases{
      {{op("phi^4"), Y}, {op("phi"), X1}, {op("phi*d1phi"), X2}},
      {{op("phi^4"), Y}, {op("d2phi"), X1}, {op("d1phi^2"), X2}},
      {{op("phi^2"), Y}, {op("d1d1phi*phi"), X1}, {op("phi"), X2}},
      {{op("d3phi*phi^2"), X1}, {op("phi^3"), X2}},
  };
  for (const auto& ops : cases) {
    for (const auto& target : enumerate_operators(4)) {
      const auto fast = zeroth_order(ops, target, X2);
      const auto ref = zeroth_order_reference(ops, target, X2);
      CHECK_MESSAGE(fast == ref, format_operator(target) << ": " << to_string(fast) << " vs " << to_string(ref));
    }
  }
}

TEST_CASE("coefficients reassemble the Wick product of a classical field") {
  std::mt19937_64 rng(99);
  const double m = 0.9;
  const std::vector<std::vector<LabeledOp>> cases{
      {{op("phi"), X1}, {op("phi"), X2}},
      {{op("phi"), X1}, {op("phi*d1phi"), X2}},
      {{op("d2phi"), X1}, {op("phi^2"), X2}},
      {{op("phi^2"), Y}, {op("d1phi"), X1}, {op("phi"), X2}},
      {{op("d1phi^2"), X1}, {op("phi*d3phi"), X2}},
  };
  const Vec4 ypos{0.3, -0.2, 0.5, 0.1};
  const std::vector<Vec4> ext{{0.4, 0.25, -0.1, 0.2}, {-0.1, 0.05, 0.2, -0.3}};
  for (const auto& ops : cases) {
    const auto phi = random_field(rng);
    std::vector<Slot> slots;
    int fields = 0;
    for (std::size_t o = 0; o < ops.size(); ++o) {
      const Vec4 at = ops[o].at.is_y() ? ypos : ext[ops[o].at.index()];
      for (const auto& u : ops[o].op.factors()) slots.push_back({static_cast<int>(o), u, at});
      fields += ops[o].op.field_count();
    }
    const double lhs = brute_force_wick(slots, phi, m);
    double rhs = 0.0;
    for (const auto& target : targets_upto(fields)) {
      const auto coeff = zeroth_order(ops, target, X2);
      if (coeff.is_zero()) continue;
      rhs += eval(coeff, ext, ypos, m) * monomial_value(target, phi, ext[1]);
    }
    CHECK(rhs == doctest::Approx(lhs).epsilon(1e-11));
  }
}

TEST_CASE("permutation, translation and scaling covariance") {
  const std::vector<LabeledOp> ops{{op("phi^4"), Y}, {op("phi"), X1}, {op("phi^3"), X2}};
  const std::vector<LabeledOp> perm{{op("phi^3"), X2}, {op("phi^4"), Y}, {op("phi"), X1}};
  const std::vector<Vec4> ext{{0.4, 0.25, -0.1, 0.2}, {-0.1, 0.05, 0.2, -0.3}};
  const Vec4 ypos{0.3, -0.2, 0.5, 0.1};
  for (const char* t : {"phi^2", "phi*d1phi", "phi^4", "1"}) {
    const auto a = zeroth_order(ops, op(t), X2);
    CHECK(a == zeroth_order(perm, op(t), X2));
    const double v = eval(a, ext, ypos, 1.0);
    const Vec4 s{1.0, -2.0, 0.5, 3.0};
    const std::vector<Vec4> ext_s{ext[0] + s, ext[1] + s};
    CHECK(eval(a, ext_s, ypos + s, 1.0) == doctest::Approx(v).epsilon(1e-12));
    // x -> lambda x, m -> m / lambda: coefficient scales by lambda^([B] - sum [A])
    const double lambda = 1.7;
    const std::vector<Vec4> ext_l{lambda * ext[0], lambda * ext[1]};
    const int dim_gap = op(t).dimension() - (4 + 1 + 3);
    CHECK(eval(a, ext_l, lambda * ypos, 1.0 / lambda) == doctest::Approx(std::pow(lambda, dim_gap) * v).epsilon(1e-12));
  }
}
