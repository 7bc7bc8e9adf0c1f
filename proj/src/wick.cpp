#include "opeflow/wick.hpp"

#include <algorithm>
#include <functional>
#include <numeric>

namespace ope {

namespace {

Rational rational_factorial(int n) {
  Rational f = 1;
  for (int k = 2; k <= n; ++k) f *= k;
  return f;
}

Rational inverse_factorial(const MultiIndex& w) { return Rational(1) / Rational(w.factorial()); }

// Distinct target factor types and their multiplicities.
struct TargetTypes {
  std::vector<MultiIndex> type;
  std::vector<int> count;
};

TargetTypes target_types(const CompositeOp& target) {
  TargetTypes t;
  for (const auto& w : target.factors()) {
    if (!t.type.empty() && t.type.back() == w) {
      ++t.count.back();
    } else {
      t.type.push_back(w);
      t.count.push_back(1);
    }
  }
  return t;
}

struct PartialTerm {
  Rational weight;
  std::vector<Factor> factors;
};

struct SlotGroup {
  int owner;
  MultiIndex u;
  PointLabel at;
  int size;
};

std::vector<SlotGroup> slot_groups(const std::vector<LabeledOp>& ops) {
  std::vector<SlotGroup> groups;
  for (std::size_t i = 0; i < ops.size(); ++i) {
    const auto& f = ops[i].op.factors();
    for (std::size_t a = 0; a < f.size();) {
      std::size_t b = a;
      while (b < f.size() && f[b] == f[a]) ++b;
      groups.push_back({static_cast<int>(i), f[a], ops[i].at, static_cast<int>(b - a)});
      a = b;
    }
  }
  return groups;
}

// Taylor matching of leftover groups against the target monomial.
// Each element of `left` is (group, number of leftover slots in it).
void match_leftovers(const std::vector<std::pair<const SlotGroup*, int>>& left, std::size_t gi,
                     const TargetTypes& tt, std::vector<int>& remaining, PointLabel base,
                     PartialTerm current, std::vector<PartialTerm>& out) {
  if (gi == left.size()) {
    if (std::all_of(remaining.begin(), remaining.end(), [](int r) { return r == 0; })) {
      out.push_back(std::move(current));
    }
    return;
  }
  const SlotGroup& g = *left[gi].first;
  const int ell = left[gi].second;

  // distribute `ell` identical slots over admissible target types
  std::vector<int> take(tt.type.size(), 0);
  std::function<void(std::size_t, int)> rec = [&](std::size_t ti, int still) {
    if (ti == tt.type.size()) {
      if (still != 0) return;
      PartialTerm next = current;
      next.weight *= rational_factorial(ell);
      MultiIndex shift{};
      for (std::size_t t = 0; t < take.size(); ++t) {
        if (take[t] == 0) continue;
        const MultiIndex v = tt.type[t] - g.u;
        next.weight /= rational_factorial(take[t]);
        const Rational inv = inverse_factorial(v);
        for (int k = 0; k < take[t]; ++k) {
          next.weight *= inv;
          shift = shift + v;
        }
      }
      if (!shift.is_zero()) next.factors.push_back(Factor::monomial(shift, g.at, base));
      match_leftovers(left, gi + 1, tt, remaining, base, std::move(next), out);
      return;
    }
    const MultiIndex& type = tt.type[ti];
    const bool admissible = g.at == base ? type == g.u : g.u.leq(type);
    const int cap = admissible ? std::min(still, remaining[ti]) : 0;
    for (int c = 0; c <= cap; ++c) {
      take[ti] = c;
      remaining[ti] -= c;
      rec(ti + 1, still - c);
      remaining[ti] += c;
    }
    take[ti] = 0;
  };
  rec(0, ell);
}

Factor contraction_factor(const MultiIndex& u, PointLabel a, const MultiIndex& v, PointLabel b,
                          Rational& weight) {
  // <d^u phi(x_a) d^v phi(x_b)> = (-1)^{|v|} (d^{u+v} C)(x_a - x_b)
  if (v.order() % 2 != 0) weight = -weight;
  return Factor::prop(u + v, a, b);
}

}  // namespace

std::vector<FieldSlot> field_slots(const std::vector<LabeledOp>& ops) {
  std::vector<FieldSlot> slots;
  for (std::size_t i = 0; i < ops.size(); ++i) {
    for (const auto& u : ops[i].op.factors()) slots.push_back({static_cast<int>(i), u, ops[i].at});
  }
  return slots;
}

std::vector<ContractionPattern> contraction_patterns(const std::vector<FieldSlot>& slots, int k) {
  std::vector<ContractionPattern> out;
  const int n = static_cast<int>(slots.size());
  if (k < 0 || 2 * k > n) return out;
  std::vector<bool> used(static_cast<std::size_t>(n), false);
  ContractionPattern cur;
  std::function<void(int, int)> rec = [&](int first, int pairs_left) {
    int i = first;
    while (i < n && used[static_cast<std::size_t>(i)]) ++i;
    const int free_slots = static_cast<int>(std::count(used.begin() + i, used.end(), false));
    if (pairs_left == 0) {
      ContractionPattern p = cur;
      for (int j = i; j < n; ++j)
        if (!used[static_cast<std::size_t>(j)]) p.leftover.push_back(j);
      out.push_back(std::move(p));
      return;
    }
    if (free_slots < 2 * pairs_left) return;
    // slot i stays uncontracted
    used[static_cast<std::size_t>(i)] = true;
    cur.leftover.push_back(i);
    rec(i + 1, pairs_left);
    cur.leftover.pop_back();
    // slot i pairs with a later free slot of another operator
    for (int j = i + 1; j < n; ++j) {
      if (used[static_cast<std::size_t>(j)] || slots[static_cast<std::size_t>(j)].owner ==
                                                   slots[static_cast<std::size_t>(i)].owner) {
        continue;
      }
      used[static_cast<std::size_t>(j)] = true;
      cur.pairs.emplace_back(i, j);
      rec(i + 1, pairs_left - 1);
      cur.pairs.pop_back();
      used[static_cast<std::size_t>(j)] = false;
    }
    used[static_cast<std::size_t>(i)] = false;
  };
  rec(0, k);
  return out;
}

bool vanishes_by_counting(const std::vector<CompositeOp>& ops, const CompositeOp& target) {
  std::vector<int> n;
  int total = 0;
  for (const auto& op : ops) {
    n.push_back(op.field_count());
    total += op.field_count();
  }
  const int nt = target.field_count();
  if (total < nt || (total - nt) % 2 != 0) return true;

  // search leftover vectors l (0 <= l_i <= n_i, sum l = nt) such that the
  // contracted counts c = n - l admit a loopless multigraph: max c <= sum c / 2
  std::vector<int> l(n.size(), 0);
  std::function<bool(std::size_t, int)> feasible = [&](std::size_t i, int still) -> bool {
    if (i == n.size()) {
      if (still != 0) return false;
      int sum = 0, mx = 0;
      for (std::size_t j = 0; j < n.size(); ++j) {
        const int c = n[j] - l[j];
        sum += c;
        mx = std::max(mx, c);
      }
      return 2 * mx <= sum;
    }
    for (int v = 0; v <= std::min(n[i], still); ++v) {
      l[i] = v;
      if (feasible(i + 1, still - v)) return true;
    }
    l[i] = 0;
    return false;
  };
  return !feasible(0, nt);
}

CoeffExpr zeroth_order(const std::vector<LabeledOp>& ops, const CompositeOp& target, PointLabel base) {
  std::vector<CompositeOp> plain;
  for (const auto& o : ops) plain.push_back(o.op);
  if (vanishes_by_counting(plain, target)) return {};

  int total = 0;
  for (const auto& o : ops) total += o.op.field_count();
  const int k_total = (total - target.field_count()) / 2;

  const auto groups = slot_groups(ops);
  std::vector<std::pair<std::size_t, std::size_t>> pair_list;
  for (std::size_t g = 0; g < groups.size(); ++g)
    for (std::size_t h = g + 1; h < groups.size(); ++h)
      if (groups[g].owner != groups[h].owner) pair_list.emplace_back(g, h);

  const TargetTypes tt = target_types(target);
  std::vector<int> remaining_target = tt.count;
  std::vector<int> rem(groups.size());
  for (std::size_t g = 0; g < groups.size(); ++g) rem[g] = groups[g].size;
  std::vector<int> counts(pair_list.size(), 0);
  std::vector<Term> terms;

  auto emit = [&] {
    PartialTerm base_term{1, {}};
    for (std::size_t g = 0; g < groups.size(); ++g) {
      base_term.weight *= rational_factorial(groups[g].size) / rational_factorial(rem[g]);
    }
    for (std::size_t p = 0; p < pair_list.size(); ++p) {
      const int c = counts[p];
      if (c == 0) continue;
      const auto& g = groups[pair_list[p].first];
      const auto& h = groups[pair_list[p].second];
      base_term.weight /= rational_factorial(c);
      for (int r = 0; r < c; ++r) {
        base_term.factors.push_back(contraction_factor(g.u, g.at, h.u, h.at, base_term.weight));
      }
    }
    std::vector<std::pair<const SlotGroup*, int>> left;
    for (std::size_t g = 0; g < groups.size(); ++g)
      if (rem[g] > 0) left.emplace_back(&groups[g], rem[g]);
    std::vector<PartialTerm> matched;
    match_leftovers(left, 0, tt, remaining_target, base, std::move(base_term), matched);
    for (auto& m : matched) terms.push_back(Term{std::move(m.weight), 0, 0, std::move(m.factors)});
  };

  std::function<void(std::size_t, int)> rec = [&](std::size_t p, int k_left) {
    if (p == pair_list.size()) {
      if (k_left == 0) emit();
      return;
    }
    const auto [g, h] = pair_list[p];
    const int cap = std::min({rem[g], rem[h], k_left});
    for (int c = 0; c <= cap; ++c) {
      counts[p] = c;
      rem[g] -= c;
      rem[h] -= c;
      rec(p + 1, k_left - c);
      rem[g] += c;
      rem[h] += c;
    }
    counts[p] = 0;
  };
  rec(0, k_total);
  return CoeffExpr::from_terms(std::move(terms));
}

CoeffExpr zeroth_order(const std::vector<CompositeOp>& ops, const CompositeOp& target,
                       std::size_t base_index) {
  std::vector<LabeledOp> labeled;
  for (std::size_t i = 0; i < ops.size(); ++i) {
    labeled.push_back({ops[i], PointLabel::ext(static_cast<int>(i))});
  }
  return zeroth_order(labeled, target, PointLabel::ext(static_cast<int>(base_index)));
}

CoeffExpr zeroth_order_reference(const std::vector<LabeledOp>& ops, const CompositeOp& target,
                                 PointLabel base) {
  const auto slots = field_slots(ops);
  const int total = static_cast<int>(slots.size());
  const int nt = target.field_count();
  if (total < nt || (total - nt) % 2 != 0) return {};
  const TargetTypes tt = target_types(target);

  std::vector<Term> terms;
  for (const auto& pattern : contraction_patterns(slots, (total - nt) / 2)) {
    Term base_term{1, 0, 0, {}};
    for (const auto& [i, j] : pattern.pairs) {
      const auto& a = slots[static_cast<std::size_t>(i)];
      const auto& b = slots[static_cast<std::size_t>(j)];
      base_term.factors.push_back(contraction_factor(a.u, a.at, b.u, b.at, base_term.weight));
    }
    // assign each leftover slot to a target type, respecting multiplicities
    std::vector<int> remaining = tt.count;
    std::function<void(std::size_t, Term)> assign = [&](std::size_t s, Term t) {
      if (s == pattern.leftover.size()) {
        terms.push_back(std::move(t));
        return;
      }
      const auto& slot = slots[static_cast<std::size_t>(pattern.leftover[s])];
      for (std::size_t ti = 0; ti < tt.type.size(); ++ti) {
        if (remaining[ti] == 0) continue;
        const MultiIndex& type = tt.type[ti];
        if (slot.at == base ? !(type == slot.u) : !slot.u.leq(type)) continue;
        const MultiIndex v = type - slot.u;
        Term next = t;
        next.weight *= inverse_factorial(v);
        next.factors.push_back(Factor::monomial(v, slot.at, base));
        --remaining[ti];
        assign(s + 1, std::move(next));
        ++remaining[ti];
      }
    };
    assign(0, base_term);
  }
  return CoeffExpr::from_terms(std::move(terms));
}

}  // namespace ope
