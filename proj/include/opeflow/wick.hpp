#pragma once

// Zeroth-order (free field) OPE coefficients from Wick contractions of
// normal-ordered monomials followed by Taylor matching at the base point.
//
// Basis convention: the coefficient of O_B is the coefficient of the
// monomial O_B in the Taylor-expanded normal-ordered product, viewed as a
// commutative polynomial in the fields d^w phi(x_base). This gives
// (C0)_{phi phi}^{phi^2} = 1 and is consistent for repeated factors such as
// (d1 phi)^2: sum_C C^C O_C reproduces the product exactly.

#include <vector>

#include "opeflow/core.hpp"
#include "opeflow/expr.hpp"

namespace ope {

struct LabeledOp {
  CompositeOp op;
  PointLabel at;
};

/// One field slot d^u phi(x_at) of operator `owner`.
struct FieldSlot {
  int owner;
  MultiIndex u;
  PointLabel at;
};

/// A set of cross-operator pairings together with the uncontracted slots.
struct ContractionPattern {
  std::vector<std::pair<int, int>> pairs;  // indices into the slot list
  std::vector<int> leftover;
};

std::vector<FieldSlot> field_slots(const std::vector<LabeledOp>& ops);

/// Every slot-level contraction pattern with exactly `k` pairs; no pair
/// joins two slots of the same operator.
std::vector<ContractionPattern> contraction_patterns(const std::vector<FieldSlot>& slots, int k);

/// True iff field counting alone (with parity and realizability of the
/// cross-contractions) forces the zeroth-order coefficient to vanish.
bool vanishes_by_counting(const std::vector<CompositeOp>& ops, const CompositeOp& target);

/// (C0)_{ops}^{target} with Taylor expansion about `base`.
CoeffExpr zeroth_order(const std::vector<LabeledOp>& ops, const CompositeOp& target, PointLabel base);

/// Convenience: operators at ext(0..N-1), base = ext(base_index).
CoeffExpr zeroth_order(const std::vector<CompositeOp>& ops, const CompositeOp& target,
                       std::size_t base_index);

/// Slot-by-slot reference implementation (no symmetry factors); kept for
/// cross-checking the grouped enumeration.
CoeffExpr zeroth_order_reference(const std::vector<LabeledOp>& ops, const CompositeOp& target,
                                 PointLabel base);

}  // namespace ope
