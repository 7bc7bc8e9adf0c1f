#include "opeflow/expr.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <sstream>

#include "opeflow/specfun.hpp"

namespace ope {

std::string format_label(PointLabel p) {
  return p.is_y() ? std::string("y") : "x" + std::to_string(p.index() + 1);
}

std::strong_ordering operator<=>(const Factor& l, const Factor& r) {
  if (auto o = static_cast<int>(l.kind) <=> static_cast<int>(r.kind); o != 0) return o;
  if (auto o = l.a <=> r.a; o != 0) return o;
  if (auto o = l.b <=> r.b; o != 0) return o;
  return l.w <=> r.w;
}

bool Term::depends_on(PointLabel p) const {
  return std::any_of(factors.begin(), factors.end(), [&](const Factor& f) { return f.involves(p); });
}

namespace {

struct TermKey {
  int pi_power;
  int mass_power;
  std::vector<Factor> factors;

  friend auto operator<=>(const TermKey&, const TermKey&) = default;
};

// Orients every factor, merges monomials over the same pair, sorts.
// Returns false if the term vanishes identically.
bool canonicalize(Term& t) {
  std::vector<Factor> out;
  out.reserve(t.factors.size());
  for (Factor f : t.factors) {
    if (f.a == f.b) {
      if (f.kind == FactorKind::Monomial) {
        if (f.w.is_zero()) continue;
        return false;
      }
      throw std::invalid_argument("factor " + to_string(f) + " has coincident arguments");
    }
    if (f.kind == FactorKind::Monomial && f.w.is_zero()) continue;
    if (f.b < f.a) {
      std::swap(f.a, f.b);
      if (f.kind != FactorKind::BesselK0 && f.w.order() % 2 != 0) t.weight = -t.weight;
    }
    out.push_back(f);
  }
  std::sort(out.begin(), out.end());
  std::vector<Factor> merged;
  merged.reserve(out.size());
  for (const auto& f : out) {
    if (!merged.empty() && f.kind == FactorKind::Monomial && merged.back().kind == FactorKind::Monomial &&
        merged.back().a == f.a && merged.back().b == f.b) {
      merged.back().w = merged.back().w + f.w;
    } else {
      merged.push_back(f);
    }
  }
  std::sort(merged.begin(), merged.end());
  t.factors = std::move(merged);
  return t.weight != 0;
}

CoeffExpr from_map(std::map<TermKey, Rational>&& m) {
  std::vector<Term> terms;
  terms.reserve(m.size());
  for (auto& [key, w] : m) {
    if (w == 0) continue;
    terms.push_back(Term{w, key.pi_power, key.mass_power, key.factors});
  }
  // terms are already canonical and sorted by key
  return CoeffExpr::from_terms(std::move(terms));
}

void accumulate(std::map<TermKey, Rational>& acc, const Term& t) {
  auto& slot = acc[TermKey{t.pi_power, t.mass_power, t.factors}];
  slot += t.weight;
}

}  // namespace

CoeffExpr CoeffExpr::constant(const Rational& q) {
  if (q == 0) return {};
  return from_terms({Term{q, 0, 0, {}}});
}

CoeffExpr CoeffExpr::from_factor(const Factor& f, const Rational& weight) {
  return from_terms({Term{weight, 0, 0, {f}}});
}

CoeffExpr CoeffExpr::from_terms(std::vector<Term> terms) {
  std::map<TermKey, Rational> acc;
  for (auto& t : terms) {
    if (!canonicalize(t)) continue;
    accumulate(acc, t);
  }
  CoeffExpr e;
  for (auto& [key, w] : acc) {
    if (w == 0) continue;
    e.terms_.push_back(Term{w, key.pi_power, key.mass_power, key.factors});
  }
  return e;
}

bool CoeffExpr::depends_on(PointLabel p) const {
  return std::any_of(terms_.begin(), terms_.end(), [&](const Term& t) { return t.depends_on(p); });
}

int CoeffExpr::max_external_index() const {
  int mx = -1;
  for (const auto& t : terms_)
    for (const auto& f : t.factors) mx = std::max({mx, f.a.id, f.b.id});
  return mx;
}

CoeffExpr CoeffExpr::filter(PointLabel p, bool depending) const {
  CoeffExpr e;
  for (const auto& t : terms_) {
    if (t.depends_on(p) == depending) e.terms_.push_back(t);
  }
  return e;
}

CoeffExpr CoeffExpr::relabeled(std::span<const PointLabel> ext_map, std::optional<PointLabel> y_map) const {
  std::vector<Term> terms = terms_;
  for (auto& t : terms) {
    for (auto& f : t.factors) {
      for (PointLabel* p : {&f.a, &f.b}) {
        if (p->is_y()) {
          if (y_map) *p = *y_map;
          continue;
        }
        if (static_cast<std::size_t>(p->index()) >= ext_map.size()) {
          throw std::out_of_range("relabel map does not cover " + format_label(*p));
        }
        *p = ext_map[static_cast<std::size_t>(p->index())];
      }
    }
  }
  return from_terms(std::move(terms));
}

CoeffExpr add(const CoeffExpr& e1, const CoeffExpr& e2) {
  std::map<TermKey, Rational> acc;
  for (const auto& t : e1.terms()) accumulate(acc, t);
  for (const auto& t : e2.terms()) accumulate(acc, t);
  return from_map(std::move(acc));
}

CoeffExpr scale(const CoeffExpr& e, const Rational& q) {
  if (q == 0) return {};
  std::vector<Term> terms = e.terms();
  for (auto& t : terms) t.weight *= q;
  return CoeffExpr::from_terms(std::move(terms));
}

CoeffExpr sub(const CoeffExpr& e1, const CoeffExpr& e2) { return add(e1, scale(e2, -1)); }

CoeffExpr multiply(const CoeffExpr& e1, const CoeffExpr& e2) {
  std::vector<Term> terms;
  terms.reserve(e1.size() * e2.size());
  for (const auto& a : e1.terms()) {
    for (const auto& b : e2.terms()) {
      Term t{a.weight * b.weight, a.pi_power + b.pi_power, a.mass_power + b.mass_power, a.factors};
      t.factors.insert(t.factors.end(), b.factors.begin(), b.factors.end());
      terms.push_back(std::move(t));
    }
  }
  return CoeffExpr::from_terms(std::move(terms));
}

CoeffExpr operator+(const CoeffExpr& a, const CoeffExpr& b) { return add(a, b); }
CoeffExpr operator-(const CoeffExpr& a, const CoeffExpr& b) { return sub(a, b); }
CoeffExpr operator*(const CoeffExpr& a, const CoeffExpr& b) { return multiply(a, b); }

std::string to_string(const Factor& f) {
  const std::string arg = "(" + format_label(f.a) + "-" + format_label(f.b) + ")";
  switch (f.kind) {
    case FactorKind::PropDeriv:
      return (f.w.is_zero() ? std::string("C") : format_multi_index(f.w) + "C") + arg;
    case FactorKind::Monomial:
      return arg + "^[" + std::to_string(f.w[0]) + "," + std::to_string(f.w[1]) + "," +
             std::to_string(f.w[2]) + "," + std::to_string(f.w[3]) + "]";
    case FactorKind::BesselK0:
      return "K0(m|" + format_label(f.a) + "-" + format_label(f.b) + "|)";
  }
  return "?";
}

std::string to_string(const CoeffExpr& e) {
  if (e.is_zero()) return "0";
  std::ostringstream os;
  bool first = true;
  for (const auto& t : e.terms()) {
    const bool negative = t.weight < 0;
    const Rational mag = negative ? Rational(-t.weight) : t.weight;
    if (first) {
      os << (negative ? "-" : "");
    } else {
      os << (negative ? " - " : " + ");
    }
    first = false;
    os << numerator(mag);
    if (denominator(mag) != 1) os << "/" << denominator(mag);
    if (t.pi_power != 0) os << "*pi^" << t.pi_power;
    if (t.mass_power != 0) os << "*m^" << t.mass_power;
    for (std::size_t i = 0; i < t.factors.size();) {
      std::size_t j = i;
      while (j < t.factors.size() && t.factors[j] == t.factors[i]) ++j;
      os << "*" << to_string(t.factors[i]);
      if (j - i > 1) os << "^" << (j - i);
      i = j;
    }
  }
  return os.str();
}

namespace {

const Vec4& resolve(PointLabel p, std::span<const Vec4> ext, const Vec4* y) {
  if (p.is_y()) {
    if (y == nullptr) throw EvalError("expression depends on y but no y was supplied");
    return *y;
  }
  if (static_cast<std::size_t>(p.index()) >= ext.size()) {
    throw EvalError("unresolved point label " + format_label(p));
  }
  return ext[static_cast<std::size_t>(p.index())];
}

double eval_factor(const Factor& f, std::span<const Vec4> ext, const Vec4* y, double m) {
  const Vec4 d = resolve(f.a, ext, y) - resolve(f.b, ext, y);
  switch (f.kind) {
    case FactorKind::PropDeriv:
      if (!(norm(d) > 0.0)) {
        throw EvalError("zero separation in " + to_string(f));
      }
      return propagator_deriv(d, m, f.w);
    case FactorKind::Monomial: {
      double v = 1.0;
      for (int mu = 0; mu < kSpacetimeDim; ++mu)
        for (int k = 0; k < f.w[mu]; ++k) v *= d[mu];
      return v;
    }
    case FactorKind::BesselK0:
      if (!(norm(d) > 0.0)) throw EvalError("zero separation in " + to_string(f));
      return bessel_k0(m * norm(d));
  }
  return 0.0;
}

double prefactor(const Term& t, double m) {
  return t.weight.convert_to<double>() * std::pow(kPi, t.pi_power) * std::pow(m, t.mass_power);
}

}  // namespace

double eval(const CoeffExpr& e, std::span<const Vec4> ext, const std::optional<Vec4>& y, double m) {
  return CompiledExpr(e, m)(ext, y ? &*y : nullptr);
}

CompiledExpr::CompiledExpr(const CoeffExpr& e, double m) : mass_(m) {
  for (const auto& t : e.terms()) {
    FlatTerm ft{prefactor(t, m), {}};
    for (std::size_t i = 0; i < t.factors.size();) {
      std::size_t j = i;
      while (j < t.factors.size() && t.factors[j] == t.factors[i]) ++j;
      auto it = std::find(unique_.begin(), unique_.end(), t.factors[i]);
      const int idx = static_cast<int>(it - unique_.begin());
      if (it == unique_.end()) unique_.push_back(t.factors[i]);
      ft.factors.emplace_back(idx, static_cast<int>(j - i));
      i = j;
    }
    terms_.push_back(std::move(ft));
  }
}

double CompiledExpr::operator()(std::span<const Vec4> ext, const Vec4* y) const {
  if (terms_.empty()) return 0.0;
  constexpr std::size_t kInline = 64;
  std::array<double, kInline> inline_values{};
  std::vector<double> heap_values;
  double* values = inline_values.data();
  if (unique_.size() > kInline) {
    heap_values.resize(unique_.size());
    values = heap_values.data();
  }
  for (std::size_t i = 0; i < unique_.size(); ++i) values[i] = eval_factor(unique_[i], ext, y, mass_);
  double total = 0.0;
  for (const auto& t : terms_) {
    double v = t.weight;
    for (const auto& [idx, mult] : t.factors) {
      const double f = values[static_cast<std::size_t>(idx)];
      for (int k = 0; k < mult; ++k) v *= f;
    }
    total += v;
  }
  return total;
}

BoundExpr CompiledExpr::bind(std::span<const Vec4> ext) const {
  BoundExpr b;
  b.mass_ = mass_;
  std::vector<int> yindex(unique_.size(), -1);
  std::vector<double> fixed(unique_.size(), 0.0);
  for (std::size_t i = 0; i < unique_.size(); ++i) {
    const Factor& f = unique_[i];
    if (f.a.is_y() || f.b.is_y()) {
      if (f.a.is_y() && f.b.is_y()) throw EvalError("factor joins y with itself");
      const bool y_first = f.a.is_y();
      const Vec4 other = resolve(y_first ? f.b : f.a, ext, nullptr);
      yindex[i] = static_cast<int>(b.yfactors_.size());
      b.yfactors_.push_back({f.kind, f.w, other, y_first});
    } else {
      fixed[i] = eval_factor(f, ext, nullptr, mass_);
    }
  }
  for (const auto& t : terms_) {
    BoundExpr::FlatTerm bt{t.weight, {}};
    for (const auto& [idx, mult] : t.factors) {
      const auto k = static_cast<std::size_t>(idx);
      if (yindex[k] >= 0) {
        bt.factors.emplace_back(yindex[k], mult);
      } else {
        for (int j = 0; j < mult; ++j) bt.weight *= fixed[k];
      }
    }
    if (bt.weight != 0.0) b.terms_.push_back(std::move(bt));
  }
  return b;
}

double BoundExpr::operator()(const Vec4& y) const {
  if (terms_.empty()) return 0.0;
  constexpr std::size_t kInline = 64;
  std::array<double, kInline> inline_values{};
  std::vector<double> heap_values;
  double* values = inline_values.data();
  if (yfactors_.size() > kInline) {
    heap_values.resize(yfactors_.size());
    values = heap_values.data();
  }
  for (std::size_t i = 0; i < yfactors_.size(); ++i) {
    const YFactor& f = yfactors_[i];
    const Vec4 d = f.y_first ? y - f.other : f.other - y;
    switch (f.kind) {
      case FactorKind::PropDeriv:
        if (!(norm(d) > 0.0)) throw EvalError("zero separation between y and an external point");
        values[i] = propagator_deriv(d, mass_, f.w);
        break;
      case FactorKind::Monomial: {
        double v = 1.0;
        for (int mu = 0; mu < kSpacetimeDim; ++mu)
          for (int k = 0; k < f.w[mu]; ++k) v *= d[mu];
        values[i] = v;
        break;
      }
      case FactorKind::BesselK0:
        if (!(norm(d) > 0.0)) throw EvalError("zero separation between y and an external point");
        values[i] = bessel_k0(mass_ * norm(d));
        break;
    }
  }
  double total = 0.0;
  for (const auto& t : terms_) {
    double v = t.weight;
    for (const auto& [idx, mult] : t.factors) {
      const double f = values[static_cast<std::size_t>(idx)];
      for (int k = 0; k < mult; ++k) v *= f;
    }
    total += v;
  }
  return total;
}

DivergenceError::DivergenceError(const std::string& msg, CoeffExpr residue)
    : std::runtime_error(msg), residue_(std::move(residue)) {}

std::optional<CoeffExpr> integrate_y_symbolic(const CoeffExpr& e) {
  const PointLabel y = PointLabel::y();
  const CoeffExpr constant_part = e.filter(y, false);
  if (!constant_part.is_zero()) {
    throw DivergenceError("y-independent terms survive cancellation: " + to_string(constant_part),
                          constant_part);
  }
  std::vector<Term> out;
  for (const auto& t : e.terms()) {
    std::vector<Factor> ydep;
    Term rest{t.weight, t.pi_power, t.mass_power, {}};
    for (const auto& f : t.factors) {
      (f.involves(y) ? ydep : rest.factors).push_back(f);
    }
    const bool all_props = std::all_of(ydep.begin(), ydep.end(),
                                       [](const Factor& f) { return f.kind == FactorKind::PropDeriv; });
    if (!all_props) return std::nullopt;
    if (ydep.size() == 1) {
      // int d^w C(y - a) = (i p)^w / (p^2 + m^2) at p = 0
      if (!ydep[0].w.is_zero()) continue;
      rest.mass_power -= 2;
      out.push_back(std::move(rest));
    } else if (ydep.size() == 2) {
      const auto& f1 = ydep[0];
      const auto& f2 = ydep[1];
      if (!f1.w.is_zero() || !f2.w.is_zero()) return std::nullopt;
      const PointLabel a = f1.a == y ? f1.b : f1.a;
      const PointLabel b = f2.a == y ? f2.b : f2.a;
      if (a == b) return std::nullopt;  // C(y-a)^2 is not integrable
      rest.weight /= 8;
      rest.pi_power -= 2;
      rest.factors.push_back(Factor::bessel_k0(a, b));
      out.push_back(std::move(rest));
    } else {
      return std::nullopt;
    }
  }
  return CoeffExpr::from_terms(std::move(out));
}

}  // namespace ope
