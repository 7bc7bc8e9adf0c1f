#include "opeflow/deform.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <mutex>
#include <sstream>

namespace ope {

namespace {

const PointLabel kY = PointLabel::y();

const std::vector<CompositeOp>& operators_upto(int dim) {
  static std::mutex mu;
  static std::map<int, std::vector<CompositeOp>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(dim);
  if (it == cache.end()) it = cache.emplace(dim, enumerate_operators(dim)).first;
  return it->second;
}

// Zeroth-order coefficients memoized on (ops, target, base index) in standard
// labels ext(0..k-1), then moved to the requested labels.
CoeffExpr wick(const std::vector<LabeledOp>& ops, const CompositeOp& target, PointLabel base) {
  struct Key {
    std::vector<CompositeOp> ops;
    CompositeOp target;
    std::size_t base;
    auto operator<=>(const Key&) const = default;
  };
  static std::mutex mu;
  static std::map<Key, CoeffExpr> cache;

  Key key{{}, target, 0};
  std::vector<PointLabel> labels;
  bool found = false;
  for (std::size_t i = 0; i < ops.size(); ++i) {
    key.ops.push_back(ops[i].op);
    labels.push_back(ops[i].at);
    if (ops[i].at == base) {
      key.base = i;
      found = true;
    }
  }
  if (!found) throw std::invalid_argument("base label is not carried by any operator");

  CoeffExpr standard;
  bool cached = false;
  {
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(key);
    if (it != cache.end()) {
      standard = it->second;
      cached = true;
    }
  }
  if (!cached) {
    standard = zeroth_order(key.ops, target, key.base);
    std::lock_guard<std::mutex> lock(mu);
    cache.emplace(key, standard);
  }
  if (standard.is_zero()) return {};
  return standard.relabeled(labels);
}

bool odd_parity(const std::vector<CompositeOp>& ops, const CompositeOp& target) {
  int n = target.field_count();
  for (const auto& o : ops) n += o.field_count();
  return n % 2 != 0;
}

std::vector<CompositeOp> ops_of(const std::vector<LabeledOp>& ops) {
  std::vector<CompositeOp> out;
  for (const auto& o : ops) out.push_back(o.op);
  return out;
}

std::string describe(const std::vector<CompositeOp>& ops, const CompositeOp& target, int order) {
  return format_key(CoeffKey{ops, target, order});
}

void check_cap(const std::vector<CompositeOp>& ops, const CompositeOp& target, int cap) {
  for (const auto& o : ops)
    if (o.dimension() > cap)
      throw BasisCapError("operator " + format_operator(o) + " has dimension " + std::to_string(o.dimension()) +
                          " above the basis cap " + std::to_string(cap));
  if (target.dimension() - 1 > cap)
    throw BasisCapError("target " + format_operator(target) + " needs the basis up to dimension " +
                        std::to_string(target.dimension() - 1) + ", above the cap " + std::to_string(cap));
}

std::vector<PointLabel> standard_labels(std::size_t n) {
  std::vector<PointLabel> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(PointLabel::ext(static_cast<int>(i)));
  return out;
}

std::vector<LabeledOp> label_ops(const std::vector<CompositeOp>& ops) {
  std::vector<LabeledOp> out;
  for (std::size_t i = 0; i < ops.size(); ++i) out.push_back({ops[i], PointLabel::ext(static_cast<int>(i))});
  return out;
}

// Terms that neither depend on y nor decay in y make the integral diverge.
void require_cancellation(const CoeffExpr& bracket, const std::string& what) {
  const CoeffExpr constant = bracket.filter(kY, false);
  if (!constant.is_zero()) {
    throw DivergenceError("y-independent terms survive in the bracket of " + what + ": " + to_string(constant),
                          constant);
  }
  std::vector<Term> growing;
  for (const auto& t : bracket.terms()) {
    const bool has_prop = std::any_of(t.factors.begin(), t.factors.end(), [](const Factor& f) {
      return f.involves(kY) && f.kind != FactorKind::Monomial;
    });
    if (!has_prop) growing.push_back(t);
  }
  if (!growing.empty()) {
    auto residue = CoeffExpr::from_terms(growing);
    throw DivergenceError("terms without a propagator to y survive in the bracket of " + what + ": " +
                              to_string(residue),
                          residue);
  }
}

// Order-1 entries at the configuration itself that the order-2 bracket needs.
std::vector<CoeffKey> order_one_requirements(const std::vector<CompositeOp>& ops, const CompositeOp& target,
                                             int cap) {
  std::vector<CoeffKey> keys;
  const CompositeOp L = CompositeOp::interaction();
  const auto labeled = label_ops(ops);
  const PointLabel base = labeled.back().at;
  for (std::size_t i = 0; i < ops.size(); ++i) {
    for (const auto& C : operators_upto(ops[i].dimension())) {
      auto replaced = ops;
      replaced[i] = C;
      if (odd_parity(replaced, target)) continue;
      const std::vector<LabeledOp> pair{{L, kY}, {ops[i], labeled[i].at}};
      if (wick(pair, C, labeled[i].at).is_zero()) continue;
      keys.push_back({replaced, target, 1});
    }
  }
  for (const auto& C : operators_upto(target.dimension() - 1)) {
    if (C.dimension() >= target.dimension()) continue;
    if (odd_parity(ops, C)) continue;
    const std::vector<LabeledOp> pair{{L, kY}, {C, base}};
    if (wick(pair, target, base).is_zero()) continue;
    keys.push_back({ops, C, 1});
  }
  (void)cap;
  return keys;
}

std::uint64_t mix(std::uint64_t h, std::uint64_t v) {
  h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  h *= 0xff51afd7ed558ccdULL;
  return h ^ (h >> 33);
}

std::vector<std::string> point_names(std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back("x" + std::to_string(i + 1));
  return out;
}

NumericCoeff scaled_result(NumericCoeff r, double q) {
  for (auto& rc : r.breakdown) {
    rc.value *= q;
    rc.abs_error *= std::abs(q);
  }
  double v = 0.0;
  for (const auto& rc : r.breakdown) v += rc.value;
  r.value = v;
  r.abs_error *= std::abs(q);
  r.abs_mass *= std::abs(q);
  return r;
}

}  // namespace

Method parse_method(const std::string& s) {
  if (s == "symbolic") return Method::symbolic;
  if (s == "numeric") return Method::numeric;
  if (s == "auto" || s == "automatic") return Method::automatic;
  throw std::invalid_argument("unknown method '" + s + "' (expected symbolic, numeric or auto)");
}

std::string to_string(Method m) {
  switch (m) {
    case Method::symbolic:
      return "symbolic";
    case Method::numeric:
      return "numeric";
    default:
      return "auto";
  }
}

std::string format_key(const CoeffKey& k) {
  std::ostringstream os;
  os << "(C" << k.order << ")_{";
  for (std::size_t i = 0; i < k.ops.size(); ++i) os << (i ? " " : "") << format_operator(k.ops[i]);
  os << "}^{" << format_operator(k.target) << "}";
  return os.str();
}

CoeffTable::CoeffTable(PointConfig points, double mass) : points_(std::move(points)), mass_(mass) {
  ModelParams check(mass);
  (void)check;
}

const CoeffEntry* CoeffTable::find(const CoeffKey& k) const {
  auto it = entries_.find(k);
  return it == entries_.end() ? nullptr : &it->second;
}

void CoeffTable::insert(const CoeffKey& k, CoeffEntry e) {
  if (!entries_.emplace(k, std::move(e)).second)
    throw std::logic_error("table entry " + format_key(k) + " is already present");
}

IntegrandPart combine(const IntegrandPart& a, const IntegrandPart& b, const Rational& sb) {
  IntegrandPart out;
  out.symbolic = a.symbolic + scale(b.symbolic, sb);
  out.nested = a.nested + scale(b.nested, sb);
  out.scaled = a.scaled;
  const double s = sb.convert_to<double>();
  for (const auto& [c, e] : b.scaled) out.scaled.emplace_back(c * s, e);
  return out;
}

IntegrandPart Integrand::assembled() const { return combine(combine(main, uv, -1), ir, -1); }

bool vanishes_identically(const std::vector<CompositeOp>& ops, const CompositeOp& target, int order) {
  if (odd_parity(ops, target)) return true;
  return order == 0 && vanishes_by_counting(ops, target);
}

Integrand first_order_bracket(const std::vector<LabeledOp>& ops, const CompositeOp& target, int basis_cap) {
  if (ops.empty()) throw std::invalid_argument("at least one operator is required");
  check_cap(ops_of(ops), target, basis_cap);
  const CompositeOp L = CompositeOp::interaction();
  const PointLabel base = ops.back().at;
  Integrand out;
  out.order = 0;
  out.n_points = ops.size();

  std::vector<LabeledOp> with_l{{L, kY}};
  with_l.insert(with_l.end(), ops.begin(), ops.end());
  out.main.symbolic = wick(with_l, target, base);

  for (std::size_t i = 0; i < ops.size(); ++i) {
    const std::vector<LabeledOp> pair{{L, kY}, ops[i]};
    for (const auto& C : operators_upto(ops[i].op.dimension())) {
      if (vanishes_by_counting({L, ops[i].op}, C)) continue;
      auto replaced = ops;
      replaced[i].op = C;
      if (vanishes_by_counting(ops_of(replaced), target)) continue;
      const CoeffExpr a = wick(pair, C, ops[i].at);
      const CoeffExpr b = wick(replaced, target, base);
      if (a.is_zero() || b.is_zero()) {
        out.audit.push_back("uv C=" + format_operator(C) + " at " + format_label(ops[i].at) + " is zero");
        continue;
      }
      out.uv.symbolic = out.uv.symbolic + a * b;
    }
  }
  for (const auto& C : operators_upto(target.dimension() - 1)) {
    if (C.dimension() >= target.dimension()) continue;
    if (vanishes_by_counting(ops_of(ops), C)) continue;
    if (vanishes_by_counting({L, C}, target)) continue;
    const CoeffExpr a = wick(ops, C, base);
    const std::vector<LabeledOp> pair{{L, kY}, {C, base}};
    const CoeffExpr b = wick(pair, target, base);
    if (a.is_zero() || b.is_zero()) {
      out.audit.push_back("ir C=" + format_operator(C) + " is zero");
      continue;
    }
    out.ir.symbolic = out.ir.symbolic + a * b;
  }
  return out;
}

Integrand build_integrand(const std::vector<CompositeOp>& ops, const PointConfig& points, const CompositeOp& target,
                          int r, const CoeffTable& table, const DeformOptions& opts) {
  if (ops.size() != points.size()) throw std::invalid_argument("number of operators and points differ");
  if (points.base() + 1 != points.size())
    throw std::invalid_argument("the recursion expands about the last point");
  if (r == 0) return first_order_bracket(label_ops(ops), target, opts.basis_cap);
  if (r != 1) throw std::invalid_argument("orders above 2 are not supported");

  check_cap(ops, target, opts.basis_cap);
  const CompositeOp L = CompositeOp::interaction();
  const auto labeled = label_ops(ops);
  const std::size_t n = ops.size();
  const PointLabel outer = PointLabel::ext(static_cast<int>(n));  // the outer y inside nested brackets
  const PointLabel base = labeled.back().at;
  const Rational inner_prefactor(-1, 24);

  auto nested_bracket = [&](const std::vector<LabeledOp>& sub, const CompositeOp& t) {
    const Integrand b = first_order_bracket(sub, t, opts.basis_cap);
    return scale(b.assembled().symbolic, inner_prefactor);
  };
  auto lookup = [&](const CoeffKey& k) -> const CoeffEntry& {
    const CoeffEntry* e = table.find(k);
    if (e == nullptr) throw MissingEntryError("lower-order entry " + format_key(k) + " is not in the table");
    return *e;
  };
  auto add_product = [](IntegrandPart& part, const CoeffExpr& yexpr, const CoeffEntry& e) {
    if (e.symbolic) {
      part.symbolic = part.symbolic + yexpr * *e.symbolic;
    } else if (e.value != 0.0) {
      part.scaled.emplace_back(e.value, yexpr);
    }
  };

  Integrand out;
  out.order = 1;
  out.n_points = n;

  std::vector<LabeledOp> with_l{{L, outer}};
  with_l.insert(with_l.end(), labeled.begin(), labeled.end());
  out.main.nested = nested_bracket(with_l, target);

  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& C : operators_upto(ops[i].dimension())) {
      auto replaced = ops;
      replaced[i] = C;
      if (odd_parity(replaced, target)) continue;
      // s = 0: exact y-dependent factor times an order-1 number at x
      const std::vector<LabeledOp> pair{{L, kY}, labeled[i]};
      const CoeffExpr a0 = wick(pair, C, labeled[i].at);
      if (!a0.is_zero()) add_product(out.uv, a0, lookup({replaced, target, 1}));
      // s = 1: order-1 coefficient at (y, x_i) times an exact x-only factor
      const CoeffExpr b0 = wick(label_ops(replaced), target, base);
      if (!b0.is_zero()) {
        const std::vector<LabeledOp> sub{{L, outer}, labeled[i]};
        const CoeffExpr inner = nested_bracket(sub, C);
        if (!inner.is_zero()) out.uv.nested = out.uv.nested + b0 * inner;
      }
    }
  }
  for (const auto& C : operators_upto(target.dimension() - 1)) {
    if (C.dimension() >= target.dimension()) continue;
    if (odd_parity(ops, C)) continue;
    // s = 0: exact x-only factor times an order-1 coefficient at (y, x_N)
    const CoeffExpr a = wick(labeled, C, base);
    if (!a.is_zero()) {
      const std::vector<LabeledOp> sub{{L, outer}, {C, base}};
      const CoeffExpr inner = nested_bracket(sub, target);
      if (!inner.is_zero()) out.ir.nested = out.ir.nested + a * inner;
    }
    // s = 1: order-1 number at x times an exact y-dependent factor
    const std::vector<LabeledOp> pair{{L, kY}, {C, base}};
    const CoeffExpr b = wick(pair, target, base);
    if (!b.is_zero()) add_product(out.ir, b, lookup({ops, C, 1}));
  }
  return out;
}

PartEvaluator::PartEvaluator(const IntegrandPart& part, const PointConfig& points, double mass,
                             const DeformOptions& opts)
    : ext_(points.points()), mass_(mass), opts_(opts) {
  symbolic_ = CompiledExpr(part.symbolic, mass).bind(ext_);
  for (const auto& [c, e] : part.scaled) scaled_.emplace_back(c, CompiledExpr(e, mass).bind(ext_));
  if (!part.nested.is_zero()) {
    nested_ = CompiledExpr(part.nested, mass);
    has_nested_ = true;
  }
}

double PartEvaluator::operator()(const Vec4& y) const {
  double v = symbolic_(y);
  for (const auto& [c, e] : scaled_) v += c * e(y);
  if (has_nested_) {
    std::vector<Vec4> ext = ext_;
    ext.push_back(y);
    const BoundExpr inner = nested_.bind(ext);
    QuadPlan plan = opts_.plan;
    plan.centers = ext;
    plan.center_names.clear();
    plan.mass = mass_;
    plan.rho = 0.0;
    plan.r_far = 0.0;
    plan.exec = Exec::serial;
    std::uint64_t h = mix(opts_.seed, 0x1234);
    for (double c : y) h = mix(h, std::bit_cast<std::uint64_t>(c));
    v += mc_integrate_r4([&](const Vec4& z) { return inner(z); }, plan, opts_.inner_samples, h).value;
  }
  return v;
}

SlopeReport slope_diagnostics(const std::function<double(const Vec4&)>& f, const PointConfig& points,
                              double uv_bound, double ir_bound) {
  Vec4 u{0.3721, -0.5213, 0.6407, 0.4219};
  u = (1.0 / norm(u)) * u;
  SlopeReport rep;
  const double d = 0.5 * (points.size() > 1 ? points.min_distance() : 1.0);
  rep.uv_ok = true;
  for (std::size_t j = 0; j < points.size(); ++j) {
    std::vector<double> lx, ly;
    for (int k = 2; k <= 10; ++k) {
      const double r = std::ldexp(d, -k);
      const double v = std::abs(f(points[j] + r * u));
      if (v > 0.0 && std::isfinite(v)) {
        lx.push_back(std::log2(r));
        ly.push_back(std::log2(v));
      }
    }
    double slope = 0.0;
    if (lx.size() >= 3) {
      double mx = 0, my = 0;
      for (std::size_t i = 0; i < lx.size(); ++i) {
        mx += lx[i];
        my += ly[i];
      }
      mx /= lx.size();
      my /= ly.size();
      double sxy = 0, sxx = 0;
      for (std::size_t i = 0; i < lx.size(); ++i) {
        sxy += (lx[i] - mx) * (ly[i] - my);
        sxx += (lx[i] - mx) * (lx[i] - mx);
      }
      slope = sxy / sxx;
    }
    rep.uv_slope.push_back(slope);
    if (!(slope >= uv_bound)) rep.uv_ok = false;
  }

  const double D = points.size() > 1 ? points.diameter() : 1.0;
  const Vec4& base = points[points.base()];
  std::vector<double> vals;
  for (int k = 3; k <= 8; ++k) vals.push_back(std::abs(f(base + std::ldexp(D, k) * u)));
  for (double v : vals)
    if (v > 0.0) ++rep.ir_nonzero;
  rep.ir_ok = rep.ir_nonzero >= 2;
  for (std::size_t i = 0; i + 1 < vals.size(); ++i) {
    if (vals[i] == 0.0) {
      if (vals[i + 1] != 0.0) rep.ir_ok = false;  // reappearing after underflow
      continue;
    }
    if (vals[i + 1] == 0.0) continue;  // decayed below the smallest double
    const double s = std::log2(vals[i + 1] / vals[i]);
    if (!rep.ir_slopes.empty() && s > rep.ir_slopes.back() + 1e-9) rep.ir_ok = false;
    rep.ir_slopes.push_back(s);
    if (!(s <= ir_bound)) rep.ir_ok = false;
  }
  return rep;
}

CoefficientResult coefficient(const std::vector<CompositeOp>& ops, const CompositeOp& target, int order,
                              Method method, CoeffTable& table, const DeformOptions& opts) {
  const PointConfig& points = table.points();
  const double m = table.mass();
  if (ops.size() != points.size()) throw std::invalid_argument("number of operators and points differ");
  if (order < 0 || order > 2) throw std::invalid_argument("order must be 0, 1 or 2");
  CoefficientResult res;
  res.key = {ops, target, order};

  auto finish = [&](CoefficientResult& r) {
    if (!table.find(r.key)) table.insert(r.key, CoeffEntry{r.symbolic, r.numeric, r.value, r.abs_error});
    return r;
  };

  if (const CoeffEntry* e = table.find(res.key)) {
    res.symbolic = e->symbolic;
    res.numeric = e->numeric;
    res.value = e->value;
    res.abs_error = e->abs_error;
    res.path = "table";
    return res;
  }

  if (vanishes_identically(ops, target, order)) {
    res.symbolic = CoeffExpr{};
    res.path = "zero";
    return finish(res);
  }

  if (order == 0) {
    res.symbolic = zeroth_order(ops, target, points.base());
    res.value = eval(*res.symbolic, points.points(), std::nullopt, m);
    res.path = "wick";
    return finish(res);
  }

  if (points.base() + 1 != points.size())
    throw std::invalid_argument("the recursion expands about the last point");

  const std::string what = describe(ops, target, order);

  if (order == 1) {
    Integrand integrand = build_integrand(ops, points, target, 0, table, opts);
    const CoeffExpr bracket = integrand.assembled().symbolic;
    require_cancellation(bracket, what);
    const Rational q(-1, 24);
    const BoundExpr f = CompiledExpr(bracket, m).bind(points.points());
    res.slopes = slope_diagnostics([&](const Vec4& y) { return f(y); }, points);

    if (method != Method::numeric) {
      if (auto closed = integrate_y_symbolic(bracket)) {
        res.symbolic = scale(*closed, q);
        res.value = eval(*res.symbolic, points.points(), std::nullopt, m);
        res.path = "symbolic";
        res.integrand = std::move(integrand);
        return finish(res);
      }
      if (method == Method::symbolic) throw std::runtime_error("no closed form is available for " + what);
    }
    QuadPlan plan = opts.plan;
    plan.centers = points.points();
    plan.center_names = point_names(points.size());
    plan.mass = m;
    auto fy = [&](const Vec4& y) { return f(y); };
    NumericCoeff nc = opts.monte_carlo ? mc_integrate_r4(fy, plan, opts.mc_samples, opts.seed) : integrate_r4(fy, plan);
    nc = scaled_result(std::move(nc), q.convert_to<double>());
    if (!nc.converged) throw std::runtime_error("quadrature did not converge for " + what + ": " + nc.message);
    res.value = nc.value;
    res.abs_error = nc.abs_error;
    res.numeric = std::move(nc);
    res.path = opts.monte_carlo ? "monte-carlo" : "quadrature";
    res.integrand = std::move(integrand);
    return finish(res);
  }

  // order 2
  for (const auto& k : order_one_requirements(ops, target, opts.basis_cap)) {
    if (table.find(k)) continue;
    coefficient(k.ops, k.target, 1, Method::automatic, table, opts);
  }
  Integrand integrand = build_integrand(ops, points, target, 1, table, opts);
  IntegrandPart part = integrand.assembled();
  const std::size_t n = points.size();

  if (!part.nested.is_zero()) {
    const CoeffExpr inner_const = part.nested.filter(kY, false);
    if (!inner_const.is_zero())
      throw DivergenceError("inner-variable-independent terms survive in the nested bracket of " + what + ": " +
                                to_string(inner_const),
                            inner_const);
    if (auto closed = integrate_y_symbolic(part.nested)) {
      std::vector<PointLabel> map = standard_labels(n);
      map.push_back(kY);
      part.symbolic = part.symbolic + closed->relabeled(map);
      part.nested = CoeffExpr{};
    }
  }
  const Rational q(-1, 48);
  res.experimental = true;
  if (part.nested.is_zero() && part.scaled.empty()) {
    require_cancellation(part.symbolic, what);
    if (method != Method::numeric) {
      if (auto closed = integrate_y_symbolic(part.symbolic)) {
        res.symbolic = scale(*closed, q);
        res.value = eval(*res.symbolic, points.points(), std::nullopt, m);
        res.path = "symbolic";
        res.integrand = std::move(integrand);
        return finish(res);
      }
    }
  }
  if (method == Method::symbolic) throw std::runtime_error("no closed form is available for " + what);

  const PartEvaluator fe(part, points, m, opts);
  QuadPlan plan = opts.plan;
  plan.centers = points.points();
  plan.center_names = point_names(n);
  plan.mass = m;
  auto fy = [&](const Vec4& y) { return fe(y); };
  NumericCoeff nc;
  if (fe.exact() && !opts.monte_carlo) {
    nc = integrate_r4(fy, plan);
    res.path = "quadrature";
  } else {
    nc = mc_integrate_r4(fy, plan, opts.mc_samples, opts.seed);
    res.path = fe.exact() ? "monte-carlo" : "nested-monte-carlo";
  }
  nc = scaled_result(std::move(nc), q.convert_to<double>());
  res.value = nc.value;
  res.abs_error = nc.abs_error;
  res.numeric = std::move(nc);
  res.integrand = std::move(integrand);
  return finish(res);
}

}  // namespace ope
