#include "opeflow/verify.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "opeflow/deform.hpp"
#include "opeflow/oracle.hpp"
#include "opeflow/quad.hpp"
#include "opeflow/specfun.hpp"
#include "opeflow/wick.hpp"

namespace ope::verify {

namespace {

using Clock = std::chrono::steady_clock;

const PointLabel kY = PointLabel::y();
const PointLabel kX1 = PointLabel::ext(0);
const PointLabel kX2 = PointLabel::ext(1);

CompositeOp op(const char* s) { return parse_operator(s); }

CoeffExpr C(PointLabel a, PointLabel b, MultiIndex w = {}) { return CoeffExpr::from_factor(Factor::prop(w, a, b)); }

PointConfig pair_at(double sep) { return PointConfig({{0, 0, 0, 0}, {sep, 0, 0, 0}}); }

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

double rel_diff(double a, double b) {
  if (a == b) return 0.0;
  return std::abs(a - b) / std::max(std::abs(a), std::abs(b));
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

class Recorder {
 public:
  explicit Recorder(std::string suite) : suite_(std::move(suite)) {}

  // pass iff measured <= tolerance
  void at_most(int crit, const std::string& name, const std::string& expected, double measured, double tol,
               double secs = 0.0) {
    push(crit, name, expected, measured, tol, measured <= tol, secs);
  }
  void at_least(int crit, const std::string& name, const std::string& expected, double measured, double bound,
                double secs = 0.0) {
    push(crit, name, expected, measured, bound, measured >= bound, secs);
  }
  void exact(int crit, const std::string& name, const std::string& expected, bool ok, double secs = 0.0) {
    push(crit, name, expected, ok ? 0.0 : 1.0, 0.0, ok, secs);
  }
  // Runs body; an exception becomes a failed check with the message in its name.
  void guard(int crit, const std::string& name, const std::function<void()>& body) {
    try {
      body();
    } catch (const std::exception& e) {
      push(crit, name + " threw: " + e.what(), "no exception", std::numeric_limits<double>::quiet_NaN(), 0.0, false,
           0.0);
    }
  }
  Report take() { return std::move(report_); }

 private:
  void push(int crit, const std::string& name, const std::string& expected, double measured, double tol, bool ok,
            double secs) {
    report_.checks.push_back({crit, suite_, name, expected, measured, tol, ok, secs});
  }
  std::string suite_;
  Report report_;
};

DeformOptions numeric_options(double rel_tol) {
  DeformOptions o;
  o.plan.rel_tol = rel_tol;
  return o;
}

CoefficientResult order_one(const std::vector<CompositeOp>& ops, const CompositeOp& target, const PointConfig& pts,
                            Method method, double rel_tol = 1e-5, double m = 1.0) {
  CoeffTable table(pts, m);
  return coefficient(ops, target, 1, method, table, numeric_options(rel_tol));
}

double k0_value(double sep) { return -bessel_k0(sep) / (16 * kPi * kPi); }

CoeffExpr k0_expression() {
  Term t;
  t.weight = Rational(-1, 16);
  t.pi_power = -2;
  t.factors = {Factor::bessel_k0(kX1, kX2)};
  return CoeffExpr::from_terms({t});
}

Report suite_wick() {
  Recorder rec("wick");
  const auto t0 = Clock::now();
  const CompositeOp L = CompositeOp::interaction();
  rec.guard(1, "worked examples", [&] {
    rec.exact(1, "(C0)_{phi^4 phi phi}^{phi^4}", "4C(x1-y) + 4C(x2-y) + C(x1-x2)",
              zeroth_order({{L, kY}, {op("phi"), kX1}, {op("phi"), kX2}}, L, kX2) ==
                  scale(C(kX1, kY), 4) + scale(C(kX2, kY), 4) + C(kX1, kX2));
    rec.exact(1, "(C0)_{phi phi}^{1}", "C(x1-x2)",
              zeroth_order({op("phi"), op("phi")}, CompositeOp::identity(), 1) == C(kX1, kX2));
    rec.exact(1, "(C0)_{phi^4 1}^{phi^4}", "1",
              zeroth_order({{L, kY}, {CompositeOp::identity(), kX2}}, L, kX2) == CoeffExpr::constant(1));
    rec.exact(1, "(C0)_{phi phi}^{phi^2}", "1",
              zeroth_order({op("phi"), op("phi")}, op("phi^2"), 1) == CoeffExpr::constant(1));
    rec.exact(1, "(C0)_{phi^4 phi^2}^{phi^4}", "8C(x2-y)",
              zeroth_order({{L, kY}, {op("phi^2"), kX2}}, L, kX2) == scale(C(kX2, kY), 8));
    CoeffExpr pairing, expected;
    for (int mu = 0; mu < 4; ++mu) {
      const MultiIndex e = MultiIndex::unit(mu);
      CompositeOp dphi({MultiIndex{}, e});
      pairing = pairing + zeroth_order({op("phi"), op("phi")}, dphi, 1) * zeroth_order({{L, kY}, {dphi, kX2}}, L, kX2);
      expected = expected + CoeffExpr::from_factor(Factor::monomial(e, kX1, kX2)) * scale(C(kX2, kY, e), 4);
    }
    rec.exact(1, "sum_mu (C0)_{phi phi}^{phi d_mu phi} (C0)_{phi^4 phi d_mu phi}^{phi^4}",
              "(x1-x2)^mu 4 d_mu C(x2-y)", pairing == expected);

    const Integrand b = first_order_bracket({{op("phi"), kX1}, {op("phi^3"), kX2}}, op("phi^2"), 8);
    const CoeffExpr c2 = C(kY, kX2) * C(kY, kX2);
    rec.exact(1, "main term of (C1)_{phi phi^3}^{phi^2}", "24C(y-x2)^3 + 72C(y-x1)C(y-x2)^2 + 36C(y-x2)^2C(x1-x2)",
              b.main.symbolic ==
                  scale(c2 * C(kY, kX2), 24) + scale(c2 * C(kY, kX1), 72) + scale(c2 * C(kX1, kX2), 36));
    rec.exact(1, "counter-terms of (C1)_{phi phi^3}^{phi^2}", "24C(y-x2)^3 + 108C(y-x2)^2C(x1-x2)",
              b.uv.symbolic == scale(c2 * C(kY, kX2), 24) + scale(c2 * C(kX1, kX2), 108) &&
                  b.ir.symbolic.is_zero());
  });
  rec.at_most(1, "runtime", "< 1 s", seconds_since(t0), 1.0);
  return rec.take();
}

Report suite_bessel() {
  Recorder rec("bessel");
  const std::vector<CompositeOp> ops{op("phi"), op("phi")};
  for (double sep : {0.5, 1.0, 2.0}) {
    const std::string at = " at |x12|=" + fmt(sep);
    rec.guard(3, "symbolic" + at, [&] {
      const auto r = order_one(ops, op("phi^2"), pair_at(sep), Method::symbolic);
      rec.exact(3, "symbolic form" + at, "-1/16 pi^-2 K0(m|x1-x2|)", r.symbolic && *r.symbolic == k0_expression());
      rec.at_most(3, "symbolic value" + at, "-K0(m|x|)/(16 pi^2)", rel_diff(r.value, k0_value(sep)), 1e-14);
    });
    rec.guard(3, "numeric" + at, [&] {
      const auto t0 = Clock::now();
      const auto r = order_one(ops, op("phi^2"), pair_at(sep), Method::numeric);
      const double secs = seconds_since(t0);
      rec.at_most(3, "numeric relative error" + at, "-K0(m|x|)/(16 pi^2)", rel_diff(r.value, k0_value(sep)), 1e-3,
                  secs);
      rec.at_most(3, "numeric runtime" + at, "<= 60 s", secs, 60.0);
    });
  }
  const double x = 1e-2;
  const double expansion = (std::log(x / 2) + kEulerGamma) / (16 * kPi * kPi);
  rec.guard(4, "small separation", [&] {
    const auto s = order_one(ops, op("phi^2"), pair_at(x), Method::symbolic);
    rec.at_most(4, "symbolic vs log expansion at |x12|=0.01", "(log(m|x|/2)+gamma)/(16 pi^2) +- 5e-5",
                std::abs(s.value - expansion), 5e-5);
    const auto n = order_one(ops, op("phi^2"), pair_at(x), Method::numeric);
    rec.at_most(4, "numeric vs log expansion at |x12|=0.01", "(log(m|x|/2)+gamma)/(16 pi^2) +- 5e-5",
                std::abs(n.value - expansion), 5e-5);
  });
  return rec.take();
}

Report suite_integrals() {
  Recorder rec("integrals");
  for (double m : {1.0, 2.0}) {
    QuadPlan plan = QuadPlan::for_points(std::vector<Vec4>{{0.1, -0.2, 0.3, 0.0}}, m);
    plan.rel_tol = 1e-8;
    const Vec4 c = plan.centers[0];
    const auto t0 = Clock::now();
    const auto r = integrate_r4([&](const Vec4& y) { return propagator(y - c, m); }, plan);
    rec.at_most(8, "int C d^4y at m=" + fmt(m), "1/m^2 within 1e-6", rel_diff(r.value, 1.0 / (m * m)), 1e-6,
                seconds_since(t0));
  }
  for (double sep : {0.5, 1.0, 2.0}) {
    const std::vector<Vec4> pts{{0, 0, 0, 0}, {sep, 0, 0, 0}};
    const QuadPlan plan = QuadPlan::for_points(pts, 1.0);
    const auto t0 = Clock::now();
    const auto r = integrate_r4(
        [&](const Vec4& y) { return propagator(y - pts[0], 1.0) * propagator(y - pts[1], 1.0); }, plan);
    const double expected = bessel_k0(sep) / (8 * kPi * kPi);
    rec.at_most(8, "int C(y-x1)C(y-x2) d^4y at |x12|=" + fmt(sep), "K0(m|x|)/(8 pi^2) within 1e-4",
                rel_diff(r.value, expected), 1e-4, seconds_since(t0));
  }
  rec.guard(8, "symbolic table", [&] {
    const auto a = integrate_y_symbolic(C(kY, kX1));
    rec.exact(8, "symbolic int C", "1/m^2", a && eval(*a, std::vector<Vec4>{{0, 0, 0, 0}}, std::nullopt, 2.0) == 0.25);
    const auto b = integrate_y_symbolic(scale(C(kY, kX1) * C(kY, kX2), 12));
    rec.exact(8, "symbolic int 12 C C", "K0(m|x1-x2|)/(8 pi^2) times 12", b && scale(*b, Rational(-1, 24)) == k0_expression());
  });
  return rec.take();
}

Report suite_examples() {
  Recorder rec("examples");
  const std::vector<CompositeOp> phiphi{op("phi"), op("phi")};
  rec.guard(2, "phi phi -> phi^4", [&] {
    const auto s = order_one(phiphi, op("phi^4"), pair_at(1.0), Method::symbolic);
    rec.exact(2, "(C1)_{phi phi}^{phi^4} symbolic", "empty expression", s.symbolic && s.symbolic->is_zero());
    const auto t0 = Clock::now();
    const auto n = order_one(phiphi, op("phi^4"), pair_at(1.0), Method::numeric, 1e-6);
    const double secs = seconds_since(t0);
    double largest = 0.0;
    for (const auto& rc : n.numeric->breakdown) largest = std::max(largest, std::abs(rc.value));
    rec.at_most(2, "(C1)_{phi phi}^{phi^4} numeric / largest region", "<= 1e-6",
                largest > 0 ? std::abs(n.value) / largest : 1.0, 1e-6, secs);
    rec.at_most(2, "(C1)_{phi phi}^{phi^4} numeric runtime", "< 300 s", secs, 300.0);
  });
  rec.guard(3, "phi phi -> phi^2", [&] {
    const auto s = order_one(phiphi, op("phi^2"), pair_at(1.0), Method::symbolic);
    rec.exact(3, "(C1)_{phi phi}^{phi^2} symbolic", "-1/16 pi^-2 K0(m|x1-x2|)", s.symbolic && *s.symbolic == k0_expression());
  });
  rec.guard(5, "phi phi^3 -> phi^2", [&] {
    const Integrand b = first_order_bracket({{op("phi"), kX1}, {op("phi^3"), kX2}}, op("phi^2"), 8);
    const CoeffExpr expected = scale(C(kY, kX2) * C(kY, kX2) * (C(kY, kX1) - C(kX1, kX2)), -3);
    rec.exact(5, "(C1)_{phi phi^3}^{phi^2} integrand", "-3 C(y-x2)^2 [C(y-x1) - C(x1-x2)]",
              scale(b.assembled().symbolic, Rational(-1, 24)) == expected);
  });
  return rec.take();
}

Report suite_slopes() {
  Recorder rec("slopes");
  struct Case {
    const char* label;
    std::vector<CompositeOp> ops;
    CompositeOp target;
  };
  const std::vector<Case> cases{{"phi phi -> phi^4", {op("phi"), op("phi")}, op("phi^4")},
                                {"phi phi -> phi^2", {op("phi"), op("phi")}, op("phi^2")},
                                {"phi phi^3 -> phi^2", {op("phi"), op("phi^3")}, op("phi^2")}};
  for (double sep : {0.5, 1.0, 2.0}) {
    const PointConfig pts = pair_at(sep);
    const std::string at = " at |x12|=" + fmt(sep);
    for (const auto& c : cases) {
      rec.guard(6, c.label + at, [&] {
        const Integrand b = first_order_bracket({{c.ops[0], kX1}, {c.ops[1], kX2}}, c.target, 8);
        const BoundExpr f = CompiledExpr(b.assembled().symbolic, 1.0).bind(pts.points());
        const SlopeReport s = slope_diagnostics([&](const Vec4& y) { return f(y); }, pts);
        for (std::size_t j = 0; j < s.uv_slope.size(); ++j)
          rec.at_least(6, std::string("UV slope near x") + std::to_string(j + 1) + " for " + c.label + at, ">= -3.9",
                       s.uv_slope[j], -3.9);
        double worst = -std::numeric_limits<double>::infinity();
        for (double v : s.ir_slopes) worst = std::max(worst, v);
        rec.at_most(7, std::string("IR slope for ") + c.label + at, "<= -6, decreasing, >= 2 nonzero samples",
                    s.ir_ok ? worst : std::numeric_limits<double>::infinity(), -6.0);
      });
    }
    rec.guard(6, "unsubtracted main term" + at, [&] {
      const Integrand b = first_order_bracket({{op("phi"), kX1}, {op("phi^3"), kX2}}, op("phi^2"), 8);
      const BoundExpr f = CompiledExpr(b.main.symbolic, 1.0).bind(pts.points());
      const SlopeReport s = slope_diagnostics([&](const Vec4& y) { return f(y); }, pts);
      rec.at_most(6, "main-term UV slope near x2 for phi phi^3 -> phi^2" + at, "<= -5.5", s.uv_slope[1], -5.5);
    });
  }
  return rec.take();
}

Report suite_oracle() {
  Recorder rec("oracle");
  for (double sep : {0.5, 1.0, 2.0}) {
    const std::string at = " at |x12|=" + fmt(sep);
    rec.guard(5, "position vs momentum space" + at, [&] {
      const auto t0 = Clock::now();
      const auto r = order_one({op("phi"), op("phi^3")}, op("phi^2"), pair_at(sep), Method::numeric);
      const double secs = seconds_since(t0);
      const double ref = oracle::momentum_space_C1_phi_phi3({sep, 0, 0, 0}, 1.0);
      rec.at_most(5, "(C1)_{phi phi^3}^{phi^2} vs momentum-space oracle" + at, "within 1% relative",
                  rel_diff(r.value, ref), 1e-2, secs);
      rec.at_most(5, "position-space runtime" + at, "<= 600 s", secs, 600.0);
    });
  }
  rec.guard(3, "K0 oracle", [&] {
    for (double sep : {0.5, 1.0, 2.0}) {
      const auto s = order_one({op("phi"), op("phi")}, op("phi^2"), pair_at(sep), Method::symbolic);
      rec.at_most(3, "symbolic vs Boost K0 at |x12|=" + fmt(sep), "-K0(m|x|)/(16 pi^2)",
                  rel_diff(s.value, oracle::k0_check({sep, 0, 0, 0}, 1.0)), 1e-13);
    }
  });
  return rec.take();
}

Report suite_invariance() {
  Recorder rec("invariance");
  const Vec4 shift{0.7, -1.3, 2.1, 0.4};
  const PointConfig pts({{0.1, 0.2, -0.3, 0.05}, {-0.4, 0.1, 0.2, 0.3}, {0.3, -0.25, 0.1, -0.2}});
  const std::vector<CompositeOp> ops3{op("phi"), op("phi*d2phi"), op("phi^3")};
  rec.guard(9, "order 0", [&] {
    double worst_t = 0.0, worst_s = 0.0, worst_p = 0.0;
    const double lambda = 1.7;
    for (const auto& target : enumerate_basis(4)) {
      const auto e = zeroth_order(ops3, target, 2);
      const double v = eval(e, pts.points(), std::nullopt, 1.0);
      const double vt = eval(e, pts.translated(shift).points(), std::nullopt, 1.0);
      const double vs = eval(e, pts.scaled(lambda).points(), std::nullopt, 1.0 / lambda);
      int gap = target.dimension();
      for (const auto& a : ops3) gap -= a.dimension();
      const double scale_ref = std::pow(lambda, gap) * v;
      worst_t = std::max(worst_t, rel_diff(v, vt));
      worst_s = std::max(worst_s, rel_diff(vs, scale_ref));
      // swap the first two operators together with their points
      const PointConfig swapped({pts[1], pts[0], pts[2]});
      const auto ep = zeroth_order({ops3[1], ops3[0], ops3[2]}, target, 2);
      worst_p = std::max(worst_p, rel_diff(v, eval(ep, swapped.points(), std::nullopt, 1.0)));
    }
    rec.at_most(9, "order-0 translation invariance", "1e-10 relative", worst_t, 1e-10);
    rec.at_most(9, "order-0 scaling covariance lambda^([B]-sum[A])", "1e-10 relative", worst_s, 1e-10);
    rec.at_most(9, "order-0 permutation symmetry", "1e-12 relative", worst_p, 1e-12);
  });
  rec.guard(9, "order 1", [&] {
    const std::vector<CompositeOp> ops{op("phi"), op("phi^3")};
    const PointConfig base = pair_at(1.0);
    const double s0 = order_one({op("phi"), op("phi")}, op("phi^2"), base, Method::symbolic).value;
    const double s1 = order_one({op("phi"), op("phi")}, op("phi^2"), base.translated(shift), Method::symbolic).value;
    rec.at_most(9, "order-1 symbolic translation invariance", "1e-10 relative", rel_diff(s0, s1), 1e-10);
    const double n0 = order_one(ops, op("phi^2"), base, Method::numeric).value;
    const double n1 = order_one(ops, op("phi^2"), base.translated(shift), Method::numeric).value;
    rec.at_most(9, "order-1 quadrature translation invariance", "1e-10 relative", rel_diff(n0, n1), 1e-10);
    const Integrand a = first_order_bracket({{op("phi"), kX1}, {op("phi^3"), kX2}, {op("phi^2"), PointLabel::ext(2)}},
                                            op("phi^2"), 8);
    const Integrand b = first_order_bracket({{op("phi^3"), kX2}, {op("phi"), kX1}, {op("phi^2"), PointLabel::ext(2)}},
                                            op("phi^2"), 8);
    rec.exact(9, "order-1 bracket permutation symmetry", "identical canonical integrands",
              a.assembled().symbolic == b.assembled().symbolic);
  });
  rec.guard(9, "seeded Monte Carlo", [&] {
    const PointConfig base = pair_at(1.0);
    DeformOptions o;
    o.monte_carlo = true;
    o.mc_samples = 50000;
    o.seed = 17;
    CoeffTable t1(base, 1.0), t2(base, 1.0);
    const auto r1 = coefficient({op("phi"), op("phi")}, op("phi^2"), 1, Method::numeric, t1, o);
    o.plan.exec = Exec::serial;
    const auto r2 = coefficient({op("phi"), op("phi")}, op("phi^2"), 1, Method::numeric, t2, o);
    rec.exact(9, "Monte Carlo determinism (parallel run vs serial run, same seed)", "bit-identical",
              r1.value == r2.value && r1.abs_error == r2.abs_error);
  });
  return rec.take();
}

Report suite_order2() {
  Recorder rec("order2");
  rec.guard(10, "(C2)_{phi phi}^{phi^2}", [&] {
    DeformOptions o;
    o.mc_samples = 4000;
    o.inner_samples = 256;
    auto run = [&](const PointConfig& pts, std::uint64_t seed) {
      DeformOptions oo = o;
      oo.seed = seed;
      CoeffTable t(pts, 1.0);
      return coefficient({op("phi"), op("phi")}, op("phi^2"), 2, Method::automatic, t, oo);
    };
    const PointConfig base = pair_at(1.0);
    const auto a = run(base, 1);
    rec.exact(10, "finite value and error", "finite", std::isfinite(a.value) && std::isfinite(a.abs_error));
    const auto b = run(base, 2);
    const double sigma = std::hypot(a.abs_error, b.abs_error);
    rec.at_most(10, "seed stability", "|v(seed 1) - v(seed 2)| <= 3 sigma", std::abs(a.value - b.value) / sigma, 3.0);
    const auto c = run(base.translated({0.5, -0.5, 0.25, 1.0}), 1);
    rec.at_most(10, "translation invariance", "within 3 standard errors",
                std::abs(a.value - c.value) / std::hypot(a.abs_error, c.abs_error), 3.0);
    rec.exact(10, "repeatability", "bit-identical rerun", run(base, 1).value == a.value);
  });
  return rec.take();
}

}  // namespace

bool Report::ok() const {
  for (const auto& c : checks)
    if (!c.pass) return false;
  return !checks.empty();
}

void Report::append(const Report& other) { checks.insert(checks.end(), other.checks.begin(), other.checks.end()); }

const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names{"wick",   "bessel", "integrals",  "examples",
                                              "slopes", "oracle", "invariance", "order2"};
  return names;
}

Report run_suite(const std::string& name) {
  if (name == "all") {
    Report all;
    for (const auto& n : suite_names()) all.append(run_suite(n));
    return all;
  }
  if (name == "wick") return suite_wick();
  if (name == "bessel") return suite_bessel();
  if (name == "integrals") return suite_integrals();
  if (name == "examples") return suite_examples();
  if (name == "slopes") return suite_slopes();
  if (name == "oracle") return suite_oracle();
  if (name == "invariance") return suite_invariance();
  if (name == "order2") return suite_order2();
  throw std::invalid_argument("unknown suite '" + name + "'");
}

std::string criterion_title(int criterion) {
  switch (criterion) {
    case 1:
      return "Wick fidelity of the worked examples";
    case 2:
      return "vanishing (C1)_{phi phi}^{phi^4}";
    case 3:
      return "Bessel benchmark (C1)_{phi phi}^{phi^2}";
    case 4:
      return "small-separation expansion";
    case 5:
      return "divergence cancellation (C1)_{phi phi^3}^{phi^2} vs momentum space";
    case 6:
      return "UV slope property";
    case 7:
      return "IR decay property";
    case 8:
      return "quadrature self-tests";
    case 9:
      return "invariance suite";
    case 10:
      return "order-2 (C2)_{phi phi}^{phi^2} properties";
    default:
      return "unassigned";
  }
}

}  // namespace ope::verify
