#include "opeflow/quad.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <random>

#include "opeflow/specfun.hpp"

namespace ope {

namespace {

// QUADPACK qk21 abscissae (descending, last is the center) and weights.
constexpr double kXgk[11] = {
    0.995657163025808080735527280689003, 0.973906528517171720077964012084452,
    0.930157491355708226001207180059508, 0.865063366688984510732096688423493,
    0.780817726586416897063717578345042, 0.679409568299024406234327365114874,
    0.562757134668604683339000099272694, 0.433395394129247190799265943165784,
    0.294392862701460198131126603103866, 0.148874338981631210884826001129720,
    0.000000000000000000000000000000000};
constexpr double kWgk[11] = {
    0.011694638867371874278064396062192, 0.032558162307964727478818972459390,
    0.054755896574351996031381300244580, 0.075039674810919952767043140916190,
    0.093125454583697605535065465083366, 0.109387158802297641899210590325805,
    0.123491976262065851077208626737834, 0.134709217311473325928054001771707,
    0.142775938577060080797094273138717, 0.147739104901338491374841515972068,
    0.149445554002916905664936468389821};
// 10-point Gauss weights for the odd-indexed Kronrod abscissae.
constexpr double kWg[5] = {0.066671344308688137593568809893332, 0.149451349150580593145776339657697,
                           0.219086362515982043995534934228163, 0.269266719309996355091226921569469,
                           0.295524224714752870173892994651338};

constexpr int kNodes = 21;

// Position of the i-th of 21 nodes on [-1, 1] and its Kronrod / Gauss weight.
double gk_node(int i) { return i < 10 ? -kXgk[i] : (i == 10 ? 0.0 : kXgk[20 - i]); }
double gk_kweight(int i) { return kWgk[i <= 10 ? i : 20 - i]; }
double gk_gweight(int i) {
  const int k = i <= 10 ? i : 20 - i;
  return (k % 2 == 1) ? kWg[k / 2] : 0.0;
}

struct Neumaier {
  double sum = 0.0;
  double c = 0.0;
  void add(double x) {
    const double t = sum + x;
    if (std::abs(sum) >= std::abs(x)) {
      c += (sum - t) + x;
    } else {
      c += (x - t) + sum;
    }
    sum = t;
  }
  double value() const { return sum + c; }
};

struct Frame {
  std::array<Vec4, 4> e;
};

// Orthonormal frame whose first axis points at the nearest other center.
Frame make_frame(const std::vector<Vec4>& centers, std::size_t j) {
  Vec4 axis{1, 0, 0, 0};
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < centers.size(); ++k) {
    if (k == j) continue;
    const Vec4 d = centers[k] - centers[j];
    const double n = norm(d);
    if (n < best) {
      best = n;
      axis = (1.0 / n) * d;
    }
  }
  Frame f;
  f.e[0] = axis;
  int filled = 1;
  for (int mu = 0; mu < 4 && filled < 4; ++mu) {
    Vec4 v{};
    v[mu] = 1.0;
    for (int i = 0; i < filled; ++i) v = v - dot(v, f.e[i]) * f.e[i];
    const double n = norm(v);
    if (n < 1e-6) continue;
    f.e[filled++] = (1.0 / n) * v;
  }
  return f;
}

struct SphereRule {
  std::vector<double> cos_t, sin_t, w_t;
  std::vector<double> cos_p, sin_p;
  double w_p = 0.0;
};

SphereRule make_sphere_rule(int n) {
  SphereRule s;
  std::vector<double> x, w;
  gauss_legendre(n, x, w);
  for (int i = 0; i < n; ++i) {
    s.cos_t.push_back(x[i]);
    s.sin_t.push_back(std::sqrt(std::max(0.0, 1.0 - x[i] * x[i])));
    s.w_t.push_back(w[i]);
  }
  const int np = 2 * n;
  for (int i = 0; i < np; ++i) {
    const double phi = 2.0 * kPi * (i + 0.5) / np;
    s.cos_p.push_back(std::cos(phi));
    s.sin_p.push_back(std::sin(phi));
  }
  s.w_p = 2.0 * kPi / np;
  return s;
}

struct SampleOutcome {
  double value = 0.0;
  double abs_value = 0.0;
  double error = 0.0;
  std::size_t evals = 0;
};

// Weighted, skipped-when-negligible evaluation of one partition piece.
class PieceEvaluator {
 public:
  PieceEvaluator(const Integrand4& f, const QuadPlan& plan, const SphereRule& sphere)
      : f_(f), plan_(plan), sphere_(sphere) {
    for (std::size_t j = 0; j < plan.centers.size(); ++j) frames_.push_back(make_frame(plan.centers, j));
  }

  double weight(std::size_t j, const Vec4& y) const {
    const double rj = norm(y - plan_.centers[j]);
    double s = 0.0;
    for (std::size_t k = 0; k < plan_.centers.size(); ++k) {
      if (k == j) {
        s += 1.0;
        continue;
      }
      const double rk = norm(y - plan_.centers[k]);
      if (rk == 0.0) return 0.0;
      const double q = rj / rk;
      const double q2 = q * q;
      const double q4 = q2 * q2;
      s += q4 * q4;
    }
    return 1.0 / s;
  }

  double call(const Vec4& y, std::size_t& evals) const {
    ++evals;
    const double v = f_(y);
    if (!std::isfinite(v)) throw QuadratureError("integrand returned a non-finite value", y);
    return v;
  }

  // Integral over the 3-sphere of radius r about center j of w_j f, with
  // measure sin^2(psi) sin(theta); r^3 is not included.
  SampleOutcome angular(std::size_t j, double r, double tol_rel) const {
    const Frame& fr = frames_[j];
    const Vec4& c = plan_.centers[j];
    SampleOutcome out;
    auto slice = [&](double psi, double& abs_part) {
      const double cp = std::cos(psi), sp = std::sin(psi);
      double v = 0.0, a = 0.0;
      for (std::size_t it = 0; it < sphere_.cos_t.size(); ++it) {
        double vt = 0.0, at = 0.0;
        for (std::size_t ip = 0; ip < sphere_.cos_p.size(); ++ip) {
          Vec4 y = c;
          const double c1 = r * cp;
          const double c2 = r * sp * sphere_.cos_t[it];
          const double c3 = r * sp * sphere_.sin_t[it] * sphere_.cos_p[ip];
          const double c4 = r * sp * sphere_.sin_t[it] * sphere_.sin_p[ip];
          for (int mu = 0; mu < 4; ++mu)
            y[mu] += c1 * fr.e[0][mu] + c2 * fr.e[1][mu] + c3 * fr.e[2][mu] + c4 * fr.e[3][mu];
          const double w = weight(j, y);
          if (w < 1e-20) continue;
          const double fv = w * call(y, out.evals);
          vt += fv;
          at += std::abs(fv);
        }
        v += sphere_.w_t[it] * vt;
        a += sphere_.w_t[it] * at;
      }
      const double s2 = sp * sp * sphere_.w_p;
      abs_part = a * s2;
      return v * s2;
    };

    struct Piece {
      double a, b, value, abs_value, error;
    };
    auto rule = [&](double a, double b) {
      const double half = 0.5 * (b - a), mid = 0.5 * (a + b);
      double k = 0.0, g = 0.0, ka = 0.0;
      for (int i = 0; i < kNodes; ++i) {
        double ab = 0.0;
        const double v = slice(mid + half * gk_node(i), ab);
        k += gk_kweight(i) * v;
        g += gk_gweight(i) * v;
        ka += gk_kweight(i) * ab;
      }
      return Piece{a, b, k * half, ka * half, std::abs((k - g) * half)};
    };

    std::vector<Piece> pieces{rule(0.0, kPi)};
    for (int iter = 0; iter < 40; ++iter) {
      double v = 0.0, a = 0.0, e = 0.0;
      std::size_t worst = 0;
      for (std::size_t i = 0; i < pieces.size(); ++i) {
        v += pieces[i].value;
        a += pieces[i].abs_value;
        e += pieces[i].error;
        if (pieces[i].error > pieces[worst].error) worst = i;
      }
      if (e <= tol_rel * a || e <= 1e-300) break;
      const Piece p = pieces[worst];
      const double m = 0.5 * (p.a + p.b);
      pieces[worst] = rule(p.a, m);
      pieces.push_back(rule(m, p.b));
    }
    std::sort(pieces.begin(), pieces.end(), [](const Piece& x, const Piece& y) { return x.a < y.a; });
    for (const auto& p : pieces) {
      out.value += p.value;
      out.abs_value += p.abs_value;
      out.error += p.error;
    }
    return out;
  }

 private:
  const Integrand4& f_;
  const QuadPlan& plan_;
  const SphereRule& sphere_;
  std::vector<Frame> frames_;
};

enum class RegionKind { ball = 0, shell = 1, tail = 2 };

struct Interval {
  std::size_t center;
  RegionKind kind;
  double a, b;  // in t = r^(1/3) for balls, r otherwise
  double value = 0.0, abs_value = 0.0, error = 0.0;
  std::size_t evals = 0;
};

double radius_of(RegionKind k, double s) { return k == RegionKind::ball ? s * s * s : s; }
double jacobian(RegionKind k, double s) {
  const double r = radius_of(k, s);
  const double r3 = r * r * r;
  return k == RegionKind::ball ? r3 * 3.0 * s * s : r3;
}

struct NodeTask {
  std::size_t interval;
  int node;
  SampleOutcome result;
  std::exception_ptr error;
};

void evaluate_intervals(std::vector<Interval>& iv, const std::vector<std::size_t>& which,
                        const PieceEvaluator& pe, const QuadPlan& plan, double inner_rel) {
  std::vector<NodeTask> tasks;
  tasks.reserve(which.size() * kNodes);
  for (std::size_t idx : which)
    for (int n = 0; n < kNodes; ++n) tasks.push_back({idx, n, {}, nullptr});

  const long ntasks = static_cast<long>(tasks.size());
#pragma omp parallel for schedule(dynamic) if (plan.exec == Exec::parallel)
  for (long t = 0; t < ntasks; ++t) {
    NodeTask& task = tasks[static_cast<std::size_t>(t)];
    const Interval& in = iv[task.interval];
    const double half = 0.5 * (in.b - in.a), mid = 0.5 * (in.a + in.b);
    const double s = mid + half * gk_node(task.node);
    try {
      task.result = pe.angular(in.center, radius_of(in.kind, s), inner_rel);
    } catch (...) {
      task.error = std::current_exception();
    }
  }
  for (const auto& task : tasks)
    if (task.error) std::rethrow_exception(task.error);

  for (std::size_t w = 0; w < which.size(); ++w) {
    Interval& in = iv[which[w]];
    const double half = 0.5 * (in.b - in.a), mid = 0.5 * (in.a + in.b);
    double k = 0.0, g = 0.0, ka = 0.0, inner = 0.0;
    std::size_t evals = 0;
    for (int n = 0; n < kNodes; ++n) {
      const SampleOutcome& o = tasks[w * kNodes + static_cast<std::size_t>(n)].result;
      const double jac = jacobian(in.kind, mid + half * gk_node(n));
      k += gk_kweight(n) * jac * o.value;
      g += gk_gweight(n) * jac * o.value;
      ka += gk_kweight(n) * jac * o.abs_value;
      inner += gk_kweight(n) * jac * o.error;
      evals += o.evals;
    }
    in.value = k * half;
    in.abs_value = ka * half;
    in.error = std::abs((k - g) * half) + inner * half;
    in.evals = evals;
  }
}

std::string center_name(const QuadPlan& plan, std::size_t j) {
  return j < plan.center_names.size() ? plan.center_names[j] : "c" + std::to_string(j);
}

const char* kind_name(RegionKind k) {
  switch (k) {
    case RegionKind::ball:
      return "ball";
    case RegionKind::shell:
      return "shell";
    default:
      return "tail";
  }
}

}  // namespace

QuadratureError::QuadratureError(const std::string& msg, const Vec4& where)
    : std::runtime_error(msg + " at y = (" + std::to_string(where[0]) + ", " + std::to_string(where[1]) +
                         ", " + std::to_string(where[2]) + ", " + std::to_string(where[3]) + ")"),
      where_(where) {}

QuadPlan QuadPlan::for_points(std::span<const Vec4> centers, double mass) {
  QuadPlan p;
  p.centers.assign(centers.begin(), centers.end());
  p.mass = mass;
  return p;
}

double QuadPlan::ball_radius() const {
  if (rho > 0.0) return rho;
  const double d = min_pairwise_distance(centers);
  return rho_frac * (std::isfinite(d) ? d : 1.0 / mass);
}

double QuadPlan::far_radius() const {
  if (r_far > 0.0) return r_far;
  return configuration_diameter(centers) + 8.0 / mass;
}

void QuadPlan::validate() const {
  if (centers.empty()) throw std::invalid_argument("quadrature plan needs at least one center");
  if (!(mass > 0.0)) throw std::invalid_argument("mass must be positive");
  const double r = ball_radius();
  if (!(r > 0.0)) throw std::invalid_argument("ball radius must be positive");
  if (2.0 * r >= min_pairwise_distance(centers)) throw std::invalid_argument("singular balls must be disjoint");
  if (!(far_radius() > configuration_diameter(centers)) || !(far_radius() > r))
    throw std::invalid_argument("far radius must exceed the configuration diameter and the ball radius");
  if (!(rel_tol > 0.0) && !(abs_tol > 0.0)) throw std::invalid_argument("a positive tolerance is required");
  if (angular_order < 2) throw std::invalid_argument("angular order must be at least 2");
}

GKResult gauss_kronrod21(const std::function<double(double)>& g, double a, double b) {
  const double half = 0.5 * (b - a), mid = 0.5 * (a + b);
  double k = 0.0, gs = 0.0;
  for (int i = 0; i < kNodes; ++i) {
    const double v = g(mid + half * gk_node(i));
    k += gk_kweight(i) * v;
    gs += gk_gweight(i) * v;
  }
  return {k * half, std::abs((k - gs) * half)};
}

void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights) {
  nodes.assign(static_cast<std::size_t>(n), 0.0);
  weights.assign(static_cast<std::size_t>(n), 0.0);
  auto legendre = [n](double x, double& pn, double& dpn) {
    double p0 = 1.0, p1 = x;
    for (int k = 2; k <= n; ++k) {
      const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    pn = p1;
    dpn = n * (x * p1 - p0) / (x * x - 1.0);
  };
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double pn = 0.0, dpn = 1.0;
    for (int it = 0; it < 100; ++it) {
      legendre(x, pn, dpn);
      const double dx = pn / dpn;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    legendre(x, pn, dpn);
    const double w = 2.0 / ((1.0 - x * x) * dpn * dpn);
    nodes[static_cast<std::size_t>(i)] = -x;
    nodes[static_cast<std::size_t>(n - 1 - i)] = x;
    weights[static_cast<std::size_t>(i)] = w;
    weights[static_cast<std::size_t>(n - 1 - i)] = w;
  }
}

NumericCoeff integrate_r4(const Integrand4& f, const QuadPlan& plan) {
  plan.validate();
  const SphereRule sphere = make_sphere_rule(plan.angular_order);
  const PieceEvaluator pe(f, plan, sphere);
  const double rho = plan.ball_radius();
  double r_tail = plan.far_radius();
  const double inner_rel = std::max(0.05 * plan.rel_tol, 1e-13);
  const std::size_t nc = plan.centers.size();

  std::vector<Interval> iv;
  for (std::size_t j = 0; j < nc; ++j) {
    const double tb = std::cbrt(rho);
    iv.push_back({j, RegionKind::ball, 0.0, 0.5 * tb});
    iv.push_back({j, RegionKind::ball, 0.5 * tb, tb});
    std::vector<double> cuts{rho, r_tail};
    for (double r = 2.0 * rho; r < r_tail; r *= 2.0) cuts.push_back(r);
    for (std::size_t k = 0; k < nc; ++k) {
      if (k == j) continue;
      const double d = norm(plan.centers[k] - plan.centers[j]);
      for (double c : {d - rho, d, d + rho})
        if (c > rho && c < r_tail) cuts.push_back(c);
    }
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end(), [](double x, double y) { return std::abs(x - y) < 1e-12; }),
               cuts.end());
    for (std::size_t c = 0; c + 1 < cuts.size(); ++c) iv.push_back({j, RegionKind::shell, cuts[c], cuts[c + 1]});
    iv.push_back({j, RegionKind::tail, r_tail, 1.5 * r_tail});
    iv.push_back({j, RegionKind::tail, 1.5 * r_tail, 2.0 * r_tail});
  }

  std::vector<std::size_t> all(iv.size());
  for (std::size_t i = 0; i < iv.size(); ++i) all[i] = i;
  evaluate_intervals(iv, all, pe, plan, inner_rel);

  NumericCoeff out;
  double remainder = 0.0;
  auto totals = [&](double& err, double& absm, std::size_t& evals) {
    err = 0.0;
    absm = 0.0;
    evals = 0;
    for (const auto& in : iv) {
      err += in.error;
      absm += in.abs_value;
      evals += in.evals;
    }
  };

  for (int extension = 0;; ++extension) {
    double err = 0.0, absm = 0.0;
    std::size_t evals = 0;
    totals(err, absm, evals);
    double tol = std::max(plan.abs_tol, plan.rel_tol * absm);
    while (err > tol && evals < plan.max_evals) {
      double worst = 0.0;
      for (const auto& in : iv) worst = std::max(worst, in.error);
      std::vector<std::size_t> split;
      for (std::size_t i = 0; i < iv.size() && split.size() < 16; ++i)
        if (iv[i].error >= 0.25 * worst) split.push_back(i);
      std::vector<std::size_t> fresh;
      for (std::size_t i : split) {
        const double m = 0.5 * (iv[i].a + iv[i].b);
        Interval right = iv[i];
        iv[i].b = m;
        right.a = m;
        iv.push_back(right);
        fresh.push_back(i);
        fresh.push_back(iv.size() - 1);
      }
      evaluate_intervals(iv, fresh, pe, plan, inner_rel);
      totals(err, absm, evals);
      tol = std::max(plan.abs_tol, plan.rel_tol * absm);
    }

    // Remainder beyond the tail from an exponential envelope fitted to
    // r^3 A(r) at 1.75 R and 2 R.
    remainder = 0.0;
    const double r_end = 2.0 * r_tail;
    std::vector<std::pair<SampleOutcome, SampleOutcome>> probes(nc);
    for (std::size_t j = 0; j < nc; ++j) {
      probes[j].first = pe.angular(j, 0.875 * r_end, inner_rel);
      probes[j].second = pe.angular(j, r_end, inner_rel);
      const double r1 = 0.875 * r_end, r2 = r_end;
      const double f1 = std::abs(probes[j].first.abs_value) * r1 * r1 * r1;
      const double f2 = std::abs(probes[j].second.abs_value) * r2 * r2 * r2;
      if (f2 == 0.0) continue;
      if (f1 > f2) {
        const double kappa = std::log(f1 / f2) / (r2 - r1);
        remainder += f2 / kappa;
      } else {
        remainder += f2 * r_end;
      }
    }
    totals(err, absm, evals);
    tol = std::max(plan.abs_tol, plan.rel_tol * absm);
    if (remainder <= 0.1 * tol || extension >= 4 || evals >= plan.max_evals) break;
    for (std::size_t j = 0; j < nc; ++j) {
      iv.push_back({j, RegionKind::tail, r_end, 1.5 * r_end});
      iv.push_back({j, RegionKind::tail, 1.5 * r_end, 2.0 * r_end});
    }
    std::vector<std::size_t> fresh;
    for (std::size_t i = iv.size() - 2 * nc; i < iv.size(); ++i) fresh.push_back(i);
    evaluate_intervals(iv, fresh, pe, plan, inner_rel);
    r_tail = r_end;
  }

  std::sort(iv.begin(), iv.end(), [](const Interval& x, const Interval& y) {
    if (x.center != y.center) return x.center < y.center;
    if (x.kind != y.kind) return x.kind < y.kind;
    return x.a < y.a;
  });
  double err_total = 0.0, abs_total = 0.0;
  for (std::size_t j = 0; j < nc; ++j) {
    for (RegionKind k : {RegionKind::ball, RegionKind::shell, RegionKind::tail}) {
      RegionContribution rc;
      rc.region = std::string(kind_name(k)) + "_" + center_name(plan, j);
      Neumaier s;
      for (const auto& in : iv) {
        if (in.center != j || in.kind != k) continue;
        s.add(in.value);
        rc.abs_error += in.error;
        rc.evals += in.evals;
        abs_total += in.abs_value;
      }
      rc.value = s.value();
      err_total += rc.abs_error;
      out.evals += rc.evals;
      out.breakdown.push_back(rc);
    }
  }
  double v = 0.0;
  for (const auto& rc : out.breakdown) v += rc.value;
  out.value = v;
  out.abs_error = err_total + remainder;
  out.abs_mass = abs_total;
  const double tol = std::max(plan.abs_tol, plan.rel_tol * abs_total);
  out.converged = out.abs_error <= tol * 1.0000001 || out.abs_error <= 1e-300;
  if (!out.converged) {
    out.message = out.evals >= plan.max_evals ? "evaluation budget exhausted" : "tail remainder above tolerance";
  }
  return out;
}

double mc_proposal_density(const QuadPlan& plan, const Vec4& y) {
  const std::size_t nc = plan.centers.size();
  const double rho = plan.ball_radius();
  const double alpha = 0.6 / static_cast<double>(nc);
  double q = 0.0;
  for (const auto& c : plan.centers) {
    const double r = norm(y - c);
    if (r < rho) q += alpha / (2.0 * kPi * kPi * rho * r * r * r);
  }
  Vec4 centroid{};
  for (const auto& c : plan.centers) centroid = centroid + (1.0 / nc) * c;
  const double kappa = plan.mass;
  const double rc = norm(y - centroid);
  const double k2 = kappa * kappa;
  q += 0.4 * k2 * k2 * std::exp(-kappa * rc) / (12.0 * kPi * kPi);
  return q;
}

NumericCoeff mc_integrate_r4(const Integrand4& f, const QuadPlan& plan, std::size_t samples, std::uint64_t seed) {
  plan.validate();
  if (samples < 2) throw std::invalid_argument("Monte Carlo needs at least two samples");
  const std::size_t nc = plan.centers.size();
  const double rho = plan.ball_radius();
  Vec4 centroid{};
  for (const auto& c : plan.centers) centroid = centroid + (1.0 / nc) * c;

  constexpr std::size_t kChunk = 1024;
  const std::size_t nchunks = (samples + kChunk - 1) / kChunk;
  const std::size_t nregions = nc + 1;
  struct ChunkAcc {
    std::vector<double> sum, sum2;
    std::size_t evals = 0;
    std::exception_ptr error;
  };
  std::vector<ChunkAcc> acc(nchunks);

  const long lchunks = static_cast<long>(nchunks);
#pragma omp parallel for schedule(dynamic) if (plan.exec == Exec::parallel)
  for (long ci = 0; ci < lchunks; ++ci) {
    const std::size_t chunk = static_cast<std::size_t>(ci);
    ChunkAcc& a = acc[chunk];
    a.sum.assign(nregions, 0.0);
    a.sum2.assign(nregions, 0.0);
    try {
      std::seed_seq ss{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                       static_cast<std::uint32_t>(chunk), static_cast<std::uint32_t>(chunk >> 32), 0x51u};
      std::mt19937_64 rng(ss);
      std::uniform_real_distribution<double> uni(0.0, 1.0);
      std::normal_distribution<double> gauss(0.0, 1.0);
      std::gamma_distribution<double> gamma(4.0, 1.0 / plan.mass);
      const std::size_t begin = chunk * kChunk;
      const std::size_t end = std::min(samples, begin + kChunk);
      for (std::size_t s = begin; s < end; ++s) {
        Vec4 dir;
        double n2 = 0.0;
        do {
          for (auto& d : dir) d = gauss(rng);
          n2 = dot(dir, dir);
        } while (n2 == 0.0);
        dir = (1.0 / std::sqrt(n2)) * dir;
        const double pick = uni(rng);
        Vec4 y;
        if (pick < 0.6) {
          const std::size_t j = std::min(nc - 1, static_cast<std::size_t>(pick / 0.6 * nc));
          double r = 0.0;
          do r = rho * uni(rng);
          while (r == 0.0);
          y = plan.centers[j] + r * dir;
        } else {
          y = centroid + gamma(rng) * dir;
        }
        std::size_t region = nc;
        for (std::size_t j = 0; j < nc; ++j)
          if (norm(y - plan.centers[j]) < rho) region = j;
        ++a.evals;
        const double fv = f(y);
        if (!std::isfinite(fv)) throw QuadratureError("integrand returned a non-finite value", y);
        const double x = fv == 0.0 ? 0.0 : fv / mc_proposal_density(plan, y);
        a.sum[region] += x;
        a.sum2[region] += x * x;
      }
    } catch (...) {
      a.error = std::current_exception();
    }
  }
  for (const auto& a : acc)
    if (a.error) std::rethrow_exception(a.error);

  const double n = static_cast<double>(samples);
  NumericCoeff out;
  std::vector<Neumaier> s(nregions), s2(nregions);
  for (const auto& a : acc) {
    for (std::size_t r = 0; r < nregions; ++r) {
      s[r].add(a.sum[r]);
      s2[r].add(a.sum2[r]);
    }
    out.evals += a.evals;
  }
  double total2 = 0.0, value = 0.0, abs_mass = 0.0;
  for (std::size_t r = 0; r < nregions; ++r) {
    RegionContribution rc;
    rc.region = r < nc ? "ball_" + center_name(plan, r) : std::string("outer");
    const double mean = s[r].value() / n;
    const double var = std::max(0.0, s2[r].value() / n - mean * mean);
    rc.value = mean;
    rc.abs_error = std::sqrt(var / (n - 1.0));
    total2 += s2[r].value();
    abs_mass += std::abs(mean);
    out.breakdown.push_back(rc);
  }
  for (const auto& rc : out.breakdown) value += rc.value;
  out.value = value;
  const double var = std::max(0.0, total2 / n - value * value);
  out.abs_error = std::sqrt(var / (n - 1.0));
  out.abs_mass = abs_mass;
  return out;
}

}  // namespace ope
