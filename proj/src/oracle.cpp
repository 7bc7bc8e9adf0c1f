#include "opeflow/oracle.hpp"

#include <boost/math/interpolators/cardinal_cubic_b_spline.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/bessel.hpp>
#include <cmath>
#include <memory>
#include <numbers>

namespace ope::oracle {

namespace {

constexpr double kPi = std::numbers::pi;
const double kBubbleNorm = 1.0 / (16.0 * kPi * kPi);

template <class F>
double gk(F f, double a, double b, double tol = 1e-13) {
  return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, 12, tol);
}

// Wynn epsilon extrapolation of a sequence of partial sums.
double wynn_epsilon(const std::vector<double>& s) {
  const std::size_t n = s.size();
  std::vector<double> prev(n + 1, 0.0), cur(s.begin(), s.end());
  double best = s.back();
  for (std::size_t k = 1; k < n; ++k) {
    std::vector<double> next(n - k);
    for (std::size_t j = 0; j + k < n; ++j) {
      const double d = cur[j + 1] - cur[j];
      if (d == 0.0) return cur[j + 1];
      next[j] = prev[j + 1] + 1.0 / d;
    }
    prev = std::move(cur);
    cur = std::move(next);
    if (k % 2 == 0) best = cur.back();
  }
  return best;
}

}  // namespace

double subtracted_bubble(double q2, double m) {
  if (!(q2 >= 0.0) || !(m > 0.0)) throw std::invalid_argument("subtracted_bubble needs q2 >= 0 and m > 0");
  const double a = q2 / (m * m);
  if (a == 0.0) return 0.0;
  const double L = gk([a](double x) { return std::log1p(x * (1.0 - x) * a); }, 0.0, 1.0);
  return -kBubbleNorm * L;
}

double subtracted_bubble_closed(double q2, double m) {
  if (!(q2 >= 0.0) || !(m > 0.0)) throw std::invalid_argument("subtracted_bubble needs q2 >= 0 and m > 0");
  const double a = q2 / (m * m);
  double L;
  if (a < 1e-3) {
    L = a / 6.0 - a * a / 60.0 + a * a * a / 420.0 - a * a * a * a / 2520.0;
  } else {
    const double beta = std::sqrt(1.0 + 4.0 / a);
    const double beta_minus_1 = (4.0 / a) / (beta + 1.0);
    L = -2.0 + beta * std::log((beta + 1.0) / beta_minus_1);
  }
  return -kBubbleNorm * L;
}

double subtracted_bubble_brute(double q2, double m) {
  const double q = std::sqrt(q2);
  const double m2 = m * m;
  auto angular = [&](double p) {
    const double p2 = p * p;
    const double base = 1.0 / (p2 + m2);
    return gk(
        [&](double th) {
          const double s = std::sin(th);
          const double shifted = 1.0 / (p2 + 2.0 * p * q * std::cos(th) + q2 + m2);
          return s * s * base * (shifted - base);
        },
        0.0, kPi, 1e-12);
  };
  // p = m u / (1 - u) maps [0, 1) onto [0, inf)
  const double radial = gk(
      [&](double u) {
        if (u >= 1.0) return 0.0;
        const double p = m * u / (1.0 - u);
        const double jac = m / ((1.0 - u) * (1.0 - u));
        return p * p * p * angular(p) * jac;
      },
      0.0, 1.0, 1e-11);
  return 4.0 * kPi * radial / std::pow(2.0 * kPi, 4);
}

BubbleProfile::BubbleProfile(double m, double q2_min, double q2_max, int points_per_decade) : m_(m) {
  if (!(m > 0.0) || !(q2_min > 0.0) || !(q2_max > q2_min) || points_per_decade < 2)
    throw std::invalid_argument("invalid bubble profile grid");
  const double m2 = m * m;
  t0_ = std::log(q2_min / m2);
  h_ = std::log(10.0) / points_per_decade;
  const int n = static_cast<int>(std::ceil((std::log(q2_max / m2) - t0_) / h_)) + 1;
  for (int i = 0; i < n; ++i) {
    const double q2 = m2 * std::exp(t0_ + i * h_);
    q2_.push_back(q2);
    values_.push_back(subtracted_bubble(q2, m));
  }
  auto spline = std::make_shared<boost::math::interpolators::cardinal_cubic_b_spline<double>>(values_.begin(),
                                                                                             values_.end(), t0_, h_);
  spline_ = [spline](double t) { return (*spline)(t); };
}

double BubbleProfile::operator()(double q2) const {
  if (q2 < q2_.front() || q2 > q2_.back()) return subtracted_bubble(q2, m_);
  return spline_(std::log(q2 / (m_ * m_)));
}

double sphere_plane_wave(double z) {
  if (z == 0.0) return 2.0 * kPi * kPi;
  return 4.0 * kPi * kPi * boost::math::cyl_bessel_j(1, z) / z;
}

double sphere_plane_wave_direct(double z) {
  // dOmega_3 = sin^2(theta) sin(chi) dtheta dchi dphi; the phi integral gives 2 pi
  auto theta = [z](double th) {
    const double s = std::sin(th);
    return s * s * std::cos(z * std::cos(th));
  };
  const double both = gk([&](double chi) { return std::sin(chi) * gk(theta, 0.0, kPi); }, 0.0, kPi);
  return 2.0 * kPi * both;
}

RadialResult radial_fourier_4d(const std::function<double(double)>& f, double r) {
  if (!(r > 0.0)) throw std::invalid_argument("radial transform needs r > 0");
  auto g = [&](double q) { return q * q * boost::math::cyl_bessel_j(1, q * r) * f(q); };
  std::vector<double> partial;
  double sum = 0.0, lo = 0.0;
  double last = 0.0, change = INFINITY;
  constexpr int kMin = 24, kMax = 400;
  for (int k = 1; k <= kMax; ++k) {
    const double hi = boost::math::cyl_bessel_j_zero(1.0, k) / r;
    sum += gk(g, lo, hi, 1e-12);
    lo = hi;
    partial.push_back(sum);
    if (k < kMin || k % 4 != 0) continue;
    // extrapolate from the tail of the sequence only
    const std::vector<double> tail(partial.end() - kMin, partial.end());
    const double est = wynn_epsilon(tail);
    change = std::abs(est - last);
    last = est;
    if (k > kMin && change <= 1e-10 * std::abs(est)) {
      return {est / (4.0 * kPi * kPi * r), change / (4.0 * kPi * kPi * r), k};
    }
  }
  if (change <= 1e-6 * std::abs(last)) return {last / (4.0 * kPi * kPi * r), change / (4.0 * kPi * kPi * r), kMax};
  throw OracleError("radial Fourier transform did not converge");
}

RadialResult momentum_space_C1_phi_phi3_detail(const Vec4& x12, double m) {
  const double r = norm(x12);
  if (!(r > 0.0)) throw std::invalid_argument("separation must be nonzero");
  const BubbleProfile profile(m, 1e-8 * m * m, 1e10 * m * m, 40);
  const double m2 = m * m;
  RadialResult res = radial_fourier_4d([&](double q) { return profile(q * q) / (q * q + m2); }, r);
  res.value *= -3.0;
  res.error *= 3.0;
  return res;
}

double momentum_space_C1_phi_phi3(const Vec4& x12, double m) { return momentum_space_C1_phi_phi3_detail(x12, m).value; }

double k0_check(const Vec4& x12, double m) {
  const double r = norm(x12);
  if (!(r > 0.0)) throw std::invalid_argument("separation must be nonzero");
  return -kBubbleNorm * boost::math::cyl_bessel_k(0, m * r);
}

}  // namespace ope::oracle
