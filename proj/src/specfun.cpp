#include "opeflow/specfun.hpp"

#include <cmath>
#include <map>
#include <string>
#include <utility>

namespace ope {

namespace {

constexpr double kSeriesSplit = 2.0;
constexpr double kEps = 1e-17;

// Power series about z = 0; accurate for 0 < z <= 2.
std::pair<double, double> k01_series(double z) {
  const double q = 0.25 * z * z;
  const double log_half = std::log(0.5 * z);

  // I_0, I_1 and the digamma-weighted sums in one pass.
  double i0 = 0.0, i1 = 0.0, s0 = 0.0, s1 = 0.0;
  double t0 = 1.0;  // q^k / (k!)^2
  double t1 = 1.0;  // q^k / (k! (k+1)!)
  double harmonic = 0.0;  // H_k
  for (int k = 0; k < 200; ++k) {
    if (k > 0) {
      t0 *= q / (static_cast<double>(k) * k);
      t1 *= q / (static_cast<double>(k) * (k + 1));
      harmonic += 1.0 / k;
    }
    i0 += t0;
    i1 += t1;
    s0 += t0 * harmonic;
    // psi(k+1) + psi(k+2) = -2 gamma + 2 H_k + 1/(k+1)
    s1 += t1 * (-2.0 * kEulerGamma + 2.0 * harmonic + 1.0 / (k + 1));
    if (t0 < kEps * i0 && t1 < kEps * i1) break;
  }
  i1 *= 0.5 * z;
  const double k0 = -(log_half + kEulerGamma) * i0 + s0;
  const double k1 = 1.0 / z + log_half * i1 - 0.25 * z * s1;
  return {k0, k1};
}

// Steed's continued fraction for K_0 and K_1 (Temme's CF2 with nu = 0);
// returns exp(z) K_0(z), exp(z) K_1(z). Valid for z >= 2.
std::pair<double, double> k01_scaled_cf(double z) {
  double b = 2.0 * (1.0 + z);
  double d = 1.0 / b;
  double h = d;
  double delh = d;
  double q1 = 0.0, q2 = 1.0;
  const double a1 = 0.25;
  double q = a1, c = a1;
  double a = -a1;
  double s = 1.0 + q * delh;
  for (int i = 1; i < 100000; ++i) {
    a -= 2 * i;
    c = -a * c / (i + 1.0);
    const double qnew = (q1 - b * q2) / a;
    q1 = q2;
    q2 = qnew;
    q += c * qnew;
    b += 2.0;
    d = 1.0 / (b + a * d);
    delh = (b * d - 1.0) * delh;
    h += delh;
    const double dels = q * delh;
    s += dels;
    if (std::abs(dels / s) < 1e-17) break;
  }
  h = a1 * h;
  const double k0 = std::sqrt(kPi / (2.0 * z)) / s;
  const double k1 = k0 * (z + 0.5 - h) / z;
  return {k0, k1};
}

std::pair<double, double> k01(double z) {
  if (!(z > 0.0)) throw DomainError("modified Bessel K requires z > 0");
  if (std::isinf(z)) return {0.0, 0.0};
  if (z <= kSeriesSplit) return k01_series(z);
  const auto [e0, e1] = k01_scaled_cf(z);
  const double ez = std::exp(-z);
  return {e0 * ez, e1 * ez};
}

}  // namespace

double bessel_k0(double z) { return k01(z).first; }

double bessel_k1(double z) { return k01(z).second; }

std::vector<double> bessel_k_sequence(double z, int nmax) {
  const auto [k0, k1] = k01(z);
  std::vector<double> k(static_cast<std::size_t>(std::max(nmax, 1)) + 1);
  k[0] = k0;
  k[1] = k1;
  for (int n = 1; n < nmax; ++n) k[n + 1] = k[n - 1] + (2.0 * n / z) * k[n];
  k.resize(static_cast<std::size_t>(nmax) + 1);
  return k;
}

double propagator(const Vec4& x, double m) {
  const double r = norm(x);
  if (!(r > 0.0)) throw DomainError("propagator evaluated at zero separation");
  if (!(m > 0.0)) throw DomainError("propagator requires positive mass");
  return m * bessel_k1(m * r) / (4.0 * kPi * kPi * r);
}

namespace {

using ChainKey = std::pair<int, MultiIndex>;

std::vector<RadialChainTerm> build_chain(const MultiIndex& w) {
  // Start from F = h(s) and apply d_mu one derivative at a time using
  // d_mu s = x_mu: d_mu [x^e h^(k)] = e_mu x^{e-1_mu} h^(k) + x^{e+1_mu} h^(k+1).
  std::map<ChainKey, long long> terms;
  terms[{0, MultiIndex{}}] = 1;
  for (int mu = 0; mu < kSpacetimeDim; ++mu) {
    for (int rep = 0; rep < w[mu]; ++rep) {
      std::map<ChainKey, long long> next;
      const MultiIndex unit = MultiIndex::unit(mu);
      for (const auto& [key, coeff] : terms) {
        const auto& [k, e] = key;
        if (e[mu] > 0) next[{k, e - unit}] += coeff * e[mu];
        next[{k + 1, e + unit}] += coeff;
      }
      std::erase_if(next, [](const auto& kv) { return kv.second == 0; });
      terms = std::move(next);
    }
  }
  std::vector<RadialChainTerm> out;
  out.reserve(terms.size());
  for (const auto& [key, coeff] : terms) out.push_back({key.first, key.second, coeff});
  return out;
}

int flat_index(const MultiIndex& w) {
  constexpr int b = kMaxPropagatorDerivative + 1;
  return ((w[0] * b + w[1]) * b + w[2]) * b + w[3];
}

}  // namespace

const std::vector<RadialChainTerm>& radial_chain_rule(const MultiIndex& w) {
  if (w.order() > kMaxPropagatorDerivative) {
    throw DomainError("propagator derivative order " + std::to_string(w.order()) +
                      " exceeds supported maximum " + std::to_string(kMaxPropagatorDerivative));
  }
  static const std::vector<std::vector<RadialChainTerm>> table = [] {
    constexpr int b = kMaxPropagatorDerivative + 1;
    std::vector<std::vector<RadialChainTerm>> t(static_cast<std::size_t>(b * b * b * b));
    for (int a0 = 0; a0 <= kMaxPropagatorDerivative; ++a0)
      for (int a1 = 0; a0 + a1 <= kMaxPropagatorDerivative; ++a1)
        for (int a2 = 0; a0 + a1 + a2 <= kMaxPropagatorDerivative; ++a2)
          for (int a3 = 0; a0 + a1 + a2 + a3 <= kMaxPropagatorDerivative; ++a3) {
            const MultiIndex v{a0, a1, a2, a3};
            t[static_cast<std::size_t>(flat_index(v))] = build_chain(v);
          }
    return t;
  }();
  return table[static_cast<std::size_t>(flat_index(w))];
}

double propagator_deriv(const Vec4& x, double m, const MultiIndex& w) {
  if (w.is_zero()) return propagator(x, m);
  const auto& chain = radial_chain_rule(w);
  const double r = norm(x);
  if (!(r > 0.0)) throw DomainError("propagator derivative evaluated at zero separation");
  if (!(m > 0.0)) throw DomainError("propagator requires positive mass");

  // h^(k)(s) = (m^2 / 4 pi^2) (-m^2)^k z^{-1-k} K_{1+k}(z), z = m r,
  // from (1/z d/dz)^k [z^{-1} K_1(z)] = (-1)^k z^{-1-k} K_{1+k}(z).
  const int kmax = w.order();
  const double z = m * r;
  const auto kn = bessel_k_sequence(z, kmax + 1);
  std::vector<double> h(static_cast<std::size_t>(kmax) + 1);
  const double m2 = m * m;
  double pref = m2 / (4.0 * kPi * kPi);
  double zpow = 1.0 / z;
  for (int k = 0; k <= kmax; ++k) {
    h[static_cast<std::size_t>(k)] = pref * zpow * kn[static_cast<std::size_t>(k) + 1];
    pref *= -m2;
    zpow /= z;
  }

  double total = 0.0;
  for (const auto& term : chain) {
    double mono = static_cast<double>(term.coefficient);
    for (int mu = 0; mu < kSpacetimeDim; ++mu) {
      for (int p = 0; p < term.exponent[mu]; ++p) mono *= x[mu];
    }
    total += mono * h[static_cast<std::size_t>(term.k)];
  }
  return total;
}

}  // namespace ope
