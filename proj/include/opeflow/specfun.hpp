#pragma once

// Modified Bessel functions K_0, K_1 and the massive Euclidean propagator
// in four dimensions together with its Cartesian derivatives.

#include <stdexcept>
#include <vector>

#include "opeflow/core.hpp"

namespace ope {

inline constexpr double kPi = 3.14159265358979323846264338327950288;
inline constexpr double kEulerGamma = 0.57721566490153286060651209008240243;

/// Highest total derivative order supported by propagator_deriv.
inline constexpr int kMaxPropagatorDerivative = 8;

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

double bessel_k0(double z);
double bessel_k1(double z);

/// K_0(z), ..., K_nmax(z) by upward recurrence from K_0 and K_1.
std::vector<double> bessel_k_sequence(double z, int nmax);

/// Fourier transform of 1/(p^2 + m^2) in four dimensions:
/// m K_1(m r) / (4 pi^2 r) with r = |x|.
double propagator(const Vec4& x, double m);

/// d^w of the propagator at x, from the chain rule applied to the radial
/// profile h(s), s = |x|^2 / 2, whose derivatives are Bessel functions.
double propagator_deriv(const Vec4& x, double m, const MultiIndex& w);

struct PropagatorEval {
  double value;
  MultiIndex derivative_order;
};

inline PropagatorEval evaluate_propagator(const Vec4& x, double m, const MultiIndex& w) {
  return {propagator_deriv(x, m, w), w};
}

/// Coefficients of d^w F = sum_k sum_e c_{k,e} x^e h^{(k)}(s) for a radial
/// F(x) = h(|x|^2/2). Exposed for testing.
struct RadialChainTerm {
  int k;
  MultiIndex exponent;
  long long coefficient;
};
const std::vector<RadialChainTerm>& radial_chain_rule(const MultiIndex& w);

}  // namespace ope
