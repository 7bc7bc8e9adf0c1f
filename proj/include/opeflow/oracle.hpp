#pragma once

// Momentum-space reference values, computed without the position-space
// machinery: Feynman-parameter bubbles, a 4D Fourier-Bessel radial transform
// and Boost's quadrature routines.

#include <functional>
#include <stdexcept>
#include <vector>

#include "opeflow/core.hpp"

namespace ope::oracle {

class OracleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// int d^4p/(2pi)^4 [ 1/((p^2+m^2)((p+q)^2+m^2)) - 1/(p^2+m^2)^2 ]
///   = -(1/16pi^2) int_0^1 log(1 + x(1-x) q^2/m^2) dx
double subtracted_bubble(double q2, double m);

/// Same quantity from the elementary antiderivative; used to check the above.
double subtracted_bubble_closed(double q2, double m);

/// Same quantity by brute-force 2D quadrature over |p| and the angle between
/// p and q. Slow; for validation only.
double subtracted_bubble_brute(double q2, double m);

/// Cubic-spline table of subtracted_bubble in log(q^2/m^2).
class BubbleProfile {
 public:
  BubbleProfile(double m, double q2_min, double q2_max, int points_per_decade);

  double operator()(double q2) const;
  double mass() const { return m_; }
  const std::vector<double>& q2_grid() const { return q2_; }
  const std::vector<double>& values() const { return values_; }

 private:
  double m_;
  double t0_, h_;  // grid in t = log(q2/m^2)
  std::vector<double> q2_, values_;
  std::function<double(double)> spline_;
};

/// Angular average over the unit 3-sphere of e^{i z cos(theta)}:
/// 4 pi^2 J_1(z) / z, with the value 2 pi^2 at z = 0.
double sphere_plane_wave(double z);

/// The same average by direct 2D quadrature over (theta, chi) on S^3.
double sphere_plane_wave_direct(double z);

/// int d^4q/(2pi)^4 e^{i q.x} f(|q|) = 1/(4 pi^2 r) int_0^inf q^2 J_1(q r) f(q) dq,
/// summed between zeros of J_1 and accelerated with the Wynn epsilon algorithm.
struct RadialResult {
  double value;
  double error;
  int intervals;
};
RadialResult radial_fourier_4d(const std::function<double(double)>& f, double r);

/// -3 int d^4q/(2pi)^4 e^{i q.x12} subtracted_bubble(q^2) / (q^2 + m^2).
double momentum_space_C1_phi_phi3(const Vec4& x12, double m);
RadialResult momentum_space_C1_phi_phi3_detail(const Vec4& x12, double m);

/// -(1/16pi^2) K_0(m |x12|), using Boost's Bessel implementation.
double k0_check(const Vec4& x12, double m);

}  // namespace ope::oracle
