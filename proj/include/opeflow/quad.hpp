#pragma once

// Integration over R^4 of functions with integrable point singularities at a
// finite set of centers and exponential decay at infinity.
//
// The deterministic integrator splits f with a smooth partition of unity
// w_j(y) = 1 / sum_k (|y - x_j| / |y - x_k|)^8 and integrates each piece in
// hyperspherical coordinates about its own center: a ball [0, rho] in the
// variable t = r^(1/3), a shell [rho, R_far] and a tail [R_far, 2 R_far], with
// the remainder beyond the tail bounded by an exponential envelope.

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "opeflow/core.hpp"

namespace ope {

enum class Exec { serial, parallel };

struct QuadPlan {
  std::vector<Vec4> centers;
  std::vector<std::string> center_names;  // region labels; defaults to c0, c1, ...
  double mass = 1.0;
  double rho_frac = 0.4;  // ball radius as a fraction of the minimum center distance
  double rho = 0.0;       // explicit ball radius; 0 means derive from rho_frac
  double r_far = 0.0;     // explicit far radius; 0 means diameter + 8/m
  double rel_tol = 1e-4;
  double abs_tol = 0.0;
  std::size_t max_evals = 200'000'000;
  int angular_order = 8;  // Gauss-Legendre points in cos(theta); 2x that in phi
  Exec exec = Exec::parallel;

  static QuadPlan for_points(std::span<const Vec4> centers, double mass);

  double ball_radius() const;
  double far_radius() const;
  /// Throws std::invalid_argument naming the violated invariant.
  void validate() const;
};

struct RegionContribution {
  std::string region;
  double value = 0.0;
  double abs_error = 0.0;
  std::size_t evals = 0;
};

struct NumericCoeff {
  double value = 0.0;
  double abs_error = 0.0;
  /// Integral of |f| as seen by the rule; the scale for relative tolerances.
  double abs_mass = 0.0;
  std::vector<RegionContribution> breakdown;  // value is their ordered sum
  std::size_t evals = 0;
  bool converged = true;
  std::string message;
};

using Integrand4 = std::function<double(const Vec4&)>;

class QuadratureError : public std::runtime_error {
 public:
  QuadratureError(const std::string& msg, const Vec4& where);
  const Vec4& where() const { return where_; }

 private:
  Vec4 where_;
};

NumericCoeff integrate_r4(const Integrand4& f, const QuadPlan& plan);

/// Importance-sampled Monte Carlo over a mixture of r^-3 radial proposals in
/// the balls and a Gamma(4, m) radial proposal about the centroid. The value
/// depends only on (f, plan, samples, seed), not on the thread count.
NumericCoeff mc_integrate_r4(const Integrand4& f, const QuadPlan& plan, std::size_t samples,
                             std::uint64_t seed);

/// Mixture density used by mc_integrate_r4; exposed for testing.
double mc_proposal_density(const QuadPlan& plan, const Vec4& y);

/// 21-point Gauss-Kronrod rule on [a, b]: returns {kronrod, |kronrod - gauss10|}.
struct GKResult {
  double value;
  double error;
};
GKResult gauss_kronrod21(const std::function<double(double)>& g, double a, double b);

/// Gauss-Legendre nodes and weights on [-1, 1].
void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights);

}  // namespace ope
