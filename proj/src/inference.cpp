#include "samtwostep/inference.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace samtwostep {

namespace {

double acklam_initial(double p) {
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  if (p < plow) {
    const double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p > 1.0 - plow) {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double q = p - 0.5;
  const double r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

}  // namespace

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw std::invalid_argument("normal_quantile: p must be in (0, 1)");
  }
  double x = acklam_initial(p);
  // One Halley step on F(x) - p with F from erfc.
  for (int i = 0; i < 2; ++i) {
    const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
    const double u = e * std::sqrt(2.0 * M_PI) * std::exp(x * x / 2.0);
    x -= u / (1.0 + x * u / 2.0);
  }
  return x;
}

PointwiseCI pointwise_ci(const Eigen::VectorXd& weights, double estimate,
                         double sigma, double level, EstimatorKind estimator) {
  if (!(level > 0.0 && level < 1.0)) {
    throw std::invalid_argument("pointwise_ci: level must be in (0, 1)");
  }
  if (sigma < 0.0) throw std::invalid_argument("pointwise_ci: negative sigma");
  PointwiseCI ci;
  ci.center = estimate;
  ci.level = level;
  ci.estimator = estimator;
  ci.half_width = normal_quantile(0.5 * (1.0 + level)) * sigma * weights.norm();
  return ci;
}

double residual_sigma_estimate(const Eigen::VectorXd& residuals,
                               int active_dimension) {
  const double dof = static_cast<double>(residuals.size() - active_dimension);
  if (dof <= 0.0) {
    throw std::invalid_argument("residual_sigma_estimate: nonpositive degrees of freedom");
  }
  return std::sqrt(residuals.squaredNorm() / dof);
}

void TheoryParams::validate() const {
  if (!(r1 > 0.0 && r2 > 0.0)) throw std::invalid_argument("theory: r1, r2 must be positive");
  if (s0 < 1 || s1 < 1) throw std::invalid_argument("theory: s0, s1 must be positive integers");
  if (!(psi > 0.0 && psi <= 1.0)) throw std::invalid_argument("theory: psi must be in (0, 1]");
  if (!(phi > 0.0 && phi <= 1.0)) throw std::invalid_argument("theory: phi must be in (0, 1]");
  if (!(rho0 >= 0.0 && rho0 < 1.0)) throw std::invalid_argument("theory: rho0 must be in [0, 1)");
  if (gamma0 < 0.0 || gamma1 < 0.0) throw std::invalid_argument("theory: gammas must be >= 0");
  if (!(x > 0.0 && y > 0.0)) throw std::invalid_argument("theory: x, y must be positive");
  if (!(sigma > 0.0)) throw std::invalid_argument("theory: sigma must be positive");
}

DeltaTerms theoretical_deltas(const TheoryParams& p, int d1, int d2, int n,
                              double lambda, double eta) {
  p.validate();
  if (d1 <= 0 || d2 <= 0 || n <= 0) {
    throw std::invalid_argument("theoretical_deltas: dimensions must be positive");
  }
  if (p.rho0 >= 1.0) {
    throw std::invalid_argument("theoretical_deltas: rho0 = 1 leaves no angle separation");
  }
  const double denom = p.psi * (1.0 - p.rho0);
  const double s0 = static_cast<double>(p.s0);
  const double s1 = static_cast<double>(p.s1);
  const double a1 = std::pow(static_cast<double>(d1), -p.r1);
  const double a2 = std::pow(static_cast<double>(d2), -p.r2);

  DeltaTerms out;
  out.delta1 = (s1 * a1 + s1 * s0 * a2) / denom;
  out.delta2 = ((eta / lambda) * std::sqrt(s1 * d1) * (a1 + s0 * a2) * (a1 + s0 * a2) +
                s0 * std::sqrt(s1) * std::sqrt(static_cast<double>(d1)) * lambda * eta) /
               denom;
  out.delta3 = std::sqrt(s1 * (std::log(static_cast<double>(d1)) + p.y) /
                         static_cast<double>(n)) /
               denom;
  return out;
}

RateConditions check_rate_conditions(double gamma0, double gamma1, double r1,
                                     double r2, double beta) {
  if (!(r1 > 0.0 && r2 > 0.0 && beta > 0.0)) {
    throw std::invalid_argument("check_rate_conditions: r1, r2, beta must be positive");
  }
  const double lo = std::min(gamma0, gamma1);
  const double hi = std::max(gamma0, gamma1);
  RateConditions out;
  out.first = (1.0 + 1.0 / r2) * gamma0 +
                  (0.5 + 0.5 / r1 + 1.0 / r2) * gamma1 <
              1.0 - (1.0 + 0.5 / r1 + 1.0 / r2) * beta;
  out.second = 2.0 * hi + (2.0 / r1) * gamma1 < 1.0 - (2.0 / r1) * beta;
  out.third = (2.0 / r2) * lo + (2.0 + 2.0 / r2) * hi < 1.0 - (2.0 / r2) * beta;
  return out;
}

double kappa_minimax(double rho1, double c_s, double sigma,
                     double inv_density_integral) {
  if (!(rho1 >= 1.0)) throw std::invalid_argument("kappa_minimax: rho1 must be >= 1");
  if (!(c_s > 0.0 && sigma > 0.0 && inv_density_integral > 0.0)) {
    throw std::invalid_argument("kappa_minimax: arguments must be positive");
  }
  const double inner =
      sigma * sigma * rho1 / (M_PI * (rho1 + 1.0)) * inv_density_integral;
  return std::pow((2.0 * rho1 + 1.0) * c_s * std::pow(inner, 2.0 * rho1),
                  1.0 / (2.0 * rho1 + 1.0));
}

}  // namespace samtwostep
