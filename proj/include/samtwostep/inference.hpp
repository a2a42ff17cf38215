#pragma once

#include <Eigen/Dense>
#include <array>

namespace samtwostep {

// Inverse standard normal CDF (Acklam's rational approximation polished with
// one Halley step on erfc); absolute error well below 1e-9.
double normal_quantile(double p);

enum class EstimatorKind { kOracle, kPresmooth, kResmooth };

struct PointwiseCI {
  double center = 0.0;
  double half_width = 0.0;
  double level = 0.95;
  EstimatorKind estimator = EstimatorKind::kResmooth;

  double lo() const { return center - half_width; }
  double hi() const { return center + half_width; }
  bool covers(double truth) const {
    return truth >= lo() && truth <= hi();
  }
};

// Plug-in interval for a linear estimator with weight vector w on Y:
// half width = z_{(1+level)/2} * sigma * ||w||_2.
PointwiseCI pointwise_ci(const Eigen::VectorXd& weights, double estimate,
                         double sigma, double level,
                         EstimatorKind estimator = EstimatorKind::kResmooth);

// Residual-based noise scale: sum of squared residuals over n minus the
// active dimension count. Optional alternative to a known sigma; never the
// default in the simulation lab.
double residual_sigma_estimate(const Eigen::VectorXd& residuals,
                               int active_dimension);

struct TheoryParams {
  double r1 = 1.0;
  double r2 = 1.0;
  int s0 = 1;
  int s1 = 1;
  double psi = 1.0;
  double phi = 1.0;
  double rho0 = 0.0;
  double gamma0 = 0.0;
  double gamma1 = 0.0;
  double x = 2.0;
  double y = 1.0;
  double sigma = 1.0;

  void validate() const;  // throws std::invalid_argument on out-of-range fields
};

struct DeltaTerms {
  double delta1 = 0.0;
  double delta2 = 0.0;
  double delta3 = 0.0;
};

// The three error terms attached to the approximation / improved-Lasso-bias /
// variance decomposition:
//   D1 = (s1 d1^{-r1} + s1 s0 d2^{-r2}) / (psi (1 - rho0))
//   D2 = ((eta/lambda) sqrt(s1 d1) (d1^{-r1} + s0 d2^{-r2})^2
//         + s0 sqrt(s1) sqrt(d1) lambda eta) / (psi (1 - rho0))
//   D3 = sqrt(s1 (log d1 + y) / n) / (psi (1 - rho0))
// rho0 = 1 is an error (no angle separation).
DeltaTerms theoretical_deltas(const TheoryParams& p, int d1, int d2, int n,
                              double lambda, double eta);

struct RateConditions {
  bool first = false;
  bool second = false;
  bool third = false;
  bool all() const { return first && second && third; }
};

// The three strict inequalities under which the two-step estimator tracks a
// rate n^{-beta} oracle smoother.
RateConditions check_rate_conditions(double gamma0, double gamma1, double r1,
                                     double r2, double beta);

// Asymptotic minimax risk constant in the oracle model:
// kappa = { (2 rho1 + 1) C_S ( sigma^2 rho1 / (pi (rho1+1)) * I )^{2 rho1} }^{1/(2 rho1 + 1)}
// with I the integral of 1/p1 over [0,1].
double kappa_minimax(double rho1, double c_s, double sigma,
                     double inv_density_integral);

}  // namespace samtwostep
