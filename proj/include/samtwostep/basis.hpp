#pragma once

#include <Eigen/Dense>

namespace samtwostep {

enum class BasisFamily { kPiecewiseLegendre, kBSpline };

struct Interval {
  double lo = 0.0;
  double hi = 1.0;
  double length() const { return hi - lo; }
};

// Affine bijection between two nondegenerate intervals; endpoints map to
// endpoints. Throws std::invalid_argument on a zero-length source.
double affine_rescale(double x, const Interval& from, const Interval& to);

// Shifted, rescaled Legendre polynomial sqrt(2l+1) * Q_l(2x - 1) on [0,1].
// Guarded to l <= 50; x outside [0,1] is a domain error.
double legendre_shifted(int l, double x);

struct BasisSpec {
  BasisFamily family = BasisFamily::kPiecewiseLegendre;
  int degree = 0;     // polynomial degree per piece (spline order - 1)
  int intervals = 1;  // equidistant intervals m on the unit scale
  Interval domain{0.0, 1.0};

  int dimension() const {
    return family == BasisFamily::kPiecewiseLegendre
               ? intervals * (degree + 1)
               : intervals + degree;
  }
  void validate() const;  // throws std::invalid_argument
};

// A univariate function system on spec.domain. Piecewise-Legendre functions
// are L2(Lebesgue)-orthonormal after the affine map to [0,1] and each is
// supported on exactly one interval ((k/m, (k+1)/m], x = 0 assigned to the
// first). B-splines follow Cox-de Boor on equidistant clamped knots and are
// left unnormalized (partition of unity).
class Basis {
 public:
  explicit Basis(const BasisSpec& spec);

  const BasisSpec& spec() const { return spec_; }
  int dimension() const { return dim_; }

  // Value of basis function k (0-based) at x on the domain scale.
  double value(int k, double x) const;

  // All d values at x, as a row of the design matrix.
  Eigen::VectorXd row(double x) const;

  // Design matrix: entry (i, k) = b_k(points[i]). Piecewise rows carry at
  // most degree+1 nonzeros. Points outside the domain are a domain error.
  Eigen::MatrixXd eval_design(const Eigen::VectorXd& points) const;

  // Interval index of basis function k (piecewise family only).
  int interval_of(int k) const;

 private:
  double to_unit(double x) const;  // throws std::domain_error outside domain

  BasisSpec spec_;
  int dim_;
  Eigen::VectorXd knots_;  // clamped knot vector on [0,1]; B-spline only
};

struct CenteredDesign {
  Eigen::MatrixXd raw;
  Eigen::VectorXd means;
  Eigen::MatrixXd centered;
};

// Subtract each column's empirical mean; the constants are retained so
// fitted functions can be evaluated at new points.
CenteredDesign center_empirically(const Eigen::MatrixXd& design);

}  // namespace samtwostep
