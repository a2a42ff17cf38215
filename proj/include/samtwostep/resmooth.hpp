#pragma once

#include <Eigen/Dense>

#include "samtwostep/basis.hpp"
#include "samtwostep/despars.hpp"

namespace samtwostep {

enum class Kernel { kEpanechnikov, kUniform, kTriangular };

enum class ResmoothMethod { kSpline, kPolynomial, kLocalPoly };

struct ResmoothSpec {
  ResmoothMethod method = ResmoothMethod::kSpline;
  int coarse_intervals = 1;  // m* (spline / polynomial)
  double bandwidth = 0.0;    // h (local polynomial)
  int local_degree = 1;      // k (local polynomial)
  Kernel kernel = Kernel::kEpanechnikov;
};

// True iff the fine grid subdivides the coarse one (m1 a multiple of m*).
bool check_nested(int m1, int m_star);

// Pseudo responses of the second step: f-hat_1 at the design points.
Eigen::VectorXd pseudo_responses(const DebiasedFit& fit);

// Least-squares smoother on a coarse basis, fitted at fixed design points.
// Solves the normal equations through a QR factorization, never an explicit
// inverse, and exposes the linear hat weights s(x) over the pseudo responses.
class LeastSquaresSmoother {
 public:
  LeastSquaresSmoother(const Basis& coarse, const Eigen::VectorXd& points);

  // Restriction to a subset of basis functions (columns empirically
  // identifiable at the given points).
  LeastSquaresSmoother(const Basis& coarse, const Eigen::VectorXd& points,
                       std::vector<int> kept);

  const Basis& basis() const { return basis_; }
  Eigen::Index n() const { return design_.rows(); }
  const std::vector<int>& kept() const { return kept_; }

  // Basis row restricted to the kept columns.
  Eigen::VectorXd basis_row(double x) const;

  Eigen::VectorXd coefficients(const Eigen::VectorXd& pseudo) const;
  Eigen::VectorXd fitted(const Eigen::VectorXd& pseudo) const;

  double evaluate(const Eigen::VectorXd& coefficients, double x) const;

  // s(x): the n-vector with s(x)' v = (least-squares fit of v) evaluated at x.
  Eigen::VectorXd weights(double x) const;

  // Operator infinity norm of the hat matrix (sup-norm stability constant of
  // the smoother at the data).
  double hat_infinity_norm() const;

 private:
  Basis basis_;
  std::vector<int> kept_;
  Eigen::MatrixXd design_;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr_;
};

struct LocalPolyFit {
  double center = 0.0;
  Eigen::VectorXd coefficients;  // a_0 ... a_k
  int effective_sample = 0;
  Eigen::VectorXd weights0;  // linear weights of a_0 on the responses

  double estimate() const { return coefficients[0]; }
  double derivative(int j) const;  // j! * a_j, j <= degree
};

// Weighted least squares of the responses on powers (x_i - x)^0 .. (x_i - x)^k
// with kernel weights K_h(x_i - x) = h^{-1} K(h^{-1}(x_i - x)). Throws when
// fewer than k+1 points carry positive weight (message carries the count).
LocalPolyFit local_polynomial(const Eigen::VectorXd& responses,
                              const Eigen::VectorXd& x1, double x, double h,
                              int degree, Kernel kernel = Kernel::kEpanechnikov);

double kernel_value(Kernel kernel, double u);

// Weights of the composed estimator on Y, with the Lasso pieces held fixed:
// w(x)' = s(x)' X1 ((1/n) Z1'X1)^{-1} (1/n) Z1'.
Eigen::VectorXd composite_weights(const DebiasedFit& fit,
                                  const Eigen::VectorXd& smoother_weights);

}  // namespace samtwostep
