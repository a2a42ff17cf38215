#include "samtwostep/resmooth.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "samtwostep/errors.hpp"

namespace samtwostep {

bool check_nested(int m1, int m_star) {
  if (m1 < 1 || m_star < 1) throw std::invalid_argument("check_nested: positive integers");
  return m1 % m_star == 0;
}

Eigen::VectorXd pseudo_responses(const DebiasedFit& fit) {
  return fit.fitted_at_data();
}

namespace {

std::vector<int> all_columns(int d) {
  std::vector<int> kept(d);
  for (int i = 0; i < d; ++i) kept[i] = i;
  return kept;
}

Eigen::MatrixXd select_columns(const Eigen::MatrixXd& m,
                               const std::vector<int>& kept) {
  Eigen::MatrixXd out(m.rows(), static_cast<Eigen::Index>(kept.size()));
  for (std::size_t i = 0; i < kept.size(); ++i) {
    out.col(static_cast<Eigen::Index>(i)) = m.col(kept[i]);
  }
  return out;
}

}  // namespace

LeastSquaresSmoother::LeastSquaresSmoother(const Basis& coarse,
                                           const Eigen::VectorXd& points)
    : LeastSquaresSmoother(coarse, points, all_columns(coarse.dimension())) {}

LeastSquaresSmoother::LeastSquaresSmoother(const Basis& coarse,
                                           const Eigen::VectorXd& points,
                                           std::vector<int> kept)
    : basis_(coarse),
      kept_(std::move(kept)),
      design_(select_columns(coarse.eval_design(points), kept_)),
      qr_(design_) {
  if (qr_.rank() < design_.cols()) {
    throw SingularSystemError(
        "resmooth: coarse design is rank deficient (rank " +
        std::to_string(qr_.rank()) + " of " + std::to_string(design_.cols()) + ")");
  }
}

Eigen::VectorXd LeastSquaresSmoother::basis_row(double x) const {
  const Eigen::VectorXd full = basis_.row(x);
  Eigen::VectorXd out(static_cast<Eigen::Index>(kept_.size()));
  for (std::size_t i = 0; i < kept_.size(); ++i) out[static_cast<Eigen::Index>(i)] = full[kept_[i]];
  return out;
}

Eigen::VectorXd LeastSquaresSmoother::coefficients(
    const Eigen::VectorXd& pseudo) const {
  return qr_.solve(pseudo);
}

Eigen::VectorXd LeastSquaresSmoother::fitted(const Eigen::VectorXd& pseudo) const {
  return design_ * coefficients(pseudo);
}

double LeastSquaresSmoother::evaluate(const Eigen::VectorXd& coefficients,
                                      double x) const {
  return basis_row(x).dot(coefficients);
}

Eigen::VectorXd LeastSquaresSmoother::weights(double x) const {
  // s(x)' = c(x)' (C'C)^{-1} C'  via two triangular solves on R.
  const Eigen::MatrixXd r = qr_.matrixR()
                                .topLeftCorner(design_.cols(), design_.cols())
                                .triangularView<Eigen::Upper>();
  Eigen::VectorXd c = basis_row(x);
  Eigen::VectorXd cp = qr_.colsPermutation().inverse() * c;
  Eigen::VectorXd t = r.transpose().triangularView<Eigen::Lower>().solve(cp);
  Eigen::VectorXd u = r.triangularView<Eigen::Upper>().solve(t);
  return design_ * (qr_.colsPermutation() * u);
}

double LeastSquaresSmoother::hat_infinity_norm() const {
  // max_i sum_j |H_ij| with H = C (C'C)^{-1} C'.
  const Eigen::MatrixXd r = qr_.matrixR()
                                .topLeftCorner(design_.cols(), design_.cols())
                                .triangularView<Eigen::Upper>();
  Eigen::MatrixXd ct = (qr_.colsPermutation().inverse() * design_.transpose()).eval();
  Eigen::MatrixXd t = r.transpose().triangularView<Eigen::Lower>().solve(ct);
  Eigen::MatrixXd u = r.triangularView<Eigen::Upper>().solve(t);
  Eigen::MatrixXd hat = design_ * (qr_.colsPermutation() * u);
  return hat.cwiseAbs().rowwise().sum().maxCoeff();
}

double kernel_value(Kernel kernel, double u) {
  const double a = std::abs(u);
  if (a > 1.0) return 0.0;
  switch (kernel) {
    case Kernel::kEpanechnikov:
      return 0.75 * (1.0 - u * u);
    case Kernel::kUniform:
      return 0.5;
    case Kernel::kTriangular:
      return 1.0 - a;
  }
  return 0.0;
}

double LocalPolyFit::derivative(int j) const {
  if (j < 0 || j >= coefficients.size()) {
    throw std::invalid_argument("local_polynomial: derivative order exceeds degree");
  }
  double fact = 1.0;
  for (int i = 2; i <= j; ++i) fact *= i;
  return fact * coefficients[j];
}

LocalPolyFit local_polynomial(const Eigen::VectorXd& responses,
                              const Eigen::VectorXd& x1, double x, double h,
                              int degree, Kernel kernel) {
  if (h <= 0.0) throw std::invalid_argument("local_polynomial: bandwidth must be positive");
  if (degree < 0) throw std::invalid_argument("local_polynomial: negative degree");
  const Eigen::Index n = x1.size();

  Eigen::VectorXd w(n);
  int effective = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    w[i] = kernel_value(kernel, (x1[i] - x) / h) / h;
    if (w[i] > 0.0) ++effective;
  }
  if (effective < degree + 1) {
    throw SingularSystemError(
        "local_polynomial: only " + std::to_string(effective) +
        " points with positive kernel weight near x = " + std::to_string(x) +
        " (need " + std::to_string(degree + 1) + ")");
  }

  Eigen::MatrixXd design(n, degree + 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    double p = 1.0;
    for (int j = 0; j <= degree; ++j) {
      design(i, j) = p;
      p *= x1[i] - x;
    }
  }
  const Eigen::VectorXd sw = w.cwiseSqrt();
  const Eigen::MatrixXd wd = sw.asDiagonal() * design;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(wd);
  if (qr.rank() < design.cols()) {
    throw SingularSystemError("local_polynomial: degenerate local design at x = " +
                              std::to_string(x));
  }

  LocalPolyFit fit;
  fit.center = x;
  fit.effective_sample = effective;
  fit.coefficients = qr.solve(sw.cwiseProduct(responses));

  // weights of a_0: e_0' (P'WP)^{-1} P' W
  const Eigen::MatrixXd r = qr.matrixR()
                                .topLeftCorner(design.cols(), design.cols())
                                .triangularView<Eigen::Upper>();
  Eigen::VectorXd e0 = Eigen::VectorXd::Zero(design.cols());
  e0[0] = 1.0;
  Eigen::VectorXd ep = qr.colsPermutation().inverse() * e0;
  Eigen::VectorXd t = r.transpose().triangularView<Eigen::Lower>().solve(ep);
  Eigen::VectorXd u = r.triangularView<Eigen::Upper>().solve(t);
  fit.weights0 = w.asDiagonal() * (design * (qr.colsPermutation() * u));
  return fit;
}

Eigen::VectorXd composite_weights(const DebiasedFit& fit,
                                  const Eigen::VectorXd& smoother_weights) {
  const double n = static_cast<double>(fit.phi.n());
  const Eigen::VectorXd sx1 = fit.phi.phi.transpose() * smoother_weights;
  const Eigen::VectorXd t =
      fit.cross.transpose().partialPivLu().solve(sx1);
  return fit.z1 * t / n;
}

}  // namespace samtwostep
