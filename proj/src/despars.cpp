#include "samtwostep/despars.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "samtwostep/errors.hpp"

namespace samtwostep {

PhiBasis gram_schmidt_empirical(const Eigen::MatrixXd& first_block,
                                int block_size) {
  const Eigen::Index n = first_block.rows();
  const Eigen::Index d = first_block.cols();
  if (d < 1) throw std::invalid_argument("gram_schmidt: empty block");
  if (block_size <= 0) block_size = static_cast<int>(d);
  if (d % block_size != 0) {
    throw std::invalid_argument("gram_schmidt: dimension not a multiple of block size");
  }
  const double dn = static_cast<double>(n);

  PhiBasis basis;
  basis.raw = first_block;
  basis.phi.resize(n, d);
  basis.transform = Eigen::MatrixXd::Zero(d, d);
  basis.block_size = block_size;

  for (Eigen::Index b0 = 0; b0 < d; b0 += block_size) {
    for (Eigen::Index k = b0; k < b0 + block_size; ++k) {
      Eigen::VectorXd v = first_block.col(k);
      const double orig = std::sqrt(v.squaredNorm() / dn);
      for (int pass = 0; pass < 2; ++pass) {
        for (Eigen::Index l = b0; l < k; ++l) {
          const double c = basis.phi.col(l).dot(v) / dn;
          basis.transform(l, k) += c;
          v -= c * basis.phi.col(l);
        }
      }
      const double norm = std::sqrt(v.squaredNorm() / dn);
      if (!(norm > 1e-7 * orig) || orig == 0.0) {
        const int blk = static_cast<int>(k) / block_size;
        throw SingularSystemError(
            "gram_schmidt: numerical rank below dimension at basis function " +
            std::to_string(k) + " (interval " + std::to_string(blk) +
            " carries fewer than " + std::to_string(block_size) + " data points)");
      }
      basis.transform(k, k) = norm;
      basis.phi.col(k) = v / norm;
    }
  }
  basis.inverse_transform =
      basis.transform.triangularView<Eigen::Upper>().solve(
          Eigen::MatrixXd::Identity(d, d));
  return basis;
}

MultiGroupLassoFit relaxed_projections(const Eigen::MatrixXd& responses,
                                       const GroupDesign& other_blocks,
                                       double eta, const SolveOptions& opts) {
  if (eta < 0.0) throw std::invalid_argument("relaxed_projections: negative penalty");
  return fit_group_lasso_multi(other_blocks, responses, eta, opts);
}

GroupLassoFit relaxed_projection(const Eigen::VectorXd& response,
                                 const GroupDesign& other_blocks, double eta,
                                 const SolveOptions& opts) {
  if (eta < 0.0) throw std::invalid_argument("relaxed_projection: negative penalty");
  return fit_group_lasso(other_blocks, response, eta, opts);
}

Eigen::MatrixXd map_projections_to_phi(const Eigen::MatrixXd& fitted_b,
                                       const PhiBasis& phi) {
  return fitted_b * phi.inverse_transform;
}

Eigen::MatrixXd DebiasedFit::coefficient_weights() const {
  const double n = static_cast<double>(phi.n());
  return cross.partialPivLu().solve(z1.transpose() / n);
}

DebiasedFit debias(const Eigen::VectorXd& y, const Eigen::VectorXd& gamma1_raw,
                   const Eigen::VectorXd& lasso_offset, const PhiBasis& phi,
                   const Eigen::MatrixXd& delta, double condition_limit) {
  const double n = static_cast<double>(phi.n());
  DebiasedFit fit;
  fit.phi = phi;
  fit.delta = delta;
  fit.z1 = phi.phi - delta;
  fit.cross = (fit.z1.transpose() * phi.phi) / n;
  fit.lasso_offset = lasso_offset;

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(fit.cross);
  const double smin = svd.singularValues().minCoeff();
  fit.condition = smin > 0.0 ? svd.singularValues().maxCoeff() / smin
                             : std::numeric_limits<double>::infinity();
  if (!(fit.condition < condition_limit)) {
    throw SingularSystemError(
        "debias: (1/n) Z1'X1 is numerically singular (condition " +
            std::to_string(fit.condition) + ")",
        fit.condition);
  }

  fit.beta_lasso = phi.transform * gamma1_raw;
  fit.beta_debiased = fit.cross.partialPivLu().solve(
      (fit.z1.transpose() * (y - lasso_offset)) / n);
  fit.rho_hat = empirical_angle(delta);
  return fit;
}

Eigen::VectorXd operator_form_estimate(const DebiasedFit& fit,
                                       const Eigen::VectorXd& y) {
  const double n = static_cast<double>(fit.phi.n());
  const Eigen::VectorXd w = y - fit.lasso_offset;
  // Matrix of Pi1 PiL on phi coordinates; the estimator inverts its adjoint.
  const Eigen::MatrixXd a = (fit.phi.phi.transpose() * fit.delta) / n;
  const Eigen::VectorXd u =
      (fit.phi.phi.transpose() * w - fit.delta.transpose() * w) / n;
  const Eigen::MatrixXd op =
      Eigen::MatrixXd::Identity(a.rows(), a.cols()) - a.transpose();
  return op.partialPivLu().solve(u);
}

Eigen::VectorXd neumann_series_estimate(const DebiasedFit& fit,
                                        const Eigen::VectorXd& y, double tol,
                                        int max_terms) {
  if (!(fit.rho_hat < 1.0)) {
    throw ConvergenceError("neumann_series_estimate: requires rho_hat < 1, have " +
                           std::to_string(fit.rho_hat));
  }
  const double n = static_cast<double>(fit.phi.n());
  const Eigen::VectorXd w = y - fit.lasso_offset;
  const Eigen::MatrixXd at =
      ((fit.phi.phi.transpose() * fit.delta) / n).transpose();
  Eigen::VectorXd term =
      (fit.phi.phi.transpose() * w - fit.delta.transpose() * w) / n;
  Eigen::VectorXd sum = term;
  for (int i = 0; i < max_terms; ++i) {
    term = at * term;
    sum += term;
    if (term.norm() < tol) return sum;
  }
  throw ConvergenceError("neumann_series_estimate: series did not settle");
}

double empirical_angle(const Eigen::MatrixXd& delta) {
  if (delta.size() == 0) return 0.0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(delta);
  return svd.singularValues().maxCoeff() / std::sqrt(static_cast<double>(delta.rows()));
}

double empirical_angle(const DebiasedFit& fit) { return fit.rho_hat; }

OracleEstimate oracle_estimate(const Eigen::VectorXd& f1_at_data,
                               const Eigen::VectorXd& eps,
                               const PhiBasis& phi) {
  const double n = static_cast<double>(phi.n());
  const Eigen::VectorXd target = f1_at_data + eps;
  OracleEstimate est;
  est.coef_raw = phi.raw.colPivHouseholderQr().solve(target);
  est.coef_phi = (phi.phi.transpose() * target) / n;
  est.fitted = phi.phi * est.coef_phi;
  return est;
}

Decomposition decomposition_diagnostic(const DebiasedFit& fit,
                                       const Eigen::VectorXd& eps,
                                       const Eigen::VectorXd& g1_coef_phi,
                                       const Eigen::VectorXd& g_minus1_at_data,
                                       const Eigen::VectorXd& f_at_data,
                                       const Eigen::VectorXd& f1_at_data) {
  const double n = static_cast<double>(fit.phi.n());
  const Eigen::MatrixXd& x1 = fit.phi.phi;
  const auto lu = fit.cross.partialPivLu();
  const auto debias_coef = [&](const Eigen::VectorXd& v) {
    return lu.solve((fit.z1.transpose() * v) / n).eval();
  };
  const auto project_coef = [&](const Eigen::VectorXd& v) {
    return ((x1.transpose() * v) / n).eval();
  };

  const Eigen::VectorXd g_at_data = x1 * g1_coef_phi + g_minus1_at_data;

  Decomposition dec;
  dec.variance_term = x1 * (debias_coef(eps) - project_coef(eps));
  dec.lasso_bias_term = x1 * debias_coef(g_minus1_at_data - fit.lasso_offset);
  dec.approximation_term = x1 * debias_coef(f_at_data - g_at_data);
  dec.projection_term = x1 * (g1_coef_phi - project_coef(f1_at_data));
  return dec;
}

}  // namespace samtwostep
