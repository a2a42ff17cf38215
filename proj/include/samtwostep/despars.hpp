#pragma once

#include <Eigen/Dense>

#include "samtwostep/glasso.hpp"

namespace samtwostep {

// Empirically orthonormal basis of the first-block space, built by modified
// Gram-Schmidt (one reorthogonalization pass) on the raw design. For
// piecewise bases pass block_size = t1 + 1: columns of distinct intervals
// have disjoint support, so orthogonalizing per interval block is exact and
// the transform stays block triangular, preserving locality.
struct PhiBasis {
  Eigen::MatrixXd raw;                // B, n x d1
  Eigen::MatrixXd phi;                // n x d1 with (1/n) phi' phi = I
  Eigen::MatrixXd transform;          // R with B = phi * R
  Eigen::MatrixXd inverse_transform;  // R^{-1}
  int block_size = 0;

  Eigen::Index n() const { return phi.rows(); }
  Eigen::Index dim() const { return phi.cols(); }

  // Values of the d1 phi functions at a new point, from the raw basis row.
  Eigen::VectorXd phi_row(const Eigen::VectorXd& raw_row) const {
    return inverse_transform.transpose() * raw_row;
  }
};

// Throws std::invalid_argument when the numerical rank is below d1, naming
// the offending block (for piecewise bases: an interval with fewer than
// t1 + 1 data points).
PhiBasis gram_schmidt_empirical(const Eigen::MatrixXd& first_block,
                                int block_size = -1);

// Group-Lasso regressions of the first-block basis functions on all other
// blocks ("projections of relaxed orthogonality"). Columns of `responses`
// are the raw b_1k at the data; one fit per column at the common penalty.
MultiGroupLassoFit relaxed_projections(const Eigen::MatrixXd& responses,
                                       const GroupDesign& other_blocks,
                                       double eta,
                                       const SolveOptions& opts = {});

GroupLassoFit relaxed_projection(const Eigen::VectorXd& response,
                                 const GroupDesign& other_blocks, double eta,
                                 const SolveOptions& opts = {});

// Relaxed projections of the phi basis from those of the b basis, by
// linearity: Delta = P R^{-1} where column k of P is the fitted value vector
// of the projection of b_1k.
Eigen::MatrixXd map_projections_to_phi(const Eigen::MatrixXd& fitted_b,
                                       const PhiBasis& phi);

struct DebiasedFit {
  PhiBasis phi;
  Eigen::MatrixXd delta;         // Pi-hat_{-1} phi_1k at data, n x d1
  Eigen::MatrixXd z1;            // phi - delta
  Eigen::MatrixXd cross;         // M = (1/n) Z1' X1
  Eigen::VectorXd beta_lasso;    // phi coordinates of the first Lasso component
  Eigen::VectorXd beta_debiased;
  Eigen::VectorXd lasso_offset;  // f-hat^L_{-1} at data
  MultiGroupLassoFit projections;  // relaxed-projection records, d1 columns
  double condition = 0.0;
  double rho_hat = 0.0;

  // Linear coefficient weights on Y with the Lasso pieces held fixed:
  // beta_debiased = W (Y - lasso_offset), W = M^{-1} (1/n) Z1'.
  Eigen::MatrixXd coefficient_weights() const;

  // f-hat_1 at a new point from the raw first-block basis row.
  double estimate_at(const Eigen::VectorXd& raw_row) const {
    return phi.phi_row(raw_row).dot(beta_debiased);
  }

  Eigen::VectorXd fitted_at_data() const { return phi.phi * beta_debiased; }
};

// Desparsified presmoothing coefficients
//   beta_1 = beta_1^L + ((1/n) Z1' X1)^{-1} (1/n) Z1' (Y - f^L)
//          = ((1/n) Z1' X1)^{-1} (1/n) Z1' (Y - f^L_{-1});
// computed via the second display. gamma1_raw are the first-block Lasso
// coefficients in raw-b coordinates, lasso_offset is f^L_{-1} at the data.
// Throws SingularSystemError when cond((1/n) Z1' X1) exceeds the limit.
DebiasedFit debias(const Eigen::VectorXd& y, const Eigen::VectorXd& gamma1_raw,
                   const Eigen::VectorXd& lasso_offset, const PhiBasis& phi,
                   const Eigen::MatrixXd& delta, double condition_limit = 1e12);

// Operator-form coefficients (I - (Pi1 PiL)^*)^{-1} Pi1 (I - PiL^*)(Y - f^L_{-1})
// assembled from the composed projections; relies on the empirical
// orthonormality of phi, so agreement with debias() checks the Gram-Schmidt.
Eigen::VectorXd operator_form_estimate(const DebiasedFit& fit,
                                       const Eigen::VectorXd& y);

// Neumann-series evaluation of the operator form, truncated when the term
// norm drops below tol. Diagnostic only; requires rho_hat < 1.
Eigen::VectorXd neumann_series_estimate(const DebiasedFit& fit,
                                        const Eigen::VectorXd& y,
                                        double tol = 1e-12,
                                        int max_terms = 100000);

// Largest singular value of Delta / sqrt(n): the empirical angle
// sup{ ||PiL g1||_n : ||g1||_n <= 1 }.
double empirical_angle(const Eigen::MatrixXd& delta);
double empirical_angle(const DebiasedFit& fit);

struct OracleEstimate {
  Eigen::VectorXd coef_raw;  // (X1'X1)^{-1} X1'(f1 + eps) in b coordinates
  Eigen::VectorXd coef_phi;  // (1/n) phi'(f1 + eps)
  Eigen::VectorXd fitted;    // at the data

  double estimate_at_raw(const Eigen::VectorXd& raw_row) const {
    return raw_row.dot(coef_raw);
  }
};

OracleEstimate oracle_estimate(const Eigen::VectorXd& f1_at_data,
                               const Eigen::VectorXd& eps, const PhiBasis& phi);

// The four terms of the function-space decomposition of
// f-hat_1 - f-hat_1^oracle, evaluated at the data. Requires the simulation
// quantities (f, its sparse surrogate g*, eps) to be known.
struct Decomposition {
  Eigen::VectorXd variance_term;
  Eigen::VectorXd lasso_bias_term;
  Eigen::VectorXd approximation_term;
  Eigen::VectorXd projection_term;

  Eigen::VectorXd total() const {
    return variance_term + lasso_bias_term + approximation_term + projection_term;
  }
};

Decomposition decomposition_diagnostic(const DebiasedFit& fit,
                                       const Eigen::VectorXd& eps,
                                       const Eigen::VectorXd& g1_coef_phi,
                                       const Eigen::VectorXd& g_minus1_at_data,
                                       const Eigen::VectorXd& f_at_data,
                                       const Eigen::VectorXd& f1_at_data);

}  // namespace samtwostep
