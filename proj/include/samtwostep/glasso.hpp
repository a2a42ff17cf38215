#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace samtwostep {

// One covariate block of the additive design. `data` stays in the original
// (untransformed) coordinates; `data * transform` has empirical Gram
// (1/n) X'X = I, which gives the blockwise proximal step a closed form.
struct GroupBlock {
  Eigen::MatrixXd data;
  Eigen::MatrixXd transform;
  Eigen::MatrixXd inverse_transform;
  bool jittered = false;

  Eigen::Index cols() const { return data.cols(); }
  Eigen::MatrixXd transformed() const { return data * transform; }
};

struct GroupDesign {
  std::vector<GroupBlock> groups;
  Eigen::Index n = 0;

  Eigen::Index total_cols() const;
};

// Factor each centered block so the empirical-orthonormality invariant holds.
// Rank-deficient blocks get a ridge jitter of 1e-10 * trace/d_j before
// factorization and are flagged. An all-zero block is an error naming the
// group.
GroupDesign orthonormalize_groups(const std::vector<Eigen::MatrixXd>& blocks);

struct SolveOptions {
  double tol = 1e-8;       // relative objective decrease
  int max_sweeps = 10000;  // full-sweep equivalents
  bool record_objective = false;
};

struct GroupLassoFit {
  double penalty = 0.0;
  std::vector<Eigen::VectorXd> coefficients;  // original coordinates
  std::vector<int> active_set;
  double objective = 0.0;
  Eigen::VectorXd kkt_gaps;
  int sweeps = 0;
  bool converged = true;
  std::vector<double> objective_history;  // per sweep, if recorded

  Eigen::VectorXd fitted(const GroupDesign& design) const;
  Eigen::VectorXd fitted_except(const GroupDesign& design, int skip_group) const;
};

// Block coordinate descent for
//   || Y - sum_j X_j g_j ||_n^2 + 2 * penalty * sum_j || X_j g_j ||_n.
// In transformed coordinates each block update is the groupwise soft
// threshold g_j <- (1 - penalty/||z_j||)_+ z_j. Converged means the relative
// objective decrease fell below tol and every KKT gap is <= 10 * tol;
// otherwise the fit is returned with converged = false and final gaps.
GroupLassoFit fit_group_lasso(const GroupDesign& design,
                              const Eigen::VectorXd& response, double penalty,
                              const SolveOptions& opts = {});

// Per-group optimality gaps for a fit on the same design/response: inactive
// groups report the subgradient inequality slack, active groups the
// stationarity residual.
Eigen::VectorXd kkt_certificate(const GroupDesign& design,
                                const Eigen::VectorXd& response,
                                const GroupLassoFit& fit);

double lambda_max(const GroupDesign& design, const Eigen::VectorXd& response);

// Log-spaced decreasing grid from lambda_max down to ratio * lambda_max.
Eigen::VectorXd lambda_path(const GroupDesign& design,
                            const Eigen::VectorXd& response, int n_points,
                            double ratio);

struct CrossValidation {
  double selected = 0.0;
  Eigen::VectorXd grid;
  Eigen::VectorXd mean_error;  // mean held-out squared error per grid point
};

// Seeded fold partition, warm starts along the path, ties broken toward the
// larger penalty.
CrossValidation cross_validate(const GroupDesign& design,
                               const Eigen::VectorXd& response,
                               const Eigen::VectorXd& grid, int folds,
                               std::uint64_t seed,
                               const SolveOptions& opts = {});

// Shared-design multi-response fit: column k solves the single-response
// problem for responses.col(k) at the common penalty. Matrix-blocked sweeps,
// same math as fit_group_lasso per column.
struct MultiGroupLassoFit {
  double penalty = 0.0;
  std::vector<Eigen::MatrixXd> coefficients;  // original coordinates, d_j x K
  Eigen::MatrixXd fitted;                     // n x K
  Eigen::VectorXd objectives;
  Eigen::MatrixXd kkt_gaps;  // groups x K
  int sweeps = 0;
  bool converged = true;

  GroupLassoFit column(const GroupDesign& design, int k) const;
};

MultiGroupLassoFit fit_group_lasso_multi(const GroupDesign& design,
                                         const Eigen::MatrixXd& responses,
                                         double penalty,
                                         const SolveOptions& opts = {});

// CV for the common relaxed-projection penalty: held-out prediction error of
// each response column by the design, averaged over all columns, one common
// penalty selected.
CrossValidation cross_validate_multi(const GroupDesign& design,
                                     const Eigen::MatrixXd& responses,
                                     const Eigen::VectorXd& grid, int folds,
                                     std::uint64_t seed,
                                     const SolveOptions& opts = {});

// lambda = 2 sigma sqrt(d/n) + 2 sigma sqrt((2x + 2 log q)/n), x > 1.
double theoretical_lambda(double sigma, int d, int n, int q, double x);

// eta = C ( sqrt(d (x + log d1 + log q) / n)
//           + sqrt(s1) d (x + log d1 + log q) / (psi n) ), x > 1.
double theoretical_eta(double C, int d, int n, int d1, int q, int s1,
                       double psi, double x);

// Greedy rank-revealing column reduction: drops columns whose residual
// empirical norm after projecting out previously kept ones falls below
// rel_tol times their original norm. Keeps the block's span; used to make
// exactly collinear blocks (centered partition-of-unity bases) solvable
// without jitter.
struct ReducedBlock {
  Eigen::MatrixXd data;
  std::vector<int> kept;
};
ReducedBlock reduce_block(const Eigen::MatrixXd& block, double rel_tol = 1e-8);

}  // namespace samtwostep
