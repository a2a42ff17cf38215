#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "samtwostep/basis.hpp"
#include "samtwostep/despars.hpp"
#include "samtwostep/glasso.hpp"
#include "samtwostep/resmooth.hpp"

namespace samtwostep {

struct TwoStepOptions {
  BasisFamily family = BasisFamily::kBSpline;
  int degree = 3;
  int d_pre = 40;
  int d_re = 20;
  SolveOptions solve{};
  double condition_limit = 1e12;
  // Drop empirically degenerate basis directions (data-starved B-splines,
  // the constant direction killed by centering) instead of erroring. The
  // estimator then lives on the identifiable subspace.
  bool allow_reduction = true;
};

// Basis dimension -> equidistant interval count.
int intervals_for_dimension(BasisFamily family, int degree, int dimension);

// Design pieces shared by penalty selection and the final fit.
struct PreparedDesign {
  std::vector<Basis> bases;            // per covariate, dimension d_pre
  Eigen::VectorXd x1;                  // first covariate values
  std::vector<int> kept1;              // retained first-block basis functions
  Eigen::MatrixXd block1;              // raw first block, reduced, n x d1
  std::vector<Eigen::VectorXd> means;  // centering constants, blocks 2..q
  std::vector<std::vector<int>> kept;  // retained columns, blocks 2..q
  GroupDesign full;                    // block 1 + nuisance blocks
  GroupDesign others;                  // nuisance blocks only
  int reduced_columns = 0;             // total columns dropped beyond centering

  Eigen::Index n() const { return block1.rows(); }
  Eigen::Index d1() const { return block1.cols(); }
};

PreparedDesign prepare_design(const Eigen::MatrixXd& x,
                              const std::vector<Interval>& domains,
                              const TwoStepOptions& opt);

struct PenaltyChoice {
  double lambda = 0.0;
  double eta = 0.0;
};

// 10-fold style CV on the prepared design: lambda on the response regression,
// eta on the relaxed projections of all first-block basis functions (one
// common eta, error averaged over the d1 pseudo-regressions).
PenaltyChoice select_penalties_cv(const PreparedDesign& design,
                                  const Eigen::VectorXd& y, int folds,
                                  std::uint64_t seed, int lambda_grid,
                                  double lambda_ratio, int eta_grid,
                                  double eta_ratio,
                                  const SolveOptions& opts = {});

// The fitted two-step estimator: presmoothing (group Lasso + debias) at
// d_pre, resmoothing of the pseudo responses at d_re, with linear weights on
// Y for pointwise inference.
class TwoStepEstimator {
 public:
  static TwoStepEstimator fit(const PreparedDesign& design,
                              const Eigen::VectorXd& y,
                              const PenaltyChoice& penalties,
                              const TwoStepOptions& opt);

  double presmooth_estimate(double x1) const;
  Eigen::VectorXd presmooth_weights(double x1) const;

  double resmooth_estimate(double x1) const;
  Eigen::VectorXd resmooth_weights(double x1) const;

  const DebiasedFit& debiased() const { return debiased_; }
  const GroupLassoFit& full_lasso() const { return full_lasso_; }
  const LeastSquaresSmoother& smoother() const { return smoother_; }
  const Eigen::VectorXd& pseudo() const { return pseudo_; }
  const PenaltyChoice& penalties() const { return penalties_; }

  // Raw first-block basis row (kept columns) at a new point.
  Eigen::VectorXd raw_row(double x1) const;

 private:
  TwoStepEstimator(const PreparedDesign& design, Basis basis1,
                   LeastSquaresSmoother smoother);

  Basis basis1_;
  std::vector<int> kept1_;
  GroupLassoFit full_lasso_;
  DebiasedFit debiased_;
  Eigen::VectorXd pseudo_;
  LeastSquaresSmoother smoother_;
  PenaltyChoice penalties_;
};

}  // namespace samtwostep
