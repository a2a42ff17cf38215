#include "samtwostep/pipeline.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

namespace samtwostep {

int intervals_for_dimension(BasisFamily family, int degree, int dimension) {
  if (family == BasisFamily::kPiecewiseLegendre) {
    if (dimension % (degree + 1) != 0) {
      throw std::invalid_argument(
          "dimension " + std::to_string(dimension) +
          " is not a multiple of degree+1 = " + std::to_string(degree + 1));
    }
    return dimension / (degree + 1);
  }
  if (dimension <= degree) {
    throw std::invalid_argument("B-spline dimension must exceed the degree");
  }
  return dimension - degree;
}

PreparedDesign prepare_design(const Eigen::MatrixXd& x,
                              const std::vector<Interval>& domains,
                              const TwoStepOptions& opt) {
  const Eigen::Index q = x.cols();
  if (q < 1) throw std::invalid_argument("prepare_design: need at least one covariate");
  if (domains.size() != static_cast<std::size_t>(q)) {
    throw std::invalid_argument("prepare_design: one domain per covariate required");
  }

  PreparedDesign out;
  out.x1 = x.col(0);
  const int m_pre = intervals_for_dimension(opt.family, opt.degree, opt.d_pre);
  out.bases.reserve(q);
  for (Eigen::Index j = 0; j < q; ++j) {
    out.bases.emplace_back(
        BasisSpec{opt.family, opt.degree, m_pre, domains[static_cast<std::size_t>(j)]});
  }

  // Block 1: raw (uncentered; the first component absorbs the constant).
  Eigen::MatrixXd block1 = out.bases[0].eval_design(x.col(0));
  if (opt.allow_reduction) {
    ReducedBlock red = reduce_block(block1);
    out.kept1 = red.kept;
    out.block1 = std::move(red.data);
    out.reduced_columns += opt.d_pre - static_cast<int>(out.kept1.size());
  } else {
    out.kept1.resize(opt.d_pre);
    for (int k = 0; k < opt.d_pre; ++k) out.kept1[k] = k;
    out.block1 = std::move(block1);
  }

  // Blocks 2..q: centered; centering makes the constant direction exactly
  // dependent, so one column always drops out under reduction.
  std::vector<Eigen::MatrixXd> blocks;
  blocks.reserve(q);
  blocks.push_back(out.block1);
  for (Eigen::Index j = 1; j < q; ++j) {
    CenteredDesign centered = center_empirically(out.bases[j].eval_design(x.col(j)));
    if (opt.allow_reduction) {
      ReducedBlock red = reduce_block(centered.centered);
      Eigen::VectorXd means(red.kept.size());
      for (std::size_t i = 0; i < red.kept.size(); ++i) means[i] = centered.means[red.kept[i]];
      out.reduced_columns += opt.d_pre - 1 - static_cast<int>(red.kept.size());
      out.kept.push_back(std::move(red.kept));
      out.means.push_back(std::move(means));
      blocks.push_back(std::move(red.data));
    } else {
      std::vector<int> kept(opt.d_pre);
      for (int k = 0; k < opt.d_pre; ++k) kept[k] = k;
      out.kept.push_back(std::move(kept));
      out.means.push_back(centered.means);
      blocks.push_back(centered.centered);
    }
  }

  out.full = orthonormalize_groups(blocks);
  out.others.n = out.full.n;
  out.others.groups.assign(out.full.groups.begin() + 1, out.full.groups.end());
  return out;
}

PenaltyChoice select_penalties_cv(const PreparedDesign& design,
                                  const Eigen::VectorXd& y, int folds,
                                  std::uint64_t seed, int lambda_grid,
                                  double lambda_ratio, int eta_grid,
                                  double eta_ratio, const SolveOptions& opts) {
  PenaltyChoice choice;
  const Eigen::VectorXd lgrid = lambda_path(design.full, y, lambda_grid, lambda_ratio);
  choice.lambda = cross_validate(design.full, y, lgrid, folds, seed, opts).selected;

  if (design.others.groups.empty()) {
    choice.eta = 0.0;
    return choice;
  }
  const double n = static_cast<double>(design.n());
  double eta_top = 0.0;
  for (const auto& g : design.others.groups) {
    eta_top = std::max(
        eta_top,
        ((g.transformed().transpose() * design.block1) / n).colwise().norm().maxCoeff());
  }
  Eigen::VectorXd egrid(eta_grid);
  const double step = std::log(eta_ratio) / (eta_grid - 1);
  for (int i = 0; i < eta_grid; ++i) egrid[i] = eta_top * std::exp(step * i);
  choice.eta =
      cross_validate_multi(design.others, design.block1, egrid, folds, seed + 1, opts)
          .selected;
  return choice;
}

TwoStepEstimator::TwoStepEstimator(const PreparedDesign& design, Basis basis1,
                                   LeastSquaresSmoother smoother)
    : basis1_(std::move(basis1)),
      kept1_(design.kept1),
      smoother_(std::move(smoother)) {}

TwoStepEstimator TwoStepEstimator::fit(const PreparedDesign& design,
                                       const Eigen::VectorXd& y,
                                       const PenaltyChoice& penalties,
                                       const TwoStepOptions& opt) {
  // First step: full group Lasso and the desparsified coefficients.
  GroupLassoFit lasso = fit_group_lasso(design.full, y, penalties.lambda, opt.solve);
  const Eigen::VectorXd offset = lasso.fitted_except(design.full, 0);

  int gs_block = static_cast<int>(design.d1());
  if (opt.family == BasisFamily::kPiecewiseLegendre &&
      static_cast<int>(design.kept1.size()) == opt.d_pre) {
    gs_block = opt.degree + 1;  // locality-preserving per-interval blocks
  }
  PhiBasis phi = gram_schmidt_empirical(design.block1, gs_block);

  Eigen::MatrixXd delta;
  MultiGroupLassoFit projections;
  if (design.others.groups.empty()) {
    delta = Eigen::MatrixXd::Zero(design.n(), design.d1());
  } else {
    projections =
        relaxed_projections(design.block1, design.others, penalties.eta, opt.solve);
    delta = map_projections_to_phi(projections.fitted, phi);
  }
  DebiasedFit debiased = debias(y, lasso.coefficients[0], offset, phi, delta,
                                opt.condition_limit);
  debiased.projections = std::move(projections);

  // Second step: least-squares resmoothing of the pseudo responses on the
  // coarse basis over the same first covariate.
  const Eigen::VectorXd pseudo = phi.phi * debiased.beta_debiased;
  const int m_re = intervals_for_dimension(opt.family, opt.degree, opt.d_re);
  Basis coarse(BasisSpec{opt.family, opt.degree, m_re, design.bases[0].spec().domain});
  LeastSquaresSmoother smoother = [&] {
    if (!opt.allow_reduction) return LeastSquaresSmoother(coarse, design.x1);
    ReducedBlock red = reduce_block(coarse.eval_design(design.x1));
    return LeastSquaresSmoother(coarse, design.x1, std::move(red.kept));
  }();

  TwoStepEstimator est(design, design.bases[0], std::move(smoother));
  est.full_lasso_ = std::move(lasso);
  est.debiased_ = std::move(debiased);
  est.pseudo_ = pseudo;
  est.penalties_ = penalties;
  return est;
}

double TwoStepEstimator::presmooth_estimate(double x1) const {
  return debiased_.estimate_at(raw_row(x1));
}

Eigen::VectorXd TwoStepEstimator::presmooth_weights(double x1) const {
  const double n = static_cast<double>(debiased_.phi.n());
  const Eigen::VectorXd prow = debiased_.phi.phi_row(raw_row(x1));
  const Eigen::VectorXd t = debiased_.cross.transpose().partialPivLu().solve(prow);
  return debiased_.z1 * t / n;
}

double TwoStepEstimator::resmooth_estimate(double x1) const {
  return smoother_.evaluate(smoother_.coefficients(pseudo_), x1);
}

Eigen::VectorXd TwoStepEstimator::resmooth_weights(double x1) const {
  return composite_weights(debiased_, smoother_.weights(x1));
}

Eigen::VectorXd TwoStepEstimator::raw_row(double x1) const {
  const Eigen::VectorXd full = basis1_.row(x1);
  Eigen::VectorXd out(static_cast<Eigen::Index>(kept1_.size()));
  for (std::size_t i = 0; i < kept1_.size(); ++i) out[static_cast<Eigen::Index>(i)] = full[kept1_[i]];
  return out;
}

}  // namespace samtwostep
