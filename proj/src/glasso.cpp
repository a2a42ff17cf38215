#include "samtwostep/glasso.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include "samtwostep/rng.hpp"

namespace samtwostep {

Eigen::Index GroupDesign::total_cols() const {
  Eigen::Index total = 0;
  for (const auto& g : groups) total += g.cols();
  return total;
}

GroupDesign orthonormalize_groups(const std::vector<Eigen::MatrixXd>& blocks) {
  if (blocks.empty()) throw std::invalid_argument("orthonormalize_groups: no blocks");
  GroupDesign design;
  design.n = blocks.front().rows();
  design.groups.reserve(blocks.size());
  for (std::size_t j = 0; j < blocks.size(); ++j) {
    const Eigen::MatrixXd& x = blocks[j];
    if (x.rows() != design.n) {
      throw std::invalid_argument("orthonormalize_groups: inconsistent row counts");
    }
    if (x.cols() < 1) {
      throw std::invalid_argument("orthonormalize_groups: empty block " + std::to_string(j));
    }
    if (x.lpNorm<Eigen::Infinity>() == 0.0) {
      throw std::invalid_argument("orthonormalize_groups: block " + std::to_string(j) +
                                  " is all zero");
    }
    const Eigen::Index d = x.cols();
    Eigen::MatrixXd gram = (x.transpose() * x) / static_cast<double>(design.n);
    const double scale = gram.trace() / static_cast<double>(d);

    GroupBlock block;
    block.data = x;
    Eigen::LLT<Eigen::MatrixXd> llt(gram);
    bool deficient = llt.info() != Eigen::Success;
    if (!deficient) {
      const double min_pivot =
          llt.matrixLLT().diagonal().minCoeff();  // sqrt of Schur pivots
      deficient = !(min_pivot * min_pivot > 1e-13 * scale);
    }
    if (deficient) {
      gram.diagonal().array() += 1e-10 * scale;
      llt.compute(gram);
      block.jittered = true;
      if (llt.info() != Eigen::Success) {
        throw std::invalid_argument("orthonormalize_groups: block " + std::to_string(j) +
                                    " could not be factored");
      }
    }
    // Gram = L L'; X L^{-T} has empirical Gram I.
    Eigen::MatrixXd upper = llt.matrixU();
    block.inverse_transform = upper;
    block.transform = upper.triangularView<Eigen::Upper>().solve(
        Eigen::MatrixXd::Identity(d, d));
    design.groups.push_back(std::move(block));
  }
  return design;
}

ReducedBlock reduce_block(const Eigen::MatrixXd& block, double rel_tol) {
  const double n = static_cast<double>(block.rows());
  ReducedBlock out;
  std::vector<Eigen::VectorXd> q;
  for (Eigen::Index c = 0; c < block.cols(); ++c) {
    Eigen::VectorXd v = block.col(c);
    const double orig = std::sqrt(v.squaredNorm() / n);
    if (orig == 0.0) continue;
    for (int pass = 0; pass < 2; ++pass) {
      for (const auto& u : q) v -= (u.dot(v) / n) * u;
    }
    const double res = std::sqrt(v.squaredNorm() / n);
    if (res < rel_tol * orig) continue;
    q.push_back(v / res);
    out.kept.push_back(static_cast<int>(c));
  }
  out.data.resize(block.rows(), static_cast<Eigen::Index>(out.kept.size()));
  for (std::size_t i = 0; i < out.kept.size(); ++i) {
    out.data.col(static_cast<Eigen::Index>(i)) = block.col(out.kept[i]);
  }
  return out;
}

Eigen::VectorXd GroupLassoFit::fitted(const GroupDesign& design) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(design.n);
  for (std::size_t j = 0; j < design.groups.size(); ++j) {
    out.noalias() += design.groups[j].data * coefficients[j];
  }
  return out;
}

Eigen::VectorXd GroupLassoFit::fitted_except(const GroupDesign& design,
                                             int skip_group) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(design.n);
  for (std::size_t j = 0; j < design.groups.size(); ++j) {
    if (static_cast<int>(j) == skip_group) continue;
    out.noalias() += design.groups[j].data * coefficients[j];
  }
  return out;
}

namespace {

constexpr double kActivationSlack = 1e-12;

// Blockwise coordinate descent over a shared design with K response columns.
// Works entirely in transformed coordinates; column k of every quantity
// corresponds to the single-response problem for responses.col(k).
class BcdCore {
 public:
  BcdCore(const GroupDesign& design, const Eigen::MatrixXd& responses)
      : n_(static_cast<double>(design.n)),
        n_groups_(design.groups.size()),
        k_(responses.cols()),
        resid_(responses) {
    xt_.reserve(n_groups_);
    gamma_.reserve(n_groups_);
    for (const auto& g : design.groups) {
      xt_.push_back(g.transformed());
      gamma_.emplace_back(Eigen::MatrixXd::Zero(g.cols(), k_));
    }
  }

  // Runs BCD at the given penalty from the current (warm) state.
  void solve(double penalty, const SolveOptions& opts,
             std::vector<double>* history = nullptr) {
    penalty_ = penalty;
    converged_ = false;
    sweeps_ = 0;
    double obj = total_objective();
    int stall = 0;
    while (sweeps_ < opts.max_sweeps) {
      const double before_cycle = obj;
      sweep(/*active_only=*/false);
      ++sweeps_;
      obj = total_objective();
      if (history) history->push_back(obj);
      // Polish on the active groups before paying for another full pass.
      while (sweeps_ < opts.max_sweeps) {
        const double prev = obj;
        sweep(/*active_only=*/true);
        ++sweeps_;
        obj = total_objective();
        if (history) history->push_back(obj);
        if (relative_decrease(prev, obj) < opts.tol) break;
      }
      if (relative_decrease(before_cycle, obj) < opts.tol) {
        compute_gaps();
        if (gaps_.maxCoeff() <= 10.0 * opts.tol) {
          converged_ = true;
          break;
        }
        if (++stall > 50) break;
      } else {
        stall = 0;
      }
    }
    if (!converged_) compute_gaps();
  }

  double total_objective() const {
    double obj = resid_.squaredNorm() / n_;
    for (const auto& g : gamma_) obj += 2.0 * penalty_ * g.colwise().norm().sum();
    return obj;
  }

  Eigen::VectorXd column_objectives() const {
    Eigen::VectorXd obj = (resid_.colwise().squaredNorm() / n_).transpose();
    for (const auto& g : gamma_) {
      obj += (2.0 * penalty_ * g.colwise().norm()).transpose();
    }
    return obj;
  }

  const Eigen::MatrixXd& gaps() const { return gaps_; }
  const std::vector<Eigen::MatrixXd>& gamma() const { return gamma_; }
  const Eigen::MatrixXd& residual() const { return resid_; }
  int sweeps() const { return sweeps_; }
  bool converged() const { return converged_; }

 private:
  static double relative_decrease(double prev, double cur) {
    const double denom = std::max(std::abs(prev), 1e-30);
    return std::max(prev - cur, 0.0) / denom;
  }

  void sweep(bool active_only) {
    for (std::size_t j = 0; j < n_groups_; ++j) {
      if (active_only && !group_active(j)) continue;
      update_group(j);
    }
  }

  bool group_active(std::size_t j) const {
    return gamma_[j].lpNorm<Eigen::Infinity>() != 0.0;
  }

  void update_group(std::size_t j) {
    const Eigen::MatrixXd& x = xt_[j];
    Eigen::MatrixXd z = (x.transpose() * resid_) / n_;
    z += gamma_[j];
    Eigen::MatrixXd updated(z.rows(), z.cols());
    for (Eigen::Index k = 0; k < k_; ++k) {
      const double norm = z.col(k).norm();
      if (norm > penalty_ * (1.0 + kActivationSlack)) {
        updated.col(k) = (1.0 - penalty_ / norm) * z.col(k);
      } else {
        updated.col(k).setZero();
      }
    }
    updated -= gamma_[j];  // delta
    if (updated.lpNorm<Eigen::Infinity>() != 0.0) {
      resid_.noalias() -= x * updated;
      gamma_[j] += updated;
    }
  }

  void compute_gaps() {
    gaps_.resize(static_cast<Eigen::Index>(n_groups_), k_);
    for (std::size_t j = 0; j < n_groups_; ++j) {
      const Eigen::MatrixXd v = (xt_[j].transpose() * resid_) / n_;
      for (Eigen::Index k = 0; k < k_; ++k) {
        const double gnorm = gamma_[j].col(k).norm();
        if (gnorm == 0.0) {
          gaps_(static_cast<Eigen::Index>(j), k) =
              std::max(0.0, v.col(k).norm() - penalty_);
        } else {
          gaps_(static_cast<Eigen::Index>(j), k) =
              (v.col(k) - penalty_ * gamma_[j].col(k) / gnorm).norm();
        }
      }
    }
  }

  double n_;
  std::size_t n_groups_;
  Eigen::Index k_;
  double penalty_ = 0.0;
  std::vector<Eigen::MatrixXd> xt_;
  std::vector<Eigen::MatrixXd> gamma_;
  Eigen::MatrixXd resid_;
  Eigen::MatrixXd gaps_;
  int sweeps_ = 0;
  bool converged_ = false;
};

void check_response(const Eigen::MatrixXd& response) {
  if (!response.allFinite()) {
    throw std::invalid_argument("fit_group_lasso: non-finite response");
  }
}

}  // namespace

GroupLassoFit fit_group_lasso(const GroupDesign& design,
                              const Eigen::VectorXd& response, double penalty,
                              const SolveOptions& opts) {
  if (penalty < 0.0) throw std::invalid_argument("fit_group_lasso: negative penalty");
  check_response(response);
  BcdCore core(design, response);
  std::vector<double> history;
  core.solve(penalty, opts, opts.record_objective ? &history : nullptr);

  GroupLassoFit fit;
  fit.penalty = penalty;
  fit.sweeps = core.sweeps();
  fit.converged = core.converged();
  fit.objective = core.total_objective();
  fit.kkt_gaps = core.gaps().col(0);
  fit.objective_history = std::move(history);
  fit.coefficients.reserve(design.groups.size());
  for (std::size_t j = 0; j < design.groups.size(); ++j) {
    Eigen::VectorXd coef = design.groups[j].transform * core.gamma()[j].col(0);
    if (core.gamma()[j].col(0).norm() > 0.0) {
      fit.active_set.push_back(static_cast<int>(j));
    }
    fit.coefficients.push_back(std::move(coef));
  }
  return fit;
}

Eigen::VectorXd kkt_certificate(const GroupDesign& design,
                                const Eigen::VectorXd& response,
                                const GroupLassoFit& fit) {
  const double n = static_cast<double>(design.n);
  Eigen::VectorXd residual = response - fit.fitted(design);
  Eigen::VectorXd gaps(design.groups.size());
  for (std::size_t j = 0; j < design.groups.size(); ++j) {
    const auto& g = design.groups[j];
    const Eigen::VectorXd v = (g.transformed().transpose() * residual) / n;
    const Eigen::VectorXd gamma_t = g.inverse_transform * fit.coefficients[j];
    const double gnorm = gamma_t.norm();
    if (gnorm == 0.0) {
      gaps[static_cast<Eigen::Index>(j)] = std::max(0.0, v.norm() - fit.penalty);
    } else {
      gaps[static_cast<Eigen::Index>(j)] = (v - fit.penalty * gamma_t / gnorm).norm();
    }
  }
  return gaps;
}

double lambda_max(const GroupDesign& design, const Eigen::VectorXd& response) {
  const double n = static_cast<double>(design.n);
  double best = 0.0;
  for (const auto& g : design.groups) {
    best = std::max(best, ((g.transformed().transpose() * response) / n).norm());
  }
  return best;
}

Eigen::VectorXd lambda_path(const GroupDesign& design,
                            const Eigen::VectorXd& response, int n_points,
                            double ratio) {
  if (n_points < 2) throw std::invalid_argument("lambda_path: need >= 2 points");
  if (!(ratio > 0.0 && ratio < 1.0)) {
    throw std::invalid_argument("lambda_path: ratio must be in (0, 1)");
  }
  if (response.norm() == 0.0) {
    throw std::invalid_argument("lambda_path: zero response");
  }
  const double top = lambda_max(design, response);
  Eigen::VectorXd grid(n_points);
  const double step = std::log(ratio) / (n_points - 1);
  for (int i = 0; i < n_points; ++i) grid[i] = top * std::exp(step * i);
  return grid;
}

namespace {

std::vector<std::vector<Eigen::Index>> make_folds(Eigen::Index n, int folds,
                                                  std::uint64_t seed) {
  std::vector<Eigen::Index> idx(n);
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  auto rng = make_rng(seed, /*purpose=*/0x63766664 /* "cvfd" */, 0);
  shuffle_indices(idx.begin(), idx.end(), rng);
  std::vector<std::vector<Eigen::Index>> out(folds);
  for (int f = 0; f < folds; ++f) {
    const Eigen::Index lo = (n * f) / folds;
    const Eigen::Index hi = (n * (f + 1)) / folds;
    out[f].assign(idx.begin() + lo, idx.begin() + hi);
  }
  return out;
}

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& m,
                          const std::vector<Eigen::Index>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(rows[i]);
  return out;
}

CrossValidation cross_validate_impl(const GroupDesign& design,
                                    const Eigen::MatrixXd& responses,
                                    const Eigen::VectorXd& grid, int folds,
                                    std::uint64_t seed,
                                    const SolveOptions& opts) {
  if (folds < 2) throw std::invalid_argument("cross_validate: folds must be >= 2");
  if (design.n < folds) throw std::invalid_argument("cross_validate: n < folds");
  for (Eigen::Index i = 1; i < grid.size(); ++i) {
    if (!(grid[i] < grid[i - 1])) {
      throw std::invalid_argument("cross_validate: grid must be strictly decreasing");
    }
  }
  const auto fold_rows = make_folds(design.n, folds, seed);
  Eigen::VectorXd sse = Eigen::VectorXd::Zero(grid.size());

  std::vector<Eigen::Index> all(design.n);
  std::iota(all.begin(), all.end(), Eigen::Index{0});
  for (int f = 0; f < folds; ++f) {
    std::vector<Eigen::Index> test = fold_rows[f];
    std::vector<char> is_test(design.n, 0);
    for (auto r : test) is_test[r] = 1;
    std::vector<Eigen::Index> train;
    train.reserve(design.n - test.size());
    for (auto r : all) {
      if (!is_test[r]) train.push_back(r);
    }

    std::vector<Eigen::MatrixXd> train_blocks;
    train_blocks.reserve(design.groups.size());
    for (const auto& g : design.groups) train_blocks.push_back(take_rows(g.data, train));
    GroupDesign train_design = orthonormalize_groups(train_blocks);

    const Eigen::MatrixXd y_train = take_rows(responses, train);
    const Eigen::MatrixXd y_test = take_rows(responses, test);

    BcdCore core(train_design, y_train);
    for (Eigen::Index gi = 0; gi < grid.size(); ++gi) {
      core.solve(grid[gi], opts);
      Eigen::MatrixXd pred = Eigen::MatrixXd::Zero(
          static_cast<Eigen::Index>(test.size()), responses.cols());
      for (std::size_t j = 0; j < design.groups.size(); ++j) {
        const Eigen::MatrixXd coef =
            train_design.groups[j].transform * core.gamma()[j];
        pred.noalias() += take_rows(design.groups[j].data, test) * coef;
      }
      sse[gi] += (y_test - pred).squaredNorm();
    }
  }

  CrossValidation cv;
  cv.grid = grid;
  cv.mean_error = sse / static_cast<double>(design.n * responses.cols());
  Eigen::Index best = 0;
  for (Eigen::Index gi = 1; gi < grid.size(); ++gi) {
    if (cv.mean_error[gi] < cv.mean_error[best]) best = gi;  // ties keep larger penalty
  }
  cv.selected = grid[best];
  return cv;
}

}  // namespace

CrossValidation cross_validate(const GroupDesign& design,
                               const Eigen::VectorXd& response,
                               const Eigen::VectorXd& grid, int folds,
                               std::uint64_t seed, const SolveOptions& opts) {
  return cross_validate_impl(design, response, grid, folds, seed, opts);
}

CrossValidation cross_validate_multi(const GroupDesign& design,
                                     const Eigen::MatrixXd& responses,
                                     const Eigen::VectorXd& grid, int folds,
                                     std::uint64_t seed,
                                     const SolveOptions& opts) {
  return cross_validate_impl(design, responses, grid, folds, seed, opts);
}

MultiGroupLassoFit fit_group_lasso_multi(const GroupDesign& design,
                                         const Eigen::MatrixXd& responses,
                                         double penalty,
                                         const SolveOptions& opts) {
  if (penalty < 0.0) throw std::invalid_argument("fit_group_lasso: negative penalty");
  check_response(responses);
  BcdCore core(design, responses);
  core.solve(penalty, opts);

  MultiGroupLassoFit fit;
  fit.penalty = penalty;
  fit.sweeps = core.sweeps();
  fit.converged = core.converged();
  fit.objectives = core.column_objectives();
  fit.kkt_gaps = core.gaps();
  fit.fitted = responses - core.residual();
  fit.coefficients.reserve(design.groups.size());
  for (std::size_t j = 0; j < design.groups.size(); ++j) {
    fit.coefficients.push_back(design.groups[j].transform * core.gamma()[j]);
  }
  return fit;
}

GroupLassoFit MultiGroupLassoFit::column(const GroupDesign& design, int k) const {
  GroupLassoFit fit;
  fit.penalty = penalty;
  fit.sweeps = sweeps;
  fit.converged = converged;
  fit.objective = objectives[k];
  fit.kkt_gaps = kkt_gaps.col(k);
  for (std::size_t j = 0; j < coefficients.size(); ++j) {
    fit.coefficients.push_back(coefficients[j].col(k));
    if (coefficients[j].col(k).norm() > 0.0) {
      fit.active_set.push_back(static_cast<int>(j));
    }
  }
  (void)design;
  return fit;
}

double theoretical_lambda(double sigma, int d, int n, int q, double x) {
  if (sigma < 0.0 || d <= 0 || n <= 0 || q <= 0) {
    throw std::invalid_argument("theoretical_lambda: arguments must be positive");
  }
  const double dn = static_cast<double>(n);
  return 2.0 * sigma * std::sqrt(static_cast<double>(d) / dn) +
         2.0 * sigma * std::sqrt((2.0 * x + 2.0 * std::log(static_cast<double>(q))) / dn);
}

double theoretical_eta(double C, int d, int n, int d1, int q, int s1,
                       double psi, double x) {
  if (C <= 0.0 || d <= 0 || n <= 0 || d1 <= 0 || q <= 0 || s1 <= 0) {
    throw std::invalid_argument("theoretical_eta: arguments must be positive");
  }
  if (!(psi > 0.0 && psi <= 1.0)) {
    throw std::invalid_argument("theoretical_eta: psi must be in (0, 1]");
  }
  const double dn = static_cast<double>(n);
  const double logs = x + std::log(static_cast<double>(d1)) + std::log(static_cast<double>(q));
  return C * (std::sqrt(static_cast<double>(d) * logs / dn) +
              std::sqrt(static_cast<double>(s1)) * static_cast<double>(d) * logs / (psi * dn));
}

}  // namespace samtwostep
