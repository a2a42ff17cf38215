// Acceptance suite: one pass/fail line per criterion, nonzero exit when any
// criterion fails. Heavier Monte Carlo settings live here rather than in the
// unit suites.
#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "samtwostep/basis.hpp"
#include "samtwostep/despars.hpp"
#include "samtwostep/glasso.hpp"
#include "samtwostep/inference.hpp"
#include "samtwostep/pipeline.hpp"
#include "samtwostep/quadrature.hpp"
#include "samtwostep/resmooth.hpp"
#include "samtwostep/rng.hpp"
#include "samtwostep/simlab.hpp"

using namespace samtwostep;

namespace {

int failures = 0;

void report(int criterion, bool pass, const std::string& what,
            const std::string& detail, double seconds) {
  std::printf("%s criterion %d: %s (%s) [%.1f s]\n", pass ? "PASS" : "FAIL",
              criterion, what.c_str(), detail.c_str(), seconds);
  std::fflush(stdout);
  if (!pass) ++failures;
}

double now_seconds() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

Eigen::MatrixXd random_matrix(std::mt19937_64& rng, int rows, int cols) {
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < m.size(); ++i) m.data()[i] = standard_normal(rng);
  return m;
}

Eigen::VectorXd random_vector(std::mt19937_64& rng, int n) {
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = standard_normal(rng);
  return v;
}

// ------------------------------------------------------------- criterion 1

void criterion_basis() {
  const double t0 = now_seconds();
  double worst_gram = 0.0;
  for (int t = 0; t <= 3; ++t) {
    for (int m : {2, 10, 50}) {
      Basis b(BasisSpec{BasisFamily::kPiecewiseLegendre, t, m});
      const int d = b.dimension();
      const QuadratureRule rule = gauss_legendre(t + 1);
      Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(d, d);
      for (int k = 0; k < m; ++k) {
        const double lo = static_cast<double>(k) / m;
        const double hi = static_cast<double>(k + 1) / m;
        for (std::size_t g = 0; g < rule.nodes.size(); ++g) {
          const double x = 0.5 * (lo + hi) + 0.5 * (hi - lo) * rule.nodes[g];
          const Eigen::VectorXd row = b.row(x);
          gram += 0.5 * (hi - lo) * rule.weights[g] * row * row.transpose();
        }
      }
      gram -= Eigen::MatrixXd::Identity(d, d);
      worst_gram = std::max(worst_gram, gram.cwiseAbs().maxCoeff());
    }
  }

  double worst_unity = 0.0;
  Basis spl(BasisSpec{BasisFamily::kBSpline, 3, 20});
  for (int i = 0; i <= 1000; ++i) {
    const double x = static_cast<double>(i) / 1000;
    worst_unity = std::max(worst_unity, std::abs(spl.row(x).sum() - 1.0));
  }

  char detail[160];
  std::snprintf(detail, sizeof(detail),
                "orthonormality gap %.2e < 1e-10, partition-of-unity gap %.2e < 1e-12",
                worst_gram, worst_unity);
  report(1, worst_gram < 1e-10 && worst_unity < 1e-12, "basis correctness", detail,
         now_seconds() - t0);
}

// ------------------------------------------------------------- criterion 2

// Reference: proximal gradient on the stacked transformed design, run for
// 1e6 iterations through the precomputed Gram form.
double prox_grad_objective(const GroupDesign& design, const Eigen::VectorXd& y,
                           double penalty, long iterations) {
  const double n = static_cast<double>(design.n);
  const std::size_t g = design.groups.size();
  Eigen::Index total = 0;
  std::vector<Eigen::Index> offsets(g);
  for (std::size_t j = 0; j < g; ++j) {
    offsets[j] = total;
    total += design.groups[j].cols();
  }
  Eigen::MatrixXd xt(design.n, total);
  for (std::size_t j = 0; j < g; ++j) {
    xt.middleCols(offsets[j], design.groups[j].cols()) =
        design.groups[j].transformed();
  }
  const Eigen::MatrixXd gram = (xt.transpose() * xt) * (2.0 / n);
  const Eigen::VectorXd lin = (xt.transpose() * y) * (2.0 / n);
  const double step =
      1.0 /
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(gram).eigenvalues().maxCoeff();

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(total);
  for (long it = 0; it < iterations; ++it) {
    Eigen::VectorXd z = beta - step * (gram * beta - lin);
    for (std::size_t j = 0; j < g; ++j) {
      auto seg = z.segment(offsets[j], design.groups[j].cols());
      const double norm = seg.norm();
      const double thresh = 2.0 * penalty * step;
      if (norm > thresh) {
        seg *= 1.0 - thresh / norm;
      } else {
        seg.setZero();
      }
    }
    beta = z;
  }
  double obj = (y - xt * beta).squaredNorm() / n;
  for (std::size_t j = 0; j < g; ++j) {
    obj += 2.0 * penalty * beta.segment(offsets[j], design.groups[j].cols()).norm();
  }
  return obj;
}

void criterion_solver() {
  const double t0 = now_seconds();
  double worst_obj = 0.0, worst_gap = 0.0;
  for (int inst = 0; inst < 20; ++inst) {
    auto rng = make_rng(424242, 2, static_cast<std::uint64_t>(inst));
    std::vector<Eigen::MatrixXd> blocks;
    for (int j = 0; j < 3; ++j) blocks.push_back(random_matrix(rng, 30, 2));
    const GroupDesign design = orthonormalize_groups(blocks);
    const Eigen::VectorXd y = random_vector(rng, 30);
    const double pen = (0.1 + 0.5 * uniform01(rng)) * lambda_max(design, y);

    const GroupLassoFit fit = fit_group_lasso(design, y, pen, {1e-12, 200000});
    const double ref = prox_grad_objective(design, y, pen, 1000000);
    worst_obj = std::max(worst_obj, std::abs(fit.objective - ref));
    worst_gap = std::max(worst_gap, kkt_certificate(design, y, fit).maxCoeff());
  }
  char detail[160];
  std::snprintf(detail, sizeof(detail),
                "max |objective gap| %.2e < 1e-8, max KKT gap %.2e <= 1e-7",
                worst_obj, worst_gap);
  report(2, worst_obj < 1e-8 && worst_gap <= 1e-7, "solver optimality", detail,
         now_seconds() - t0);
}

// ------------------------------------------------------------- criterion 3

struct DesparsInstance {
  PhiBasis phi;
  Eigen::MatrixXd delta;
  Eigen::VectorXd y, offset, gamma1;
};

DesparsInstance make_despars_instance(std::uint64_t seed, int n, int q) {
  auto rng = make_rng(seed, 3, 0);
  DesparsInstance inst;
  Basis basis(BasisSpec{BasisFamily::kPiecewiseLegendre, 1, 4});
  Eigen::VectorXd x1(n);
  for (int i = 0; i < n; ++i) x1[i] = uniform01(rng);
  const Eigen::MatrixXd block1 = basis.eval_design(x1);
  inst.phi = gram_schmidt_empirical(block1, 2);

  if (q > 1) {
    std::vector<Eigen::MatrixXd> blocks;
    for (int j = 1; j < q; ++j) blocks.push_back(random_matrix(rng, n, 3));
    const GroupDesign others = orthonormalize_groups(blocks);
    const MultiGroupLassoFit proj =
        relaxed_projections(block1, others, 0.08, {1e-10, 100000});
    inst.delta = map_projections_to_phi(proj.fitted, inst.phi);
    inst.offset = 0.3 * random_vector(rng, n);
  } else {
    inst.delta = Eigen::MatrixXd::Zero(n, block1.cols());
    inst.offset = Eigen::VectorXd::Zero(n);
  }
  inst.y = random_vector(rng, n);
  inst.gamma1 = 0.2 * random_vector(rng, static_cast<int>(block1.cols()));
  return inst;
}

void criterion_despars() {
  const double t0 = now_seconds();
  double worst_displays = 0.0, worst_operator = 0.0, worst_ols = 0.0;

  for (std::uint64_t s = 0; s < 50; ++s) {
    DesparsInstance inst = make_despars_instance(900 + s, 100, 5);
    const DebiasedFit fit =
        debias(inst.y, inst.gamma1, inst.offset, inst.phi, inst.delta);

    const double n = static_cast<double>(inst.y.size());
    const Eigen::VectorXd beta_lasso = inst.phi.transform * inst.gamma1;
    const Eigen::VectorXd f_lasso = inst.phi.phi * beta_lasso + inst.offset;
    const Eigen::VectorXd display1 =
        beta_lasso + fit.cross.partialPivLu().solve(
                         (fit.z1.transpose() * (inst.y - f_lasso)) / n);
    worst_displays = std::max(
        worst_displays, (display1 - fit.beta_debiased).cwiseAbs().maxCoeff());

    const Eigen::VectorXd op = operator_form_estimate(fit, inst.y);
    worst_operator =
        std::max(worst_operator, (op - fit.beta_debiased).cwiseAbs().maxCoeff());
  }

  for (std::uint64_t s = 0; s < 10; ++s) {
    DesparsInstance inst = make_despars_instance(990 + s, 80, 1);
    const DebiasedFit fit =
        debias(inst.y, inst.gamma1, inst.offset, inst.phi, inst.delta);
    const Eigen::VectorXd ols = inst.phi.raw.colPivHouseholderQr().solve(inst.y);
    worst_ols = std::max(worst_ols, (inst.phi.raw * ols - fit.fitted_at_data())
                                        .cwiseAbs()
                                        .maxCoeff());
  }

  char detail[200];
  std::snprintf(detail, sizeof(detail),
                "displays %.2e <= 1e-10, operator-vs-matrix %.2e <= 1e-8, "
                "q=1 OLS %.2e <= 1e-10",
                worst_displays, worst_operator, worst_ols);
  report(3,
         worst_displays <= 1e-10 && worst_operator <= 1e-8 && worst_ols <= 1e-10,
         "desparsification identities", detail, now_seconds() - t0);
}

// ------------------------------------------------------------- criterion 4

void criterion_nested() {
  const double t0 = now_seconds();
  const int n = 750;
  Eigen::VectorXd x(n);
  for (int i = 0; i < n; ++i) x[i] = (i + 0.5) / n;
  auto rng = make_rng(44, 4, 0);
  const Eigen::VectorXd v = random_vector(rng, n);

  double worst = 0.0;
  {
    Basis fine(BasisSpec{BasisFamily::kPiecewiseLegendre, 1, 75});
    Basis coarse(BasisSpec{BasisFamily::kPiecewiseLegendre, 1, 25});
    LeastSquaresSmoother fs(fine, x), cs(coarse, x);
    worst = std::max(worst,
                     (cs.fitted(fs.fitted(v)) - cs.fitted(v)).cwiseAbs().maxCoeff());
  }
  {
    Basis fine(BasisSpec{BasisFamily::kBSpline, 3, 75});
    Basis coarse(BasisSpec{BasisFamily::kBSpline, 3, 25});
    LeastSquaresSmoother fs(fine, x), cs(coarse, x);
    worst = std::max(worst,
                     (cs.fitted(fs.fitted(v)) - cs.fitted(v)).cwiseAbs().maxCoeff());
  }
  char detail[120];
  std::snprintf(detail, sizeof(detail), "max deviation %.2e <= 1e-9", worst);
  report(4, worst <= 1e-9, "nested-projection identity (m1=75, m*=25)", detail,
         now_seconds() - t0);
}

// ------------------------------------------------------------- criterion 5

void criterion_centering() {
  const double t0 = now_seconds();
  double worst = 0.0;
  for (TestFunction fn : {TestFunction::kSine, TestFunction::kLine,
                          TestFunction::kExpo, TestFunction::kQuad}) {
    const double mean =
        integrate([&](double u) { return test_function(fn, u); }, -2.5, 2.5, 200) /
        5.0;
    worst = std::max(worst, std::abs(mean));
  }
  char detail[120];
  std::snprintf(detail, sizeof(detail), "max |mean| %.2e < 1e-9", worst);
  report(5, worst < 1e-9, "test-function centering", detail, now_seconds() - t0);
}

// ------------------------------------------------------------- criterion 6

void criterion_covariates() {
  const double t0 = now_seconds();
  const int n = 100000, q = 10, block = 3;
  const Eigen::MatrixXd x = gen_covariates(n, q, block, 0.9, 612);

  const auto pearson = [&](int a, int b) {
    const Eigen::VectorXd u = x.col(a).array() - x.col(a).mean();
    const Eigen::VectorXd w = x.col(b).array() - x.col(b).mean();
    return u.dot(w) / std::sqrt(u.squaredNorm() * w.squaredNorm());
  };
  double worst_within =
      std::max(std::abs(pearson(0, 1) - 0.9), std::abs(pearson(1, 2) - 0.9));
  worst_within = std::max(worst_within, std::abs(pearson(3, 5) - 0.9));
  double worst_cross = std::max(std::abs(pearson(0, 3)), std::abs(pearson(2, 6)));
  worst_cross = std::max(worst_cross, std::abs(pearson(5, 9)));

  Eigen::VectorXd sorted = x.col(0);
  std::sort(sorted.data(), sorted.data() + n);
  double ks = 0.0;
  for (int i = 0; i < n; ++i) {
    const double uniform = (sorted[i] + 2.5) / 5.0;
    ks = std::max(ks, std::max(std::abs((i + 1.0) / n - uniform),
                               std::abs(static_cast<double>(i) / n - uniform)));
  }

  char detail[200];
  std::snprintf(detail, sizeof(detail),
                "within-block dev %.3f <= 0.01, cross-block dev %.3f <= 0.01, "
                "KS %.4f < 0.01",
                worst_within, worst_cross, ks);
  report(6, worst_within <= 0.01 && worst_cross <= 0.01 && ks < 0.01,
         "covariate generator", detail, now_seconds() - t0);
}

// ------------------------------------------------------------- criterion 7

void criterion_coverage() {
  const double t0 = now_seconds();
  SimConfig cfg;
  cfg.n = 500;
  cfg.q = 50;
  cfg.fn = TestFunction::kSine;
  cfg.d_pre = 75;
  cfg.d_re = 44;
  cfg.reps = 200;
  cfg.seed = 20240817;
  cfg.penalty.rule = PenaltyRule::kCv;

  const CoverageReport rep = run_experiment(cfg);
  const double target_res_cov[3] = {0.91, 0.93, 0.90};
  const double target_orcl_cov[3] = {0.95, 0.95, 0.93};

  double worst_res_cov = 0.0, worst_width = 0.0, worst_orcl = 0.0;
  for (int p = 0; p < 3; ++p) {
    const auto& res = rep.cell(EstimatorKind::kResmooth, p);
    const auto& orcl = rep.cell(EstimatorKind::kOracle, p);
    worst_res_cov = std::max(worst_res_cov, std::abs(res.coverage - target_res_cov[p]));
    worst_width = std::max(worst_width, std::abs(res.avg_width - 1.13));
    worst_orcl = std::max(worst_orcl, std::abs(orcl.coverage - target_orcl_cov[p]));
  }
  const bool pass = worst_res_cov <= 0.06 && worst_width <= 0.08 && worst_orcl <= 0.05;

  char detail[300];
  std::snprintf(detail, sizeof(detail),
                "resmooth cov (%.3f, %.3f, %.3f) dev %.3f <= 0.06, "
                "width (%.3f, %.3f, %.3f) dev %.3f <= 0.08, "
                "oracle cov dev %.3f <= 0.05, lambda %.4f eta %.4f, %d failures",
                rep.cell(EstimatorKind::kResmooth, 0).coverage,
                rep.cell(EstimatorKind::kResmooth, 1).coverage,
                rep.cell(EstimatorKind::kResmooth, 2).coverage, worst_res_cov,
                rep.cell(EstimatorKind::kResmooth, 0).avg_width,
                rep.cell(EstimatorKind::kResmooth, 1).avg_width,
                rep.cell(EstimatorKind::kResmooth, 2).avg_width, worst_width,
                worst_orcl, rep.lambda_used, rep.eta_used, rep.failures);
  report(7, pass, "coverage reproduction at desk scale", detail, now_seconds() - t0);
}

// ------------------------------------------------------------- criterion 8

void criterion_oracle_ci() {
  const double t0 = now_seconds();
  auto rng = make_rng(808, 8, 0);
  const int n = 300;
  Eigen::VectorXd x(n);
  for (int i = 0; i < n; ++i) x[i] = uniform01(rng);
  Basis basis(BasisSpec{BasisFamily::kBSpline, 3, 9});
  LeastSquaresSmoother sm(basis, x);
  Eigen::VectorXd coef = random_vector(rng, basis.dimension());
  const Eigen::VectorXd f1 = basis.eval_design(x) * coef;
  const double x0 = 0.37;
  const double truth = basis.row(x0).dot(coef);
  const Eigen::VectorXd s = sm.weights(x0);
  const double half = normal_quantile(0.975) * s.norm();

  int covered = 0;
  const int draws = 2000;
  for (int d = 0; d < draws; ++d) {
    Eigen::VectorXd eps(n);
    for (int i = 0; i < n; ++i) eps[i] = standard_normal(rng);
    if (std::abs(s.dot(f1 + eps) - truth) <= half) ++covered;
  }
  const double coverage = static_cast<double>(covered) / draws;
  char detail[120];
  std::snprintf(detail, sizeof(detail), "coverage %.4f in [0.94, 0.96]", coverage);
  report(8, coverage >= 0.94 && coverage <= 0.96, "oracle CI exactness", detail,
         now_seconds() - t0);
}

// ------------------------------------------------------------- criterion 9

void criterion_figure() {
  const double t0 = now_seconds();
  SimConfig cfg;
  cfg.n = 100;
  cfg.q = 50;
  cfg.fn = TestFunction::kSine;
  cfg.d_pre = 75;
  cfg.d_re = 40;
  cfg.reps = 150;
  cfg.seed = 909;
  cfg.penalty.rule = PenaltyRule::kCv;

  const CoverageReport rep = run_experiment(cfg);
  double pre = 0.0, res = 0.0, orcl = 0.0;
  for (int p = 0; p < 3; ++p) {
    pre += rep.cell(EstimatorKind::kPresmooth, p).avg_width / 3.0;
    res += rep.cell(EstimatorKind::kResmooth, p).avg_width / 3.0;
    orcl += rep.cell(EstimatorKind::kOracle, p).avg_width / 3.0;
  }
  const double ratio = pre / res;
  const double rel = std::abs(res - orcl) / orcl;
  char detail[220];
  std::snprintf(detail, sizeof(detail),
                "presmooth width %.2f vs resmooth %.2f (ratio %.2f > 1.5), "
                "oracle %.2f (rel dev %.3f < 0.05), %d failures",
                pre, res, ratio, orcl, rel, rep.failures);
  report(9, ratio > 1.5 && rel < 0.05, "qualitative figure reproduction", detail,
         now_seconds() - t0);
}

}  // namespace

int main() {
  criterion_basis();
  criterion_solver();
  criterion_despars();
  criterion_nested();
  criterion_centering();
  criterion_covariates();
  criterion_oracle_ci();
  criterion_coverage();
  criterion_figure();
  std::printf("%s: %d criterion(s) failed\n",
              failures == 0 ? "ALL PASS" : "FAILURES", failures);
  return failures == 0 ? 0 : 1;
}
