#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "samtwostep/pipeline.hpp"
#include "samtwostep/quadrature.hpp"
#include "samtwostep/rng.hpp"
#include "samtwostep/simlab.hpp"

using namespace samtwostep;

TEST_SUITE_BEGIN("simlab");

TEST_CASE("test functions") {
  CHECK(test_function(TestFunction::kSine, 0.0) == 0.0);
  // expo(0) = 1 - 0.4 sinh(2.5), spelled out as an independent expression.
  const double expected = 1.0 - 0.4 * 0.5 * (std::exp(2.5) - std::exp(-2.5));
  CHECK(test_function(TestFunction::kExpo, 0.0) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(expected == doctest::Approx(-1.4200816).epsilon(1e-6));

  // All four are mean zero on (-2.5, 2.5) by 200-point quadrature.
  for (TestFunction fn : {TestFunction::kSine, TestFunction::kLine,
                          TestFunction::kExpo, TestFunction::kQuad}) {
    const double mean =
        integrate([&](double x) { return test_function(fn, x); }, -2.5, 2.5, 200) / 5.0;
    CHECK(std::abs(mean) < 1e-9);
  }

  CHECK(test_function_from_name("quad") == TestFunction::kQuad);
  CHECK_THROWS_AS(test_function_from_name("cosine"), std::invalid_argument);
}

TEST_CASE("copula covariates: correlation structure and margins") {
  // The latent correlation follows the arcsine adjustment.
  CHECK(2.0 * std::sin(M_PI * 0.9 / 6.0) == doctest::Approx(0.9079810).epsilon(1e-6));

  const int n = 30000, q = 6, block = 3;
  const Eigen::MatrixXd x = gen_covariates(n, q, block, 0.9, 99);
  CHECK(x.minCoeff() > -2.5);
  CHECK(x.maxCoeff() < 2.5);

  const auto pearson = [&](int a, int b) {
    const Eigen::VectorXd u = x.col(a).array() - x.col(a).mean();
    const Eigen::VectorXd v = x.col(b).array() - x.col(b).mean();
    return u.dot(v) / std::sqrt(u.squaredNorm() * v.squaredNorm());
  };
  CHECK(std::abs(pearson(0, 1) - 0.9) < 0.02);
  CHECK(std::abs(pearson(1, 2) - 0.9) < 0.02);
  CHECK(std::abs(pearson(0, 3)) < 0.02);
  CHECK(std::abs(pearson(2, 5)) < 0.02);

  // Marginal uniformity via a coarse CDF comparison.
  Eigen::VectorXd sorted = x.col(0);
  std::sort(sorted.data(), sorted.data() + n);
  double ks = 0.0;
  for (int i = 0; i < n; ++i) {
    const double empirical = (i + 1.0) / n;
    const double uniform = (sorted[i] + 2.5) / 5.0;
    ks = std::max(ks, std::abs(empirical - uniform));
  }
  CHECK(ks < 0.02);

  CHECK_THROWS_AS(gen_covariates(10, 4, 0, 0.9, 1), std::invalid_argument);
  CHECK_THROWS_AS(gen_covariates(10, 4, 2, 1.0, 1), std::invalid_argument);
}

TEST_CASE("gen_data: model structure and determinism") {
  SimConfig cfg;
  cfg.n = 400;
  cfg.q = 60;
  cfg.fn = TestFunction::kLine;
  cfg.seed = 7;
  CHECK(cfg.effective_s0() == 3);

  const Dataset ds = gen_data(cfg, 4);
  // Conditional mean is f(X1) + f(X2)/2 + f(X3)/3.
  for (int i = 0; i < 10; ++i) {
    const double mean = test_function(cfg.fn, ds.x(i, 0)) +
                        test_function(cfg.fn, ds.x(i, 1)) / 2.0 +
                        test_function(cfg.fn, ds.x(i, 2)) / 3.0;
    CHECK(ds.y[i] - ds.eps[i] == doctest::Approx(mean).epsilon(1e-12));
  }

  // Same (seed, rep) gives a bit-identical dataset.
  const Dataset again = gen_data(cfg, 4);
  CHECK((ds.x - again.x).cwiseAbs().maxCoeff() == 0.0);
  CHECK((ds.y - again.y).cwiseAbs().maxCoeff() == 0.0);
  const Dataset other = gen_data(cfg, 5);
  CHECK((ds.y - other.y).cwiseAbs().maxCoeff() > 0.0);

  // Unit noise variance (sample check over a large draw).
  SimConfig big = cfg;
  big.n = 100000;
  big.q = 4;
  big.s0 = 1;
  const Dataset noise = gen_data(big, 0);
  const double var = noise.eps.squaredNorm() / big.n;
  CHECK(std::abs(var - 1.0) < 0.02);
}

namespace {

SimConfig small_config() {
  SimConfig cfg;
  cfg.n = 150;
  cfg.q = 4;
  cfg.s0 = 2;
  cfg.d_pre = 12;
  cfg.d_re = 8;
  cfg.reps = 6;
  cfg.seed = 11;
  cfg.penalty.rule = PenaltyRule::kFixed;
  cfg.penalty.lambda = 0.15;
  cfg.penalty.eta = 0.15;
  cfg.threads = 1;
  return cfg;
}

}  // namespace

TEST_CASE("run_experiment: shape, determinism, single-rep coverage") {
  SimConfig cfg = small_config();
  const CoverageReport report = run_experiment(cfg);
  CHECK(report.completed + report.failures == cfg.reps);
  CHECK(report.eval_points.size() == 3);
  for (const auto& cells : report.cells) {
    for (const auto& c : cells) {
      CHECK(c.coverage >= 0.0);
      CHECK(c.coverage <= 1.0);
      CHECK(c.avg_width > 0.0);
    }
  }

  const CoverageReport again = run_experiment(cfg);
  CHECK(report_csv(report) == report_csv(again));

  SimConfig one = cfg;
  one.reps = 1;
  const CoverageReport single = run_experiment(one);
  for (const auto& cells : single.cells) {
    for (const auto& c : cells) {
      CHECK((c.coverage == 0.0 || c.coverage == 1.0));
    }
  }
}

TEST_CASE("figure_curves: single-point grid and panel shape") {
  SimConfig cfg = small_config();
  const FigureCurves curves = figure_curves(cfg, {0.5});
  CHECK(curves.grid.size() == 1);
  for (const auto& panel : curves.panels) {
    CHECK(panel.single_estimate.size() == 1);
    CHECK(panel.avg_lo.size() == 1);
    CHECK(panel.coverage.size() == 1);
    CHECK(panel.avg_lo[0] < panel.avg_hi[0]);
  }
  const std::string csv = curves_csv(curves);
  CHECK(csv.find("x,estimator,") == 0);
  const std::string svg = figure_svg(curves, cfg.fn);
  CHECK(svg.find("<svg") == 0);
}

TEST_CASE("pipeline: q = 1 two-step equals least-squares smoothing chain") {
  auto rng = make_rng(901, 0, 0);
  const int n = 200;
  Eigen::MatrixXd x(n, 1);
  for (int i = 0; i < n; ++i) x(i, 0) = 5.0 * uniform01(rng) - 2.5;
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) y[i] = test_function(TestFunction::kSine, x(i, 0)) + 0.3 * standard_normal(rng);

  TwoStepOptions opt;
  opt.d_pre = 14;
  opt.d_re = 9;
  const std::vector<Interval> domains{Interval{-2.5, 2.5}};
  const PreparedDesign design = prepare_design(x, domains, opt);
  const TwoStepEstimator est =
      TwoStepEstimator::fit(design, y, PenaltyChoice{0.1, 0.0}, opt);

  // With q = 1 the debiased presmoother is the d_pre least-squares fit and
  // the resmoothed estimator is the coarse projection of it.
  Basis fine(BasisSpec{BasisFamily::kBSpline, 3, opt.d_pre - 3, Interval{-2.5, 2.5}});
  Basis coarse(BasisSpec{BasisFamily::kBSpline, 3, opt.d_re - 3, Interval{-2.5, 2.5}});
  LeastSquaresSmoother fine_sm(fine, x.col(0));
  LeastSquaresSmoother coarse_sm(coarse, x.col(0));
  const Eigen::VectorXd pseudo = fine_sm.fitted(y);
  CHECK((est.pseudo() - pseudo).cwiseAbs().maxCoeff() < 1e-8);

  const Eigen::VectorXd coef = coarse_sm.coefficients(pseudo);
  for (double q : {-1.5, 0.0, 1.0}) {
    CHECK(est.resmooth_estimate(q) ==
          doctest::Approx(coarse_sm.evaluate(coef, q)).epsilon(1e-8));
    const Eigen::VectorXd w = est.resmooth_weights(q);
    const Eigen::VectorXd s = coarse_sm.weights(q);
    // w' y should reproduce the resmoothed value exactly (offset is zero).
    CHECK(w.dot(y) == doctest::Approx(est.resmooth_estimate(q)).epsilon(1e-10));
    CHECK(s.dot(pseudo) == doctest::Approx(est.resmooth_estimate(q)).epsilon(1e-10));
  }

  // Presmoother weights reproduce the presmoothed value (offset is zero).
  for (double q : {-2.0, 0.3}) {
    CHECK(est.presmooth_weights(q).dot(y) ==
          doctest::Approx(est.presmooth_estimate(q)).epsilon(1e-9));
  }
}

TEST_CASE("pipeline: composite-weight bookkeeping with nuisance blocks") {
  SimConfig cfg = small_config();
  const Dataset ds = gen_data(cfg, 0);
  TwoStepOptions opt;
  opt.d_pre = cfg.d_pre;
  opt.d_re = cfg.d_re;
  const std::vector<Interval> domains(cfg.q, cfg.covariate_domain);
  const PreparedDesign design = prepare_design(ds.x, domains, opt);
  const TwoStepEstimator est =
      TwoStepEstimator::fit(design, ds.y, PenaltyChoice{0.2, 0.2}, opt);

  // s(x)' pseudo = w(x)' (Y - offset) with the Lasso pieces held fixed.
  for (double x : {-1.5, 0.0, 1.0}) {
    const Eigen::VectorXd s = est.smoother().weights(x);
    const Eigen::VectorXd w = composite_weights(est.debiased(), s);
    const double lhs = s.dot(est.pseudo());
    const double rhs = w.dot(ds.y - est.debiased().lasso_offset);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
  }

  // Y = 0 gives w' Y = 0.
  const Eigen::VectorXd w = composite_weights(est.debiased(), est.smoother().weights(0.0));
  CHECK(w.dot(Eigen::VectorXd::Zero(cfg.n)) == 0.0);
}

TEST_CASE("report csv layout") {
  SimConfig cfg = small_config();
  cfg.reps = 3;
  const CoverageReport report = run_experiment(cfg);
  const std::string csv = report_csv(report);
  CHECK(csv.find("n,q,fn,x,estimator,coverage,avg_width,reps,failures\n") == 0);
  // one line per (estimator, point) plus the header
  int lines = 0;
  for (char c : csv) {
    if (c == '\n') ++lines;
  }
  CHECK(lines == 1 + 9);
  CHECK(csv.find("oracle") != std::string::npos);
  CHECK(csv.find("presmooth") != std::string::npos);
  CHECK(csv.find("resmooth") != std::string::npos);
}

TEST_SUITE_END();
