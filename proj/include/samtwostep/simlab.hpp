#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "samtwostep/inference.hpp"
#include "samtwostep/pipeline.hpp"

namespace samtwostep {

enum class TestFunction { kSine, kLine, kExpo, kQuad };

TestFunction test_function_from_name(const std::string& name);
std::string to_string(TestFunction fn);

// The centered component functions on (-2.5, 2.5):
//   sine(x) = 2 sin(2x), line(x) = x,
//   expo(x) = exp(-x) - (2/5) sinh(5/2), quad(x) = x^2 - 25/12.
double test_function(TestFunction fn, double x);

enum class PenaltyRule { kCv, kFixed, kTheoretical };

struct PenaltySource {
  PenaltyRule rule = PenaltyRule::kCv;
  double lambda = 0.0;  // kFixed
  double eta = 0.0;
  double x = 0.0;    // kTheoretical deviation parameter; 0 -> log q
  double c_eta = 0.25;  // kTheoretical constant in front of eta
  double psi = 1.0;
};

struct SimConfig {
  int n = 500;
  int q = 50;
  TestFunction fn = TestFunction::kSine;
  int s0 = 0;  // 0 -> ceil(q/20)
  double block_rho = 0.9;
  int d_pre = 75;
  int d_re = 44;
  int reps = 200;
  double level = 0.95;
  std::vector<double> eval_points{-1.5, 0.0, 1.0};
  std::uint64_t seed = 1;
  PenaltySource penalty;
  double sigma = 1.0;  // true error scale, known in the simulations
  BasisFamily family = BasisFamily::kBSpline;
  int degree = 3;
  Interval covariate_domain{-2.5, 2.5};

  // Pilot mini-run that picks lambda/eta by 10-fold CV and freezes the
  // averages for the main run.
  int pilot_reps = 10;
  int cv_folds = 10;
  int lambda_grid = 25;
  double lambda_ratio = 3e-3;
  int eta_grid = 20;
  double eta_ratio = 3e-3;

  int threads = 0;  // 0 -> hardware concurrency

  int effective_s0() const { return s0 > 0 ? s0 : (q + 19) / 20; }
  void validate() const;
};

// Gaussian copula draw: latent equicorrelated normals with
// rho_Z = 2 sin(pi rho_target / 6) per block, mapped through the normal CDF
// and scaled to (-2.5, 2.5), so the uniforms' Pearson correlation is
// rho_target within blocks and 0 across.
Eigen::MatrixXd gen_covariates(int n, int q, int block_size, double rho_target,
                               std::uint64_t seed);

struct Dataset {
  Eigen::MatrixXd x;        // n x q on (-2.5, 2.5)
  Eigen::VectorXd y;
  Eigen::VectorXd eps;      // N(0,1) noise
  Eigen::VectorXd f1;       // f(X_1) at the data
  Eigen::VectorXd nuisance; // sum_{j=2..s0} (1/j) f(X_j) at the data
};

// Y = sum_{j<=s0} (1/j) f(X_j) + eps; the per-rep stream is derived from
// (seed, rep), so identical (seed, rep) give bit-identical datasets.
Dataset gen_data(const SimConfig& cfg, int rep);

struct CoverageCell {
  double coverage = 0.0;
  double avg_width = 0.0;
};

struct CoverageReport {
  SimConfig config;
  std::vector<double> eval_points;
  // indexed [estimator][point]; estimator order: oracle, presmooth, resmooth
  std::array<std::vector<CoverageCell>, 3> cells;
  int completed = 0;
  int failures = 0;
  double lambda_used = 0.0;
  double eta_used = 0.0;
  double wall_seconds = 0.0;

  const CoverageCell& cell(EstimatorKind est, std::size_t point) const {
    return cells[static_cast<std::size_t>(est)][point];
  }
};

// Replicated coverage experiment over the three estimators. Per-rep
// estimator failures are recorded and excluded; more than 5% failing is an
// experiment error.
CoverageReport run_experiment(const SimConfig& cfg);

struct FigurePanel {
  std::vector<double> single_estimate, single_lo, single_hi;
  std::vector<double> avg_lo, avg_hi;
  std::vector<double> coverage;
};

struct FigureCurves {
  std::vector<double> grid;
  // estimator order: oracle, presmooth, resmooth
  std::array<FigurePanel, 3> panels;
  int completed = 0;
  int failures = 0;
};

FigureCurves figure_curves(const SimConfig& cfg, const std::vector<double>& grid);

// Report persistence. The CSV carries one row per (estimator, eval point)
// with header n,q,fn,x,estimator,coverage,avg_width,reps,failures.
std::string report_csv(const CoverageReport& report);
std::string curves_csv(const FigureCurves& curves);
std::string figure_svg(const FigureCurves& curves, TestFunction fn);

const char* estimator_name(EstimatorKind kind);

}  // namespace samtwostep
