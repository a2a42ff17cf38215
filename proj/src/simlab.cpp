#include "samtwostep/simlab.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "samtwostep/errors.hpp"
#include "samtwostep/rng.hpp"

namespace samtwostep {

namespace {

constexpr std::uint64_t kDataPurpose = 0x64617461;   // "data"
constexpr std::uint64_t kPilotPurpose = 0x70696c74;  // "pilt"
constexpr std::uint64_t kCvPurpose = 0x63767364;     // "cvsd"

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

}  // namespace

TestFunction test_function_from_name(const std::string& name) {
  if (name == "sine") return TestFunction::kSine;
  if (name == "line") return TestFunction::kLine;
  if (name == "expo") return TestFunction::kExpo;
  if (name == "quad") return TestFunction::kQuad;
  throw std::invalid_argument("unknown test function '" + name +
                              "' (expected sine, line, expo, or quad)");
}

std::string to_string(TestFunction fn) {
  switch (fn) {
    case TestFunction::kSine: return "sine";
    case TestFunction::kLine: return "line";
    case TestFunction::kExpo: return "expo";
    case TestFunction::kQuad: return "quad";
  }
  return "?";
}

double test_function(TestFunction fn, double x) {
  switch (fn) {
    case TestFunction::kSine: return 2.0 * std::sin(2.0 * x);
    case TestFunction::kLine: return x;
    case TestFunction::kExpo: return std::exp(-x) - 0.4 * std::sinh(2.5);
    case TestFunction::kQuad: return x * x - 25.0 / 12.0;
  }
  throw std::invalid_argument("unknown test function");
}

void SimConfig::validate() const {
  if (n < 1 || q < 1) throw std::invalid_argument("sim: n and q must be positive");
  if (reps < 1) throw std::invalid_argument("sim: reps must be positive");
  if (s0 > q) throw std::invalid_argument("sim: s0 must be <= q");
  if (d_re > d_pre) throw std::invalid_argument("sim: d_re must be <= d_pre");
  if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("sim: level in (0,1)");
  if (!(std::abs(block_rho) < 1.0)) throw std::invalid_argument("sim: |rho| < 1");
  if (eval_points.empty()) throw std::invalid_argument("sim: no evaluation points");
  for (double x : eval_points) {
    if (x <= covariate_domain.lo || x >= covariate_domain.hi) {
      throw std::invalid_argument("sim: evaluation point outside the covariate range");
    }
  }
  if (penalty.rule == PenaltyRule::kCv && pilot_reps < 1) {
    throw std::invalid_argument("sim: CV rule needs pilot_reps >= 1");
  }
  if (!(sigma > 0.0)) throw std::invalid_argument("sim: sigma must be positive");
}

namespace {

Eigen::MatrixXd gen_covariates_stream(int n, int q, int block_size,
                                      double rho_target, std::mt19937_64& rng,
                                      const Interval& range) {
  if (block_size < 1) throw std::invalid_argument("gen_covariates: block_size >= 1");
  if (!(std::abs(rho_target) < 1.0)) {
    throw std::invalid_argument("gen_covariates: |rho_target| < 1 required");
  }
  const double rho_z = 2.0 * std::sin(M_PI * rho_target / 6.0);
  if (block_size > 1 && rho_z <= -1.0 / (block_size - 1)) {
    throw std::invalid_argument("gen_covariates: latent block not positive definite");
  }
  Eigen::MatrixXd x(n, q);
  const double shared = std::sqrt(std::max(rho_z, 0.0));
  const double own = std::sqrt(1.0 - std::max(rho_z, 0.0));
  for (int b0 = 0; b0 < q; b0 += block_size) {
    const int width = std::min(block_size, q - b0);
    for (int i = 0; i < n; ++i) {
      const double w = standard_normal(rng);
      for (int j = 0; j < width; ++j) {
        const double z = shared * w + own * standard_normal(rng);
        x(i, b0 + j) = range.lo + range.length() * normal_cdf(z);
      }
    }
  }
  return x;
}

}  // namespace

Eigen::MatrixXd gen_covariates(int n, int q, int block_size, double rho_target,
                               std::uint64_t seed) {
  auto rng = make_rng(seed, kDataPurpose, 0);
  return gen_covariates_stream(n, q, block_size, rho_target, rng,
                               Interval{-2.5, 2.5});
}

Dataset gen_data(const SimConfig& cfg, int rep) {
  auto rng = make_rng(cfg.seed, kDataPurpose, static_cast<std::uint64_t>(rep));
  const int s0 = cfg.effective_s0();
  Dataset ds;
  ds.x = gen_covariates_stream(cfg.n, cfg.q, s0, cfg.block_rho, rng,
                               cfg.covariate_domain);
  ds.eps.resize(cfg.n);
  for (int i = 0; i < cfg.n; ++i) ds.eps[i] = cfg.sigma * standard_normal(rng);
  ds.f1.resize(cfg.n);
  ds.nuisance = Eigen::VectorXd::Zero(cfg.n);
  for (int i = 0; i < cfg.n; ++i) ds.f1[i] = test_function(cfg.fn, ds.x(i, 0));
  for (int j = 1; j < s0; ++j) {
    for (int i = 0; i < cfg.n; ++i) {
      ds.nuisance[i] += test_function(cfg.fn, ds.x(i, j)) / (j + 1.0);
    }
  }
  ds.y = ds.f1 + ds.nuisance + ds.eps;
  return ds;
}

namespace {

TwoStepOptions make_options(const SimConfig& cfg) {
  TwoStepOptions opt;
  opt.family = cfg.family;
  opt.degree = cfg.degree;
  opt.d_pre = cfg.d_pre;
  opt.d_re = cfg.d_re;
  opt.allow_reduction = true;
  return opt;
}

void parallel_for(int count, int threads, const std::function<void(int)>& body) {
  if (threads <= 0) {
    threads = static_cast<int>(std::thread::hardware_concurrency());
    if (threads < 1) threads = 1;
  }
  threads = std::min(threads, count);
  if (threads <= 1) {
    for (int i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (;;) {
        const int i = next.fetch_add(1);
        if (i >= count) break;
        body(i);
      }
    });
  }
  for (auto& th : pool) th.join();
}

struct RepEval {
  bool ok = false;
  std::string error;
  // [estimator][point]
  std::array<std::vector<double>, 3> estimate;
  std::array<std::vector<double>, 3> width;
};

RepEval eval_rep(const SimConfig& cfg, int rep, const PenaltyChoice& penalties,
                 const std::vector<double>& points) {
  RepEval out;
  try {
    const Dataset ds = gen_data(cfg, rep);
    const TwoStepOptions opt = make_options(cfg);
    const std::vector<Interval> domains(cfg.q, cfg.covariate_domain);
    const PreparedDesign design = prepare_design(ds.x, domains, opt);
    const TwoStepEstimator est =
        TwoStepEstimator::fit(design, ds.y, penalties, opt);

    // Oracle: the single-component regression with the other components
    // known, smoothed on the same coarse basis with the true sigma.
    const Eigen::VectorXd oracle_response = ds.f1 + ds.eps;
    const Eigen::VectorXd oracle_coef = est.smoother().coefficients(oracle_response);

    const double z = normal_quantile(0.5 * (1.0 + cfg.level));
    for (auto& e : out.estimate) e.resize(points.size());
    for (auto& w : out.width) w.resize(points.size());
    for (std::size_t p = 0; p < points.size(); ++p) {
      const double x = points[p];
      const Eigen::VectorXd s = est.smoother().weights(x);
      out.estimate[0][p] = est.smoother().evaluate(oracle_coef, x);
      out.width[0][p] = 2.0 * z * cfg.sigma * s.norm();
      out.estimate[1][p] = est.presmooth_estimate(x);
      out.width[1][p] = 2.0 * z * cfg.sigma * est.presmooth_weights(x).norm();
      out.estimate[2][p] = est.resmooth_estimate(x);
      out.width[2][p] = 2.0 * z * cfg.sigma * composite_weights(est.debiased(), s).norm();
    }
    out.ok = true;
  } catch (const std::exception& e) {
    out.error = e.what();
  }
  return out;
}

PenaltyChoice resolve_penalties(const SimConfig& cfg) {
  switch (cfg.penalty.rule) {
    case PenaltyRule::kFixed:
      return PenaltyChoice{cfg.penalty.lambda, cfg.penalty.eta};
    case PenaltyRule::kTheoretical: {
      const double x =
          cfg.penalty.x > 0.0 ? cfg.penalty.x : std::log(static_cast<double>(cfg.q));
      PenaltyChoice choice;
      choice.lambda = theoretical_lambda(cfg.sigma, cfg.d_pre, cfg.n, cfg.q, x);
      choice.eta = theoretical_eta(cfg.penalty.c_eta, cfg.d_pre, cfg.n, cfg.d_pre,
                                   cfg.q, cfg.effective_s0(), cfg.penalty.psi, x);
      return choice;
    }
    case PenaltyRule::kCv:
      break;
  }
  // Pilot mini-run: CV per pilot replication, averages frozen for the main run.
  SimConfig pilot = cfg;
  pilot.seed = mix64(cfg.seed ^ kPilotPurpose);
  std::vector<double> lambdas(cfg.pilot_reps), etas(cfg.pilot_reps);
  std::vector<std::string> errors(cfg.pilot_reps);
  parallel_for(cfg.pilot_reps, cfg.threads, [&](int r) {
    try {
      const Dataset ds = gen_data(pilot, r);
      const TwoStepOptions opt = make_options(cfg);
      const std::vector<Interval> domains(cfg.q, cfg.covariate_domain);
      const PreparedDesign design = prepare_design(ds.x, domains, opt);
      SolveOptions cv_opts;
      cv_opts.tol = 1e-7;
      const PenaltyChoice choice = select_penalties_cv(
          design, ds.y, cfg.cv_folds,
          derive_stream(cfg.seed, kCvPurpose, static_cast<std::uint64_t>(r)),
          cfg.lambda_grid, cfg.lambda_ratio, cfg.eta_grid, cfg.eta_ratio, cv_opts);
      lambdas[r] = choice.lambda;
      etas[r] = choice.eta;
    } catch (const std::exception& e) {
      errors[r] = e.what();
    }
  });
  double lambda_sum = 0.0, eta_sum = 0.0;
  int ok = 0;
  for (int r = 0; r < cfg.pilot_reps; ++r) {
    if (!errors[r].empty()) continue;
    lambda_sum += lambdas[r];
    eta_sum += etas[r];
    ++ok;
  }
  if (ok == 0) {
    throw ConvergenceError("pilot cross-validation failed on every replication: " +
                           errors.front());
  }
  return PenaltyChoice{lambda_sum / ok, eta_sum / ok};
}

}  // namespace

CoverageReport run_experiment(const SimConfig& cfg) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();

  CoverageReport report;
  report.config = cfg;
  report.eval_points = cfg.eval_points;

  const PenaltyChoice penalties = resolve_penalties(cfg);
  report.lambda_used = penalties.lambda;
  report.eta_used = penalties.eta;

  std::vector<RepEval> results(cfg.reps);
  parallel_for(cfg.reps, cfg.threads, [&](int r) {
    results[r] = eval_rep(cfg, r, penalties, cfg.eval_points);
  });

  const std::size_t n_points = cfg.eval_points.size();
  std::vector<double> truth(n_points);
  for (std::size_t p = 0; p < n_points; ++p) {
    truth[p] = test_function(cfg.fn, cfg.eval_points[p]);
  }

  for (auto& cells : report.cells) cells.assign(n_points, CoverageCell{});
  for (const auto& rep : results) {
    if (!rep.ok) {
      ++report.failures;
      continue;
    }
    ++report.completed;
    for (int e = 0; e < 3; ++e) {
      for (std::size_t p = 0; p < n_points; ++p) {
        const double half = 0.5 * rep.width[e][p];
        if (std::abs(rep.estimate[e][p] - truth[p]) <= half) {
          report.cells[e][p].coverage += 1.0;
        }
        report.cells[e][p].avg_width += rep.width[e][p];
      }
    }
  }
  if (report.completed == 0 ||
      report.failures > 0.05 * static_cast<double>(cfg.reps)) {
    throw ConvergenceError("run_experiment: " + std::to_string(report.failures) +
                           " of " + std::to_string(cfg.reps) +
                           " replications failed");
  }
  for (auto& cells : report.cells) {
    for (auto& c : cells) {
      c.coverage /= report.completed;
      c.avg_width /= report.completed;
    }
  }
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

FigureCurves figure_curves(const SimConfig& cfg, const std::vector<double>& grid) {
  SimConfig local = cfg;
  local.eval_points = grid;
  local.validate();

  const PenaltyChoice penalties = resolve_penalties(local);
  std::vector<RepEval> results(local.reps);
  parallel_for(local.reps, local.threads, [&](int r) {
    results[r] = eval_rep(local, r, penalties, grid);
  });

  FigureCurves out;
  out.grid = grid;
  std::vector<double> truth(grid.size());
  for (std::size_t p = 0; p < grid.size(); ++p) truth[p] = test_function(cfg.fn, grid[p]);

  const RepEval* first_ok = nullptr;
  for (const auto& rep : results) {
    if (rep.ok) {
      first_ok = &rep;
      break;
    }
  }
  for (int e = 0; e < 3; ++e) {
    auto& panel = out.panels[e];
    panel.single_estimate.assign(grid.size(), 0.0);
    panel.single_lo.assign(grid.size(), 0.0);
    panel.single_hi.assign(grid.size(), 0.0);
    panel.avg_lo.assign(grid.size(), 0.0);
    panel.avg_hi.assign(grid.size(), 0.0);
    panel.coverage.assign(grid.size(), 0.0);
  }
  for (const auto& rep : results) {
    if (!rep.ok) {
      ++out.failures;
      continue;
    }
    ++out.completed;
    for (int e = 0; e < 3; ++e) {
      for (std::size_t p = 0; p < grid.size(); ++p) {
        const double half = 0.5 * rep.width[e][p];
        out.panels[e].avg_lo[p] += rep.estimate[e][p] - half;
        out.panels[e].avg_hi[p] += rep.estimate[e][p] + half;
        if (std::abs(rep.estimate[e][p] - truth[p]) <= half) {
          out.panels[e].coverage[p] += 1.0;
        }
      }
    }
  }
  if (out.completed == 0 || out.failures > 0.05 * static_cast<double>(local.reps)) {
    throw ConvergenceError("figure_curves: too many failed replications");
  }
  for (int e = 0; e < 3; ++e) {
    for (std::size_t p = 0; p < grid.size(); ++p) {
      out.panels[e].avg_lo[p] /= out.completed;
      out.panels[e].avg_hi[p] /= out.completed;
      out.panels[e].coverage[p] /= out.completed;
      if (first_ok) {
        const double half = 0.5 * first_ok->width[e][p];
        out.panels[e].single_estimate[p] = first_ok->estimate[e][p];
        out.panels[e].single_lo[p] = first_ok->estimate[e][p] - half;
        out.panels[e].single_hi[p] = first_ok->estimate[e][p] + half;
      }
    }
  }
  return out;
}

const char* estimator_name(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::kOracle: return "oracle";
    case EstimatorKind::kPresmooth: return "presmooth";
    case EstimatorKind::kResmooth: return "resmooth";
  }
  return "?";
}

namespace {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

}  // namespace

std::string report_csv(const CoverageReport& report) {
  std::ostringstream os;
  os << "n,q,fn,x,estimator,coverage,avg_width,reps,failures\n";
  static constexpr EstimatorKind kinds[] = {
      EstimatorKind::kOracle, EstimatorKind::kPresmooth, EstimatorKind::kResmooth};
  for (std::size_t p = 0; p < report.eval_points.size(); ++p) {
    for (EstimatorKind kind : kinds) {
      const auto& cell = report.cell(kind, p);
      os << report.config.n << ',' << report.config.q << ','
         << to_string(report.config.fn) << ',' << format_double(report.eval_points[p])
         << ',' << estimator_name(kind) << ',' << format_double(cell.coverage) << ','
         << format_double(cell.avg_width) << ',' << report.completed << ','
         << report.failures << '\n';
    }
  }
  return os.str();
}

std::string curves_csv(const FigureCurves& curves) {
  std::ostringstream os;
  os << "x,estimator,single_estimate,single_lo,single_hi,avg_lo,avg_hi,coverage\n";
  static constexpr EstimatorKind kinds[] = {
      EstimatorKind::kOracle, EstimatorKind::kPresmooth, EstimatorKind::kResmooth};
  for (std::size_t p = 0; p < curves.grid.size(); ++p) {
    for (EstimatorKind kind : kinds) {
      const auto& panel = curves.panels[static_cast<std::size_t>(kind)];
      os << format_double(curves.grid[p]) << ',' << estimator_name(kind) << ','
         << format_double(panel.single_estimate[p]) << ','
         << format_double(panel.single_lo[p]) << ','
         << format_double(panel.single_hi[p]) << ',' << format_double(panel.avg_lo[p])
         << ',' << format_double(panel.avg_hi[p]) << ','
         << format_double(panel.coverage[p]) << '\n';
    }
  }
  return os.str();
}

namespace {

struct PanelBox {
  double x0, y0, w, h;
  double xmin, xmax, ymin, ymax;
  double sx(double x) const { return x0 + (x - xmin) / (xmax - xmin) * w; }
  double sy(double y) const { return y0 + h - (y - ymin) / (ymax - ymin) * h; }
};

void polyline(std::ostringstream& os, const PanelBox& box,
              const std::vector<double>& xs, const std::vector<double>& ys,
              const char* color, const char* dash) {
  os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.2\"";
  if (dash[0]) os << " stroke-dasharray=\"" << dash << "\"";
  os << " points=\"";
  for (std::size_t i = 0; i < xs.size(); ++i) {
    os << box.sx(xs[i]) << ',' << box.sy(ys[i]) << ' ';
  }
  os << "\"/>\n";
}

}  // namespace

std::string figure_svg(const FigureCurves& curves, TestFunction fn) {
  static const char* colors[3] = {"#1b9e77", "#d95f02", "#7570b3"};
  const double width = 760, panel_h = 250, margin = 45;
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
     << "\" height=\"" << 3 * panel_h + 40 << "\">\n";

  const double xmin = curves.grid.front(), xmax = curves.grid.back();
  std::vector<double> truth(curves.grid.size());
  for (std::size_t p = 0; p < curves.grid.size(); ++p) {
    truth[p] = test_function(fn, curves.grid[p]);
  }

  const char* titles[3] = {"single-run pointwise confidence intervals",
                           "average interval bounds over replications",
                           "pointwise coverage"};
  for (int panel = 0; panel < 3; ++panel) {
    double ymin = 1e300, ymax = -1e300;
    if (panel == 2) {
      ymin = 0.0;
      ymax = 1.05;
    } else {
      for (int e = 0; e < 3; ++e) {
        const auto& pn = curves.panels[e];
        const auto& lo = panel == 0 ? pn.single_lo : pn.avg_lo;
        const auto& hi = panel == 0 ? pn.single_hi : pn.avg_hi;
        for (double v : lo) ymin = std::min(ymin, v);
        for (double v : hi) ymax = std::max(ymax, v);
      }
      for (double v : truth) {
        ymin = std::min(ymin, v);
        ymax = std::max(ymax, v);
      }
      const double pad = 0.05 * (ymax - ymin + 1e-12);
      ymin -= pad;
      ymax += pad;
    }
    PanelBox box{margin, 15 + panel * panel_h, width - 2 * margin, panel_h - 55,
                 xmin, xmax, ymin, ymax};
    os << "<rect x=\"" << box.x0 << "\" y=\"" << box.y0 << "\" width=\"" << box.w
       << "\" height=\"" << box.h << "\" fill=\"none\" stroke=\"#999\"/>\n";
    os << "<text x=\"" << box.x0 << "\" y=\"" << box.y0 - 4
       << "\" font-size=\"12\" font-family=\"sans-serif\">" << titles[panel]
       << "</text>\n";
    for (int e = 0; e < 3; ++e) {
      const auto& pn = curves.panels[e];
      if (panel == 0) {
        polyline(os, box, curves.grid, pn.single_lo, colors[e], "4,3");
        polyline(os, box, curves.grid, pn.single_hi, colors[e], "4,3");
        polyline(os, box, curves.grid, pn.single_estimate, colors[e], "");
      } else if (panel == 1) {
        polyline(os, box, curves.grid, pn.avg_lo, colors[e], "4,3");
        polyline(os, box, curves.grid, pn.avg_hi, colors[e], "4,3");
      } else {
        polyline(os, box, curves.grid, pn.coverage, colors[e], "");
      }
    }
    if (panel == 1) polyline(os, box, curves.grid, truth, "#000000", "");
    if (panel == 2) {
      std::vector<double> ref(curves.grid.size(), 0.95);
      polyline(os, box, curves.grid, ref, "#000000", "2,4");
    }
  }
  os << "<text x=\"" << margin << "\" y=\"" << 3 * panel_h + 25
     << "\" font-size=\"12\" font-family=\"sans-serif\">"
     << "oracle (green), presmooth (orange), resmooth (purple)</text>\n";
  os << "</svg>\n";
  return os.str();
}

}  // namespace samtwostep
