// Command-line driver: simulate / fit / theory / replay.
#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "samtwostep/errors.hpp"
#include "samtwostep/inference.hpp"
#include "samtwostep/pipeline.hpp"
#include "samtwostep/simlab.hpp"
#include "samtwostep/version.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace samtwostep;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

std::string timestamp_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

int default_threads(int flag_value) {
  if (flag_value > 0) return flag_value;
  if (const char* env = std::getenv("SAMTWOSTEP_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  return 0;  // library default: hardware concurrency
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << content;
}

void write_manifest(const fs::path& dir, const std::string& command,
                    const json& config, std::uint64_t seed,
                    const std::string& started,
                    const std::vector<std::string>& outputs,
                    const json& extra = json()) {
  json manifest;
  manifest["command"] = command;
  manifest["version"] = kVersion;
  manifest["seed"] = seed;
  manifest["config"] = config;
  manifest["started"] = started;
  manifest["finished"] = timestamp_now();
  manifest["outputs"] = outputs;
  if (!extra.is_null()) manifest["diagnostics"] = extra;
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
  SimConfig cfg;
  std::string fn_name;
  std::string lambda_arg = "cv";
  std::string eta_arg = "cv";
  std::string out_dir;
  bool figure = false;
  int grid_points = 41;
  int threads = 0;
};

void apply_penalty_args(SimConfig& cfg, const std::string& lambda_arg,
                        const std::string& eta_arg) {
  if (lambda_arg == "cv" && eta_arg == "cv") {
    cfg.penalty.rule = PenaltyRule::kCv;
    return;
  }
  if (lambda_arg == "theory" || eta_arg == "theory") {
    cfg.penalty.rule = PenaltyRule::kTheoretical;
    return;
  }
  cfg.penalty.rule = PenaltyRule::kFixed;
  try {
    cfg.penalty.lambda = std::stod(lambda_arg);
    cfg.penalty.eta = std::stod(eta_arg);
  } catch (const std::exception&) {
    throw CLI::ValidationError("--lambda/--eta expect 'cv', 'theory', or a number");
  }
}

json simconfig_to_json(const SimConfig& cfg, const std::string& lambda_arg,
                       const std::string& eta_arg) {
  json j;
  j["n"] = cfg.n;
  j["q"] = cfg.q;
  j["fn"] = to_string(cfg.fn);
  j["s0"] = cfg.effective_s0();
  j["rho"] = cfg.block_rho;
  j["d_pre"] = cfg.d_pre;
  j["d_re"] = cfg.d_re;
  j["reps"] = cfg.reps;
  j["level"] = cfg.level;
  j["eval_points"] = cfg.eval_points;
  j["seed"] = cfg.seed;
  j["sigma"] = cfg.sigma;
  j["lambda"] = lambda_arg;
  j["eta"] = eta_arg;
  j["pilot_reps"] = cfg.pilot_reps;
  j["cv_folds"] = cfg.cv_folds;
  j["grid_lambda"] = cfg.lambda_grid;
  j["grid_eta"] = cfg.eta_grid;
  return j;
}

int run_simulate(const SimulateArgs& args_in) {
  SimulateArgs args = args_in;
  args.cfg.fn = test_function_from_name(args.fn_name);
  apply_penalty_args(args.cfg, args.lambda_arg, args.eta_arg);
  args.cfg.threads = default_threads(args.threads);
  args.cfg.validate();

  const std::string started = timestamp_now();
  const fs::path dir(args.out_dir);
  fs::create_directories(dir);

  CoverageReport report = run_experiment(args.cfg);
  write_file(dir / "report.csv", report_csv(report));
  std::vector<std::string> outputs{"report.csv"};

  if (args.figure) {
    std::vector<double> grid(args.grid_points);
    const double lo = args.cfg.covariate_domain.lo + 0.25;
    const double hi = args.cfg.covariate_domain.hi - 0.25;
    for (int i = 0; i < args.grid_points; ++i) {
      grid[i] = lo + (hi - lo) * i / (args.grid_points - 1);
    }
    FigureCurves curves = figure_curves(args.cfg, grid);
    write_file(dir / "curves.csv", curves_csv(curves));
    write_file(dir / "figure.svg", figure_svg(curves, args.cfg.fn));
    outputs.push_back("curves.csv");
    outputs.push_back("figure.svg");
  }

  json extra;
  extra["lambda_used"] = report.lambda_used;
  extra["eta_used"] = report.eta_used;
  extra["completed"] = report.completed;
  extra["failures"] = report.failures;
  extra["wall_seconds"] = report.wall_seconds;
  json config = simconfig_to_json(args.cfg, args.lambda_arg, args.eta_arg);
  config["figure"] = args.figure;
  config["grid_points"] = args.grid_points;
  config["out"] = args.out_dir;
  write_manifest(dir, "simulate", config, args.cfg.seed, started, outputs, extra);

  std::cout << "wrote " << (dir / "report.csv").string() << " ("
            << report.completed << " replications, " << report.failures
            << " failures)\n";
  return kExitOk;
}

// -------------------------------------------------------------------- fit

struct FitArgs {
  std::string data_path;
  int d_pre = 40;
  int d_re = 20;
  std::string method = "spline";
  std::string lambda_arg = "cv";
  std::string eta_arg = "cv";
  double sigma = -1.0;
  bool sigma_from_residuals = false;
  double bandwidth = 0.0;
  int local_degree = 1;
  int grid_points = 101;
  double level = 0.95;
  int folds = 10;
  std::uint64_t seed = 1;
  bool diagnostics = false;
  std::string out_dir;
  int threads = 0;
};

struct CsvData {
  Eigen::VectorXd y;
  Eigen::MatrixXd x;
};

CsvData read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open data file " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("empty data file");
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  if (header.empty() || header[0] != "y") {
    throw std::invalid_argument("data file must start with header y,x1,...,xq");
  }
  const int q = static_cast<int>(header.size()) - 1;
  if (q < 1) throw std::invalid_argument("data file needs at least one covariate");
  for (int j = 0; j < q; ++j) {
    if (header[j + 1] != "x" + std::to_string(j + 1)) {
      throw std::invalid_argument("unexpected column name '" + header[j + 1] +
                                  "' (expected x" + std::to_string(j + 1) + ")");
    }
  }
  std::vector<std::vector<double>> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> row;
    while (std::getline(ss, cell, ',')) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(cell, &used);
      } catch (const std::exception&) {
        throw std::invalid_argument("non-numeric value '" + cell + "' at line " +
                                    std::to_string(line_no));
      }
      if (used != cell.size()) {
        throw std::invalid_argument("malformed value '" + cell + "' at line " +
                                    std::to_string(line_no));
      }
      row.push_back(v);
    }
    if (static_cast<int>(row.size()) != q + 1) {
      throw std::invalid_argument("line " + std::to_string(line_no) + " has " +
                                  std::to_string(row.size()) + " fields, expected " +
                                  std::to_string(q + 1));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::invalid_argument("data file has no rows");
  CsvData data;
  data.y.resize(static_cast<Eigen::Index>(rows.size()));
  data.x.resize(static_cast<Eigen::Index>(rows.size()), q);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    data.y[static_cast<Eigen::Index>(i)] = rows[i][0];
    for (int j = 0; j < q; ++j) data.x(static_cast<Eigen::Index>(i), j) = rows[i][j + 1];
  }
  return data;
}

int run_fit(const FitArgs& args) {
  const std::string started = timestamp_now();
  const CsvData data = read_csv(args.data_path);
  const Eigen::Index q = data.x.cols();

  TwoStepOptions opt;
  opt.family = args.method == "polynomial" ? BasisFamily::kPiecewiseLegendre
                                           : BasisFamily::kBSpline;
  opt.degree = 3;
  opt.d_pre = args.d_pre;
  opt.d_re = args.d_re;
  // User data gets strict rank handling: too little data for the requested
  // dimensions is an error, not a silent reduction.
  opt.allow_reduction = false;

  std::vector<Interval> domains;
  domains.reserve(static_cast<std::size_t>(q));
  for (Eigen::Index j = 0; j < q; ++j) {
    domains.push_back(Interval{data.x.col(j).minCoeff(), data.x.col(j).maxCoeff()});
  }

  const PreparedDesign design = prepare_design(data.x, domains, opt);

  PenaltyChoice penalties{0.0, 0.0};
  if (args.lambda_arg == "cv" || args.eta_arg == "cv") {
    penalties = select_penalties_cv(design, data.y, args.folds, args.seed, 25, 3e-3,
                                    20, 3e-3);
  }
  if (args.lambda_arg != "cv") penalties.lambda = std::stod(args.lambda_arg);
  if (args.eta_arg != "cv") penalties.eta = std::stod(args.eta_arg);

  const TwoStepEstimator est = TwoStepEstimator::fit(design, data.y, penalties, opt);

  double sigma = args.sigma;
  if (args.sigma_from_residuals) {
    const Eigen::VectorXd resid = data.y - est.full_lasso().fitted(design.full);
    int active_dims = 0;
    for (int g : est.full_lasso().active_set) {
      active_dims += static_cast<int>(design.full.groups[g].cols());
    }
    sigma = residual_sigma_estimate(resid, active_dims);
  }

  const double lo = domains[0].lo, hi = domains[0].hi;
  std::ostringstream csv;
  csv << "x,estimate,lo,hi\n";
  const bool local_poly = args.method == "localpoly";
  const double h = args.bandwidth > 0.0 ? args.bandwidth : 0.3 * (hi - lo);
  for (int i = 0; i < args.grid_points; ++i) {
    const double x = lo + (hi - lo) * i / (args.grid_points - 1);
    double estimate = 0.0;
    Eigen::VectorXd weights;
    if (local_poly) {
      const LocalPolyFit lp = local_polynomial(est.pseudo(), design.x1, x, h,
                                               args.local_degree);
      estimate = lp.estimate();
      weights = composite_weights(est.debiased(), lp.weights0);
    } else {
      estimate = est.resmooth_estimate(x);
      weights = est.resmooth_weights(x);
    }
    const PointwiseCI ci = pointwise_ci(weights, estimate, sigma, args.level);
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%.10g,%.10g,%.10g,%.10g\n", x, ci.center,
                  ci.lo(), ci.hi());
    csv << buf;
  }

  const fs::path dir(args.out_dir);
  fs::create_directories(dir);
  write_file(dir / "curve.csv", csv.str());

  json extra;
  if (args.diagnostics) {
    extra["rho_hat"] = est.debiased().rho_hat;
    extra["condition"] = est.debiased().condition;
    extra["lambda"] = penalties.lambda;
    extra["eta"] = penalties.eta;
    extra["sigma"] = sigma;
    extra["active_groups"] = est.full_lasso().active_set;
    extra["kkt_max_gap"] = est.full_lasso().kkt_gaps.maxCoeff();
    extra["lasso_converged"] = est.full_lasso().converged;
    extra["reduced_columns"] = design.reduced_columns;
  }

  json config;
  config["data"] = args.data_path;
  config["d_pre"] = args.d_pre;
  config["d_re"] = args.d_re;
  config["method"] = args.method;
  config["lambda"] = args.lambda_arg;
  config["eta"] = args.eta_arg;
  config["sigma"] = args.sigma;
  config["sigma_from_residuals"] = args.sigma_from_residuals;
  config["bandwidth"] = args.bandwidth;
  config["local_degree"] = args.local_degree;
  config["grid_points"] = args.grid_points;
  config["level"] = args.level;
  config["folds"] = args.folds;
  config["seed"] = args.seed;
  config["diagnostics"] = args.diagnostics;
  config["out"] = args.out_dir;
  write_manifest(dir, "fit", config, args.seed, started, {"curve.csv"}, extra);

  std::cout << "wrote " << (dir / "curve.csv").string() << "\n";
  return kExitOk;
}

// ------------------------------------------------------------------ theory

struct TheoryArgs {
  bool lambda_calc = false, eta_calc = false, deltas = false, rate_check = false,
       kappa = false;
  double sigma = 1.0, x = 2.0, y = 1.0, psi = 1.0, phi = 1.0, rho0 = 0.0;
  double c = 1.0;
  int d = 10, n = 1000, q = 50, d1 = 10, d2 = 10, s0 = 1, s1 = 1;
  double lambda = 0.1, eta = 0.1;
  double r1 = 2.0, r2 = 2.0, gamma0 = 0.0, gamma1 = 0.0, beta = 0.4;
  double rho1 = 1.0, cs = 1.0, invdens = 1.0;
  std::string out_dir;
};

int run_theory(const TheoryArgs& args) {
  const std::string started = timestamp_now();
  std::ostringstream out;
  if (!(args.lambda_calc || args.eta_calc || args.deltas || args.rate_check ||
        args.kappa)) {
    throw CLI::ValidationError(
        "theory: choose at least one of --lambda-calc, --eta-calc, --deltas, "
        "--rate-check, --kappa");
  }
  if (args.lambda_calc) {
    out << "lambda=" << theoretical_lambda(args.sigma, args.d, args.n, args.q, args.x)
        << "\n";
  }
  if (args.eta_calc) {
    out << "eta="
        << theoretical_eta(args.c, args.d, args.n, args.d1, args.q, args.s1,
                           args.psi, args.x)
        << "\n";
  }
  if (args.deltas) {
    TheoryParams p;
    p.r1 = args.r1;
    p.r2 = args.r2;
    p.s0 = args.s0;
    p.s1 = args.s1;
    p.psi = args.psi;
    p.phi = args.phi;
    p.rho0 = args.rho0;
    p.x = args.x;
    p.y = args.y;
    p.sigma = args.sigma;
    const DeltaTerms d =
        theoretical_deltas(p, args.d1, args.d2, args.n, args.lambda, args.eta);
    out << "delta1=" << d.delta1 << "\n";
    out << "delta2=" << d.delta2 << "\n";
    out << "delta3=" << d.delta3 << "\n";
  }
  if (args.rate_check) {
    const RateConditions rc =
        check_rate_conditions(args.gamma0, args.gamma1, args.r1, args.r2, args.beta);
    out << "rate1=" << (rc.first ? "true" : "false") << "\n";
    out << "rate2=" << (rc.second ? "true" : "false") << "\n";
    out << "rate3=" << (rc.third ? "true" : "false") << "\n";
  }
  if (args.kappa) {
    out << "kappa=" << kappa_minimax(args.rho1, args.cs, args.sigma, args.invdens)
        << "\n";
  }
  std::cout << out.str();

  if (!args.out_dir.empty()) {
    const fs::path dir(args.out_dir);
    fs::create_directories(dir);
    write_file(dir / "theory.txt", out.str());
    json config;
    config["lambda_calc"] = args.lambda_calc;
    config["eta_calc"] = args.eta_calc;
    config["deltas"] = args.deltas;
    config["rate_check"] = args.rate_check;
    config["kappa"] = args.kappa;
    config["sigma"] = args.sigma;
    config["x"] = args.x;
    config["y"] = args.y;
    config["psi"] = args.psi;
    config["phi"] = args.phi;
    config["rho0"] = args.rho0;
    config["C"] = args.c;
    config["d"] = args.d;
    config["n"] = args.n;
    config["q"] = args.q;
    config["d1"] = args.d1;
    config["d2"] = args.d2;
    config["s0"] = args.s0;
    config["s1"] = args.s1;
    config["lambda"] = args.lambda;
    config["eta"] = args.eta;
    config["r1"] = args.r1;
    config["r2"] = args.r2;
    config["gamma0"] = args.gamma0;
    config["gamma1"] = args.gamma1;
    config["beta"] = args.beta;
    config["rho1"] = args.rho1;
    config["cs"] = args.cs;
    config["invdens"] = args.invdens;
    config["out"] = args.out_dir;
    write_manifest(dir, "theory", config, 0, started, {"theory.txt"});
  }
  return kExitOk;
}

// ------------------------------------------------------------------ replay

int run_replay(const std::string& manifest_path, const std::string& out_override);

int dispatch_simulate_json(const json& config, const std::string& out_dir) {
  SimulateArgs args;
  args.cfg.n = config.at("n").get<int>();
  args.cfg.q = config.at("q").get<int>();
  args.fn_name = config.at("fn").get<std::string>();
  args.cfg.s0 = config.value("s0", 0);
  args.cfg.block_rho = config.value("rho", 0.9);
  args.cfg.d_pre = config.at("d_pre").get<int>();
  args.cfg.d_re = config.at("d_re").get<int>();
  args.cfg.reps = config.at("reps").get<int>();
  args.cfg.level = config.value("level", 0.95);
  args.cfg.eval_points = config.at("eval_points").get<std::vector<double>>();
  args.cfg.seed = config.at("seed").get<std::uint64_t>();
  args.cfg.sigma = config.value("sigma", 1.0);
  args.cfg.pilot_reps = config.value("pilot_reps", 10);
  args.cfg.cv_folds = config.value("cv_folds", 10);
  args.lambda_arg = config.value("lambda", "cv");
  args.eta_arg = config.value("eta", "cv");
  args.figure = config.value("figure", false);
  args.grid_points = config.value("grid_points", 41);
  args.out_dir = out_dir.empty() ? config.at("out").get<std::string>() : out_dir;
  return run_simulate(args);
}

int dispatch_fit_json(const json& config, const std::string& out_dir) {
  FitArgs args;
  args.data_path = config.at("data").get<std::string>();
  args.d_pre = config.at("d_pre").get<int>();
  args.d_re = config.at("d_re").get<int>();
  args.method = config.value("method", "spline");
  args.lambda_arg = config.value("lambda", "cv");
  args.eta_arg = config.value("eta", "cv");
  args.sigma = config.value("sigma", -1.0);
  args.sigma_from_residuals = config.value("sigma_from_residuals", false);
  args.bandwidth = config.value("bandwidth", 0.0);
  args.local_degree = config.value("local_degree", 1);
  args.grid_points = config.value("grid_points", 101);
  args.level = config.value("level", 0.95);
  args.folds = config.value("folds", 10);
  args.seed = config.value("seed", std::uint64_t{1});
  args.diagnostics = config.value("diagnostics", false);
  args.out_dir = out_dir.empty() ? config.at("out").get<std::string>() : out_dir;
  return run_fit(args);
}

int run_replay(const std::string& manifest_path, const std::string& out_override) {
  std::ifstream in(manifest_path);
  if (!in) throw std::invalid_argument("cannot open manifest " + manifest_path);
  json manifest = json::parse(in);
  const std::string command = manifest.at("command").get<std::string>();
  const json& config = manifest.at("config");
  if (command == "simulate") return dispatch_simulate_json(config, out_override);
  if (command == "fit") return dispatch_fit_json(config, out_override);
  throw std::invalid_argument("replay: unsupported command '" + command + "'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-step (presmooth + resmooth) estimation for sparse additive models"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "run a replicated coverage experiment");
  simulate->set_config("--config");
  simulate->add_option("--n", sim.cfg.n, "sample size");
  simulate->add_option("--q", sim.cfg.q, "number of covariates");
  simulate->add_option("--fn", sim.fn_name, "component function (sine|line|expo|quad)")
      ->required();
  simulate->add_option("--s0", sim.cfg.s0, "active components (0 -> ceil(q/20))");
  simulate->add_option("--rho", sim.cfg.block_rho, "within-block correlation");
  simulate->add_option("--d-pre", sim.cfg.d_pre, "presmoother dimension");
  simulate->add_option("--d-re", sim.cfg.d_re, "resmoother/oracle dimension");
  simulate->add_option("--reps", sim.cfg.reps, "replications");
  simulate->add_option("--level", sim.cfg.level, "confidence level");
  simulate->add_option("--eval-points", sim.cfg.eval_points, "evaluation points");
  simulate->add_option("--seed", sim.cfg.seed, "random seed");
  simulate->add_option("--sigma", sim.cfg.sigma, "true noise scale");
  simulate->add_option("--lambda", sim.lambda_arg, "cv, theory, or a number");
  simulate->add_option("--eta", sim.eta_arg, "cv, theory, or a number");
  simulate->add_option("--pilot-reps", sim.cfg.pilot_reps, "pilot replications for CV");
  simulate->add_option("--folds", sim.cfg.cv_folds, "CV folds");
  simulate->add_option("--threads", sim.threads, "worker threads");
  simulate->add_flag("--figure", sim.figure, "also write curve CSVs and an SVG");
  simulate->add_option("--grid-points", sim.grid_points, "figure grid size");
  simulate->add_option("--out", sim.out_dir, "output directory")->required();

  FitArgs fit;
  auto* fitcmd = app.add_subcommand("fit", "fit the two-step estimator to a CSV dataset");
  fitcmd->set_config("--config");
  fitcmd->add_option("--data", fit.data_path, "CSV with header y,x1,...,xq")->required();
  fitcmd->add_option("--d-pre", fit.d_pre, "presmoother dimension");
  fitcmd->add_option("--d-re", fit.d_re, "resmoother dimension");
  fitcmd->add_option("--method", fit.method, "spline|polynomial|localpoly");
  fitcmd->add_option("--lambda", fit.lambda_arg, "cv or a number");
  fitcmd->add_option("--eta", fit.eta_arg, "cv or a number");
  fitcmd->add_option("--sigma", fit.sigma, "error scale for the intervals");
  fitcmd->add_flag("--sigma-from-residuals", fit.sigma_from_residuals,
                   "estimate sigma from Lasso residuals");
  fitcmd->add_option("--bandwidth", fit.bandwidth, "local polynomial bandwidth");
  fitcmd->add_option("--local-degree", fit.local_degree, "local polynomial degree");
  fitcmd->add_option("--grid-points", fit.grid_points, "output grid size");
  fitcmd->add_option("--level", fit.level, "confidence level");
  fitcmd->add_option("--folds", fit.folds, "CV folds");
  fitcmd->add_option("--seed", fit.seed, "random seed for CV folds");
  fitcmd->add_flag("--diagnostics", fit.diagnostics,
                   "record rho_hat, condition number, active sets, KKT gaps");
  fitcmd->add_option("--out", fit.out_dir, "output directory")->required();
  fitcmd->add_option("--threads", fit.threads, "worker threads");

  TheoryArgs theory;
  auto* theorycmd = app.add_subcommand("theory", "theoretical-quantity calculators");
  theorycmd->add_flag("--lambda-calc", theory.lambda_calc, "theoretical lambda");
  theorycmd->add_flag("--eta-calc", theory.eta_calc, "theoretical eta");
  theorycmd->add_flag("--deltas", theory.deltas, "error terms Delta_1..Delta_3");
  theorycmd->add_flag("--rate-check", theory.rate_check, "rate-condition inequalities");
  theorycmd->add_flag("--kappa", theory.kappa, "minimax constant");
  theorycmd->add_option("--sigma", theory.sigma, "noise scale");
  theorycmd->add_option("--x", theory.x, "deviation parameter x");
  theorycmd->add_option("--y", theory.y, "deviation parameter y");
  theorycmd->add_option("--psi", theory.psi, "diagonal compatibility constant");
  theorycmd->add_option("--phi", theory.phi, "compatibility constant");
  theorycmd->add_option("--rho0", theory.rho0, "population angle");
  theorycmd->add_option("--C", theory.c, "constant in the eta formula");
  theorycmd->add_option("--d", theory.d, "maximal block dimension");
  theorycmd->add_option("--n", theory.n, "sample size");
  theorycmd->add_option("--q", theory.q, "covariate count");
  theorycmd->add_option("--d1", theory.d1, "first-block dimension");
  theorycmd->add_option("--d2", theory.d2, "nuisance block dimension");
  theorycmd->add_option("--s0", theory.s0, "sparsity of f");
  theorycmd->add_option("--s1", theory.s1, "sparsity of the projections");
  theorycmd->add_option("--lambda", theory.lambda, "lambda for the Delta terms");
  theorycmd->add_option("--eta", theory.eta, "eta for the Delta terms");
  theorycmd->add_option("--r1", theory.r1, "approximation exponent r1");
  theorycmd->add_option("--r2", theory.r2, "approximation exponent r2");
  theorycmd->add_option("--gamma0", theory.gamma0, "sparsity growth exponent");
  theorycmd->add_option("--gamma1", theory.gamma1, "sparsity growth exponent");
  theorycmd->add_option("--beta", theory.beta, "target rate exponent");
  theorycmd->add_option("--rho1", theory.rho1, "smoothness order");
  theorycmd->add_option("--cs", theory.cs, "Sobolev radius");
  theorycmd->add_option("--invdens", theory.invdens, "integral of 1/p1");
  theorycmd->add_option("--out", theory.out_dir, "optional output directory");

  std::string replay_manifest, replay_out;
  auto* replaycmd = app.add_subcommand("replay", "re-run a recorded manifest");
  replaycmd->add_option("--manifest", replay_manifest, "manifest.json path")->required();
  replaycmd->add_option("--out", replay_out, "override output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (simulate->parsed()) return run_simulate(sim);
    if (fitcmd->parsed()) {
      if (fit.sigma <= 0.0 && !fit.sigma_from_residuals) {
        std::cerr << "fit: --sigma (or --sigma-from-residuals) is required\n";
        return kExitUsage;
      }
      return run_fit(fit);
    }
    if (theorycmd->parsed()) return run_theory(theory);
    if (replaycmd->parsed()) return run_replay(replay_manifest, replay_out);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
