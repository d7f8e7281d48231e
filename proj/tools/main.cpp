#include <CLI11.hpp>

#include <spreco/csv.hpp>
#include <spreco/experiment.hpp>

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

namespace {

int cmd_run(const std::string& config_path, const std::string& out_override, int runs_override,
            long long seed_override, const std::string& delta_override, int threads_override) {
  spreco::ExperimentConfig cfg = spreco::ExperimentConfig::load(config_path);
  if (!out_override.empty()) cfg.output_dir = out_override;
  if (runs_override > 0) cfg.runs = runs_override;
  if (seed_override >= 0) cfg.seed = static_cast<std::uint64_t>(seed_override);
  if (threads_override > 0) cfg.threads = threads_override;
  if (!delta_override.empty()) {
    std::vector<double> deltas;
    std::stringstream ss(delta_override);
    std::string item;
    while (std::getline(ss, item, ',')) deltas.push_back(std::stod(item));
    cfg.deltas = deltas;
  }
  cfg.validate();

  const spreco::SweepResult res = spreco::run_sweep(cfg);
  std::printf("example=%s T=%g runs=%d per delta\n", cfg.example.c_str(), cfg.T, cfg.runs);
  for (const auto& cell : res.cells)
    std::printf("  delta=%-8g mean RMSE=%.6f  mean rmse=%.6f  (se %.2g, n=%d)\n", cell.delta,
                cell.mean_rmse, cell.mean_rmse_rel, cell.se_rmse, cell.successes);
  if (res.failures > 0) std::printf("  failed runs: %d (details in runs.csv)\n", res.failures);
  std::printf("outputs in %s\n", cfg.output_dir.c_str());
  return 0;
}

int cmd_stability(int n_cells, double T, double eps, const std::string& delta_list, int runs,
                  long long seed, double b3, const std::string& out_dir) {
  spreco::StabilityProblem prob;
  const spreco::ExampleProblem ex = spreco::make_example("parabola_1d");
  prob.u0 = ex.u0;
  prob.coeffs = ex.coeffs;
  if (b3 == 0.0)
    prob.coeffs.b3 = {};
  else
    prob.coeffs.b3 = [b3](const spreco::Point&) { return b3; };
  prob.coeffs.T = T;
  prob.n_cells = n_cells;
  prob.eps_time = eps;
  prob.runs_per_delta = runs;
  prob.seed = static_cast<std::uint64_t>(seed);
  if (!delta_list.empty()) {
    prob.deltas.clear();
    std::stringstream ss(delta_list);
    std::string item;
    while (std::getline(ss, item, ',')) prob.deltas.push_back(std::stod(item));
  }

  const spreco::StabilityCurve curve = spreco::stability_experiment(prob);

  std::filesystem::create_directories(out_dir);
  spreco::CsvWriter csv((std::filesystem::path(out_dir) / "stability.csv").string(),
                        {"delta", "mean_error", "ci_halfwidth"});
  for (const auto& p : curve.points)
    csv.row(std::vector<double>{p.delta, p.mean_error, p.ci_halfwidth});

  std::printf("c = %.4f, spearman rho = %.4f (lower95 %.4f)\n", curve.c_exponent,
              curve.spearman_rho, curve.spearman_lower95);
  std::printf("log-error fit: slope=%.4f intercept=%.4f R^2=%.4f\n", curve.log_error_fit.slope,
              curve.log_error_fit.intercept, curve.log_error_fit.r_squared);
  for (const auto& p : curve.points)
    std::printf("  delta=%-8g mean err=%.6g +- %.2g\n", p.delta, p.mean_error, p.ci_halfwidth);
  return 0;
}

int cmd_carleman(int n_cells, double T, int steps, double lambda, double eps, int calib_paths,
                 int holdout, int paths_per_solution, long long seed, double b3,
                 const std::string& out_dir) {
  using namespace spreco;
  const FemSpace space(build_interval_mesh(n_cells));
  const TimeGrid grid = TimeGrid::uniform(T, steps > 0 ? steps : static_cast<int>(std::ceil(
                                                             T * n_cells * n_cells)));
  Coefficients coeffs = Coefficients::heat(T);
  if (b3 != 0.0) coeffs.b3 = [b3](const Point&) { return b3; };
  const SpdeOperators ops(space, coeffs, grid);

  auto solutions = [&](const Vector& y0, std::uint64_t s) {
    std::vector<Trajectory> out;
    for (int p = 0; p < paths_per_solution; ++p)
      out.push_back(forward_solve(ops, y0, BrownianPath::sample(grid, Rng::mix({s, static_cast<std::uint64_t>(p)}))));
    return out;
  };

  const Vector calib = space.restrict_interior(
      l2_project(space, [](const Point& p) { return 4 * p.x * (1 - p.x); }));
  std::vector<Trajectory> calib_set;
  for (int p = 0; p < calib_paths; ++p)
    calib_set.push_back(forward_solve(
        ops, calib, BrownianPath::sample(grid, Rng::mix({static_cast<std::uint64_t>(seed), 1,
                                                         static_cast<std::uint64_t>(p)}))));
  const CarlemanTerms base = carleman_lhs_rhs(space, grid, calib_set, lambda, eps);
  const double c_fit = 2.0 * base.lhs / base.rhs_total();

  std::filesystem::create_directories(out_dir);
  CsvWriter csv((std::filesystem::path(out_dir) / "carleman.csv").string(),
                {"lambda", "solution", "lhs", "rhs", "c_fit", "holds"});
  csv.row(std::vector<std::string>{format_double(lambda), "calibration", format_double(base.lhs),
                                   format_double(base.rhs_total()), format_double(c_fit), "1"});

  Rng rng(static_cast<std::uint64_t>(seed) + 17);
  int pass1 = 0, pass2 = 0;
  for (int i = 0; i < holdout; ++i) {
    Vector y0(ops.interior_count());
    for (Index j = 0; j < y0.size(); ++j) y0[j] = rng.normal();
    y0.normalize();
    const auto paths = solutions(y0, Rng::mix({static_cast<std::uint64_t>(seed), 2,
                                               static_cast<std::uint64_t>(i)}));
    for (double lam : {lambda, 2 * lambda}) {
      const CarlemanTerms t = carleman_lhs_rhs(space, grid, paths, lam, eps);
      const bool holds = t.lhs <= c_fit * t.rhs_total();
      if (lam == lambda && holds) ++pass1;
      if (lam != lambda && holds) ++pass2;
      csv.row(std::vector<std::string>{format_double(lam), std::to_string(i),
                                       format_double(t.lhs), format_double(t.rhs_total()),
                                       format_double(c_fit), holds ? "1" : "0"});
    }
  }
  std::printf("fitted C = %.4f on the calibration solution (lambda=%g)\n", c_fit, lambda);
  std::printf("holdout pass rate: %d/%d at lambda, %d/%d at 2*lambda\n", pass1, holdout, pass2,
              holdout);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stochastic parabolic terminal-value reconstruction toolkit"};
  app.require_subcommand(1);

  // run
  auto* run = app.add_subcommand("run", "run a reconstruction sweep from a config file");
  std::string config_path, out_override, delta_override;
  int runs_override = 0, threads_override = 0;
  long long seed_override = -1;
  run->add_option("-c,--config", config_path, "config file (key = value)")->required();
  run->add_option("-o,--out", out_override, "output directory override");
  run->add_option("--runs", runs_override, "override runs per delta");
  run->add_option("--seed", seed_override, "override master seed");
  run->add_option("--deltas", delta_override, "override delta list, comma separated");
  run->add_option("--threads", threads_override, "override worker thread count");

  // init-config
  auto* init = app.add_subcommand("init-config", "write a template config file");
  std::string init_path = "experiment.cfg";
  std::string init_example = "parabola_1d";
  init->add_option("-o,--out", init_path, "where to write the template");
  init->add_option("--example", init_example, "example id for the template");

  // stability
  auto* stab = app.add_subcommand("stability", "noise-level stability scan (1D parabola setup)");
  int st_cells = 20, st_runs = 100;
  double st_T = 0.5, st_eps = 0.1, st_b3 = 0.1;
  long long st_seed = 1;
  std::string st_deltas, st_out = "out";
  stab->add_option("--n-cells", st_cells);
  stab->add_option("--T", st_T);
  stab->add_option("--eps", st_eps);
  stab->add_option("--deltas", st_deltas, "comma separated noise levels");
  stab->add_option("--runs", st_runs, "runs per noise level");
  stab->add_option("--seed", st_seed);
  stab->add_option("--b3", st_b3);
  stab->add_option("-o,--out", st_out);

  // carleman
  auto* car = app.add_subcommand("carleman", "weighted-inequality diagnostic");
  int ca_cells = 20, ca_steps = 0, ca_calib = 100, ca_holdout = 100, ca_paths = 100;
  double ca_T = 1.0, ca_lambda = 2.5, ca_eps = 0.05, ca_b3 = 0.1;
  long long ca_seed = 1;
  std::string ca_out = "out";
  car->add_option("--n-cells", ca_cells);
  car->add_option("--T", ca_T);
  car->add_option("--steps", ca_steps, "time steps (default ceil(T/h^2))");
  car->add_option("--lambda", ca_lambda);
  car->add_option("--eps", ca_eps);
  car->add_option("--calib-paths", ca_calib);
  car->add_option("--holdout", ca_holdout);
  car->add_option("--paths-per-solution", ca_paths);
  car->add_option("--seed", ca_seed);
  car->add_option("--b3", ca_b3);
  car->add_option("-o,--out", ca_out);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run)
      return cmd_run(config_path, out_override, runs_override, seed_override, delta_override,
                     threads_override);
    if (*init) {
      spreco::ExperimentConfig cfg;
      cfg.example = init_example;
      cfg.save(init_path);
      std::printf("wrote %s\n", init_path.c_str());
      return 0;
    }
    if (*stab)
      return cmd_stability(st_cells, st_T, st_eps, st_deltas, st_runs, st_seed, st_b3, st_out);
    if (*car)
      return cmd_carleman(ca_cells, ca_T, ca_steps, ca_lambda, ca_eps, ca_calib, ca_holdout,
                          ca_paths, ca_seed, ca_b3, ca_out);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
