#pragma once

#include "spreco/diagnostics.hpp"

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace spreco {

/// A named benchmark problem: exact initial field plus equation coefficients.
struct ExampleProblem {
  std::string id;
  ScalarField u0;
  Coefficients coeffs;
  bool two_dim = false;
  Rect bounds;  // used by 2D examples
};

/// parabola_1d: u0 = 4x(1-x) on [0,1];  hat_1d: the piecewise-linear hat;
/// sine_2d: sin(pi x1) sin(pi x2) on [-1,1]^2. All use b1 = b2 = 0, b3 = 0.1.
/// "custom" resolves to a problem registered via register_custom_example.
ExampleProblem make_example(const std::string& id);
void register_custom_example(std::function<ExampleProblem()> factory);

/// u_T + delta ||u_T||_inf * Uniform[-1, 1] per dof, reproducible from seed.
Vector add_noise(const Vector& u_T, double delta, std::uint64_t seed);

/// Declarative experiment description; round-trips through a key = value
/// text file (see README for the schema).
struct ExperimentConfig {
  std::string example = "parabola_1d";
  int n_cells = 20;
  int nx = 20;
  int ny = 20;
  double T = 1.0;
  double time_step = 0.0;  // 0: h^2 rule
  std::vector<double> deltas = {0.0, 0.004, 0.02, 0.05, 0.1};
  int runs = 100;
  std::uint64_t seed = 1;
  std::string alpha_rule = "delta_squared";  // delta_squared | fixed
  double alpha = 0.0;
  std::string stopping = "auto";  // auto | discrepancy | gradient_norm | max_iters_only
  double tau_d = 1.01;
  double gradient_tol = 1e-8;
  int max_iters = 200;
  std::string path_policy = "fresh_path";  // fresh_path | data_path | expectation | monte_carlo
  int mc_paths = 32;
  double b3_override = std::numeric_limits<double>::quiet_NaN();  // NaN: keep the example's b3
  std::string output_dir = "out";
  int threads = 0;  // 0: hardware concurrency
  bool write_iterlogs = false;

  static ExperimentConfig load(const std::string& path);
  static ExperimentConfig parse(const std::string& text);
  std::string serialize() const;
  void save(const std::string& path) const;
  void validate() const;
};

struct RunRecord {
  std::uint64_t seed = 0;
  int delta_index = 0;
  double delta = 0;
  int run_index = 0;
  int iterations = 0;
  bool converged = false;
  double rmse_abs = 0;
  double rmse_relative = 0;
  double wall_seconds = 0;  // in-memory only; CSV outputs stay reproducible
  bool failed = false;
  std::string error;
  std::string iterlog;  // file name when iteration logs are written
};

struct SweepCell {
  double T = 0;
  double delta = 0;
  double mean_rmse = 0;
  double mean_rmse_rel = 0;
  double se_rmse = 0;
  int successes = 0;
};

struct SweepResult {
  std::vector<RunRecord> records;
  std::vector<SweepCell> cells;
  int failures = 0;
  std::vector<Point> vertices;
  Vector exact_u0;                   // exact initial field at vertices
  std::vector<Vector> mean_profile;  // per delta; reconstruction mean at vertices
};

/// Full Monte-Carlo reconstruction sweep: per (delta, run) generates data on
/// a sampled path, perturbs it, reconstructs from initial guess zero, and
/// records vertex RMSE / rmse. Writes table1.csv, runs.csv, profile.csv and
/// optional iterlog_<run>.csv into cfg.output_dir. Per-run errors are caught
/// and reported; the sweep continues.
SweepResult run_sweep(const ExperimentConfig& cfg);

/// Writes the CSV outputs of a finished sweep (called by run_sweep; exposed
/// for reuse by the CLI when rerunning in-memory results).
void write_sweep_outputs(const ExperimentConfig& cfg, const SweepResult& result);

}  // namespace spreco
