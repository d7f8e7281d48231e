#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <spreco/experiment.hpp>

#include <filesystem>
#include <fstream>

using namespace spreco;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("make_example: stated point values") {
  const ExampleProblem parab = make_example("parabola_1d");
  CHECK(parab.u0({0.5, 0.0}) == doctest::Approx(1.0));
  CHECK(parab.coeffs.b3({0.2, 0.0}) == doctest::Approx(0.1));
  CHECK(!parab.coeffs.has_b1());
  CHECK(!parab.coeffs.has_b2());

  const ExampleProblem hat = make_example("hat_1d");
  CHECK(hat.u0({0.5, 0.0}) == doctest::Approx(1.0));
  CHECK(hat.u0({0.25, 0.0}) == doctest::Approx(0.5));

  const ExampleProblem sine = make_example("sine_2d");
  CHECK(sine.two_dim);
  CHECK(sine.u0({0.5, 0.5}) == doctest::Approx(1.0));
  CHECK(sine.u0({1.0, 0.3}) == doctest::Approx(0.0).epsilon(1e-12));

  CHECK_THROWS_AS(make_example("nope"), std::invalid_argument);
}

TEST_CASE("custom example registration") {
  register_custom_example([] {
    ExampleProblem ex;
    ex.u0 = [](const Point& p) { return p.x; };
    ex.coeffs = Coefficients::heat(0.5);
    return ex;
  });
  const ExampleProblem ex = make_example("custom");
  CHECK(ex.u0({0.25, 0.0}) == doctest::Approx(0.25));
  register_custom_example({});
  CHECK_THROWS_AS(make_example("custom"), std::invalid_argument);
}

TEST_CASE("add_noise: identity at zero, sup bound, variance, determinism") {
  Vector u(5);
  u << 0.1, -0.4, 0.9, 0.2, -0.7;
  CHECK(add_noise(u, 0.0, 3) == u);

  const double delta = 0.25;
  const Vector noisy = add_noise(u, delta, 3);
  CHECK(noisy == add_noise(u, delta, 3));
  CHECK((noisy - u).lpNorm<Eigen::Infinity>() <= delta * u.lpNorm<Eigen::Infinity>() + 1e-15);

  // empirical per-dof variance -> (delta ||u||_inf)^2 / 3
  const int draws = 100000;
  Vector big = Vector::Ones(draws);
  const Vector sample = add_noise(big, delta, 9);
  double var = 0;
  for (Index i = 0; i < draws; ++i) var += (sample[i] - 1.0) * (sample[i] - 1.0);
  var /= draws;
  const double target = delta * delta / 3.0;
  CHECK(std::abs(var - target) <= 0.05 * target);

  CHECK_THROWS_AS(add_noise(u, -0.1, 1), std::invalid_argument);
}

TEST_CASE("config serialization round-trips") {
  ExperimentConfig cfg;
  cfg.example = "hat_1d";
  cfg.n_cells = 12;
  cfg.T = 0.75;
  cfg.deltas = {0.0, 0.01};
  cfg.runs = 3;
  cfg.seed = 99;
  cfg.alpha_rule = "fixed";
  cfg.alpha = 1e-9;
  cfg.stopping = "gradient_norm";
  cfg.path_policy = "expectation";
  cfg.b3_override = 0.0;
  cfg.output_dir = "somewhere";
  const std::string text = cfg.serialize();
  const ExperimentConfig back = ExperimentConfig::parse(text);
  CHECK(back.serialize() == text);
  CHECK(back.example == "hat_1d");
  CHECK(back.deltas == std::vector<double>{0.0, 0.01});
  CHECK(back.b3_override == 0.0);

  CHECK_THROWS_AS(ExperimentConfig::parse("bogus_key = 1\n"), std::invalid_argument);
  CHECK_THROWS_AS(ExperimentConfig::parse("runs = 0\n"), std::invalid_argument);
  CHECK_THROWS_AS(ExperimentConfig::parse("deltas = -0.5\n"), std::invalid_argument);
}

TEST_CASE("sweep: noise-free deterministic run reconstructs near the floor") {
  TempDir dir("sweep_out_det");
  ExperimentConfig cfg;
  cfg.example = "parabola_1d";
  cfg.n_cells = 20;
  cfg.T = 0.2;
  cfg.time_step = 1.0 / 800;
  cfg.deltas = {0.0};
  cfg.runs = 1;
  cfg.seed = 7;
  cfg.b3_override = 0.0;  // deterministic limit
  cfg.output_dir = dir.path.string();
  cfg.threads = 1;
  const SweepResult res = run_sweep(cfg);
  REQUIRE(res.records.size() == 1);
  CHECK(res.failures == 0);
  CHECK(res.records[0].rmse_abs <= 0.05);
  CHECK(fs::exists(dir.path / "table1.csv"));
  CHECK(fs::exists(dir.path / "runs.csv"));
  CHECK(fs::exists(dir.path / "profile.csv"));
}

TEST_CASE("sweep: identical config and seed give byte-identical CSV outputs") {
  ExperimentConfig cfg;
  cfg.example = "parabola_1d";
  cfg.n_cells = 10;
  cfg.T = 0.25;
  cfg.deltas = {0.0, 0.05};
  cfg.runs = 2;
  cfg.seed = 123;
  cfg.max_iters = 40;
  cfg.write_iterlogs = true;

  TempDir a("sweep_out_a"), b("sweep_out_b");
  cfg.output_dir = a.path.string();
  cfg.threads = 2;
  run_sweep(cfg);
  cfg.output_dir = b.path.string();
  cfg.threads = 1;  // thread count must not affect results
  run_sweep(cfg);

  for (const auto& name : {"table1.csv", "runs.csv", "profile.csv", "iterlog_d1_r0.csv"})
    CHECK(slurp(a.path / name) == slurp(b.path / name));
}

TEST_CASE("sweep: per-run failures are recorded and do not sink the sweep") {
  TempDir dir("sweep_out_fail");
  ExperimentConfig cfg;
  cfg.example = "parabola_1d";
  cfg.n_cells = 8;
  cfg.T = 1.0;
  cfg.time_step = 0.25;  // violates the h^2 guideline on purpose
  cfg.deltas = {0.0};
  cfg.runs = 2;
  cfg.seed = 5;
  cfg.b3_override = 1e10;  // guarantees blow-up
  cfg.output_dir = dir.path.string();
  cfg.threads = 1;
  const SweepResult res = run_sweep(cfg);
  CHECK(res.failures == 2);
  for (const auto& r : res.records) {
    CHECK(r.failed);
    CHECK(!r.error.empty());
  }
  CHECK(fs::exists(dir.path / "runs.csv"));
}

TEST_CASE("sweep: 2D example end to end") {
  TempDir dir("sweep_out_2d");
  ExperimentConfig cfg;
  cfg.example = "sine_2d";
  cfg.nx = 8;
  cfg.ny = 8;
  cfg.T = 0.25;
  cfg.deltas = {0.02};
  cfg.runs = 1;
  cfg.seed = 17;
  cfg.max_iters = 60;
  cfg.output_dir = dir.path.string();
  cfg.threads = 1;
  const SweepResult res = run_sweep(cfg);
  REQUIRE(res.records.size() == 1);
  CHECK(res.failures == 0);
  CHECK(res.records[0].rmse_abs < 1.0);
  CHECK(res.vertices.size() == 81);
  CHECK(fs::exists(dir.path / "profile.csv"));
}

TEST_CASE("sweep cells aggregate only successful runs") {
  TempDir dir("sweep_out_cells");
  ExperimentConfig cfg;
  cfg.example = "hat_1d";
  cfg.n_cells = 10;
  cfg.T = 0.25;
  cfg.deltas = {0.02};
  cfg.runs = 3;
  cfg.seed = 31;
  cfg.output_dir = dir.path.string();
  cfg.threads = 2;
  const SweepResult res = run_sweep(cfg);
  REQUIRE(res.cells.size() == 1);
  CHECK(res.cells[0].successes == 3);
  CHECK(res.cells[0].mean_rmse > 0.0);
  CHECK(res.cells[0].mean_rmse < 1.0);
  REQUIRE(res.mean_profile.size() == 1);
  CHECK(res.mean_profile[0].size() == static_cast<Index>(res.vertices.size()));
}
