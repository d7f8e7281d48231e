#include "spreco/experiment.hpp"

#include "spreco/csv.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace spreco {

namespace {

std::function<ExampleProblem()>& custom_example_slot() {
  static std::function<ExampleProblem()> slot;
  return slot;
}

constexpr double kPi = 3.14159265358979323846;

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

// Sub-stream tags for per-run seed derivation.
constexpr std::uint64_t kTagDataPath = 1;
constexpr std::uint64_t kTagNoise = 2;
constexpr std::uint64_t kTagReconPath = 3;
constexpr std::uint64_t kTagMcBase = 100;

}  // namespace

ExampleProblem make_example(const std::string& id) {
  ExampleProblem ex;
  ex.id = id;
  ex.coeffs.T = 1.0;
  ex.coeffs.b3 = [](const Point&) { return 0.1; };
  if (id == "parabola_1d") {
    ex.u0 = [](const Point& p) { return 4.0 * p.x * (1.0 - p.x); };
  } else if (id == "hat_1d") {
    ex.u0 = [](const Point& p) { return p.x <= 0.5 ? 2.0 * p.x : 2.0 - 2.0 * p.x; };
  } else if (id == "sine_2d") {
    ex.two_dim = true;
    ex.bounds = {-1.0, 1.0, -1.0, 1.0};
    ex.coeffs.T = 0.5;  // horizon not stated for the 2D example; see README
    ex.u0 = [](const Point& p) { return std::sin(kPi * p.x) * std::sin(kPi * p.y); };
  } else if (id == "custom") {
    if (!custom_example_slot())
      throw std::invalid_argument("make_example: no custom example registered");
    ex = custom_example_slot()();
    ex.id = "custom";
  } else {
    throw std::invalid_argument("make_example: unknown example id '" + id + "'");
  }
  return ex;
}

void register_custom_example(std::function<ExampleProblem()> factory) {
  custom_example_slot() = std::move(factory);
}

Vector add_noise(const Vector& u_T, double delta, std::uint64_t seed) {
  if (delta < 0.0) throw std::invalid_argument("add_noise: negative noise level");
  Vector out = u_T;
  if (delta == 0.0) return out;
  const double amp = delta * u_T.lpNorm<Eigen::Infinity>();
  Rng rng(seed);
  for (Index i = 0; i < out.size(); ++i) out[i] += amp * 2.0 * (rng.uniform() - 0.5);
  return out;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<double> parse_delta_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const std::string t = trim(item);
    if (!t.empty()) out.push_back(std::stod(t));
  }
  return out;
}

}  // namespace

ExperimentConfig ExperimentConfig::parse(const std::string& text) {
  ExperimentConfig cfg;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "example") cfg.example = value;
    else if (key == "n_cells") cfg.n_cells = std::stoi(value);
    else if (key == "nx") cfg.nx = std::stoi(value);
    else if (key == "ny") cfg.ny = std::stoi(value);
    else if (key == "T") cfg.T = std::stod(value);
    else if (key == "time_step") cfg.time_step = value == "h2" ? 0.0 : std::stod(value);
    else if (key == "deltas") cfg.deltas = parse_delta_list(value);
    else if (key == "runs") cfg.runs = std::stoi(value);
    else if (key == "seed") cfg.seed = std::stoull(value);
    else if (key == "alpha_rule") cfg.alpha_rule = value;
    else if (key == "alpha") cfg.alpha = std::stod(value);
    else if (key == "stopping") cfg.stopping = value;
    else if (key == "tau_d") cfg.tau_d = std::stod(value);
    else if (key == "gradient_tol") cfg.gradient_tol = std::stod(value);
    else if (key == "max_iters") cfg.max_iters = std::stoi(value);
    else if (key == "path_policy") cfg.path_policy = value;
    else if (key == "mc_paths") cfg.mc_paths = std::stoi(value);
    else if (key == "b3") cfg.b3_override = value == "default"
                              ? std::numeric_limits<double>::quiet_NaN()
                              : std::stod(value);
    else if (key == "output_dir") cfg.output_dir = value;
    else if (key == "threads") cfg.threads = std::stoi(value);
    else if (key == "write_iterlogs") cfg.write_iterlogs = (value == "true" || value == "1");
    else throw std::invalid_argument("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

std::string ExperimentConfig::serialize() const {
  std::ostringstream out;
  out << "example = " << example << "\n";
  out << "n_cells = " << n_cells << "\n";
  out << "nx = " << nx << "\n";
  out << "ny = " << ny << "\n";
  out << "T = " << format_double(T) << "\n";
  out << "time_step = " << (time_step == 0.0 ? std::string("h2") : format_double(time_step)) << "\n";
  out << "deltas = ";
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    if (i) out << ",";
    out << format_double(deltas[i]);
  }
  out << "\n";
  out << "runs = " << runs << "\n";
  out << "seed = " << seed << "\n";
  out << "alpha_rule = " << alpha_rule << "\n";
  out << "alpha = " << format_double(alpha) << "\n";
  out << "stopping = " << stopping << "\n";
  out << "tau_d = " << format_double(tau_d) << "\n";
  out << "gradient_tol = " << format_double(gradient_tol) << "\n";
  out << "max_iters = " << max_iters << "\n";
  out << "path_policy = " << path_policy << "\n";
  out << "mc_paths = " << mc_paths << "\n";
  out << "b3 = " << (std::isnan(b3_override) ? std::string("default") : format_double(b3_override))
      << "\n";
  out << "output_dir = " << output_dir << "\n";
  out << "threads = " << threads << "\n";
  out << "write_iterlogs = " << (write_iterlogs ? "true" : "false") << "\n";
  return out.str();
}

void ExperimentConfig::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write config file: " + path);
  out << serialize();
}

void ExperimentConfig::validate() const {
  if (runs < 1) throw std::invalid_argument("config: runs must be >= 1");
  if (deltas.empty()) throw std::invalid_argument("config: empty delta list");
  for (double d : deltas)
    if (d < 0.0) throw std::invalid_argument("config: negative delta");
  if (!(T > 0.0)) throw std::invalid_argument("config: T must be positive");
  if (n_cells < 2 || nx < 2 || ny < 2) throw std::invalid_argument("config: mesh too coarse");
  if (alpha_rule != "delta_squared" && alpha_rule != "fixed")
    throw std::invalid_argument("config: alpha_rule must be delta_squared or fixed");
  if (stopping != "auto" && stopping != "discrepancy" && stopping != "gradient_norm" &&
      stopping != "max_iters_only")
    throw std::invalid_argument("config: bad stopping rule");
  if (path_policy != "fresh_path" && path_policy != "data_path" && path_policy != "expectation" &&
      path_policy != "monte_carlo")
    throw std::invalid_argument("config: bad path_policy");
  if (mc_paths < 1) throw std::invalid_argument("config: mc_paths must be >= 1");
  if (max_iters < 1) throw std::invalid_argument("config: max_iters must be >= 1");
}

namespace {

struct SweepContext {
  ExperimentConfig cfg;
  ExampleProblem example;
  Mesh mesh;
  std::shared_ptr<FemSpace> space;
  TimeGrid grid{1.0, 1};
  std::shared_ptr<const SpdeOperators> ops;
  std::shared_ptr<const DirichletPoisson> poisson;
  std::shared_ptr<const AdjointRecursion> recursion_base;  // offset irrelevant
  Vector u0_interior;
  Vector exact_vertices;
  double domain = 1.0;
};

SweepContext build_context(const ExperimentConfig& cfg) {
  SweepContext ctx;
  ctx.cfg = cfg;
  ctx.example = make_example(cfg.example);
  if (!std::isnan(cfg.b3_override)) {
    const double b3 = cfg.b3_override;
    if (b3 == 0.0)
      ctx.example.coeffs.b3 = {};
    else
      ctx.example.coeffs.b3 = [b3](const Point&) { return b3; };
  }
  ctx.example.coeffs.T = cfg.T;

  ctx.mesh = ctx.example.two_dim ? build_rect_mesh(cfg.nx, cfg.ny, ctx.example.bounds)
                                 : build_interval_mesh(cfg.n_cells);
  ctx.space = std::make_shared<FemSpace>(ctx.mesh);
  const double h = ctx.mesh.h;
  int steps;
  if (cfg.time_step > 0.0)
    steps = std::max(1, static_cast<int>(std::llround(cfg.T / cfg.time_step)));
  else
    steps = std::max(1, static_cast<int>(std::ceil(cfg.T / (h * h) - 1e-12)));
  ctx.grid = TimeGrid::uniform(cfg.T, steps);

  ctx.ops = std::make_shared<const SpdeOperators>(*ctx.space, ctx.example.coeffs, ctx.grid);
  ctx.poisson = ctx.example.coeffs.a
                    ? std::make_shared<const DirichletPoisson>(*ctx.space)
                    : std::make_shared<const DirichletPoisson>(ctx.ops->mass(), ctx.ops->stiff());
  const Index n_int = ctx.ops->interior_count();
  ctx.recursion_base = std::make_shared<const AdjointRecursion>(
      ctx.ops, Vector(Vector::Zero(n_int)), AdjointRecursion::Storage::FinalOnly);

  ctx.u0_interior = ctx.space->restrict_interior(l2_project(*ctx.space, ctx.example.u0));
  ctx.exact_vertices = Vector(ctx.mesh.vertices.size());
  for (std::size_t v = 0; v < ctx.mesh.vertices.size(); ++v)
    ctx.exact_vertices[static_cast<Index>(v)] = ctx.example.u0(ctx.mesh.vertices[v]);
  ctx.domain = ctx.mesh.measure();
  return ctx;
}

struct SingleRunOutput {
  RunRecord record;
  Vector profile;  // reconstruction at all vertices
};

SingleRunOutput run_single(const SweepContext& ctx, int delta_index, int run_index) {
  const ExperimentConfig& cfg = ctx.cfg;
  const double delta = cfg.deltas[static_cast<std::size_t>(delta_index)];
  SingleRunOutput out;
  out.record.delta_index = delta_index;
  out.record.delta = delta;
  out.record.run_index = run_index;
  const std::uint64_t run_seed =
      Rng::mix({cfg.seed, fnv1a(cfg.example), static_cast<std::uint64_t>(delta_index),
                static_cast<std::uint64_t>(run_index)});
  out.record.seed = run_seed;

  const auto t0 = std::chrono::steady_clock::now();

  const BrownianPath data_path = BrownianPath::sample(ctx.grid, Rng::mix({run_seed, kTagDataPath}));
  const Vector u_T = apply_forward_map(*ctx.ops, ctx.u0_interior, data_path);
  const Vector data = add_noise(u_T, delta, Rng::mix({run_seed, kTagNoise}));

  RegularizationConfig reg;
  reg.max_iters = cfg.max_iters;
  if (cfg.alpha_rule == "delta_squared") {
    reg.alpha_rule = RegularizationConfig::AlphaRule::DeltaSquared;
    // absolute L2 noise level of the uniform model: delta ||u||_inf sqrt(|G|/3)
    reg.delta_abs = delta * data.lpNorm<Eigen::Infinity>() * std::sqrt(ctx.domain / 3.0);
  } else {
    reg.alpha_rule = RegularizationConfig::AlphaRule::Fixed;
    reg.alpha = cfg.alpha;
  }

  const double disc_level =
      cfg.tau_d * delta * data.lpNorm<Eigen::Infinity>() * std::sqrt(ctx.domain);
  if (cfg.stopping == "discrepancy" || (cfg.stopping == "auto" && delta > 0.0))
    reg.stop = StoppingRule::discrepancy(disc_level);
  else if (cfg.stopping == "gradient_norm" || (cfg.stopping == "auto" && delta == 0.0))
    reg.stop = StoppingRule::gradient_norm(cfg.gradient_tol);
  else
    reg.stop = StoppingRule::max_iters_only();

  std::optional<TikhonovProblem> problem;
  if (cfg.path_policy == "fresh_path") {
    const BrownianPath recon =
        BrownianPath::sample(ctx.grid, Rng::mix({run_seed, kTagReconPath}));
    problem.emplace(ctx.ops, data, recon, ctx.poisson, std::optional<AdjointRecursion>(*ctx.recursion_base));
  } else if (cfg.path_policy == "data_path") {
    problem.emplace(ctx.ops, data, data_path, ctx.poisson,
                    std::optional<AdjointRecursion>(*ctx.recursion_base));
  } else if (cfg.path_policy == "expectation") {
    problem.emplace(TikhonovProblem::expectation(ctx.ops, data, ctx.poisson,
                                                 std::optional<AdjointRecursion>(*ctx.recursion_base)));
  } else {
    std::vector<BrownianPath> mc;
    mc.reserve(static_cast<std::size_t>(cfg.mc_paths));
    for (int p = 0; p < cfg.mc_paths; ++p)
      mc.push_back(BrownianPath::sample(ctx.grid, Rng::mix({run_seed, kTagMcBase + static_cast<std::uint64_t>(p)})));
    problem.emplace(TikhonovProblem::monte_carlo(ctx.ops, data, std::move(mc), ctx.poisson,
                                                 std::optional<AdjointRecursion>(*ctx.recursion_base)));
  }

  const CgResult result =
      problem->minimize(reg, Vector::Zero(ctx.ops->interior_count()));
  out.record.iterations = static_cast<int>(result.log.size());
  out.record.converged = result.converged;

  out.profile = ctx.space->extend_with_zeros(result.y0);
  const RmseResult err = rmse(out.profile, ctx.exact_vertices);
  out.record.rmse_abs = err.rmse;
  out.record.rmse_relative = err.rmse_rel.value_or(0.0);

  if (cfg.write_iterlogs) {
    out.record.iterlog =
        "iterlog_d" + std::to_string(delta_index) + "_r" + std::to_string(run_index) + ".csv";
    result.dump_csv((std::filesystem::path(cfg.output_dir) / out.record.iterlog).string());
  }

  out.record.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

}  // namespace

void write_sweep_outputs(const ExperimentConfig& cfg, const SweepResult& result) {
  namespace fs = std::filesystem;
  fs::create_directories(cfg.output_dir);
  const fs::path dir(cfg.output_dir);

  {
    std::vector<std::string> cols = {"T", "stat"};
    for (double d : cfg.deltas) cols.push_back("delta=" + format_double(d));
    CsvWriter csv((dir / "table1.csv").string(), cols);
    std::vector<std::string> row_rmse = {format_double(cfg.T), "RMSE"};
    std::vector<std::string> row_rel = {format_double(cfg.T), "rmse"};
    for (const auto& cell : result.cells) {
      row_rmse.push_back(format_double(cell.mean_rmse));
      row_rel.push_back(format_double(cell.mean_rmse_rel));
    }
    csv.row(row_rmse);
    csv.row(row_rel);
  }

  {
    CsvWriter csv((dir / "runs.csv").string(),
                  {"example", "T", "delta_index", "delta", "run", "seed", "iterations",
                   "converged", "rmse", "rmse_rel", "failed", "error", "iterlog"});
    for (const auto& r : result.records) {
      csv.row(std::vector<std::string>{
          cfg.example, format_double(cfg.T), std::to_string(r.delta_index),
          format_double(r.delta), std::to_string(r.run_index), std::to_string(r.seed),
          std::to_string(r.iterations), r.converged ? "1" : "0", format_double(r.rmse_abs),
          format_double(r.rmse_relative), r.failed ? "1" : "0", r.error, r.iterlog});
    }
  }

  {
    std::vector<std::string> cols = {"x", "y", "exact_u0"};
    for (double d : cfg.deltas) cols.push_back("recon_mean_delta=" + format_double(d));
    CsvWriter csv((dir / "profile.csv").string(), cols);
    for (std::size_t v = 0; v < result.vertices.size(); ++v) {
      std::vector<double> row = {result.vertices[v].x, result.vertices[v].y,
                                 result.exact_u0[static_cast<Index>(v)]};
      for (const auto& prof : result.mean_profile) row.push_back(prof[static_cast<Index>(v)]);
      csv.row(row);
    }
  }
}

SweepResult run_sweep(const ExperimentConfig& cfg) {
  cfg.validate();
  const SweepContext ctx = build_context(cfg);
  if (cfg.write_iterlogs) std::filesystem::create_directories(cfg.output_dir);

  const int n_deltas = static_cast<int>(cfg.deltas.size());
  const int total = n_deltas * cfg.runs;
  std::vector<SingleRunOutput> outputs(static_cast<std::size_t>(total));

  const unsigned hw = std::thread::hardware_concurrency();
  const int n_threads =
      cfg.threads > 0 ? cfg.threads : static_cast<int>(hw > 0 ? hw : 1);
  std::atomic<int> next{0};
  auto worker = [&]() {
    for (;;) {
      const int idx = next.fetch_add(1);
      if (idx >= total) return;
      const int di = idx / cfg.runs;
      const int run = idx % cfg.runs;
      auto& slot = outputs[static_cast<std::size_t>(idx)];
      try {
        slot = run_single(ctx, di, run);
      } catch (const std::exception& e) {
        slot.record.delta_index = di;
        slot.record.delta = cfg.deltas[static_cast<std::size_t>(di)];
        slot.record.run_index = run;
        slot.record.failed = true;
        slot.record.error = e.what();
      }
    }
  };
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(n_threads));
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  SweepResult result;
  result.vertices = ctx.mesh.vertices;
  result.exact_u0 = ctx.exact_vertices;
  result.mean_profile.assign(static_cast<std::size_t>(n_deltas),
                             Vector::Zero(static_cast<Index>(ctx.mesh.vertices.size())));
  result.records.reserve(static_cast<std::size_t>(total));

  for (int di = 0; di < n_deltas; ++di) {
    SweepCell cell;
    cell.T = cfg.T;
    cell.delta = cfg.deltas[static_cast<std::size_t>(di)];
    double sum = 0, sum_sq = 0, sum_rel = 0;
    for (int run = 0; run < cfg.runs; ++run) {
      const auto& out = outputs[static_cast<std::size_t>(di * cfg.runs + run)];
      result.records.push_back(out.record);
      if (out.record.failed) {
        ++result.failures;
        continue;
      }
      sum += out.record.rmse_abs;
      sum_sq += out.record.rmse_abs * out.record.rmse_abs;
      sum_rel += out.record.rmse_relative;
      result.mean_profile[static_cast<std::size_t>(di)] += out.profile;
      ++cell.successes;
    }
    if (cell.successes > 0) {
      const double n = cell.successes;
      cell.mean_rmse = sum / n;
      cell.mean_rmse_rel = sum_rel / n;
      cell.se_rmse = std::sqrt(std::max(0.0, sum_sq / n - cell.mean_rmse * cell.mean_rmse) / n);
      result.mean_profile[static_cast<std::size_t>(di)] /= n;
    }
    result.cells.push_back(cell);
  }

  write_sweep_outputs(cfg, result);
  if (result.failures > 0)
    std::fprintf(stderr, "[spreco] sweep finished with %d failed runs (see runs.csv)\n",
                 result.failures);
  return result;
}

}  // namespace spreco
