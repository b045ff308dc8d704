#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "rrmd/experiments.hpp"

using namespace rrmd;
namespace fs = std::filesystem;

namespace {

const char* kSampleConfig = R"(
# poisson desk instance
problem.kind = poisson_inverse
problem.d = 4
problem.n = 24
problem.seed = 3

solver.scheme = uniform_reshuffle
solver.schedule = capped_harmonic
solver.alpha = 1.0
solver.cap = 0.05
solver.epochs = 30
solver.seed = 7
solver.cadence = 5

grid = 0.1, 1.0
repetitions = 2
out = test_out
)";

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("flat config parsing") {
  const auto kv = parse_flat_config("a.b = 3\n# comment\nc = hello # trailing\n\n");
  CHECK(kv.at("a.b") == "3");
  CHECK(kv.at("c") == "hello");

  CHECK_THROWS_AS(parse_flat_config("novalue\n"), ConfigError);
  CHECK_THROWS_AS(parse_flat_config(" = 3\n"), ConfigError);
}

TEST_CASE("run config fields, defaults, and validation") {
  const RunConfig cfg = RunConfig::from_map(parse_flat_config(kSampleConfig));
  CHECK(cfg.problem.kind == ProblemKind::PoissonInverse);
  CHECK(cfg.problem.d == 4);
  CHECK(cfg.solver.schedule.kind == ScheduleKind::CappedHarmonic);
  CHECK(cfg.solver.schedule.cap == doctest::Approx(0.05));
  CHECK(cfg.grid == std::vector<double>{0.1, 1.0});
  CHECK(cfg.repetitions == 2);
  // default batch: max(1, n / 192)
  CHECK(cfg.solver.batch_size == 1);

  CHECK_THROWS_AS(RunConfig::from_map(parse_flat_config("problem.kind = nope\n")), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_map(parse_flat_config("problem.d = abc\n")), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_map(parse_flat_config("unknown.key = 1\n")), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_map(parse_flat_config("grid = -1\n")), ConfigError);
}

TEST_CASE("config hash is stable and canonical") {
  const RunConfig a = RunConfig::from_map(parse_flat_config(kSampleConfig));
  const RunConfig b = RunConfig::from_map(parse_flat_config(kSampleConfig));
  CHECK(a.config_hash() == b.config_hash());
  RunConfig c = a;
  c.solver.seed = 8;
  CHECK(c.config_hash() != a.config_hash());
}

TEST_CASE("reference solver reaches the certificate on a convex instance") {
  DatasetSpec spec;
  spec.kind = ProblemKind::PoissonInverse;
  spec.d = 5;
  spec.n = 50;
  spec.seed = 21;
  const FiniteSumProblem p = make_poisson_inverse(spec);
  const ReferenceSolution ref = compute_reference(p, 1e-8, 50000);
  CHECK(ref.grad_norm <= 1e-8);
  // re-verifiable certificate
  CHECK(p.full_grad(ref.x_hat).norm() <= 1e-8);
  CHECK(p.full_value(ref.x_hat) == doctest::Approx(ref.f_hat));
}

TEST_CASE("reference solver returns immediately at a stationary start") {
  FiniteSumProblem p;
  p.n = 2;
  p.d = 2;
  p.kernel = std::make_shared<Kernel>(std::vector<BlockKernelPtr>{make_quadratic(2)});
  Vec c0(2), c1(2);
  c0 << 1.0, 0.0;
  c1 << -1.0, 0.0;
  p.component_value = [c0, c1](int i, const Vec& x) {
    return 0.5 * (x - (i == 0 ? c0 : c1)).squaredNorm();
  };
  p.component_grad = [c0, c1](int i, const Vec& x) -> Vec { return x - (i == 0 ? c0 : c1); };
  p.x_start = Vec::Zero(2);  // the minimizer
  const ReferenceSolution ref = compute_reference(p, 1e-8, 10);
  CHECK(ref.iterations == 0);
  CHECK((ref.x_hat - p.x_start).norm() == 0.0);
}

TEST_CASE("reference solver reports budget exhaustion") {
  DatasetSpec spec;
  spec.kind = ProblemKind::PoissonInverse;
  spec.d = 5;
  spec.n = 40;
  spec.seed = 22;
  const FiniteSumProblem p = make_poisson_inverse(spec);
  CHECK_THROWS_AS(compute_reference(p, 1e-14, 3), BudgetExhausted);
}

TEST_CASE("reference save/load roundtrip") {
  ReferenceSolution ref;
  ref.x_hat = Vec::LinSpaced(4, 0.5, 2.0);
  ref.f_hat = 0.125;
  ref.grad_norm = 3e-9;
  ref.iterations = 42;
  const std::string path = "test_ref.json";
  save_reference(ref, path);
  const ReferenceSolution back = load_reference(path);
  CHECK((back.x_hat - ref.x_hat).norm() == 0.0);
  CHECK(back.f_hat == ref.f_hat);
  CHECK(back.grad_norm == ref.grad_norm);
  std::remove(path.c_str());
}

TEST_CASE("relative error curve values and degenerate fallback") {
  std::vector<TraceRecord> trace(2);
  trace[0].epoch = 1;
  trace[0].f = 2.0;
  trace[0].cum_samples = 10;
  trace[1].epoch = 2;
  trace[1].f = 1.0;
  trace[1].cum_samples = 20;

  const auto curve = relative_error_curve(trace, 1.0, 10);
  CHECK(curve[0].value == doctest::Approx(1.0));  // f = 2 f_hat
  CHECK(curve[1].value == doctest::Approx(0.0));  // f = f_hat
  CHECK(curve[0].data_passes == 1);
  CHECK_FALSE(curve[0].absolute);

  const auto degenerate = relative_error_curve(trace, 0.0, 10);
  CHECK(degenerate[0].absolute);
  CHECK(degenerate[0].value == doctest::Approx(2.0));
}

TEST_CASE("trace csv write/read roundtrip") {
  std::vector<TraceRecord> trace(3);
  for (int i = 0; i < 3; ++i) {
    trace[i].epoch = i + 1;
    trace[i].f = 1.0 / (i + 1);
    trace[i].grad_norm = 0.1 * i;
    trace[i].g_measure = 0.01 * i;
    trace[i].alpha = 1e-3;
    trace[i].dual_drift = 0.5;
    trace[i].max_intra_drift = 0.7;
    trace[i].cum_samples = 10L * (i + 1);
    trace[i].wall_ms = 1.5 * i;
  }
  const std::string path = "test_trace.csv";
  write_trace_csv(path, trace, 7, 0xabcd);
  const auto back = read_trace_csv(path);
  REQUIRE(back.size() == 3);
  for (int i = 0; i < 3; ++i) {
    CHECK(back[i].epoch == trace[i].epoch);
    CHECK(back[i].f == trace[i].f);
    CHECK(back[i].cum_samples == trace[i].cum_samples);
  }
  std::remove(path.c_str());
}

TEST_CASE("grid runner: summary, determinism, and empty grid") {
  RunConfig cfg = RunConfig::from_map(parse_flat_config(kSampleConfig));
  cfg.solver.epochs = 10;
  const FiniteSumProblem p = make_problem(cfg.problem);

  const GridRunSummary a = run_grid(cfg, p, 1.0, /*write_traces=*/false);
  CHECK(a.cells.size() == 4);  // 2 alphas x 2 repetitions
  CHECK(a.diverged_cells == 0);
  CHECK((a.best_alpha == 0.1 || a.best_alpha == 1.0));

  const GridRunSummary b = run_grid(cfg, p, 1.0, false);
  REQUIRE(b.cells.size() == a.cells.size());
  for (std::size_t i = 0; i < a.cells.size(); ++i) {
    CHECK(a.cells[i].final_f == b.cells[i].final_f);
    CHECK(a.cells[i].final_rel_err == b.cells[i].final_rel_err);
  }

  cfg.grid.clear();  // single run at the schedule default
  const GridRunSummary single = run_grid(cfg, p, 1.0, false);
  CHECK(single.cells.size() == 2);

  // threads produce the same summary as sequential execution
  cfg.grid = {0.1, 1.0};
  cfg.threads = 3;
  const GridRunSummary threaded = run_grid(cfg, p, 1.0, false);
  for (std::size_t i = 0; i < a.cells.size(); ++i) {
    CHECK(threaded.cells[i].final_f == a.cells[i].final_f);
  }
}

TEST_CASE("grid runner surfaces per-cell divergence and all-diverged aborts") {
  RunConfig cfg;
  cfg.problem.kind = ProblemKind::QuadraticInverse;
  cfg.problem.d = 3;
  cfg.problem.n = 6;
  cfg.problem.seed = 5;
  cfg.solver.schedule.kind = ScheduleKind::Fixed;
  cfg.solver.epochs = 60;
  cfg.solver.divergence_factor = 1e3;
  cfg.grid = {1e6};  // absurd step: everything diverges
  cfg.repetitions = 2;
  const FiniteSumProblem p = make_problem(cfg.problem);
  CHECK_THROWS_AS(run_grid(cfg, p, 1.0, false), DivergenceDetected);
}

TEST_CASE("component scaling shifts the grid but not the error values") {
  // with the quadratic kernel, running c * f_i at step alpha matches running
  // f_i at step c * alpha, so best-alpha selection order is scale-invariant
  // on a log grid
  auto make = [](double scale) {
    FiniteSumProblem p;
    p.n = 4;
    p.d = 3;
    p.kernel = std::make_shared<Kernel>(std::vector<BlockKernelPtr>{make_quadratic(3)});
    RngStream rng = RngStream::from_seed(8, "scaling");
    auto centers = std::make_shared<std::vector<Vec>>();
    for (int i = 0; i < 4; ++i) {
      Vec c(3);
      for (int j = 0; j < 3; ++j) c[j] = rng.normal();
      centers->push_back(c);
    }
    p.component_value = [centers, scale](int i, const Vec& x) {
      return scale * 0.5 * (x - (*centers)[i]).squaredNorm();
    };
    p.component_grad = [centers, scale](int i, const Vec& x) -> Vec {
      return scale * (x - (*centers)[i]);
    };
    p.x_start = Vec::Constant(3, 2.0);
    return p;
  };
  const FiniteSumProblem base = make(1.0);
  const FiniteSumProblem scaled = make(10.0);
  for (double alpha : {1e-3, 1e-2, 1e-1}) {
    SolverConfig cfg;
    cfg.scheme = SchemeKind::UniformReshuffle;
    cfg.schedule.kind = ScheduleKind::Fixed;
    cfg.epochs = 12;
    cfg.seed = 5;
    cfg.schedule.alpha = 10.0 * alpha;
    const RunResult a = run(base, cfg);
    cfg.schedule.alpha = alpha;
    const RunResult b = run(scaled, cfg);
    // same trajectory, metric scaled by 10
    CHECK(b.final_f == doctest::Approx(10.0 * a.final_f).epsilon(1e-12));
  }
}

TEST_CASE("log-log slope fit recovers an exact power law") {
  std::vector<double> xs, ys;
  for (int t : {64, 128, 256, 512}) {
    xs.push_back(t);
    ys.push_back(3.7 * std::pow(t, -2.0 / 3.0));
  }
  CHECK(fit_loglog_slope(xs, ys) == doctest::Approx(-2.0 / 3.0).epsilon(1e-9));
  CHECK_THROWS_AS(fit_loglog_slope({1.0}, {1.0}), ConfigError);
}

TEST_CASE("complexity study smoke run") {
  DatasetSpec spec;
  spec.kind = ProblemKind::QuadraticInverse;
  spec.d = 4;
  spec.n = 8;
  spec.seed = 13;
  const SlopeReport report = complexity_study(spec, {8, 16, 32, 64}, SchemeKind::FixedOrder,
                                              ScheduleKind::ConstantIMD, 2, 100);
  CHECK(report.epochs_grid.size() == 4);
  CHECK(report.mean_sampled_g.size() == 4);
  for (double g : report.mean_sampled_g) CHECK(g >= 0.0);
  CHECK_THROWS_AS(
      complexity_study(spec, {8, 16}, SchemeKind::FixedOrder, ScheduleKind::ConstantIMD, 1, 1),
      ConfigError);
}

TEST_CASE("summary csv is byte-identical across reruns") {
  RunConfig cfg = RunConfig::from_map(parse_flat_config(kSampleConfig));
  cfg.solver.epochs = 8;
  cfg.out_dir = "test_out_summary";
  const FiniteSumProblem p = make_problem(cfg.problem);
  fs::create_directories(cfg.out_dir);

  const auto s1 = run_grid(cfg, p, 1.0, false);
  write_grid_summary_csv(cfg.out_dir + "/summary.csv", s1, cfg);
  const std::string first = slurp(cfg.out_dir + "/summary.csv");

  const auto s2 = run_grid(cfg, p, 1.0, false);
  write_grid_summary_csv(cfg.out_dir + "/summary.csv", s2, cfg);
  const std::string second = slurp(cfg.out_dir + "/summary.csv");

  CHECK(first == second);
  CHECK(first.find("best_alpha=") != std::string::npos);
  fs::remove_all(cfg.out_dir);
}
