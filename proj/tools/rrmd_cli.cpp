// Command-line experiment runner: grid runs with trace/summary CSVs,
// reference solutions, relative-error curves, complexity slope studies, and
// the inequality falsification suite.

#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "rrmd/compose.hpp"
#include "rrmd/experiments.hpp"

namespace fs = std::filesystem;
using namespace rrmd;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitDivergence = 3;
constexpr int kExitBudget = 4;

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int threads = 0;
};

RunConfig load_config(const CommonArgs& args) {
  RunConfig cfg = RunConfig::from_file(args.config_path);
  if (args.seed_set) {
    cfg.problem.seed = args.seed;
    cfg.solver.seed = args.seed;
  }
  if (!args.out_dir.empty()) cfg.out_dir = args.out_dir;
  if (args.threads > 0) cfg.threads = args.threads;
  return cfg;
}

double resolve_reference_value(const RunConfig& cfg, const FiniteSumProblem& p) {
  if (!cfg.reference_file.empty()) return load_reference(cfg.reference_file).f_hat;
  std::cerr << "computing reference solution (tol " << cfg.reference_tol << ")\n";
  const ReferenceSolution ref = compute_reference(p, cfg.reference_tol, cfg.reference_max_iters);
  std::cerr << "reference: f=" << ref.f_hat << " grad_norm=" << ref.grad_norm << " after "
            << ref.iterations << " iterations\n";
  return ref.f_hat;
}

int cmd_run(const CommonArgs& args) {
  const RunConfig cfg = load_config(args);
  const FiniteSumProblem p = make_problem(cfg.problem);
  const double f_hat = resolve_reference_value(cfg, p);
  const GridRunSummary summary = run_grid(cfg, p, f_hat, /*write_traces=*/true);
  fs::create_directories(cfg.out_dir);
  const std::string summary_path = cfg.out_dir + "/summary.csv";
  write_grid_summary_csv(summary_path, summary, cfg);

  // structured record for the best cell
  SolverConfig best = cfg.solver;
  best.schedule.alpha = summary.best_alpha;
  const RunResult best_run = run(p, best);
  nlohmann::json best_json = run_summary_json(best_run);
  best_json["seed"] = best.seed;
  {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%llx",
                  static_cast<unsigned long long>(cfg.config_hash()));
    best_json["config"] = buf;
  }
  std::ofstream best_out(cfg.out_dir + "/best_run.json");
  best_out << best_json.dump(2) << "\n";

  std::cout << "wrote " << summary_path << " (best_alpha=" << summary.best_alpha
            << ", best_median_rel_err=" << summary.best_median_rel_err << ", "
            << summary.diverged_cells << " diverged cells)\n";
  return kExitOk;
}

int cmd_reference(const CommonArgs& args) {
  const RunConfig cfg = load_config(args);
  const FiniteSumProblem p = make_problem(cfg.problem);
  const ReferenceSolution ref = compute_reference(p, cfg.reference_tol, cfg.reference_max_iters);
  fs::create_directories(cfg.out_dir);
  const std::string path = cfg.out_dir + "/reference.json";
  save_reference(ref, path, cfg.problem.seed, cfg.config_hash());
  std::cout << "wrote " << path << " (f=" << ref.f_hat << ", grad_norm=" << ref.grad_norm
            << ")\n";
  return kExitOk;
}

int cmd_relerr(const CommonArgs& args, const std::string& trace_path,
               const std::string& reference_path) {
  const RunConfig cfg = load_config(args);
  const auto trace = read_trace_csv(trace_path);
  const ReferenceSolution ref = load_reference(reference_path);
  const auto curve = relative_error_curve(trace, ref.f_hat, cfg.problem.n);
  if (!curve.empty() && curve.front().absolute) {
    std::cerr << "degenerate reference (f_hat <= 1e-300): emitting absolute errors\n";
  }
  fs::create_directories(cfg.out_dir);
  const std::string path = cfg.out_dir + "/relative_error.csv";
  write_relative_error_csv(path, curve, cfg.solver.seed, cfg.config_hash());
  std::cout << "wrote " << path << "\n";
  return kExitOk;
}

int cmd_complexity(const CommonArgs& args) {
  const RunConfig cfg = load_config(args);
  std::vector<int> epoch_grid;
  const auto kv = load_flat_config(args.config_path);
  if (const auto it = kv.find("complexity.epochs"); it != kv.end()) {
    std::stringstream ss(it->second);
    std::string tok;
    while (std::getline(ss, tok, ',')) epoch_grid.push_back(std::stoi(tok));
  } else {
    epoch_grid = {64, 128, 256, 512};
  }
  const ScheduleKind schedule = cfg.solver.scheme == SchemeKind::UniformReshuffle
                                    ? ScheduleKind::ConstantRR
                                    : ScheduleKind::ConstantIMD;
  const SlopeReport report =
      complexity_study(cfg.problem, epoch_grid, cfg.solver.scheme, schedule, cfg.repetitions,
                       cfg.solver.seed, cfg.solver.batch_size);
  fs::create_directories(cfg.out_dir);
  const std::string path = cfg.out_dir + "/complexity.csv";
  write_slope_report_csv(path, report, cfg.solver.seed, cfg.config_hash());
  std::cout << "wrote " << path << " (slope=" << report.slope << ")\n";
  return kExitOk;
}

int cmd_lemmas(const CommonArgs& args) {
  const RunConfig cfg = load_config(args);
  std::vector<LemmaReport> reports;
  const std::uint64_t seed = cfg.solver.seed;

  const std::vector<Kernel> kernels = {
      Kernel({make_shannon(4)}), Kernel({make_regularized_burg(4, 1.0)}),
      Kernel({make_fermi_dirac(4)}), Kernel({make_power(4, 2.0)}), Kernel({make_quadratic(4)})};
  for (const Kernel& k : kernels) {
    for (double delta : {0.5, 1.0, 2.0}) {
      auto r = check_dkc_empirical(k, delta, 2000, seed);
      r.note = k.blocks()[0]->kind() + " delta=" + std::to_string(delta);
      reports.push_back(std::move(r));
    }
    auto r = check_sandwich(k, 2000, seed);
    r.note = k.blocks()[0]->kind();
    reports.push_back(std::move(r));
  }

  {
    DatasetSpec spec;
    spec.kind = ProblemKind::PhaseRetrieval;
    spec.d = 4;
    spec.n = 16;
    spec.seed = seed;
    FiniteSumProblem p = make_phase_retrieval(spec);
    const double l_est = estimate_relative_L(p, 400, seed);
    std::cerr << "estimated relative L = " << l_est
              << " (sampled lower-bound estimate, 1.5x safety factor included)\n";
    reports.push_back(check_dual_lipschitz(p, 2000, 1.0, seed, l_est));

    SolverConfig sc;
    sc.scheme = SchemeKind::UniformReshuffle;
    sc.schedule.kind = ScheduleKind::Fixed;
    const double g_est = estimate_gradient_bound(p, 400, seed);
    const StepCaps caps = theoretical_step_cap(p, sc.delta, l_est, g_est);
    sc.schedule.alpha = caps.per_sample;
    sc.epochs = 50;
    sc.caps = caps;
    const RunResult run_result = run(p, sc);
    reports.push_back(check_descent(run_result));
    reports.push_back(check_error_bound(run_result, l_est, /*multiblock=*/false));
    reports.push_back(
        check_error_bound_expectation(p, caps.per_sample, sc.delta, 32, seed, l_est));
    reports.push_back(check_bridge(p, run_result));
  }

  fs::create_directories(cfg.out_dir);
  const std::string path = cfg.out_dir + "/lemma_reports.csv";
  write_reports_csv(path, reports, cfg.config_hash());
  int failed = 0;
  for (const auto& r : reports) {
    std::cout << (r.pass ? "pass " : "FAIL ") << r.lemma_id << " max_ratio=" << r.max_ratio
              << (r.note.empty() ? "" : " (" + r.note + ")") << "\n";
    failed += r.pass ? 0 : 1;
  }
  std::cout << "wrote " << path << "\n";
  return failed == 0 ? kExitOk : 1;
}

int cmd_gen_data(const CommonArgs& args) {
  const RunConfig cfg = load_config(args);
  fs::create_directories(cfg.out_dir);
  const std::string path = cfg.out_dir + "/" + to_string(cfg.problem.kind) + "_data.csv";
  dump_dataset_csv(cfg.problem, path);
  std::cout << "wrote " << path << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mirror-descent experiment runner"};
  app.require_subcommand(1);

  CommonArgs args;
  std::string trace_path, reference_path;

  auto add_common = [&](CLI::App* sub, bool need_config = true) {
    auto* opt = sub->add_option("--config", args.config_path, "flat key=value config file");
    if (need_config) opt->required();
    sub->add_option("--out", args.out_dir, "output directory override");
    sub->add_option("--seed", args.seed, "master seed override")
        ->each([&](const std::string&) { args.seed_set = true; });
    sub->add_option("--threads", args.threads, "worker threads for grid cells");
  };

  auto* run_cmd = app.add_subcommand("run", "grid x repetitions solver runs");
  add_common(run_cmd);
  auto* ref_cmd = app.add_subcommand("reference", "full-batch reference solution");
  add_common(ref_cmd);
  auto* relerr_cmd = app.add_subcommand("relerr", "relative-error curve from a trace");
  add_common(relerr_cmd);
  relerr_cmd->add_option("--trace", trace_path, "trace CSV")->required();
  relerr_cmd->add_option("--reference", reference_path, "reference JSON")->required();
  auto* cmplx_cmd = app.add_subcommand("complexity", "stationarity slope study over T");
  add_common(cmplx_cmd);
  auto* lemmas_cmd = app.add_subcommand("lemmas", "run the inequality falsification suite");
  add_common(lemmas_cmd);
  auto* gen_cmd = app.add_subcommand("gen-data", "dump the generated dataset as CSV");
  add_common(gen_cmd);

  CLI11_PARSE(app, argc, argv);

  try {
    if (run_cmd->parsed()) return cmd_run(args);
    if (ref_cmd->parsed()) return cmd_reference(args);
    if (relerr_cmd->parsed()) return cmd_relerr(args, trace_path, reference_path);
    if (cmplx_cmd->parsed()) return cmd_complexity(args);
    if (lemmas_cmd->parsed()) return cmd_lemmas(args);
    if (gen_cmd->parsed()) return cmd_gen_data(args);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DivergenceDetected& e) {
    std::cerr << "divergence: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const BudgetExhausted& e) {
    std::cerr << "budget exhausted: " << e.what() << "\n";
    return kExitBudget;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kExitOk;
}
