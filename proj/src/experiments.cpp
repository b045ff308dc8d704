#include "rrmd/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <cstdio>
#include <sstream>
#include <thread>

#include "json.hpp"

namespace rrmd {

std::map<std::string, std::string> parse_flat_config(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  auto trim = [](std::string s) {
    const auto a = s.find_first_not_of(" \t\r");
    const auto b = s.find_last_not_of(" \t\r");
    return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
  };
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
    }
    kv[key] = value;
  }
  return kv;
}

std::map<std::string, std::string> load_flat_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_flat_config(buf.str());
}

namespace {

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config field '" + key + "': cannot parse number from '" + value + "'");
  }
}

long parse_long(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const long v = std::stol(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config field '" + key + "': cannot parse integer from '" + value + "'");
  }
}

}  // namespace

RunConfig RunConfig::from_map(const std::map<std::string, std::string>& kv) {
  RunConfig cfg;
  auto get = [&](const std::string& key) -> const std::string* {
    const auto it = kv.find(key);
    return it == kv.end() ? nullptr : &it->second;
  };

  if (const auto* v = get("problem.kind")) cfg.problem.kind = problem_kind_from_string(*v);
  if (const auto* v = get("problem.d")) cfg.problem.d = static_cast<int>(parse_long("problem.d", *v));
  if (const auto* v = get("problem.n")) cfg.problem.n = static_cast<int>(parse_long("problem.n", *v));
  if (const auto* v = get("problem.noise")) cfg.problem.noise = parse_double("problem.noise", *v);
  if (const auto* v = get("problem.truth_scale")) {
    cfg.problem.truth_scale = parse_double("problem.truth_scale", *v);
  }
  if (const auto* v = get("problem.sigma")) {
    cfg.problem.burg_sigma = parse_double("problem.sigma", *v);
  }
  if (const auto* v = get("problem.seed")) {
    cfg.problem.seed = static_cast<std::uint64_t>(parse_long("problem.seed", *v));
  }

  if (const auto* v = get("solver.scheme")) cfg.solver.scheme = scheme_from_string(*v);
  if (const auto* v = get("solver.schedule")) {
    cfg.solver.schedule.kind = schedule_kind_from_string(*v);
  }
  if (const auto* v = get("solver.alpha")) {
    cfg.solver.schedule.alpha = parse_double("solver.alpha", *v);
  }
  if (const auto* v = get("solver.gamma")) {
    cfg.solver.schedule.gamma = parse_double("solver.gamma", *v);
  }
  if (const auto* v = get("solver.cap")) cfg.solver.schedule.cap = parse_double("solver.cap", *v);
  if (const auto* v = get("solver.momentum")) {
    cfg.solver.momentum_beta = parse_double("solver.momentum", *v);
  }
  if (const auto* v = get("solver.batch")) {
    cfg.solver.batch_size = static_cast<int>(parse_long("solver.batch", *v));
    cfg.batch_explicit = true;
  } else {
    // desk-scale default, scaled down from the reference batch of 128 at
    // n = 24576 (one chunk per 192 samples)
    cfg.solver.batch_size = std::max(1, cfg.problem.n / 192);
  }
  if (const auto* v = get("solver.epochs")) {
    cfg.solver.epochs = static_cast<int>(parse_long("solver.epochs", *v));
  }
  if (const auto* v = get("solver.seed")) {
    cfg.solver.seed = static_cast<std::uint64_t>(parse_long("solver.seed", *v));
  }
  if (const auto* v = get("solver.cadence")) {
    cfg.solver.diagnostics_cadence = static_cast<int>(parse_long("solver.cadence", *v));
  }
  if (const auto* v = get("solver.delta")) cfg.solver.delta = parse_double("solver.delta", *v);
  if (const auto* v = get("solver.step_cap")) {
    cfg.solver.step_cap = parse_double("solver.step_cap", *v);
  }
  if (const auto* v = get("solver.divergence_factor")) {
    cfg.solver.divergence_factor = parse_double("solver.divergence_factor", *v);
  }

  if (const auto* v = get("grid")) {
    std::stringstream ss(*v);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      if (tok.find_first_not_of(" \t") == std::string::npos) continue;
      const double a = parse_double("grid", tok);
      if (!(a > 0.0)) throw ConfigError("config field 'grid': values must be positive");
      cfg.grid.push_back(a);
    }
  }
  if (const auto* v = get("repetitions")) {
    cfg.repetitions = static_cast<int>(parse_long("repetitions", *v));
    if (cfg.repetitions < 1) throw ConfigError("config field 'repetitions': must be >= 1");
  }
  if (const auto* v = get("out")) cfg.out_dir = *v;
  if (const auto* v = get("reference.file")) cfg.reference_file = *v;
  if (const auto* v = get("reference.max_iters")) {
    cfg.reference_max_iters = parse_long("reference.max_iters", *v);
  }
  if (const auto* v = get("reference.tol")) {
    cfg.reference_tol = parse_double("reference.tol", *v);
  }
  if (const auto* v = get("threads")) {
    cfg.threads = static_cast<int>(parse_long("threads", *v));
    if (cfg.threads < 1) throw ConfigError("config field 'threads': must be >= 1");
  }

  static const char* known[] = {
      "problem.kind", "problem.d", "problem.n", "problem.noise", "problem.truth_scale",
      "problem.sigma", "problem.seed", "solver.scheme", "solver.schedule", "solver.alpha",
      "solver.gamma", "solver.cap", "solver.momentum", "solver.batch", "solver.epochs",
      "solver.seed", "solver.cadence", "solver.delta", "solver.step_cap",
      "solver.divergence_factor", "grid", "repetitions", "out", "reference.file",
      "reference.max_iters", "reference.tol", "threads", "complexity.epochs"};
  for (const auto& [key, value] : kv) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw ConfigError("config field '" + key + "': unknown key");
  }

  cfg.problem.validate();
  return cfg;
}

RunConfig RunConfig::from_file(const std::string& path) {
  return from_map(load_flat_config(path));
}

std::string RunConfig::canonical_text() const {
  std::ostringstream out;
  out.precision(17);
  out << "problem.kind=" << to_string(problem.kind) << "\nproblem.d=" << problem.d
      << "\nproblem.n=" << problem.n << "\nproblem.noise=" << problem.noise
      << "\nproblem.truth_scale=" << problem.truth_scale << "\nproblem.sigma="
      << problem.burg_sigma << "\nproblem.seed=" << problem.seed << "\nsolver.scheme="
      << to_string(solver.scheme) << "\nsolver.schedule=" << to_string(solver.schedule.kind)
      << "\nsolver.alpha=" << solver.schedule.alpha << "\nsolver.gamma=" << solver.schedule.gamma
      << "\nsolver.cap=" << solver.schedule.cap << "\nsolver.momentum=" << solver.momentum_beta
      << "\nsolver.batch=" << solver.batch_size << "\nsolver.epochs=" << solver.epochs
      << "\nsolver.seed=" << solver.seed << "\nsolver.cadence=" << solver.diagnostics_cadence
      << "\nsolver.delta=" << solver.delta << "\nrepetitions=" << repetitions << "\n";
  if (solver.step_cap) out << "solver.step_cap=" << *solver.step_cap << "\n";
  out << "grid=";
  for (std::size_t i = 0; i < grid.size(); ++i) out << (i ? "," : "") << grid[i];
  out << "\n";
  return out.str();
}

std::uint64_t RunConfig::config_hash() const { return fnv1a64(canonical_text()); }

ReferenceSolution compute_reference(const FiniteSumProblem& p, double tol, long max_iters) {
  const Kernel& kernel = *p.kernel;
  Vec x = p.x_start;
  double f = p.full_value(x);
  double alpha = 1.0;
  double best_norm = std::numeric_limits<double>::infinity();
  for (long it = 0; it < max_iters; ++it) {
    const Vec g = p.full_grad(x);
    const double gn = g.norm();
    best_norm = std::min(best_norm, gn);
    if (gn <= tol) return {x, f, gn, it};

    const Vec trial = mirror_step(kernel, x, g, alpha);
    const double f_trial = p.full_value(trial);
    const double majorant =
        f + g.dot(trial - x) + kernel.bregman(trial, x) / alpha + 1e-12 * (1.0 + std::abs(f));
    if (f_trial <= majorant) {
      x = trial;
      f = f_trial;
      alpha = std::min(alpha * 1.25, 1e12);
    } else {
      alpha *= 0.5;
      if (alpha < 1e-18) break;
    }
  }
  throw BudgetExhausted("compute_reference: certificate not reached, best gradient norm " +
                        std::to_string(best_norm));
}

void save_reference(const ReferenceSolution& ref, const std::string& path,
                    std::uint64_t seed, std::uint64_t config_hash) {
  nlohmann::json j;
  j["seed"] = seed;
  {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%llx", static_cast<unsigned long long>(config_hash));
    j["config"] = buf;
  }
  j["x"] = std::vector<double>(ref.x_hat.data(), ref.x_hat.data() + ref.x_hat.size());
  j["f"] = ref.f_hat;
  j["grad_norm"] = ref.grad_norm;
  j["iterations"] = ref.iterations;
  j["version"] = kVersion;
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open reference output file: " + path);
  out << j.dump(2) << "\n";
}

ReferenceSolution load_reference(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open reference file: " + path);
  nlohmann::json j;
  in >> j;
  ReferenceSolution ref;
  const auto xs = j.at("x").get<std::vector<double>>();
  ref.x_hat = Eigen::Map<const Vec>(xs.data(), static_cast<long>(xs.size()));
  ref.f_hat = j.at("f").get<double>();
  ref.grad_norm = j.at("grad_norm").get<double>();
  ref.iterations = j.value("iterations", 0L);
  return ref;
}

std::vector<RelErrPoint> relative_error_curve(const std::vector<TraceRecord>& trace,
                                              double f_hat, int n) {
  const bool degenerate = !(f_hat > 1e-300);
  std::vector<RelErrPoint> curve;
  curve.reserve(trace.size());
  for (const auto& rec : trace) {
    RelErrPoint pt;
    pt.epoch = rec.epoch;
    pt.data_passes = rec.cum_samples / std::max(1, n);
    pt.absolute = degenerate;
    pt.value = degenerate ? rec.f - f_hat : (rec.f - f_hat) / f_hat;
    curve.push_back(pt);
  }
  return curve;
}

void write_trace_csv(const std::string& path, const std::vector<TraceRecord>& trace,
                     std::uint64_t seed, std::uint64_t config_hash,
                     const std::string& scheme) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open trace output file: " + path);
  out << "# seed=" << seed << ",config=" << std::hex << config_hash << std::dec
      << ",version=" << kVersion;
  if (!scheme.empty()) out << ",scheme=" << scheme;
  out << "\n";
  out << "epoch,f,grad_norm,g_measure,alpha,dual_drift,max_intra_drift,cum_samples,wall_ms\n";
  out.precision(17);
  for (const auto& r : trace) {
    out << r.epoch << "," << r.f << "," << r.grad_norm << "," << r.g_measure << "," << r.alpha
        << "," << r.dual_drift << "," << r.max_intra_drift << "," << r.cum_samples << ","
        << r.wall_ms << "\n";
  }
}

std::vector<TraceRecord> read_trace_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open trace file: " + path);
  std::vector<TraceRecord> trace;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#' || line.rfind("epoch,", 0) == 0) continue;
    std::stringstream ss(line);
    std::string tok;
    std::vector<std::string> cols;
    while (std::getline(ss, tok, ',')) cols.push_back(tok);
    if (cols.size() != 9) throw ConfigError("trace file " + path + ": malformed row");
    TraceRecord r;
    r.epoch = static_cast<int>(parse_long("epoch", cols[0]));
    r.f = std::stod(cols[1]);
    r.grad_norm = std::stod(cols[2]);
    r.g_measure = std::stod(cols[3]);
    r.alpha = std::stod(cols[4]);
    r.dual_drift = std::stod(cols[5]);
    r.max_intra_drift = std::stod(cols[6]);
    r.cum_samples = parse_long("cum_samples", cols[7]);
    r.wall_ms = std::stod(cols[8]);
    trace.push_back(r);
  }
  return trace;
}

void write_relative_error_csv(const std::string& path, const std::vector<RelErrPoint>& curve,
                              std::uint64_t seed, std::uint64_t config_hash) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open relative-error output file: " + path);
  out << "# seed=" << seed << ",config=" << std::hex << config_hash << std::dec
      << ",version=" << kVersion << "\n";
  out << "epoch,data_passes,value,absolute\n";
  out.precision(17);
  for (const auto& pt : curve) {
    out << pt.epoch << "," << pt.data_passes << "," << pt.value << "," << (pt.absolute ? 1 : 0)
        << "\n";
  }
}

GridRunSummary run_grid(const RunConfig& cfg, const FiniteSumProblem& p, double f_hat,
                        bool write_traces) {
  std::vector<double> alphas = cfg.grid;
  if (alphas.empty()) alphas.push_back(cfg.solver.schedule.alpha);

  struct Cell {
    double alpha;
    int rep;
  };
  std::vector<Cell> cells;
  for (double a : alphas) {
    for (int rep = 0; rep < cfg.repetitions; ++rep) cells.push_back({a, rep});
  }

  GridRunSummary summary;
  summary.cells.resize(cells.size());
  const std::uint64_t config_hash = cfg.config_hash();
  if (write_traces) std::filesystem::create_directories(cfg.out_dir);

  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= cells.size()) return;
      const Cell& cell = cells[i];
      SolverConfig sc = cfg.solver;
      sc.schedule.alpha = cell.alpha;
      sc.seed = cfg.solver.seed + static_cast<std::uint64_t>(cell.rep);

      GridCellSummary& out = summary.cells[i];
      out.alpha = cell.alpha;
      out.seed = sc.seed;
      try {
        const RunResult result = run(p, sc);
        out.final_f = result.final_f;
        out.final_grad_norm = result.final_grad_norm;
        out.final_rel_err =
            f_hat > 1e-300 ? (result.final_f - f_hat) / f_hat : result.final_f - f_hat;
        out.min_g = result.min_g;
        out.sampled_g = result.sampled_g;
        if (write_traces) {
          std::ostringstream name;
          name << cfg.out_dir << "/trace_a" << cell.alpha << "_s" << sc.seed << ".csv";
          out.trace_file = name.str();
          write_trace_csv(out.trace_file, result.trace, sc.seed, config_hash,
                         to_string(sc.scheme));
        }
      } catch (const DivergenceDetected&) {
        out.diverged = true;
      } catch (const RootFindFailure&) {
        // dual iterate exploded before the f-based guard could trip
        out.diverged = true;
      } catch (const NumericOverflow&) {
        out.diverged = true;
      }
    }
  };

  if (cfg.threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < cfg.threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  // best alpha = argmin of the median final relative error across repetitions
  double best_alpha = 0.0;
  double best_median = std::numeric_limits<double>::infinity();
  for (double a : alphas) {
    std::vector<double> errs;
    for (const auto& cell : summary.cells) {
      if (cell.alpha == a && !cell.diverged) errs.push_back(cell.final_rel_err);
    }
    if (errs.empty()) continue;
    std::sort(errs.begin(), errs.end());
    const double median = errs[errs.size() / 2];
    if (median < best_median) {
      best_median = median;
      best_alpha = a;
    }
  }
  summary.best_alpha = best_alpha;
  summary.best_median_rel_err = best_median;
  for (const auto& cell : summary.cells) summary.diverged_cells += cell.diverged ? 1 : 0;
  if (summary.diverged_cells == static_cast<int>(summary.cells.size())) {
    throw DivergenceDetected("run_grid: every grid cell diverged");
  }
  return summary;
}

void write_grid_summary_csv(const std::string& path, const GridRunSummary& summary,
                            const RunConfig& cfg) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open summary output file: " + path);
  out << "# seed=" << cfg.solver.seed << ",config=" << std::hex << cfg.config_hash() << std::dec
      << ",version=" << kVersion << "\n";
  out << "alpha,seed,diverged,final_f,final_grad_norm,final_rel_err,min_g,sampled_g,"
         "trace_file\n";
  out.precision(17);
  for (const auto& c : summary.cells) {
    out << c.alpha << "," << c.seed << "," << (c.diverged ? 1 : 0) << "," << c.final_f << ","
        << c.final_grad_norm << "," << c.final_rel_err << "," << c.min_g << "," << c.sampled_g
        << "," << c.trace_file << "\n";
  }
  out << "# best_alpha=" << summary.best_alpha
      << ",best_median_rel_err=" << summary.best_median_rel_err
      << ",diverged_cells=" << summary.diverged_cells << "\n";
}

nlohmann::json run_summary_json(const RunResult& result) {
  nlohmann::json j;
  j["final_f"] = result.final_f;
  j["final_grad_norm"] = result.final_grad_norm;
  j["min_g"] = result.min_g;
  j["min_g_epoch"] = result.min_g_epoch;
  j["sampled_g"] = result.sampled_g;
  j["sampled_epoch"] = result.sampled_epoch;
  j["cap_ok"] = result.eq_cap_ok;
  j["rr_cap_ok"] = result.rr_cap_ok;
  j["clamp_events"] = result.clamp_events;
  j["version"] = kVersion;
  return j;
}

double fit_loglog_slope(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size() || xs.size() < 2) {
    throw ConfigError("fit_loglog_slope: need at least two points");
  }
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double lx = std::log(xs[i]);
    const double ly = std::log(ys[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double n = static_cast<double>(xs.size());
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

SlopeReport complexity_study(const DatasetSpec& spec, const std::vector<int>& epoch_grid,
                             SchemeKind scheme, ScheduleKind schedule, int repetitions,
                             std::uint64_t base_seed, int batch_size) {
  if (epoch_grid.size() < 4) throw ConfigError("complexity_study: need >= 4 grid points");
  const FiniteSumProblem p = make_problem(spec);

  SlopeReport report;
  for (int epochs : epoch_grid) {
    double acc = 0.0;
    int counted = 0;
    for (int rep = 0; rep < repetitions; ++rep) {
      SolverConfig sc;
      sc.scheme = scheme;
      sc.schedule.kind = schedule;
      sc.batch_size = batch_size;
      sc.epochs = epochs;
      sc.seed = base_seed + static_cast<std::uint64_t>(rep);
      sc.diagnostics_cadence = 0;  // only the sampled iterate's measure is needed
      const RunResult result = run(p, sc);
      acc += result.sampled_g;
      ++counted;
    }
    report.epochs_grid.push_back(epochs);
    report.mean_sampled_g.push_back(acc / counted);
  }

  std::vector<double> xs(report.epochs_grid.begin(), report.epochs_grid.end());
  report.slope = fit_loglog_slope(xs, report.mean_sampled_g);
  return report;
}

void write_slope_report_csv(const std::string& path, const SlopeReport& report,
                            std::uint64_t seed, std::uint64_t config_hash) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open slope report file: " + path);
  out << "# seed=" << seed << ",config=" << std::hex << config_hash << std::dec
      << ",version=" << kVersion << "\n";
  out << "epochs,mean_sampled_g\n";
  out.precision(17);
  for (std::size_t i = 0; i < report.epochs_grid.size(); ++i) {
    out << report.epochs_grid[i] << "," << report.mean_sampled_g[i] << "\n";
  }
  out << "# slope=" << report.slope << "\n";
}

}  // namespace rrmd
