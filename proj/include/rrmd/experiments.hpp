#pragma once

#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "rrmd/diagnostics.hpp"

namespace rrmd {

// Flat "key = value" config text with dotted section keys and '#' comments.
std::map<std::string, std::string> parse_flat_config(const std::string& text);
std::map<std::string, std::string> load_flat_config(const std::string& path);

struct RunConfig {
  DatasetSpec problem;
  SolverConfig solver;
  std::vector<double> grid;  // empty => single run at the schedule's default alpha
  int repetitions = 1;
  std::string out_dir = "out";
  std::string reference_file;  // optional precomputed reference solution
  long reference_max_iters = 50000;
  double reference_tol = 1e-8;
  int threads = 1;
  bool batch_explicit = false;  // batch came from the config rather than the default

  static RunConfig from_map(const std::map<std::string, std::string>& kv);
  static RunConfig from_file(const std::string& path);

  std::string canonical_text() const;
  std::uint64_t config_hash() const;
};

struct ReferenceSolution {
  Vec x_hat;
  double f_hat = 0.0;
  double grad_norm = 0.0;
  long iterations = 0;
};

// Full-batch mirror descent with Bregman backtracking until the gradient-norm
// certificate ||grad f(x)|| <= tol holds. Throws BudgetExhausted (with the
// best norm achieved) when the iteration budget runs out first.
ReferenceSolution compute_reference(const FiniteSumProblem& p, double tol = 1e-8,
                                    long max_iters = 50000);

void save_reference(const ReferenceSolution& ref, const std::string& path,
                    std::uint64_t seed = 0, std::uint64_t config_hash = 0);
ReferenceSolution load_reference(const std::string& path);

struct RelErrPoint {
  int epoch = 0;
  long data_passes = 0;
  double value = 0.0;
  bool absolute = false;  // set when the reference value is degenerate
};

std::vector<RelErrPoint> relative_error_curve(const std::vector<TraceRecord>& trace,
                                              double f_hat, int n);

void write_trace_csv(const std::string& path, const std::vector<TraceRecord>& trace,
                     std::uint64_t seed, std::uint64_t config_hash,
                     const std::string& scheme = "");
std::vector<TraceRecord> read_trace_csv(const std::string& path);
void write_relative_error_csv(const std::string& path, const std::vector<RelErrPoint>& curve,
                              std::uint64_t seed, std::uint64_t config_hash);

struct GridCellSummary {
  double alpha = 0.0;
  std::uint64_t seed = 0;
  bool diverged = false;
  double final_f = 0.0;
  double final_grad_norm = 0.0;
  double final_rel_err = 0.0;
  double min_g = 0.0;
  double sampled_g = 0.0;
  std::string trace_file;
};

struct GridRunSummary {
  std::vector<GridCellSummary> cells;
  double best_alpha = 0.0;
  double best_median_rel_err = 0.0;
  int diverged_cells = 0;
};

// grid x repetitions cells, concurrently when cfg.threads > 1; per-run
// divergence is recorded, not fatal. Throws DivergenceDetected only when
// every cell diverged.
GridRunSummary run_grid(const RunConfig& cfg, const FiniteSumProblem& p, double f_hat,
                        bool write_traces);

void write_grid_summary_csv(const std::string& path, const GridRunSummary& summary,
                            const RunConfig& cfg);

// structured per-run record: final f, final gradient norm, minimum and
// sampled-iterate stationarity measures, cap-compliance flags
nlohmann::json run_summary_json(const RunResult& result);

double fit_loglog_slope(const std::vector<double>& xs, const std::vector<double>& ys);

struct SlopeReport {
  std::vector<int> epochs_grid;
  std::vector<double> mean_sampled_g;
  double slope = 0.0;
};

// For each epoch budget T: run with the scheme-matched constant step,
// average the stationarity measure of the alpha-weighted sampled iterate
// over repetitions, then fit the log-log slope against T.
SlopeReport complexity_study(const DatasetSpec& spec, const std::vector<int>& epoch_grid,
                             SchemeKind scheme, ScheduleKind schedule, int repetitions,
                             std::uint64_t base_seed, int batch_size = 1);

void write_slope_report_csv(const std::string& path, const SlopeReport& report,
                            std::uint64_t seed, std::uint64_t config_hash = 0);

}  // namespace rrmd
