#pragma once

#include <optional>
#include <span>
#include <vector>

#include "rrmd/problems.hpp"
#include "rrmd/sampling.hpp"

namespace rrmd {

enum class ScheduleKind {
  ConstantIMD,     // alpha = 1 / (n T^{1/3})
  ConstantRR,      // alpha = 1 / (n^{2/3} T^{1/3})
  Polynomial,      // alpha_k = 1 / k^gamma, gamma in (1/2, 1]
  CappedHarmonic,  // alpha_k = min(cap, alpha / k)
  Fixed,           // alpha_k = alpha
};

std::string to_string(ScheduleKind kind);
ScheduleKind schedule_kind_from_string(const std::string& name);

struct StepSchedule {
  ScheduleKind kind = ScheduleKind::Fixed;
  double alpha = 1e-2;
  double gamma = 0.75;
  double cap = 1e-5;

  // per-sample step for (1-based) epoch k; always positive
  double at(int epoch, int n, int total_epochs) const;
};

// Step-size ceilings implied by the run constants: the general bound
// min{1/(2 L kappa_delta), delta/(2G)} (per sample after dividing by n), the
// reshuffling requirement min{1/(7 kappa_delta^2 n L), delta/(2 n G)}, and
// the multi-block variant with the worst-case sqrt(8m) inflation.
struct StepCaps {
  double alpha_bar = 0.0;
  double per_sample = 0.0;
  double rr_per_sample = 0.0;
  double multiblock_alpha_bar = 0.0;
  double kappa_delta = 0.0;
  double delta = 0.0;
};

StepCaps theoretical_step_cap(const FiniteSumProblem& p, double delta,
                              std::optional<double> L = std::nullopt,
                              std::optional<double> G = std::nullopt);

// Unbounded-gradient mode: nu = sqrt(A (C (f(x1) - f_lower))^tau + B^2)
// replaces G.
StepCaps theoretical_step_cap_expected(const FiniteSumProblem& p, double delta,
                                       const SmoothnessFit& fit, double growth_c = 2.0,
                                       std::optional<double> L = std::nullopt);

struct SolverConfig {
  SchemeKind scheme = SchemeKind::UniformReshuffle;
  StepSchedule schedule;
  double momentum_beta = 0.0;  // 0 disables momentum
  int batch_size = 1;
  int epochs = 100;
  std::uint64_t seed = 1;
  int diagnostics_cadence = 1;  // epochs between diagnostic snapshots; 0 = off
  std::optional<double> step_cap;
  double divergence_factor = 1e6;
  double delta = 1.0;  // dual-radius parameter for condition bounds
  std::optional<StepCaps> caps;  // annotate cap compliance when provided
  std::optional<Vec> x_start;    // overrides the problem's start point

  void validate(const FiniteSumProblem& p) const;
};

struct TraceRecord {
  int epoch = 0;
  double f = 0.0;          // f(x^k), start of epoch
  double grad_norm = 0.0;  // ||grad f(x^k)||
  double g_measure = 0.0;  // stationarity measure, NaN when not evaluated
  double alpha = 0.0;
  double dual_drift = 0.0;       // rho_h(x^k, x^{k+1})
  double max_intra_drift = 0.0;  // max_i rho_h(y^{k,i}, x^k)
  long cum_samples = 0;
  double wall_ms = 0.0;
};

// Per-epoch quantities needed by the inequality checks. `region` covers the
// visited iterates plus the full-gradient proxy point.
struct EpochDiag {
  int epoch = 0;
  double alpha = 0.0;
  double horizon = 0.0;  // steps_per_epoch * alpha
  double f_before = 0.0;
  double f_after = 0.0;
  double breg_fwd = 0.0;  // D_h(x^k, x^{k+1})
  double eps_k = 0.0;     // epoch gradient-deviation error term
  double g_measure = 0.0;
  double grad_norm = 0.0;
  Vec grad;  // full gradient at x^k
  double max_intra_drift = 0.0;
  double max_component_grad = 0.0;  // realized per-component bound this epoch
  std::vector<BlockStats> region;
  double gamma = 0.0;
  double kappa_delta = 0.0;
};

struct RunResult {
  Vec final_x;
  double final_f = 0.0;
  double final_grad_norm = 0.0;
  std::vector<TraceRecord> trace;
  std::vector<EpochDiag> diags;
  Vec sampled_x;  // alpha-weighted draw from {x^1..x^T}
  int sampled_epoch = 0;
  double sampled_g = 0.0;
  double min_g = 0.0;
  int min_g_epoch = 0;
  bool eq_cap_ok = true;  // every alpha_k within caps.per_sample
  bool rr_cap_ok = true;  // every alpha_k within caps.rr_per_sample
  std::vector<double> epoch_dual_drift;  // rho_h(x^k, x^{k+1}) for every epoch
  std::uint64_t clamp_events = 0;
};

// x+ = grad h^*(grad h(x) - alpha v); stays strictly interior
Vec mirror_step(const Kernel& k, const Vec& x, const Vec& v, double alpha);

// Optional per-epoch diagnostics collection (gradient deviations and the
// visited-region accumulator). Costs one extra component gradient per sample.
struct EpochCapture {
  explicit EpochCapture(const Kernel& k)
      : region(k), dev_sq(Vec::Zero(k.sub_block_count())) {}
  RegionAccumulator region;
  Vec dev_sq;  // per sub-block sum of ||batch-grad deviation||^2
  double max_component_grad = 0.0;
};

struct EpochResult {
  Vec x_next;
  double max_intra_drift = 0.0;
  int steps = 0;
};

EpochResult run_epoch(const FiniteSumProblem& p, const Vec& x, std::span<const int> order,
                      double alpha, int batch_size, EpochCapture* capture = nullptr);

// momentum variant: v <- beta v + alpha g, dual step by v; beta = 0 matches
// run_epoch bit for bit
EpochResult run_epoch_momentum(const FiniteSumProblem& p, const Vec& x,
                               std::span<const int> order, double alpha, double beta,
                               Vec& momentum, int batch_size, EpochCapture* capture = nullptr);

// D_h(x, xhat) / horizon^2 with xhat the full-gradient mirror step of length
// `horizon` (= n alpha in the single-sample algorithm)
double stationarity_measure(const FiniteSumProblem& p, const Vec& x, double horizon);

RunResult run(const FiniteSumProblem& p, const SolverConfig& cfg);

int sample_weighted_index(const std::vector<double>& weights, RngStream& rng);

}  // namespace rrmd
