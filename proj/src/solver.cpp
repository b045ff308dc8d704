#include "rrmd/solver.hpp"

#include <chrono>
#include <cmath>
#include <limits>

#include "rrmd/compose.hpp"

namespace rrmd {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

std::string to_string(ScheduleKind kind) {
  switch (kind) {
    case ScheduleKind::ConstantIMD: return "constant_imd";
    case ScheduleKind::ConstantRR: return "constant_rr";
    case ScheduleKind::Polynomial: return "polynomial";
    case ScheduleKind::CappedHarmonic: return "capped_harmonic";
    case ScheduleKind::Fixed: return "fixed";
  }
  return "?";
}

ScheduleKind schedule_kind_from_string(const std::string& name) {
  if (name == "constant_imd") return ScheduleKind::ConstantIMD;
  if (name == "constant_rr") return ScheduleKind::ConstantRR;
  if (name == "polynomial") return ScheduleKind::Polynomial;
  if (name == "capped_harmonic") return ScheduleKind::CappedHarmonic;
  if (name == "fixed") return ScheduleKind::Fixed;
  throw ConfigError("unknown step schedule: " + name);
}

double StepSchedule::at(int epoch, int n, int total_epochs) const {
  switch (kind) {
    case ScheduleKind::ConstantIMD:
      return 1.0 / (n * std::cbrt(static_cast<double>(total_epochs)));
    case ScheduleKind::ConstantRR:
      return 1.0 / (std::pow(static_cast<double>(n), 2.0 / 3.0) *
                    std::cbrt(static_cast<double>(total_epochs)));
    case ScheduleKind::Polynomial:
      return 1.0 / std::pow(static_cast<double>(epoch), gamma);
    case ScheduleKind::CappedHarmonic:
      return std::min(cap, alpha / static_cast<double>(epoch));
    case ScheduleKind::Fixed:
      return alpha;
  }
  throw ConfigError("unreachable schedule kind");
}

void SolverConfig::validate(const FiniteSumProblem& p) const {
  if (momentum_beta < 0.0 || momentum_beta >= 1.0) {
    throw ConfigError("solver: momentum must lie in [0, 1)");
  }
  if (batch_size < 1 || batch_size > p.n) throw ConfigError("solver: batch size must be in [1, n]");
  if (epochs < 0) throw ConfigError("solver: epoch budget must be nonnegative");
  if (schedule.kind == ScheduleKind::Polynomial &&
      (schedule.gamma <= 0.5 || schedule.gamma > 1.0)) {
    throw ConfigError("solver: polynomial schedule needs gamma in (1/2, 1]");
  }
  if (step_cap && !(*step_cap > 0.0)) throw ConfigError("solver: step cap must be positive");
  if (!(delta > 0.0)) throw ConfigError("solver: delta must be positive");
}

StepCaps theoretical_step_cap(const FiniteSumProblem& p, double delta, std::optional<double> L,
                              std::optional<double> G) {
  const double l_const = L ? *L : p.L_rel.value_or(0.0);
  const double g_const = G ? *G : p.G_bound.value_or(0.0);
  if (!(l_const > 0.0) || !(g_const > 0.0)) {
    throw MissingConstants("theoretical_step_cap: L and G must be known or estimated");
  }
  StepCaps caps;
  caps.delta = delta;
  caps.kappa_delta = p.kernel->condition_bound(delta);
  caps.alpha_bar = std::min(1.0 / (2.0 * l_const * caps.kappa_delta), delta / (2.0 * g_const));
  caps.per_sample = caps.alpha_bar / p.n;
  caps.rr_per_sample =
      std::min(1.0 / (7.0 * caps.kappa_delta * caps.kappa_delta * p.n * l_const),
               delta / (2.0 * p.n * g_const));
  const double worst_gamma = std::sqrt(8.0 * p.kernel->sub_block_count());
  caps.multiblock_alpha_bar = std::min(1.0 / (2.0 * worst_gamma * l_const * caps.kappa_delta),
                                       delta / (2.0 * g_const));
  return caps;
}

StepCaps theoretical_step_cap_expected(const FiniteSumProblem& p, double delta,
                                       const SmoothnessFit& fit, double growth_c,
                                       std::optional<double> L) {
  const double gap = std::max(0.0, p.full_value(p.x_start) - p.f_lower);
  const double nu = std::sqrt(fit.A * std::pow(growth_c * gap, fit.tau) + fit.B * fit.B);
  return theoretical_step_cap(p, delta, L, nu);
}

Vec mirror_step(const Kernel& k, const Vec& x, const Vec& v, double alpha) {
  if (!(alpha > 0.0)) throw ConfigError("mirror_step: alpha must be positive");
  return k.inverse_mirror_map(k.mirror_map(x) - alpha * v);
}

namespace {

// Shared single-epoch pass. `momentum` empty => plain mirror descent steps.
EpochResult epoch_pass(const FiniteSumProblem& p, const Vec& x, std::span<const int> order,
                       double alpha, double beta, Vec* momentum, int batch_size,
                       EpochCapture* capture) {
  const Kernel& kernel = *p.kernel;
  kernel.require_interior(x, "run_epoch");
  if (static_cast<int>(order.size()) != p.n) {
    throw ShapeMismatch("run_epoch: order must have length n");
  }

  const Vec w_start = kernel.mirror_map(x);
  Vec w = w_start;
  Vec y = x;
  EpochResult result;
  if (capture) capture->region.add(x);

  const auto& sub_ranges = kernel.sub_block_ranges();
  Vec grad_at_start;  // batch gradient re-evaluated at x^k, only when captured

  for (int pos = 0; pos < p.n; pos += batch_size) {
    const int chunk = std::min(batch_size, p.n - pos);
    Vec g = Vec::Zero(p.d);
    if (capture) grad_at_start = Vec::Zero(p.d);
    for (int i = 0; i < chunk; ++i) {
      const int idx = order[pos + i];
      const Vec gi = p.component_grad(idx, y);
      g += gi;
      if (capture) {
        capture->max_component_grad = std::max(capture->max_component_grad, gi.norm());
        const Vec gi0 = p.component_grad(idx, x);
        capture->max_component_grad = std::max(capture->max_component_grad, gi0.norm());
        grad_at_start += gi0;
      }
    }
    g /= static_cast<double>(chunk);
    if (capture) {
      grad_at_start /= static_cast<double>(chunk);
      const Vec dev = g - grad_at_start;
      for (std::size_t j = 0; j < sub_ranges.size(); ++j) {
        capture->dev_sq[j] += dev.segment(sub_ranges[j].start, sub_ranges[j].len).squaredNorm();
      }
    }

    if (momentum) {
      *momentum = beta * (*momentum) + alpha * g;
      w -= *momentum;
    } else {
      w -= alpha * g;
    }
    y = kernel.inverse_mirror_map(w);
    result.max_intra_drift = std::max(result.max_intra_drift, (w - w_start).norm());
    if (capture) capture->region.add(y);
    ++result.steps;
  }

  result.x_next = std::move(y);
  return result;
}

}  // namespace

EpochResult run_epoch(const FiniteSumProblem& p, const Vec& x, std::span<const int> order,
                      double alpha, int batch_size, EpochCapture* capture) {
  return epoch_pass(p, x, order, alpha, 0.0, nullptr, batch_size, capture);
}

EpochResult run_epoch_momentum(const FiniteSumProblem& p, const Vec& x,
                               std::span<const int> order, double alpha, double beta,
                               Vec& momentum, int batch_size, EpochCapture* capture) {
  return epoch_pass(p, x, order, alpha, beta, &momentum, batch_size, capture);
}

double stationarity_measure(const FiniteSumProblem& p, const Vec& x, double horizon) {
  const Vec x_hat = mirror_step(*p.kernel, x, p.full_grad(x), horizon);
  return p.kernel->bregman(x, x_hat) / (horizon * horizon);
}

int sample_weighted_index(const std::vector<double>& weights, RngStream& rng) {
  double total = 0.0;
  for (double w : weights) total += w;
  if (!(total > 0.0)) throw ConfigError("sample_weighted_index: weights must sum to > 0");
  const double draw = rng.uniform() * total;
  double acc = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    acc += weights[i];
    if (draw < acc) return static_cast<int>(i);
  }
  return static_cast<int>(weights.size()) - 1;
}

RunResult run(const FiniteSumProblem& p, const SolverConfig& cfg) {
  cfg.validate(p);
  const Kernel& kernel = *p.kernel;
  const int total = cfg.epochs;

  Vec x = cfg.x_start ? *cfg.x_start : p.x_start;
  kernel.require_interior(x, "run");

  RunResult result;
  result.final_x = x;
  if (total == 0) {
    result.final_f = p.full_value(x);
    result.final_grad_norm = p.full_grad(x).norm();
    result.sampled_x = x;
    result.min_g = kNaN;
    result.sampled_g = kNaN;
    return result;
  }

  std::vector<double> alphas(total);
  for (int k = 1; k <= total; ++k) {
    double a = cfg.schedule.at(k, p.n, total);
    if (cfg.step_cap) a = std::min(a, *cfg.step_cap);
    alphas[k - 1] = a;
    if (cfg.caps) {
      if (a > cfg.caps->per_sample * (1.0 + 1e-12)) result.eq_cap_ok = false;
      if (a > cfg.caps->rr_per_sample * (1.0 + 1e-12)) result.rr_cap_ok = false;
    }
  }

  RngStream pick_rng = RngStream::from_seed(cfg.seed, "iterate-sample");
  const int sampled_epoch = 1 + sample_weighted_index(alphas, pick_rng);

  SamplingScheme scheme(cfg.scheme, p.n, cfg.seed);
  Vec momentum = Vec::Zero(p.d);
  const double kappa_delta = kernel.condition_bound(cfg.delta);

  double f_curr = p.full_value(x);
  const double f_start = f_curr;
  result.min_g = std::numeric_limits<double>::infinity();
  double sampled_horizon = 0.0;

  const auto t0 = std::chrono::steady_clock::now();
  for (int k = 1; k <= total; ++k) {
    const double alpha = alphas[k - 1];
    const bool diag = cfg.diagnostics_cadence > 0 &&
                      (k % cfg.diagnostics_cadence == 0 || k == 1 || k == total);

    if (k == sampled_epoch) {
      result.sampled_x = x;
      result.sampled_epoch = k;
    }

    const auto order = scheme.next_epoch_order();
    EpochCapture capture(kernel);
    EpochResult epoch =
        cfg.momentum_beta > 0.0
            ? run_epoch_momentum(p, x, order, alpha, cfg.momentum_beta, momentum,
                                 cfg.batch_size, diag ? &capture : nullptr)
            : run_epoch(p, x, order, alpha, cfg.batch_size, diag ? &capture : nullptr);
    const double horizon = epoch.steps * alpha;
    if (k == sampled_epoch) sampled_horizon = horizon;

    const double f_next = p.full_value(epoch.x_next);
    const double drift = kernel.dual_distance(x, epoch.x_next);
    result.epoch_dual_drift.push_back(drift);
    double grad_norm = kNaN;
    double g_measure = kNaN;

    if (diag) {
      const Vec grad = p.full_grad(x);
      grad_norm = grad.norm();
      const Vec x_hat = mirror_step(kernel, x, grad, horizon);
      capture.region.add(x_hat);
      g_measure = kernel.bregman(x, x_hat) / (horizon * horizon);
      if (g_measure < result.min_g) {
        result.min_g = g_measure;
        result.min_g_epoch = k;
      }

      EpochDiag d;
      d.epoch = k;
      d.alpha = alpha;
      d.horizon = horizon;
      d.f_before = f_curr;
      d.f_after = f_next;
      d.breg_fwd = kernel.bregman(x, epoch.x_next);
      d.g_measure = g_measure;
      d.grad_norm = grad_norm;
      d.grad = grad;
      d.max_intra_drift = epoch.max_intra_drift;
      d.max_component_grad = capture.max_component_grad;
      d.region = capture.region.stats();
      std::vector<double> mus;
      mus.reserve(d.region.size());
      double eps = 0.0;
      for (std::size_t j = 0; j < d.region.size(); ++j) {
        mus.push_back(d.region[j].mu);
        eps += capture.dev_sq[j] / d.region[j].mu;
      }
      d.eps_k = 0.5 * kappa_delta * alpha * eps;
      d.gamma = gamma_constant(mus);
      d.kappa_delta = kappa_delta;
      result.diags.push_back(std::move(d));
    }

    if (cfg.diagnostics_cadence == 0 || diag) {
      TraceRecord rec;
      rec.epoch = k;
      rec.f = f_curr;
      rec.grad_norm = grad_norm;
      rec.g_measure = g_measure;
      rec.alpha = alpha;
      rec.dual_drift = drift;
      rec.max_intra_drift = epoch.max_intra_drift;
      rec.cum_samples = static_cast<long>(k) * p.n;
      rec.wall_ms = std::chrono::duration<double, std::milli>(
                        std::chrono::steady_clock::now() - t0)
                        .count();
      result.trace.push_back(rec);
    }

    // the 1e-12 floor keeps a start at (numerically) zero objective from
    // tripping the guard on roundoff
    if (f_next > cfg.divergence_factor * std::max(f_start, 1e-12)) {
      throw DivergenceDetected("run: f exceeded the divergence guard at epoch " +
                               std::to_string(k));
    }
    x = std::move(epoch.x_next);
    f_curr = f_next;
  }

  result.final_x = x;
  result.final_f = f_curr;
  result.final_grad_norm = p.full_grad(x).norm();
  if (result.sampled_epoch > 0) {
    result.sampled_g = stationarity_measure(p, result.sampled_x, sampled_horizon);
  }
  if (!std::isfinite(result.min_g)) result.min_g = kNaN;
  result.clamp_events = kernel.clamp_events();
  return result;
}

}  // namespace rrmd
