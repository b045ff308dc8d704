// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Every tolerance, seed, and instance size is pinned here.

#include <chrono>
#include <exception>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <vector>

#include "oracles.hpp"
#include "rrmd/compose.hpp"
#include "rrmd/diagnostics.hpp"
#include "rrmd/experiments.hpp"

using namespace rrmd;

namespace {

int g_failures = 0;

class Criterion {
 public:
  Criterion(int number, std::string label)
      : number_(number),
        label_(std::move(label)),
        start_(std::chrono::steady_clock::now()),
        exceptions_at_entry_(std::uncaught_exceptions()) {}

  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

  void require(bool ok, const std::string& what) {
    if (!ok) {
      failed_details_.push_back(what);
    }
  }

  ~Criterion() {
    if (std::uncaught_exceptions() > exceptions_at_entry_) {
      failed_details_.push_back("aborted by an exception");
    }
    const bool ok = failed_details_.empty();
    std::printf("%s criterion %2d: %s (%.2fs)\n", ok ? "PASS" : "FAIL", number_, label_.c_str(),
                seconds());
    for (const auto& d : failed_details_) std::printf("      - %s\n", d.c_str());
    if (!ok) ++g_failures;
  }

 private:
  int number_;
  std::string label_;
  std::chrono::steady_clock::time_point start_;
  int exceptions_at_entry_;
  std::vector<std::string> failed_details_;
};

std::vector<Kernel> five_builtin_kernels() {
  return {Kernel({make_shannon(4)}), Kernel({make_regularized_burg(4, 1.0)}),
          Kernel({make_fermi_dirac(4)}), Kernel({make_power(4, 2.0)}),
          Kernel({make_quadratic(4)})};
}

Kernel affine_composition() {
  Mat a(3, 3);
  a << 2.0, 0.3, 0.0, 0.1, 1.5, -0.2, 0.0, 0.4, 1.1;
  return compose_affine(Kernel({make_power(3, 2.0)}), a, Vec::Zero(3));
}

Kernel conic_composition() {
  return combine_conic(Kernel({make_shannon(3)}), Kernel({make_quadratic(3)}), 1.0, 1.0);
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

// ---------------------------------------------------------------------------

void criterion_1_roundtrip() {
  Criterion c(1, "mirror-map roundtrip, 1000 points per kernel at 1e-10 (1 + ||x||)");
  std::vector<Kernel> kernels = five_builtin_kernels();
  kernels.push_back(affine_composition());
  kernels.push_back(conic_composition());
  for (const Kernel& k : kernels) {
    RngStream rng = RngStream::from_seed(101, "acc-roundtrip");
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
      const Vec x = k.sample_interior(rng);
      const Vec back = k.inverse_mirror_map(k.mirror_map(x));
      worst = std::max(worst, (back - x).norm() / (1.0 + x.norm()));
    }
    c.require(worst <= 1e-10, "kernel " + k.blocks()[0]->kind() + ": worst relative residual " +
                                  fmt(worst));
  }
  c.require(c.seconds() < 5.0, "runtime budget 5 s exceeded");
}

void criterion_2_three_point() {
  Criterion c(2, "three-point identity, 1e4 triples per kernel at 1e-9 scale");
  std::vector<Kernel> kernels = five_builtin_kernels();
  kernels.push_back(affine_composition());
  kernels.push_back(conic_composition());
  for (const Kernel& k : kernels) {
    RngStream rng = RngStream::from_seed(102, "acc-three-point");
    double worst = 0.0;
    for (int i = 0; i < 10000; ++i) {
      const Vec x = k.sample_interior(rng);
      const Vec y = k.sample_interior(rng);
      const Vec z = k.sample_interior(rng);
      const double dxz = k.bregman(x, z);
      const double lhs = dxz - k.bregman(x, y) - k.bregman(y, z);
      const double rhs = (k.mirror_map(y) - k.mirror_map(z)).dot(x - y);
      worst = std::max(worst, std::abs(lhs - rhs) / (1.0 + std::abs(dxz)));
    }
    c.require(worst <= 1e-9,
              "kernel " + k.blocks()[0]->kind() + ": worst residual " + fmt(worst));
  }
  c.require(c.seconds() < 10.0, "runtime budget 10 s exceeded");
}

void criterion_3_without_replacement() {
  Criterion c(3, "without-replacement variance: exact enumeration and Monte Carlo");
  RngStream rng = RngStream::from_seed(103, "acc-wr");
  for (int n = 1; n <= 8; ++n) {
    std::vector<Vec> xs;
    for (int i = 0; i < n; ++i) {
      Vec v(3);
      for (int j = 0; j < 3; ++j) v[j] = rng.normal();
      xs.push_back(v);
    }
    for (int t = 1; t <= n; ++t) {
      const double formula = without_replacement_moments(xs, t).expected_sq_dev;
      const double exact = oracle::without_replacement_enum(xs, t);
      if (std::abs(formula - exact) > 1e-12 * (1.0 + std::abs(exact))) {
        c.require(false, "n=" + std::to_string(n) + " t=" + std::to_string(t) + ": formula " +
                             fmt(formula) + " vs enumeration " + fmt(exact));
      }
    }
  }

  const int n = 100, t = 10, draws = 100000;
  std::vector<Vec> xs;
  for (int i = 0; i < n; ++i) {
    Vec v(4);
    for (int j = 0; j < 4; ++j) v[j] = rng.normal();
    xs.push_back(v);
  }
  const auto closed = without_replacement_moments(xs, t);
  double acc = 0.0, acc_sq = 0.0;
  std::vector<int> idx(n);
  for (int d = 0; d < draws; ++d) {
    for (int i = 0; i < n; ++i) idx[i] = i;
    for (int i = 0; i < t; ++i) {
      const int j = i + static_cast<int>(rng.below(n - i));
      std::swap(idx[i], idx[j]);
    }
    Vec sub = Vec::Zero(4);
    for (int i = 0; i < t; ++i) sub += xs[idx[i]];
    sub /= static_cast<double>(t);
    const double dev = (sub - closed.mean).squaredNorm();
    acc += dev;
    acc_sq += dev * dev;
  }
  const double mc = acc / draws;
  const double se = std::sqrt((acc_sq / draws - mc * mc) / draws);
  c.require(std::abs(mc - closed.expected_sq_dev) <= 3.0 * se,
            "Monte Carlo " + fmt(mc) + " vs formula " + fmt(closed.expected_sq_dev) +
                " exceeds 3 SE = " + fmt(3.0 * se));
  c.require(c.seconds() < 30.0, "runtime budget 30 s exceeded");
}

void criterion_4_dkc_bounds() {
  Criterion c(4, "analytic condition bounds dominate 1e4 sampled pairs per kernel and delta");
  for (const Kernel& k : five_builtin_kernels()) {
    for (double delta : {0.5, 1.0, 2.0}) {
      const auto report = check_dkc_empirical(k, delta, 10000, 104);
      c.require(report.pass, "kernel " + k.blocks()[0]->kind() + " delta " + fmt(delta) +
                                 ": max ratio " + fmt(report.max_ratio));
    }
  }
  c.require(c.seconds() < 60.0, "runtime budget 60 s exceeded");
}

void criterion_5_closedness() {
  Criterion c(5, "affine/conic composition bounds dominate 1e4 sampled pairs each");
  Kernel aff_entropy =
      compose_affine(Kernel({make_shannon(3)}),
                     (Mat(3, 3) << 2.0, 0, 0, 0, 0.5, 0, 0, 0, 1.3).finished(),
                     (Vec(3) << 0.1, 0.0, -0.05).finished());
  Kernel aff_power = affine_composition();
  Kernel con_shannon_quad = conic_composition();
  Kernel con_power_quad =
      combine_conic(Kernel({make_power(3, 2.0)}), Kernel({make_quadratic(3)}), 2.0, 0.5);
  const char* names[] = {"affine(shannon)", "affine(power)", "conic(shannon+quad)",
                         "conic(power+quad)"};
  int i = 0;
  for (const Kernel& k : {aff_entropy, aff_power, con_shannon_quad, con_power_quad}) {
    const auto report = check_dkc_empirical(k, 1.0, 10000, 105 + i);
    c.require(report.pass,
              std::string(names[i]) + ": max ratio " + fmt(report.max_ratio));
    ++i;
  }
}

void criterion_6_dual_lipschitz() {
  Criterion c(6, "dual Lipschitz bound, single-block and multi-block, 1e4 pairs");
  DatasetSpec spec;
  spec.kind = ProblemKind::PhaseRetrieval;
  spec.d = 4;
  spec.n = 16;
  spec.seed = 3;
  const FiniteSumProblem p = make_phase_retrieval(spec);
  const double l_est = estimate_relative_L(p, 500, 106, /*sample_scale=*/2.0);
  const auto single = check_dual_lipschitz(p, 10000, 1.0, 107, l_est);
  c.require(single.pass, "phase retrieval: max ratio " + fmt(single.max_ratio));

  // two-block synthetic: f_i = c_i h + linear, exactly max|c_i|-relative-smooth
  auto kernel = std::make_shared<Kernel>(
      std::vector<BlockKernelPtr>{make_shannon(1), make_power(3, 2.0)});
  const std::vector<double> coeffs = {1.0, 0.6, 0.3, 0.9};
  auto offsets = std::make_shared<std::vector<Vec>>();
  RngStream lin = RngStream::from_seed(108, "acc-linear");
  for (std::size_t i = 0; i < coeffs.size(); ++i) {
    Vec l(4);
    for (int j = 0; j < 4; ++j) l[j] = 0.3 * lin.normal();
    offsets->push_back(l);
  }
  FiniteSumProblem synth;
  synth.n = static_cast<int>(coeffs.size());
  synth.d = 4;
  synth.kernel = kernel;
  synth.component_value = [kernel, coeffs, offsets](int i, const Vec& x) {
    return coeffs[i] * kernel->value(x) + (*offsets)[i].dot(x);
  };
  synth.component_grad = [kernel, coeffs, offsets](int i, const Vec& x) -> Vec {
    return coeffs[i] * kernel->mirror_map(x) + (*offsets)[i];
  };
  synth.L_rel = 1.0;
  synth.f_lower = -1e12;
  RngStream start = RngStream::from_seed(108, "acc-start");
  synth.x_start = kernel->sample_interior(start);

  const auto multi = check_multiblock_lipschitz(synth, 10000, 1.0, 109);
  c.require(multi.pass, "two-block synthetic: max ratio " + fmt(multi.max_ratio));
  c.require(c.seconds() < 120.0, "runtime budget 120 s exceeded");
}

// shared by criteria 7 and 8
RunResult capped_desk_run(const FiniteSumProblem& p, const StepCaps& caps) {
  SolverConfig cfg;
  cfg.scheme = SchemeKind::UniformReshuffle;
  cfg.schedule.kind = ScheduleKind::Fixed;
  cfg.schedule.alpha = caps.per_sample;
  cfg.batch_size = 1;
  cfg.epochs = 200;
  cfg.seed = 110;
  cfg.diagnostics_cadence = 1;
  cfg.delta = caps.delta;
  cfg.caps = caps;
  return run(p, cfg);
}

void criteria_7_8_descent_and_drift() {
  DatasetSpec spec;
  spec.kind = ProblemKind::PhaseRetrieval;
  spec.d = 8;
  spec.n = 32;
  spec.seed = 7;
  const FiniteSumProblem p = make_phase_retrieval(spec);
  const double l_est = estimate_relative_L(p, 500, 111, /*sample_scale=*/2.0);
  const double g_est = estimate_gradient_bound(p, 500, 112, 1.0);
  const StepCaps caps = theoretical_step_cap(p, /*delta=*/1.0, l_est, g_est);
  const RunResult result = capped_desk_run(p, caps);

  {
    Criterion c(7, "per-epoch descent and deterministic error bound over 200 capped epochs");
    c.require(static_cast<int>(result.diags.size()) == 200, "expected 200 diagnostic epochs");
    c.require(result.eq_cap_ok, "schedule exceeded the step cap");
    const auto descent = check_descent(result);
    c.require(descent.pass, "descent max ratio " + fmt(descent.max_ratio) + " " + descent.note);
    const auto err = check_error_bound(result, l_est, /*multiblock=*/false);
    c.require(err.pass, "error bound max ratio " + fmt(err.max_ratio) + " " + err.note);
  }
  {
    Criterion c(8, "intra-epoch dual drift stays below delta/2 on every epoch");
    double worst = 0.0;
    for (const auto& d : result.diags) worst = std::max(worst, d.max_intra_drift);
    c.require(worst <= 0.5 * caps.delta, "worst drift " + fmt(worst));
  }
}

void criterion_9_complexity_slope() {
  Criterion c(9, "stationarity slope over T in {64,128,256,512} is at most -0.5");
  DatasetSpec spec;
  spec.kind = ProblemKind::QuadraticInverse;
  spec.d = 8;
  spec.n = 32;
  spec.seed = 9;
  const SlopeReport report = complexity_study(spec, {64, 128, 256, 512}, SchemeKind::FixedOrder,
                                              ScheduleKind::ConstantIMD, /*repetitions=*/10,
                                              /*base_seed=*/113, /*batch_size=*/1);
  std::string means;
  for (double g : report.mean_sampled_g) means += " " + fmt(g);
  c.require(report.slope <= -0.5, "fitted slope " + fmt(report.slope) + "; means:" + means);
  c.require(c.seconds() < 300.0, "runtime budget 300 s exceeded");
}

double median_best_rel_err(const FiniteSumProblem& p, double f_hat, SchemeKind scheme,
                           double beta, int epochs) {
  const std::vector<double> grid = {1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0};
  double best = std::numeric_limits<double>::infinity();
  for (double a : grid) {
    std::vector<double> errs;
    for (int rep = 0; rep < 5; ++rep) {
      SolverConfig cfg;
      cfg.scheme = scheme;
      cfg.momentum_beta = beta;
      cfg.schedule.kind = ScheduleKind::CappedHarmonic;
      cfg.schedule.alpha = a;
      cfg.schedule.cap = 2e-4;
      cfg.batch_size = 2;  // n / 192
      cfg.epochs = epochs;
      cfg.seed = 1000 + rep;
      cfg.diagnostics_cadence = 0;
      try {
        const RunResult r = run(p, cfg);
        errs.push_back((r.final_f - f_hat) / f_hat);
      } catch (const DivergenceDetected&) {
        errs.push_back(std::numeric_limits<double>::infinity());
      } catch (const RootFindFailure&) {
        errs.push_back(std::numeric_limits<double>::infinity());
      } catch (const NumericOverflow&) {
        errs.push_back(std::numeric_limits<double>::infinity());
      }
    }
    std::sort(errs.begin(), errs.end());
    best = std::min(best, errs[errs.size() / 2]);
  }
  return best;
}

void criterion_10_scheme_ordering() {
  Criterion c(10, "desk phase retrieval ordering: RRMD <= SMD and RRMD-M <= RRMD");
  DatasetSpec spec;
  spec.kind = ProblemKind::PhaseRetrieval;
  spec.d = 64;
  spec.n = 384;
  spec.seed = 42;
  const FiniteSumProblem p = make_phase_retrieval(spec);
  const ReferenceSolution ref = compute_reference(p, 1e-8, 50000);
  const int epochs = 100;
  const double smd = median_best_rel_err(p, ref.f_hat, SchemeKind::WithReplacement, 0.0, epochs);
  const double rrmd = median_best_rel_err(p, ref.f_hat, SchemeKind::UniformReshuffle, 0.0, epochs);
  const double rrmd_m =
      median_best_rel_err(p, ref.f_hat, SchemeKind::UniformReshuffle, 0.9, epochs);
  c.require(rrmd <= smd, "RRMD " + fmt(rrmd) + " vs SMD " + fmt(smd));
  c.require(rrmd_m <= rrmd, "RRMD-M " + fmt(rrmd_m) + " vs RRMD " + fmt(rrmd));
}

void criteria_11_12_poisson() {
  DatasetSpec spec;
  spec.kind = ProblemKind::PoissonInverse;
  spec.d = 50;
  spec.n = 1000;
  spec.seed = 5;  // an instance whose optimum is strictly interior
  const FiniteSumProblem p = make_poisson_inverse(spec);

  {
    Criterion c(11, "poisson (50,1000): best-grid rel err <= 1e-3 in 200 passes + bridge");
    const ReferenceSolution ref = compute_reference(p, 1e-8, 50000);
    c.require(ref.grad_norm <= 1e-8, "reference certificate " + fmt(ref.grad_norm));

    double best_err = std::numeric_limits<double>::infinity();
    RunResult best_run;
    for (double a : {1e-2, 1e-1, 1.0, 10.0, 100.0, 1000.0}) {
      SolverConfig cfg;
      cfg.scheme = SchemeKind::UniformReshuffle;
      cfg.schedule.kind = ScheduleKind::CappedHarmonic;
      cfg.schedule.alpha = a;
      cfg.schedule.cap = 1.0;  // alpha_k = min(1, a / k)
      cfg.batch_size = 5;      // n / 192
      cfg.epochs = 200;
      cfg.seed = 114;
      cfg.diagnostics_cadence = 10;
      cfg.delta = 4.0;
      try {
        RunResult r = run(p, cfg);
        const double err = (r.final_f - ref.f_hat) / ref.f_hat;
        if (err < best_err) {
          best_err = err;
          best_run = std::move(r);
        }
      } catch (const DivergenceDetected&) {
      }
    }
    c.require(best_err <= 1e-3, "best relative error " + fmt(best_err));
    const auto bridge = check_bridge(p, best_run);
    c.require(bridge.pass,
              "bridge max ratio " + fmt(bridge.max_ratio) + " " + bridge.note);
  }

  {
    Criterion c(12, "poisson last-iterate monitoring with alpha_k = 1/k^0.75");
    SolverConfig cfg;
    cfg.scheme = SchemeKind::UniformReshuffle;
    cfg.schedule.kind = ScheduleKind::Polynomial;
    cfg.schedule.gamma = 0.75;
    cfg.batch_size = 5;
    cfg.epochs = 40000;
    cfg.seed = 115;
    cfg.diagnostics_cadence = 500;
    cfg.delta = 4.0;
    const RunResult r = run(p, cfg);
    double min_gn = std::numeric_limits<double>::infinity();
    for (const auto& rec : r.trace) min_gn = std::min(min_gn, rec.grad_norm);
    c.require(min_gn < 1e-4, "minimum observed gradient norm " + fmt(min_gn));

    double total = 0.0, last_quarter = 0.0;
    for (std::size_t i = 0; i < r.epoch_dual_drift.size(); ++i) {
      total += r.epoch_dual_drift[i];
      if (i >= r.epoch_dual_drift.size() * 3 / 4) last_quarter += r.epoch_dual_drift[i];
    }
    c.require(last_quarter < 0.01 * total,
              "last-quarter path increment " + fmt(last_quarter / total));
  }
}

}  // namespace

int main() {
  std::printf("acceptance suite (%s)\n", kVersion);
  const std::vector<std::pair<const char*, void (*)()>> stages = {
      {"criteria 1", &criterion_1_roundtrip},
      {"criteria 2", &criterion_2_three_point},
      {"criteria 3", &criterion_3_without_replacement},
      {"criteria 4", &criterion_4_dkc_bounds},
      {"criteria 5", &criterion_5_closedness},
      {"criteria 6", &criterion_6_dual_lipschitz},
      {"criteria 7-8", &criteria_7_8_descent_and_drift},
      {"criteria 9", &criterion_9_complexity_slope},
      {"criteria 10", &criterion_10_scheme_ordering},
      {"criteria 11-12", &criteria_11_12_poisson},
  };
  for (const auto& [name, fn] : stages) {
    try {
      fn();
    } catch (const std::exception& e) {
      std::printf("FAIL %s: unexpected exception: %s\n", name, e.what());
      ++g_failures;
    }
  }
  if (g_failures > 0) {
    std::printf("%d criterion(s) FAILED\n", g_failures);
    return 1;
  }
  std::printf("all 12 criteria passed\n");
  return 0;
}
