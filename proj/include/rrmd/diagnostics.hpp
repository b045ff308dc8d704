#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rrmd/solver.hpp"

namespace rrmd {

// Tolerance for the mathematically non-strict inequalities: floating-point
// noise in near-tight cases is absorbed, nothing else.
inline constexpr double kViolationTol = 1e-8;

// A falsification result: `max_ratio` is the worst LHS/RHS seen; pass means
// max_ratio <= 1 + kViolationTol. A failing report stores the witness inputs
// so the violation can be replayed.
struct LemmaReport {
  std::string lemma_id;
  int trials = 0;
  double max_ratio = 0.0;
  bool pass = true;
  std::uint64_t seed = 0;
  std::vector<Vec> witness;
  std::string note;
};

void write_reports_csv(const std::string& path, const std::vector<LemmaReport>& reports,
                       std::uint64_t config_hash = 0);

// Equispaced dual samples between grad h(x) and grad h(y), mapped back to the
// primal space. `count` includes both endpoints.
std::vector<Vec> dual_segment_preimage(const Kernel& k, const Vec& x, const Vec& y, int count);

// Realized condition number vs. the analytic bound on random pairs whose
// per-sub-block dual distance stays below delta.
LemmaReport check_dkc_empirical(const Kernel& k, double delta, int trials, std::uint64_t seed);

// rho^2/(2 L_j) <= D_{h_j}(y, x) <= rho^2/(2 mu_j) and ||x - y|| <= rho/mu_j
// with the curvature stats taken over the dual-segment preimage.
LemmaReport check_sandwich(const Kernel& k, int trials, std::uint64_t seed, double radius = 1.0);

// ||grad f(x) - grad f(y)|| <= L sqrt(kappa) rho_h(x, y) on dual-segment
// regions (single-block kernels).
LemmaReport check_dual_lipschitz(const FiniteSumProblem& p, int trials, double radius,
                                 std::uint64_t seed, std::optional<double> L = std::nullopt);

// Block-weighted variant with the gamma inflation constant (>= 2 sub-blocks).
LemmaReport check_multiblock_lipschitz(const FiniteSumProblem& p, int trials, double radius,
                                       std::uint64_t seed,
                                       std::optional<double> L = std::nullopt);

// Per-epoch descent: f(x^{k+1}) + D_h(x^k, x^{k+1})/(2 n alpha) <= f(x^k) + eps_k.
LemmaReport check_descent(const RunResult& run);

// Deterministic error bound eps_k <= Gamma^2 kappa_delta (kappa_delta L G)^2
// / (2 mu) * (n alpha)^3, with the Gamma factor dropped for single-block
// kernels and G the realized per-epoch component-gradient bound.
LemmaReport check_error_bound(const RunResult& run, double L, bool multiblock);

// Expectation variant of the error bound under uniform reshuffling: the
// first-epoch error term (all runs share x^1, so its conditional expectation
// is estimable) is averaged over independently seeded permutations and
// compared to 4 L^2 (kappa_delta n alpha)^3 G(x^1)
//            + 4 (kappa_delta L G)^2 / mu * n^2 alpha^3.
LemmaReport check_error_bound_expectation(const FiniteSumProblem& p, double alpha, double delta,
                                          int seeds, std::uint64_t base_seed, double L);

// Stationarity bridge at every diagnostic epoch:
//   sum_j ||grad_[j] f||^2 / mu_j <= 2 kappa_delta G(x^k)   and
//   G(x^k) <= 2 kappa_delta D_h(x^k, x^{k+1}) / (n alpha)^2 + 2 eps_k/(n alpha).
LemmaReport check_bridge(const FiniteSumProblem& p, const RunResult& run);

}  // namespace rrmd
