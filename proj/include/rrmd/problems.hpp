#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>

#include "rrmd/kernel.hpp"

namespace rrmd {

enum class ProblemKind { PhaseRetrieval, QuadraticInverse, PoissonInverse };

std::string to_string(ProblemKind kind);
ProblemKind problem_kind_from_string(const std::string& name);

// Generator parameters. The same spec always regenerates bit-identical data.
struct DatasetSpec {
  ProblemKind kind = ProblemKind::PhaseRetrieval;
  int d = 8;
  int n = 32;
  double noise = 0.1;       // phase retrieval: measurement noise std dev
  double truth_scale = 1.0; // scales the synthetic ground truth
  double burg_sigma = 1.0;  // Poisson inverse: kernel regularization weight
  std::uint64_t seed = 1;

  void validate() const;
};

// f(x) = (1/n) sum_i f_i(x) paired with the kernel it is smooth relative to.
// Component evaluators are pure; the problem is immutable after generation.
struct FiniteSumProblem {
  int n = 0;
  int d = 0;
  std::shared_ptr<const Kernel> kernel;
  std::function<double(int, const Vec&)> component_value;
  std::function<Vec(int, const Vec&)> component_grad;
  double f_lower = 0.0;                 // valid lower bound (0 for the built-ins)
  std::optional<double> L_rel;          // relative-smoothness constant, if known
  std::optional<double> G_bound;        // gradient bound; empty = expected-smoothness mode
  Vec x_start;                          // canonical initial point
  Vec x_truth;                          // generator ground truth (when synthetic)
  std::string name;

  double full_value(const Vec& x) const;
  Vec full_grad(const Vec& x) const;
};

FiniteSumProblem make_phase_retrieval(const DatasetSpec& spec);
FiniteSumProblem make_quadratic_inverse(const DatasetSpec& spec);
FiniteSumProblem make_poisson_inverse(const DatasetSpec& spec);
FiniteSumProblem make_problem(const DatasetSpec& spec);

// Sampled estimate of the smallest L with |v' f_i''(x) v| <= L v' h''(x) v,
// inflated by a 1.5 safety factor. Lower-bound based: it samples points and
// takes the exact top generalized eigenvalue at each, so it can only miss
// curvature outside the sampled region.
double estimate_relative_L(const FiniteSumProblem& p, int trials, std::uint64_t seed,
                           double sample_scale = 1.0);

// Sampled per-component gradient-norm bound over a dual ball of the given
// radius around the start point, inflated by 1.5. An estimate, not a proof.
double estimate_gradient_bound(const FiniteSumProblem& p, int trials, std::uint64_t seed,
                               double dual_radius = 1.0);

// Growth bound (1/n) sum ||grad f_i(x)||^2 <= A (f(x) - f_lower)^tau + B^2.
struct SmoothnessFit {
  double A = 0.0;
  double B = 0.0;
  double tau = 0.0;
};

SmoothnessFit fit_expected_smoothness(const FiniteSumProblem& p, double tau, int samples,
                                      std::uint64_t seed, double sample_scale = 1.0);

struct SmoothnessReport {
  double max_ratio = 0.0;  // worst LHS / RHS over the samples
  int violations = 0;      // samples with ratio > 1 + 1e-8
  Vec worst_x;
};

SmoothnessReport expected_smoothness_check(const FiniteSumProblem& p, double A, double B,
                                           double tau, int samples, std::uint64_t seed,
                                           double sample_scale = 1.0);

// CSV snapshot of the generated data matrix (header carries kind, d, n, seed
// and, for the Poisson family, sigma). load_dataset_csv rebuilds the problem
// from the file alone; evaluators match the generated problem exactly.
void dump_dataset_csv(const DatasetSpec& spec, const std::string& path);
FiniteSumProblem load_dataset_csv(const std::string& path);

}  // namespace rrmd
