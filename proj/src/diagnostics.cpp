#include "rrmd/diagnostics.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include "rrmd/compose.hpp"

namespace rrmd {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double safe_ratio(double lhs, double rhs) {
  if (rhs > 0.0) return lhs / rhs;
  return lhs <= 0.0 ? 1.0 : kInf;
}

// y close to x in the dual metric: per_sub caps every sub-block dual
// distance by radius, otherwise the full dual perturbation norm is capped.
std::pair<Vec, Vec> sample_dual_pair(const Kernel& k, RngStream& rng, double radius,
                                     bool per_sub) {
  const Vec x = k.sample_interior(rng);
  Vec w = k.mirror_map(x);
  if (per_sub) {
    for (const BlockRange& range : k.sub_block_ranges()) {
      if (range.len == 1) {
        w[range.start] += radius * rng.uniform(-1.0, 1.0);
      } else {
        Vec dir(range.len);
        for (int c = 0; c < range.len; ++c) dir[c] = rng.normal();
        w.segment(range.start, range.len) += dir * (radius * rng.uniform() / dir.norm());
      }
    }
  } else {
    Vec dir(k.dim());
    for (int c = 0; c < k.dim(); ++c) dir[c] = rng.normal();
    w += dir * (radius * rng.uniform() / dir.norm());
  }
  return {x, k.inverse_mirror_map(w)};
}

}  // namespace

std::vector<Vec> dual_segment_preimage(const Kernel& k, const Vec& x, const Vec& y, int count) {
  const Vec wx = k.mirror_map(x);
  const Vec wy = k.mirror_map(y);
  std::vector<Vec> points;
  points.reserve(count);
  for (int i = 0; i < count; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(count - 1);
    points.push_back(k.inverse_mirror_map(wx + t * (wy - wx)));
  }
  return points;
}

void write_reports_csv(const std::string& path, const std::vector<LemmaReport>& reports,
                       std::uint64_t config_hash) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open report file: " + path);
  out << "# config=" << std::hex << config_hash << std::dec << ",version=" << kVersion << "\n";
  out << "lemma_id,trials,max_ratio,pass,seed,note\n";
  out.precision(17);
  for (const auto& r : reports) {
    out << r.lemma_id << "," << r.trials << "," << r.max_ratio << "," << (r.pass ? 1 : 0) << ","
        << r.seed << "," << r.note << "\n";
  }
}

LemmaReport check_dkc_empirical(const Kernel& k, double delta, int trials, std::uint64_t seed) {
  RngStream rng = RngStream::from_seed(seed, "dkc");
  LemmaReport report;
  report.lemma_id = "dkc_bound";
  report.trials = trials;
  report.seed = seed;

  // per-block analytic bounds, expanded to sub-block granularity
  std::vector<double> bounds;
  for (const auto& b : k.blocks()) {
    const double bound = b->condition_bound(delta);
    for (int s = 0; s < b->sub_blocks(); ++s) bounds.push_back(bound);
  }

  for (int t = 0; t < trials; ++t) {
    const auto [x, y] = sample_dual_pair(k, rng, delta, /*per_sub=*/true);
    const auto rx = k.eig_ranges(x);
    const auto ry = k.eig_ranges(y);
    for (std::size_t j = 0; j < bounds.size(); ++j) {
      const double realized =
          std::max(rx[j].hi, ry[j].hi) / std::min(rx[j].lo, ry[j].lo);
      const double ratio = realized / bounds[j];
      if (ratio > report.max_ratio) {
        report.max_ratio = ratio;
        report.witness = {x, y};
      }
    }
  }
  report.pass = report.max_ratio <= 1.0 + kViolationTol;
  return report;
}

LemmaReport check_sandwich(const Kernel& k, int trials, std::uint64_t seed, double radius) {
  RngStream rng = RngStream::from_seed(seed, "sandwich");
  LemmaReport report;
  report.lemma_id = "bregman_sandwich";
  report.trials = trials;
  report.seed = seed;
  const auto& sub_ranges = k.sub_block_ranges();

  auto pair_ratio = [&](const Vec& x, const Vec& y, int segment_samples) {
    const auto stats = hessian_bounds(k, dual_segment_preimage(k, x, y, segment_samples));
    const Vec rho = k.dual_distance_blocks(x, y);
    const Vec breg = k.sub_bregman(y, x);  // D_{h_j}(y, x)
    double worst = 0.0;
    for (std::size_t j = 0; j < stats.size(); ++j) {
      const double rho_sq = rho[j] * rho[j];
      worst = std::max(worst, safe_ratio(rho_sq / (2.0 * stats[j].cap_l), breg[j]));
      worst = std::max(worst, safe_ratio(breg[j], rho_sq / (2.0 * stats[j].mu)));
      const auto& range = sub_ranges[j];
      const double primal_gap =
          (x.segment(range.start, range.len) - y.segment(range.start, range.len)).norm();
      worst = std::max(worst, safe_ratio(primal_gap, rho[j] / stats[j].mu));
    }
    return worst;
  };

  for (int t = 0; t < trials; ++t) {
    const auto [x, y] = sample_dual_pair(k, rng, radius, /*per_sub=*/true);
    double ratio = pair_ratio(x, y, 64);
    if (ratio > 0.999) ratio = pair_ratio(x, y, 256);
    if (ratio > report.max_ratio) {
      report.max_ratio = ratio;
      report.witness = {x, y};
    }
  }
  report.pass = report.max_ratio <= 1.0 + kViolationTol;
  return report;
}

LemmaReport check_dual_lipschitz(const FiniteSumProblem& p, int trials, double radius,
                                 std::uint64_t seed, std::optional<double> L) {
  const Kernel& k = *p.kernel;
  if (k.block_count() != 1) {
    throw PartitionMismatch("check_dual_lipschitz: single-block kernels only");
  }
  const double l_const = L ? *L : p.L_rel.value_or(0.0);
  if (!(l_const > 0.0)) throw MissingConstants("check_dual_lipschitz: L unavailable");

  RngStream rng = RngStream::from_seed(seed, "dual-lipschitz");
  LemmaReport report;
  report.lemma_id = "dual_lipschitz";
  report.trials = trials;
  report.seed = seed;

  auto pair_ratio = [&](const Vec& x, const Vec& y, int segment_samples) {
    const auto stats = hessian_bounds(k, dual_segment_preimage(k, x, y, segment_samples));
    double top = 0.0, bottom = kInf;
    for (const auto& s : stats) {
      top = std::max(top, s.cap_l);
      bottom = std::min(bottom, s.mu);
    }
    const double kappa = top / bottom;  // whole-matrix condition over the region
    const double rho = k.dual_distance(x, y);
    const double gap = (p.full_grad(x) - p.full_grad(y)).norm();
    return safe_ratio(gap, l_const * std::sqrt(kappa) * rho);
  };

  for (int t = 0; t < trials; ++t) {
    const auto [x, y] = sample_dual_pair(k, rng, radius, /*per_sub=*/false);
    double ratio = pair_ratio(x, y, 64);
    if (ratio > 0.999) ratio = pair_ratio(x, y, 256);
    if (ratio > report.max_ratio) {
      report.max_ratio = ratio;
      report.witness = {x, y};
    }
  }
  report.pass = report.max_ratio <= 1.0 + kViolationTol;
  return report;
}

LemmaReport check_multiblock_lipschitz(const FiniteSumProblem& p, int trials, double radius,
                                       std::uint64_t seed, std::optional<double> L) {
  const Kernel& k = *p.kernel;
  if (k.sub_block_count() < 2) {
    throw PartitionMismatch("check_multiblock_lipschitz: needs >= 2 sub-blocks");
  }
  const double l_const = L ? *L : p.L_rel.value_or(0.0);
  if (!(l_const > 0.0)) throw MissingConstants("check_multiblock_lipschitz: L unavailable");

  RngStream rng = RngStream::from_seed(seed, "multiblock-lipschitz");
  LemmaReport report;
  report.lemma_id = "multiblock_dual_lipschitz";
  report.trials = trials;
  report.seed = seed;
  const auto& sub_ranges = k.sub_block_ranges();

  auto pair_ratio = [&](const Vec& x, const Vec& y, int segment_samples) {
    const auto stats = hessian_bounds(k, dual_segment_preimage(k, x, y, segment_samples));
    double kappa = 0.0;
    std::vector<double> mus;
    mus.reserve(stats.size());
    for (const auto& s : stats) {
      kappa = std::max(kappa, s.kappa);
      mus.push_back(s.mu);
    }
    const double gamma = gamma_constant(mus);
    const Vec rho = k.dual_distance_blocks(x, y);
    const Vec grad_gap = p.full_grad(x) - p.full_grad(y);

    double lhs = 0.0, weighted_rho = 0.0;
    for (std::size_t j = 0; j < stats.size(); ++j) {
      const auto& range = sub_ranges[j];
      lhs += grad_gap.segment(range.start, range.len).squaredNorm() / stats[j].mu;
      weighted_rho += rho[j] * rho[j] / stats[j].mu;
    }
    const double rhs = l_const * l_const * gamma * gamma * kappa * kappa * weighted_rho;
    return safe_ratio(lhs, rhs);
  };

  for (int t = 0; t < trials; ++t) {
    const auto [x, y] = sample_dual_pair(k, rng, radius, /*per_sub=*/true);
    double ratio = pair_ratio(x, y, 64);
    if (ratio > 0.999) ratio = pair_ratio(x, y, 256);
    if (ratio > report.max_ratio) {
      report.max_ratio = ratio;
      report.witness = {x, y};
    }
  }
  report.pass = report.max_ratio <= 1.0 + kViolationTol;
  return report;
}

LemmaReport check_descent(const RunResult& run) {
  LemmaReport report;
  report.lemma_id = "epoch_descent";
  report.trials = static_cast<int>(run.diags.size());
  for (const auto& d : run.diags) {
    const double lhs = d.f_after + d.breg_fwd / (2.0 * d.horizon);
    const double rhs = d.f_before + d.eps_k;
    const double ratio = safe_ratio(lhs, rhs);
    if (ratio > report.max_ratio) {
      report.max_ratio = ratio;
      report.note = "worst epoch " + std::to_string(d.epoch);
    }
  }
  report.pass = report.max_ratio <= 1.0 + kViolationTol;
  return report;
}

LemmaReport check_error_bound(const RunResult& run, double L, bool multiblock) {
  LemmaReport report;
  report.lemma_id = "error_bound";
  report.trials = static_cast<int>(run.diags.size());
  for (const auto& d : run.diags) {
    double mu = kInf;
    for (const auto& s : d.region) mu = std::min(mu, s.mu);
    const double core = d.kappa_delta * L * d.max_component_grad;
    double bound = core * core / (2.0 * mu) * d.horizon * d.horizon * d.horizon;
    if (multiblock) bound *= d.gamma * d.gamma * d.kappa_delta;
    const double ratio = safe_ratio(d.eps_k, bound);
    if (ratio > report.max_ratio) {
      report.max_ratio = ratio;
      report.note = "worst epoch " + std::to_string(d.epoch);
    }
  }
  report.pass = report.max_ratio <= 1.0 + kViolationTol;
  return report;
}

LemmaReport check_error_bound_expectation(const FiniteSumProblem& p, double alpha,
                                          double delta, int seeds, std::uint64_t base_seed,
                                          double L) {
  const Kernel& kernel = *p.kernel;
  const double kappa_delta = kernel.condition_bound(delta);
  const Vec& x1 = p.x_start;
  const double horizon = static_cast<double>(p.n) * alpha;

  double eps_mean = 0.0;
  double mu = std::numeric_limits<double>::infinity();
  double g_realized = 0.0;
  for (int s = 0; s < seeds; ++s) {
    SamplingScheme scheme(SchemeKind::UniformReshuffle, p.n,
                          base_seed + static_cast<std::uint64_t>(s));
    EpochCapture capture(kernel);
    run_epoch(p, x1, scheme.next_epoch_order(), alpha, /*batch_size=*/1, &capture);
    const auto stats = capture.region.stats();
    double eps = 0.0;
    for (std::size_t j = 0; j < stats.size(); ++j) {
      eps += capture.dev_sq[j] / stats[j].mu;
      mu = std::min(mu, stats[j].mu);
    }
    eps_mean += 0.5 * kappa_delta * alpha * eps;
    g_realized = std::max(g_realized, capture.max_component_grad);
  }
  eps_mean /= static_cast<double>(seeds);

  const double g1 = stationarity_measure(p, x1, horizon);
  const double core = kappa_delta * L * g_realized;
  const double bound = 4.0 * L * L * std::pow(kappa_delta * horizon, 3.0) * g1 +
                       4.0 * core * core / mu * p.n * p.n * alpha * alpha * alpha;

  LemmaReport report;
  report.lemma_id = "error_bound_expectation";
  report.trials = seeds;
  report.seed = base_seed;
  report.max_ratio = safe_ratio(eps_mean, bound);
  report.pass = report.max_ratio <= 1.0 + kViolationTol;
  report.witness = {x1};
  return report;
}

LemmaReport check_bridge(const FiniteSumProblem& p, const RunResult& run) {
  LemmaReport report;
  report.lemma_id = "stationarity_bridge";
  report.trials = static_cast<int>(run.diags.size());
  const auto& sub_ranges = p.kernel->sub_block_ranges();
  for (const auto& d : run.diags) {
    double weighted_grad = 0.0;
    for (std::size_t j = 0; j < sub_ranges.size(); ++j) {
      weighted_grad +=
          d.grad.segment(sub_ranges[j].start, sub_ranges[j].len).squaredNorm() / d.region[j].mu;
    }
    const double r1 = safe_ratio(weighted_grad, 2.0 * d.kappa_delta * d.g_measure);
    const double r2 = safe_ratio(
        d.g_measure,
        2.0 * d.kappa_delta * d.breg_fwd / (d.horizon * d.horizon) + 2.0 * d.eps_k / d.horizon);
    const double ratio = std::max(r1, r2);
    if (ratio > report.max_ratio) {
      report.max_ratio = ratio;
      report.note = "worst epoch " + std::to_string(d.epoch);
    }
  }
  report.pass = report.max_ratio <= 1.0 + kViolationTol;
  return report;
}

}  // namespace rrmd
