#pragma once

#include <atomic>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"
#include "rrmd/common.hpp"
#include "rrmd/rng.hpp"

namespace rrmd {

// Open per-coordinate domain interval.
struct Interval {
  double lo;
  double hi;
};

// [lambda_min, lambda_max] of a Hessian block.
struct EigRange {
  double lo;
  double hi;
};

// One component of a block-separable Legendre kernel. A block kernel owns a
// contiguous coordinate range and exposes the mirror map, its inverse, and
// exact Hessian eigenvalue ranges.
//
// The mathematically finest separable structure matters for condition-number
// bookkeeping: the entropies factor per coordinate (sub_blocks() == dim()),
// while the power kernel is radial and indivisible (sub_blocks() == 1).
// Eigenvalue ranges, dual distances and condition bounds are all reported at
// sub-block granularity.
class BlockKernel {
 public:
  virtual ~BlockKernel() = default;

  virtual int dim() const = 0;
  virtual int sub_blocks() const = 0;
  virtual std::string kind() const = 0;

  // strict interior membership (also rejects non-finite coordinates)
  virtual bool contains(const Vec& x) const = 0;
  virtual double value(const Vec& x) const = 0;
  virtual Vec gradient(const Vec& x) const = 0;
  virtual Vec inverse_gradient(const Vec& y) const = 0;
  virtual Mat hessian(const Vec& x) const = 0;

  // one entry per sub-block, exact closed forms for the built-ins
  virtual void eig_range(const Vec& x, EigRange* out) const = 0;
  // per-sub-block ||grad h_j(x) - grad h_j(y)||
  virtual void sub_dual_dist(const Vec& x, const Vec& y, double* out) const = 0;

  // uniform bound on lambda_max(H(x))/lambda_min(H(y)) over any sub-block
  // region of dual diameter <= delta
  virtual double condition_bound(double delta) const = 0;

  virtual Vec sample_interior(RngStream& rng) const = 0;

  // True when the block splits per coordinate; enables the scalar interface
  // below, used by the conic-combination root solves and per-sub-block
  // divergences.
  virtual bool coordinatewise() const { return false; }

  // True when the kernel remains condition-bounded viewed as one whole
  // block: native single-sub-block kernels, and the quadratic kernel (its
  // Hessian is the identity under any blocking). Coordinatewise entropies
  // are NOT: their condition number over a single multi-coordinate block is
  // unbounded even on singletons.
  virtual bool single_block_compatible() const { return sub_blocks() == 1; }
  virtual double scalar_value(int /*c*/, double /*z*/) const {
    throw ShapeMismatch("scalar interface requires a coordinatewise kernel");
  }
  virtual double scalar_grad(int /*c*/, double /*z*/) const {
    throw ShapeMismatch("scalar interface requires a coordinatewise kernel");
  }
  virtual double scalar_hess(int /*c*/, double /*z*/) const {
    throw ShapeMismatch("scalar interface requires a coordinatewise kernel");
  }
  virtual Interval scalar_domain(int /*c*/) const {
    throw ShapeMismatch("scalar interface requires a coordinatewise kernel");
  }

  virtual nlohmann::json to_json() const = 0;

  // Dual coordinates fed to exp() are clamped to [-700, 700]; each clamp is
  // counted here so diagnostics can surface boundary pressure.
  std::uint64_t clamp_events() const { return clamp_count_.load(); }

 protected:
  mutable std::atomic<std::uint64_t> clamp_count_{0};
};

using BlockKernelPtr = std::shared_ptr<const BlockKernel>;

BlockKernelPtr make_shannon(int dim);
BlockKernelPtr make_regularized_burg(int dim, double sigma);
BlockKernelPtr make_fermi_dirac(int dim);
BlockKernelPtr make_power(int dim, double r);
BlockKernelPtr make_quadratic(int dim);

BlockKernelPtr block_kernel_from_json(const nlohmann::json& j);

struct BlockRange {
  int start;
  int len;
};

// A full kernel: ordered block kernels covering coordinates [0, dim).
// Immutable after construction and safe to share across threads.
class Kernel {
 public:
  explicit Kernel(std::vector<BlockKernelPtr> blocks);

  int dim() const { return dim_; }
  int block_count() const { return static_cast<int>(blocks_.size()); }
  // total sub-block count m used by multi-block constants
  int sub_block_count() const { return sub_blocks_; }
  const std::vector<BlockKernelPtr>& blocks() const { return blocks_; }
  const std::vector<BlockRange>& partition() const { return partition_; }
  // coordinate range of each sub-block (per coordinate for the separable
  // entropies, the whole block for radial kernels)
  const std::vector<BlockRange>& sub_block_ranges() const { return sub_ranges_; }

  bool contains(const Vec& x) const;
  void require_interior(const Vec& x, const char* who) const;

  double value(const Vec& x) const;
  Vec mirror_map(const Vec& x) const;
  Vec inverse_mirror_map(const Vec& y) const;

  // D_h(x, y) = h(x) - h(y) - <grad h(y), x - y>, nonnegative
  double bregman(const Vec& x, const Vec& y) const;
  // per-sub-block divergences D_{h_j}(x_[j], y_[j]); sums to bregman(x, y)
  Vec sub_bregman(const Vec& x, const Vec& y) const;

  // rho_h(x, y) = ||grad h(x) - grad h(y)||, and the per-sub-block variant
  double dual_distance(const Vec& x, const Vec& y) const;
  Vec dual_distance_blocks(const Vec& x, const Vec& y) const;

  Mat hessian(const Vec& x) const;
  std::vector<EigRange> eig_ranges(const Vec& x) const;

  double condition_bound(double delta) const;

  Vec sample_interior(RngStream& rng) const;

  nlohmann::json to_json() const;
  static Kernel from_json(const nlohmann::json& j);

  std::uint64_t clamp_events() const;

 private:
  std::vector<BlockKernelPtr> blocks_;
  std::vector<BlockRange> partition_;
  std::vector<BlockRange> sub_ranges_;
  int dim_ = 0;
  int sub_blocks_ = 0;
};

// Per-sub-block curvature statistics over a region: mu = min lambda_min,
// cap_l = max lambda_max, kappa = cap_l / mu.
struct BlockStats {
  double mu;
  double cap_l;
  double kappa;
};

// Point-cloud region representation with its dual diameter and curvature
// statistics; this is what a running solver can actually observe.
struct RegionEstimate {
  std::vector<Vec> points;
  std::vector<double> dual_diameter;  // per sub-block, max pairwise rho
  std::vector<BlockStats> stats;      // per sub-block
};

std::vector<BlockStats> hessian_bounds(const Kernel& k, const std::vector<Vec>& points);
RegionEstimate estimate_region(const Kernel& k, std::vector<Vec> points);

// Streaming min/max eigenvalue tracker; used by the solver to bound the
// curvature of the set of points an epoch actually visits.
class RegionAccumulator {
 public:
  explicit RegionAccumulator(const Kernel& k);
  void add(const Vec& x);
  std::vector<BlockStats> stats() const;  // EmptyRegion if nothing added
  double mu_min() const;
  bool empty() const { return count_ == 0; }

 private:
  const Kernel* kernel_;
  std::vector<EigRange> scratch_;
  std::vector<double> lo_, hi_;
  long count_ = 0;
};

}  // namespace rrmd
