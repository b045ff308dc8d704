#include "rrmd/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace rrmd {

namespace {

constexpr double kDualClamp = 700.0;
constexpr double kInf = std::numeric_limits<double>::infinity();

bool all_finite(const Vec& x) { return x.allFinite(); }

void require_finite_dual(const Vec& y, const char* who) {
  if (!all_finite(y)) {
    throw NumericOverflow(std::string(who) + ": non-finite dual coordinate");
  }
}

// solve t (t^r + 1) = s for t >= 0; scalar, strictly increasing, convex.
// Safeguarded Newton: bracket [0, max(1, s)], bisection fallback,
// relative residual tolerance 1e-13, budget 100 iterations.
double power_radial_root(double s, double r) {
  if (s <= 0.0) return 0.0;
  double lo = 0.0;
  double hi = std::max(1.0, s);
  // t ~ s for small s, t ~ s^{1/(r+1)} for large s; start on the smaller branch
  double t = std::min(std::pow(s, 1.0 / (r + 1.0)), s) / 2.0;
  if (!(t > lo && t < hi)) t = 0.5 * (lo + hi);
  const double tol = 1e-13 * std::max(1.0, s);
  double step_prev = hi - lo;
  for (int it = 0; it < 100; ++it) {
    const double tr = std::pow(t, r);
    const double f = t * (tr + 1.0) - s;
    if (std::abs(f) <= tol) return t;
    if (f > 0.0) {
      hi = t;
    } else {
      lo = t;
    }
    const double fprime = (r + 1.0) * tr + 1.0;
    double next = t - f / fprime;
    // accept Newton only while it stays bracketed and keeps contracting,
    // otherwise bisect; this keeps the worst case at bisection speed
    if (!(next > lo && next < hi) || std::abs(next - t) > 0.5 * step_prev) {
      next = 0.5 * (lo + hi);
    }
    step_prev = std::abs(next - t);
    if (step_prev <= 1e-16 * std::max(1.0, t)) return next;
    t = next;
  }
  throw RootFindFailure("power_radial_root: no convergence for s=" + std::to_string(s));
}

class ShannonKernel final : public BlockKernel {
 public:
  explicit ShannonKernel(int dim) : dim_(dim) {}
  int dim() const override { return dim_; }
  int sub_blocks() const override { return dim_; }
  std::string kind() const override { return "shannon"; }
  bool contains(const Vec& x) const override {
    return all_finite(x) && (x.array() > 0.0).all();
  }
  double value(const Vec& x) const override {
    return (x.array() * x.array().log()).sum();
  }
  Vec gradient(const Vec& x) const override { return x.array().log() + 1.0; }
  Vec inverse_gradient(const Vec& y) const override {
    require_finite_dual(y, "shannon");
    Vec x(dim_);
    for (int i = 0; i < dim_; ++i) {
      double yi = y[i];
      if (std::abs(yi) > kDualClamp) {
        yi = std::clamp(yi, -kDualClamp, kDualClamp);
        ++clamp_count_;
      }
      x[i] = std::exp(yi - 1.0);
    }
    return x;
  }
  Mat hessian(const Vec& x) const override { return x.array().inverse().matrix().asDiagonal(); }
  void eig_range(const Vec& x, EigRange* out) const override {
    for (int i = 0; i < dim_; ++i) out[i] = {1.0 / x[i], 1.0 / x[i]};
  }
  void sub_dual_dist(const Vec& x, const Vec& y, double* out) const override {
    for (int i = 0; i < dim_; ++i) out[i] = std::abs(std::log(x[i]) - std::log(y[i]));
  }
  double condition_bound(double delta) const override { return std::exp(delta); }
  Vec sample_interior(RngStream& rng) const override {
    Vec x(dim_);
    for (int i = 0; i < dim_; ++i) x[i] = std::exp(0.7 * rng.normal());
    return x;
  }
  bool coordinatewise() const override { return true; }
  double scalar_value(int, double z) const override { return z * std::log(z); }
  double scalar_grad(int, double z) const override { return std::log(z) + 1.0; }
  double scalar_hess(int, double z) const override { return 1.0 / z; }
  Interval scalar_domain(int) const override { return {0.0, kInf}; }
  nlohmann::json to_json() const override { return {{"kind", "shannon"}, {"dim", dim_}}; }

 private:
  int dim_;
};

class RegularizedBurgKernel final : public BlockKernel {
 public:
  RegularizedBurgKernel(int dim, double sigma) : dim_(dim), sigma_(sigma) {
    if (!(sigma > 0.0)) throw ConfigError("regularized_burg: sigma must be positive");
  }
  int dim() const override { return dim_; }
  int sub_blocks() const override { return dim_; }
  std::string kind() const override { return "regularized_burg"; }
  bool contains(const Vec& x) const override {
    return all_finite(x) && (x.array() > 0.0).all();
  }
  double value(const Vec& x) const override {
    return -x.array().log().sum() + 0.5 * sigma_ * x.squaredNorm();
  }
  Vec gradient(const Vec& x) const override {
    return (-x.array().inverse() + sigma_ * x.array()).matrix();
  }
  Vec inverse_gradient(const Vec& y) const override {
    require_finite_dual(y, "regularized_burg");
    Vec x(dim_);
    for (int i = 0; i < dim_; ++i) {
      // positive root of sigma x^2 - y x - 1 = 0; conjugate form for y < 0
      // avoids cancellation
      const double yi = y[i];
      const double root = std::sqrt(yi * yi + 4.0 * sigma_);
      x[i] = yi >= 0.0 ? (yi + root) / (2.0 * sigma_) : 2.0 / (root - yi);
    }
    return x;
  }
  Mat hessian(const Vec& x) const override {
    return (x.array().square().inverse() + sigma_).matrix().asDiagonal();
  }
  void eig_range(const Vec& x, EigRange* out) const override {
    for (int i = 0; i < dim_; ++i) {
      const double lam = 1.0 / (x[i] * x[i]) + sigma_;
      out[i] = {lam, lam};
    }
  }
  void sub_dual_dist(const Vec& x, const Vec& y, double* out) const override {
    for (int i = 0; i < dim_; ++i) {
      out[i] = std::abs((-1.0 / x[i] + sigma_ * x[i]) - (-1.0 / y[i] + sigma_ * y[i]));
    }
  }
  double condition_bound(double delta) const override {
    const double q = delta / sigma_;
    return q * q + 4.0 * q + 5.0;
  }
  Vec sample_interior(RngStream& rng) const override {
    Vec x(dim_);
    for (int i = 0; i < dim_; ++i) x[i] = std::exp(0.7 * rng.normal());
    return x;
  }
  bool coordinatewise() const override { return true; }
  double scalar_value(int, double z) const override {
    return -std::log(z) + 0.5 * sigma_ * z * z;
  }
  double scalar_grad(int, double z) const override { return -1.0 / z + sigma_ * z; }
  double scalar_hess(int, double z) const override { return 1.0 / (z * z) + sigma_; }
  Interval scalar_domain(int) const override { return {0.0, kInf}; }
  nlohmann::json to_json() const override {
    return {{"kind", "regularized_burg"}, {"dim", dim_}, {"sigma", sigma_}};
  }
  double sigma() const { return sigma_; }

 private:
  int dim_;
  double sigma_;
};

class FermiDiracKernel final : public BlockKernel {
 public:
  explicit FermiDiracKernel(int dim) : dim_(dim) {}
  int dim() const override { return dim_; }
  int sub_blocks() const override { return dim_; }
  std::string kind() const override { return "fermi_dirac"; }
  bool contains(const Vec& x) const override {
    return all_finite(x) && (x.array() > 0.0).all() && (x.array() < 1.0).all();
  }
  double value(const Vec& x) const override {
    double v = 0.0;
    for (int i = 0; i < dim_; ++i) {
      v += x[i] * std::log(x[i]) + (1.0 - x[i]) * std::log1p(-x[i]);
    }
    return v;
  }
  Vec gradient(const Vec& x) const override {
    Vec g(dim_);
    for (int i = 0; i < dim_; ++i) g[i] = std::log(x[i]) - std::log1p(-x[i]);
    return g;
  }
  Vec inverse_gradient(const Vec& y) const override {
    require_finite_dual(y, "fermi_dirac");
    Vec x(dim_);
    for (int i = 0; i < dim_; ++i) {
      double yi = y[i];
      if (std::abs(yi) > kDualClamp) {
        yi = std::clamp(yi, -kDualClamp, kDualClamp);
        ++clamp_count_;
      }
      x[i] = 1.0 / (1.0 + std::exp(-yi));
    }
    return x;
  }
  Mat hessian(const Vec& x) const override {
    return (x.array() * (1.0 - x.array())).inverse().matrix().asDiagonal();
  }
  void eig_range(const Vec& x, EigRange* out) const override {
    for (int i = 0; i < dim_; ++i) {
      const double lam = 1.0 / (x[i] * (1.0 - x[i]));
      out[i] = {lam, lam};
    }
  }
  void sub_dual_dist(const Vec& x, const Vec& y, double* out) const override {
    for (int i = 0; i < dim_; ++i) {
      out[i] = std::abs(scalar_grad(i, x[i]) - scalar_grad(i, y[i]));
    }
  }
  double condition_bound(double delta) const override { return std::exp(delta); }
  Vec sample_interior(RngStream& rng) const override {
    Vec x(dim_);
    for (int i = 0; i < dim_; ++i) x[i] = 1.0 / (1.0 + std::exp(-1.5 * rng.normal()));
    return x;
  }
  bool coordinatewise() const override { return true; }
  double scalar_value(int, double z) const override {
    return z * std::log(z) + (1.0 - z) * std::log1p(-z);
  }
  double scalar_grad(int, double z) const override { return std::log(z) - std::log1p(-z); }
  double scalar_hess(int, double z) const override { return 1.0 / (z * (1.0 - z)); }
  Interval scalar_domain(int) const override { return {0.0, 1.0}; }
  nlohmann::json to_json() const override { return {{"kind", "fermi_dirac"}, {"dim", dim_}}; }

 private:
  int dim_;
};

// h(x) = ||x||^{r+2}/(r+2) + ||x||^2/2. Radial, hence a single sub-block;
// Hessian is (||x||^r + 1) I + r ||x||^{r-2} x x^T, a rank-one update whose
// eigenvalues are known exactly.
class PowerKernel final : public BlockKernel {
 public:
  PowerKernel(int dim, double r) : dim_(dim), r_(r) {
    if (r < 0.0) throw ConfigError("power: r must be nonnegative");
  }
  int dim() const override { return dim_; }
  int sub_blocks() const override { return 1; }
  std::string kind() const override { return "power"; }
  bool contains(const Vec& x) const override { return all_finite(x); }
  double value(const Vec& x) const override {
    const double nrm = x.norm();
    return std::pow(nrm, r_ + 2.0) / (r_ + 2.0) + 0.5 * nrm * nrm;
  }
  Vec gradient(const Vec& x) const override {
    return (std::pow(x.norm(), r_) + 1.0) * x;
  }
  Vec inverse_gradient(const Vec& y) const override {
    require_finite_dual(y, "power");
    const double s = y.norm();
    if (s == 0.0) return Vec::Zero(dim_);
    const double t = power_radial_root(s, r_);
    return y * (t / s);
  }
  Mat hessian(const Vec& x) const override {
    const double nrm = x.norm();
    Mat h = (std::pow(nrm, r_) + 1.0) * Mat::Identity(dim_, dim_);
    if (nrm > 0.0 && r_ > 0.0) {
      h += (r_ * std::pow(nrm, r_ - 2.0)) * (x * x.transpose());
    }
    return h;
  }
  void eig_range(const Vec& x, EigRange* out) const override {
    const double powr = std::pow(x.norm(), r_);
    const double big = (r_ + 1.0) * powr + 1.0;
    out[0] = dim_ == 1 ? EigRange{big, big} : EigRange{powr + 1.0, big};
  }
  void sub_dual_dist(const Vec& x, const Vec& y, double* out) const override {
    out[0] = (gradient(x) - gradient(y)).norm();
  }
  double condition_bound(double delta) const override {
    return (r_ + 1.0) * std::pow(1.0 + delta, r_) + 1.0;
  }
  Vec sample_interior(RngStream& rng) const override {
    Vec x(dim_);
    for (int i = 0; i < dim_; ++i) x[i] = rng.normal();
    return x;
  }
  bool coordinatewise() const override { return dim_ == 1; }
  double scalar_value(int, double z) const override {
    return std::pow(std::abs(z), r_ + 2.0) / (r_ + 2.0) + 0.5 * z * z;
  }
  double scalar_grad(int, double z) const override {
    return (std::pow(std::abs(z), r_) + 1.0) * z;
  }
  double scalar_hess(int, double z) const override {
    return (r_ + 1.0) * std::pow(std::abs(z), r_) + 1.0;
  }
  Interval scalar_domain(int) const override { return {-kInf, kInf}; }
  nlohmann::json to_json() const override {
    return {{"kind", "power"}, {"dim", dim_}, {"r", r_}};
  }

 private:
  int dim_;
  double r_;
};

class QuadraticKernel final : public BlockKernel {
 public:
  explicit QuadraticKernel(int dim) : dim_(dim) {}
  int dim() const override { return dim_; }
  int sub_blocks() const override { return dim_; }
  std::string kind() const override { return "quadratic"; }
  bool contains(const Vec& x) const override { return all_finite(x); }
  double value(const Vec& x) const override { return 0.5 * x.squaredNorm(); }
  Vec gradient(const Vec& x) const override { return x; }
  Vec inverse_gradient(const Vec& y) const override {
    require_finite_dual(y, "quadratic");
    return y;
  }
  Mat hessian(const Vec&) const override { return Mat::Identity(dim_, dim_); }
  void eig_range(const Vec&, EigRange* out) const override {
    for (int i = 0; i < dim_; ++i) out[i] = {1.0, 1.0};
  }
  void sub_dual_dist(const Vec& x, const Vec& y, double* out) const override {
    for (int i = 0; i < dim_; ++i) out[i] = std::abs(x[i] - y[i]);
  }
  double condition_bound(double) const override { return 1.0; }
  Vec sample_interior(RngStream& rng) const override {
    Vec x(dim_);
    for (int i = 0; i < dim_; ++i) x[i] = rng.normal();
    return x;
  }
  bool coordinatewise() const override { return true; }
  bool single_block_compatible() const override { return true; }
  double scalar_value(int, double z) const override { return 0.5 * z * z; }
  double scalar_grad(int, double z) const override { return z; }
  double scalar_hess(int, double) const override { return 1.0; }
  Interval scalar_domain(int) const override { return {-kInf, kInf}; }
  nlohmann::json to_json() const override { return {{"kind", "quadratic"}, {"dim", dim_}}; }

 private:
  int dim_;
};

}  // namespace

BlockKernelPtr make_shannon(int dim) { return std::make_shared<ShannonKernel>(dim); }
BlockKernelPtr make_regularized_burg(int dim, double sigma) {
  return std::make_shared<RegularizedBurgKernel>(dim, sigma);
}
BlockKernelPtr make_fermi_dirac(int dim) { return std::make_shared<FermiDiracKernel>(dim); }
BlockKernelPtr make_power(int dim, double r) { return std::make_shared<PowerKernel>(dim, r); }
BlockKernelPtr make_quadratic(int dim) { return std::make_shared<QuadraticKernel>(dim); }

Kernel::Kernel(std::vector<BlockKernelPtr> blocks) : blocks_(std::move(blocks)) {
  if (blocks_.empty()) throw ShapeMismatch("kernel needs at least one block");
  int start = 0;
  for (const auto& b : blocks_) {
    if (!b || b->dim() <= 0) throw ShapeMismatch("kernel block with nonpositive dimension");
    partition_.push_back({start, b->dim()});
    if (b->sub_blocks() == b->dim()) {
      for (int c = 0; c < b->dim(); ++c) sub_ranges_.push_back({start + c, 1});
    } else {
      sub_ranges_.push_back({start, b->dim()});
    }
    start += b->dim();
    sub_blocks_ += b->sub_blocks();
  }
  dim_ = start;
}

bool Kernel::contains(const Vec& x) const {
  if (x.size() != dim_) return false;
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    if (!blocks_[i]->contains(x.segment(partition_[i].start, partition_[i].len))) return false;
  }
  return true;
}

void Kernel::require_interior(const Vec& x, const char* who) const {
  if (x.size() != dim_) {
    throw ShapeMismatch(std::string(who) + ": expected dimension " + std::to_string(dim_) +
                        ", got " + std::to_string(x.size()));
  }
  if (!contains(x)) {
    throw DomainViolation(std::string(who) + ": point outside the open kernel domain");
  }
}

double Kernel::value(const Vec& x) const {
  require_interior(x, "kernel_value");
  double v = 0.0;
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    v += blocks_[i]->value(x.segment(partition_[i].start, partition_[i].len));
  }
  return v;
}

Vec Kernel::mirror_map(const Vec& x) const {
  require_interior(x, "mirror_map");
  Vec y(dim_);
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    y.segment(partition_[i].start, partition_[i].len) =
        blocks_[i]->gradient(x.segment(partition_[i].start, partition_[i].len));
  }
  return y;
}

Vec Kernel::inverse_mirror_map(const Vec& y) const {
  if (y.size() != dim_) throw ShapeMismatch("inverse_mirror_map: dimension mismatch");
  Vec x(dim_);
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    x.segment(partition_[i].start, partition_[i].len) =
        blocks_[i]->inverse_gradient(y.segment(partition_[i].start, partition_[i].len));
  }
  return x;
}

double Kernel::bregman(const Vec& x, const Vec& y) const {
  require_interior(x, "bregman_div");
  require_interior(y, "bregman_div");
  const double raw = value(x) - value(y) - mirror_map(y).dot(x - y);
  return std::max(0.0, raw);
}

Vec Kernel::sub_bregman(const Vec& x, const Vec& y) const {
  require_interior(x, "sub_bregman");
  require_interior(y, "sub_bregman");
  Vec out(sub_blocks_);
  int at = 0;
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const auto& b = *blocks_[i];
    const auto& range = partition_[i];
    if (b.sub_blocks() == b.dim() && b.dim() > 1) {
      for (int c = 0; c < b.dim(); ++c) {
        const double xi = x[range.start + c];
        const double yi = y[range.start + c];
        out[at + c] = std::max(
            0.0,
            b.scalar_value(c, xi) - b.scalar_value(c, yi) - b.scalar_grad(c, yi) * (xi - yi));
      }
    } else {
      const Vec xs = x.segment(range.start, range.len);
      const Vec ys = y.segment(range.start, range.len);
      out[at] = std::max(0.0, b.value(xs) - b.value(ys) - b.gradient(ys).dot(xs - ys));
    }
    at += b.sub_blocks();
  }
  return out;
}

double Kernel::dual_distance(const Vec& x, const Vec& y) const {
  return (mirror_map(x) - mirror_map(y)).norm();
}

Vec Kernel::dual_distance_blocks(const Vec& x, const Vec& y) const {
  require_interior(x, "dual_distance");
  require_interior(y, "dual_distance");
  Vec out(sub_blocks_);
  int at = 0;
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    blocks_[i]->sub_dual_dist(x.segment(partition_[i].start, partition_[i].len),
                              y.segment(partition_[i].start, partition_[i].len), out.data() + at);
    at += blocks_[i]->sub_blocks();
  }
  return out;
}

Mat Kernel::hessian(const Vec& x) const {
  require_interior(x, "hessian");
  Mat h = Mat::Zero(dim_, dim_);
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const auto& range = partition_[i];
    h.block(range.start, range.start, range.len, range.len) =
        blocks_[i]->hessian(x.segment(range.start, range.len));
  }
  return h;
}

std::vector<EigRange> Kernel::eig_ranges(const Vec& x) const {
  require_interior(x, "eig_ranges");
  std::vector<EigRange> out(sub_blocks_);
  int at = 0;
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    blocks_[i]->eig_range(x.segment(partition_[i].start, partition_[i].len), out.data() + at);
    at += blocks_[i]->sub_blocks();
  }
  return out;
}

double Kernel::condition_bound(double delta) const {
  if (!(delta > 0.0)) throw ConfigError("condition_bound: delta must be positive");
  double worst = 0.0;
  for (const auto& b : blocks_) worst = std::max(worst, b->condition_bound(delta));
  return worst;
}

Vec Kernel::sample_interior(RngStream& rng) const {
  Vec x(dim_);
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    x.segment(partition_[i].start, partition_[i].len) = blocks_[i]->sample_interior(rng);
  }
  return x;
}

nlohmann::json Kernel::to_json() const {
  nlohmann::json blocks = nlohmann::json::array();
  nlohmann::json part = nlohmann::json::array();
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    blocks.push_back(blocks_[i]->to_json());
    part.push_back({{"start", partition_[i].start}, {"len", partition_[i].len}});
  }
  return {{"blocks", blocks}, {"partition", part}};
}

Kernel Kernel::from_json(const nlohmann::json& j) {
  std::vector<BlockKernelPtr> blocks;
  for (const auto& bj : j.at("blocks")) blocks.push_back(block_kernel_from_json(bj));
  return Kernel(std::move(blocks));
}

std::uint64_t Kernel::clamp_events() const {
  std::uint64_t total = 0;
  for (const auto& b : blocks_) total += b->clamp_events();
  return total;
}

std::vector<BlockStats> hessian_bounds(const Kernel& k, const std::vector<Vec>& points) {
  if (points.empty()) throw EmptyRegion("hessian_bounds: empty point cloud");
  const int m = k.sub_block_count();
  std::vector<double> lo(m, kInf), hi(m, -kInf);
  for (const Vec& p : points) {
    const auto ranges = k.eig_ranges(p);
    for (int j = 0; j < m; ++j) {
      lo[j] = std::min(lo[j], ranges[j].lo);
      hi[j] = std::max(hi[j], ranges[j].hi);
    }
  }
  std::vector<BlockStats> stats(m);
  for (int j = 0; j < m; ++j) stats[j] = {lo[j], hi[j], hi[j] / lo[j]};
  return stats;
}

RegionEstimate estimate_region(const Kernel& k, std::vector<Vec> points) {
  RegionEstimate region;
  region.stats = hessian_bounds(k, points);
  const int m = k.sub_block_count();
  region.dual_diameter.assign(m, 0.0);
  for (std::size_t a = 0; a < points.size(); ++a) {
    for (std::size_t b = a + 1; b < points.size(); ++b) {
      const Vec rho = k.dual_distance_blocks(points[a], points[b]);
      for (int j = 0; j < m; ++j) {
        region.dual_diameter[j] = std::max(region.dual_diameter[j], rho[j]);
      }
    }
  }
  region.points = std::move(points);
  return region;
}

RegionAccumulator::RegionAccumulator(const Kernel& k)
    : kernel_(&k),
      scratch_(k.sub_block_count()),
      lo_(k.sub_block_count(), kInf),
      hi_(k.sub_block_count(), -kInf) {}

void RegionAccumulator::add(const Vec& x) {
  int at = 0;
  const auto& part = kernel_->partition();
  const auto& blocks = kernel_->blocks();
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    blocks[i]->eig_range(x.segment(part[i].start, part[i].len), scratch_.data() + at);
    at += blocks[i]->sub_blocks();
  }
  for (std::size_t j = 0; j < lo_.size(); ++j) {
    lo_[j] = std::min(lo_[j], scratch_[j].lo);
    hi_[j] = std::max(hi_[j], scratch_[j].hi);
  }
  ++count_;
}

std::vector<BlockStats> RegionAccumulator::stats() const {
  if (count_ == 0) throw EmptyRegion("region accumulator has no points");
  std::vector<BlockStats> out(lo_.size());
  for (std::size_t j = 0; j < lo_.size(); ++j) out[j] = {lo_[j], hi_[j], hi_[j] / lo_[j]};
  return out;
}

double RegionAccumulator::mu_min() const {
  if (count_ == 0) throw EmptyRegion("region accumulator has no points");
  return *std::min_element(lo_.begin(), lo_.end());
}

}  // namespace rrmd
