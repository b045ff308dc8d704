#include "rrmd/compose.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <limits>

namespace rrmd {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Monotone scalar root solve F(z) = target on an open interval. F must be
// strictly increasing. Newton with a maintained bracket and bisection
// fallback; residual tolerance 1e-12 relative, budget 200.
template <typename F, typename DF>
double scalar_monotone_solve(F func, DF dfunc, double target, Interval dom) {
  double lo = dom.lo;
  double hi = dom.hi;
  // find a finite bracket inside the open interval
  double blo, bhi;
  if (std::isfinite(lo) && std::isfinite(hi)) {
    const double w = hi - lo;
    blo = lo + 1e-12 * w;
    bhi = hi - 1e-12 * w;
    // shrink toward the boundary until the bracket straddles the target
    for (int i = 0; i < 600 && func(blo) > target; ++i) blo = lo + (blo - lo) * 0.5;
    for (int i = 0; i < 600 && func(bhi) < target; ++i) bhi = hi - (hi - bhi) * 0.5;
  } else {
    blo = std::isfinite(lo) ? lo + 1.0 : -1.0;
    bhi = std::isfinite(hi) ? hi - 1.0 : 1.0;
    if (std::isfinite(lo)) {
      double gap = 1.0;
      while (func(blo) > target && gap > 1e-300) {
        gap *= 0.5;
        blo = lo + gap;
      }
    } else {
      while (func(blo) > target && blo > -1e300) blo = blo * 2.0 - 1.0;
    }
    if (std::isfinite(hi)) {
      double gap = 1.0;
      while (func(bhi) < target && gap > 1e-300) {
        gap *= 0.5;
        bhi = hi - gap;
      }
    } else {
      while (func(bhi) < target && bhi < 1e300) bhi = bhi * 2.0 + 1.0;
    }
  }
  const double tol = 1e-12 * std::max(1.0, std::abs(target));
  double z = 0.5 * (blo + bhi);
  for (int it = 0; it < 200; ++it) {
    const double f = func(z) - target;
    if (std::abs(f) <= tol) return z;
    if (f > 0.0) {
      bhi = z;
    } else {
      blo = z;
    }
    double next = z - f / dfunc(z);
    if (!(next > blo && next < bhi)) next = 0.5 * (blo + bhi);
    if (std::abs(next - z) <= 1e-16 * std::max(1.0, std::abs(z))) return next;
    z = next;
  }
  throw RootFindFailure("scalar_monotone_solve: budget exhausted");
}

class AffineComposedKernel final : public BlockKernel {
 public:
  AffineComposedKernel(BlockKernelPtr base, Mat A, Vec b)
      : base_(std::move(base)), a_(std::move(A)), b_(std::move(b)) {
    const int d = base_->dim();
    if (a_.rows() != d || a_.cols() != d || b_.size() != d) {
      throw ShapeMismatch("affine block: matrix/offset size must match the base kernel");
    }
    if (base_->coordinatewise()) {
      for (int i = 0; i < d; ++i) {
        for (int j = 0; j < d; ++j) {
          if (i != j && a_(i, j) != 0.0) {
            throw ShapeMismatch(
                "affine block: coordinatewise base requires a diagonal matrix");
          }
        }
      }
      sigma_min_.resize(d);
      sigma_max_.resize(d);
      for (int i = 0; i < d; ++i) sigma_min_[i] = sigma_max_[i] = std::abs(a_(i, i));
    } else {
      Eigen::JacobiSVD<Mat> svd(a_);
      sigma_min_ = {svd.singularValues().minCoeff()};
      sigma_max_ = {svd.singularValues().maxCoeff()};
    }
    for (std::size_t s = 0; s < sigma_min_.size(); ++s) {
      if (!(sigma_min_[s] > 1e-12 * sigma_max_[s]) || sigma_max_[s] == 0.0) {
        throw SingularBlock("affine block: singular (or near-singular) matrix");
      }
    }
    a_inv_ = a_.partialPivLu().inverse();
  }

  int dim() const override { return base_->dim(); }
  int sub_blocks() const override { return base_->sub_blocks(); }
  std::string kind() const override { return "affine"; }

  bool contains(const Vec& z) const override {
    return z.allFinite() && base_->contains(a_ * z + b_);
  }
  double value(const Vec& z) const override { return base_->value(a_ * z + b_); }
  Vec gradient(const Vec& z) const override {
    return a_.transpose() * base_->gradient(a_ * z + b_);
  }
  Vec inverse_gradient(const Vec& y) const override {
    // grad phi = A^T grad h(Az+b) = y  =>  z = A^{-1}(grad h^*(A^{-T} y) - b)
    return a_inv_ * (base_->inverse_gradient(a_inv_.transpose() * y) - b_);
  }
  Mat hessian(const Vec& z) const override {
    return a_.transpose() * base_->hessian(a_ * z + b_) * a_;
  }
  void eig_range(const Vec& z, EigRange* out) const override {
    if (base_->coordinatewise()) {
      base_->eig_range(a_ * z + b_, out);
      for (int i = 0; i < dim(); ++i) {
        const double s2 = a_(i, i) * a_(i, i);
        out[i].lo *= s2;
        out[i].hi *= s2;
      }
    } else {
      Eigen::SelfAdjointEigenSolver<Mat> eig(hessian(z), Eigen::EigenvaluesOnly);
      out[0] = {eig.eigenvalues().minCoeff(), eig.eigenvalues().maxCoeff()};
    }
  }
  void sub_dual_dist(const Vec& x, const Vec& y, double* out) const override {
    if (base_->coordinatewise()) {
      base_->sub_dual_dist(a_ * x + b_, a_ * y + b_, out);
      for (int i = 0; i < dim(); ++i) out[i] *= std::abs(a_(i, i));
    } else {
      out[0] = (gradient(x) - gradient(y)).norm();
    }
  }
  double condition_bound(double delta) const override {
    double worst = 0.0;
    for (std::size_t s = 0; s < sigma_min_.size(); ++s) {
      const double kappa_a = sigma_max_[s] / sigma_min_[s];
      worst = std::max(worst, kappa_a * kappa_a * base_->condition_bound(delta / sigma_min_[s]));
    }
    return worst;
  }
  Vec sample_interior(RngStream& rng) const override {
    return a_inv_ * (base_->sample_interior(rng) - b_);
  }
  bool coordinatewise() const override { return base_->coordinatewise(); }
  double scalar_value(int c, double z) const override {
    return base_->scalar_value(c, a_(c, c) * z + b_[c]);
  }
  double scalar_grad(int c, double z) const override {
    const double a = a_(c, c);
    return a * base_->scalar_grad(c, a * z + b_[c]);
  }
  double scalar_hess(int c, double z) const override {
    const double a = a_(c, c);
    return a * a * base_->scalar_hess(c, a * z + b_[c]);
  }
  Interval scalar_domain(int c) const override {
    const Interval base = base_->scalar_domain(c);
    const double a = a_(c, c);
    const double u = (base.lo - b_[c]) / a;
    const double v = (base.hi - b_[c]) / a;
    return {std::min(u, v), std::max(u, v)};
  }
  nlohmann::json to_json() const override {
    nlohmann::json mat = nlohmann::json::array();
    for (int i = 0; i < a_.rows(); ++i) {
      nlohmann::json row = nlohmann::json::array();
      for (int j = 0; j < a_.cols(); ++j) row.push_back(a_(i, j));
      mat.push_back(row);
    }
    return {{"kind", "affine"},
            {"base", base_->to_json()},
            {"A", mat},
            {"b", std::vector<double>(b_.data(), b_.data() + b_.size())}};
  }

 private:
  BlockKernelPtr base_;
  Mat a_;
  Vec b_;
  Mat a_inv_;
  std::vector<double> sigma_min_, sigma_max_;
};

class ConicCombinedKernel final : public BlockKernel {
 public:
  ConicCombinedKernel(BlockKernelPtr h, BlockKernelPtr g, double alpha, double beta)
      : h_(std::move(h)), g_(std::move(g)), alpha_(alpha), beta_(beta) {
    if (!(alpha > 0.0) || !(beta > 0.0)) {
      throw ConfigError("conic block: weights must be positive");
    }
    if (h_->dim() != g_->dim()) {
      throw PartitionMismatch("conic block: children must share the block dimension");
    }
    coordinatewise_ = h_->coordinatewise() && g_->coordinatewise();
    if (!coordinatewise_ &&
        !(h_->single_block_compatible() && g_->single_block_compatible())) {
      // e.g. a multi-coordinate entropy paired with a radial kernel: the
      // children do not share a block structure and the combined condition
      // number is unbounded even on singletons
      throw PartitionMismatch("conic block: children sub-block structures disagree");
    }
  }

  int dim() const override { return h_->dim(); }
  int sub_blocks() const override { return coordinatewise_ ? dim() : 1; }
  std::string kind() const override { return "conic"; }

  bool contains(const Vec& x) const override { return h_->contains(x) && g_->contains(x); }
  double value(const Vec& x) const override {
    return alpha_ * h_->value(x) + beta_ * g_->value(x);
  }
  Vec gradient(const Vec& x) const override {
    return alpha_ * h_->gradient(x) + beta_ * g_->gradient(x);
  }
  Vec inverse_gradient(const Vec& y) const override {
    if (!y.allFinite()) throw NumericOverflow("conic: non-finite dual coordinate");
    return coordinatewise_ ? inverse_coordinatewise(y) : inverse_newton(y);
  }
  Mat hessian(const Vec& x) const override {
    return alpha_ * h_->hessian(x) + beta_ * g_->hessian(x);
  }
  void eig_range(const Vec& x, EigRange* out) const override {
    if (coordinatewise_) {
      for (int i = 0; i < dim(); ++i) {
        const double lam =
            alpha_ * h_->scalar_hess(i, x[i]) + beta_ * g_->scalar_hess(i, x[i]);
        out[i] = {lam, lam};
      }
    } else {
      Eigen::SelfAdjointEigenSolver<Mat> eig(hessian(x), Eigen::EigenvaluesOnly);
      out[0] = {eig.eigenvalues().minCoeff(), eig.eigenvalues().maxCoeff()};
    }
  }
  void sub_dual_dist(const Vec& x, const Vec& y, double* out) const override {
    if (coordinatewise_) {
      for (int i = 0; i < dim(); ++i) {
        out[i] = std::abs(scalar_grad(i, x[i]) - scalar_grad(i, y[i]));
      }
    } else {
      out[0] = (gradient(x) - gradient(y)).norm();
    }
  }
  double condition_bound(double delta) const override {
    return std::max(h_->condition_bound(delta / alpha_), g_->condition_bound(delta / beta_));
  }
  Vec sample_interior(RngStream& rng) const override {
    if (coordinatewise_) {
      Vec x(dim());
      for (int i = 0; i < dim(); ++i) {
        const Interval dom = scalar_domain_at(i);
        if (std::isfinite(dom.lo) && std::isfinite(dom.hi)) {
          x[i] = rng.uniform(dom.lo + 0.02 * (dom.hi - dom.lo), dom.hi - 0.02 * (dom.hi - dom.lo));
        } else if (std::isfinite(dom.lo)) {
          x[i] = dom.lo + std::exp(0.7 * rng.normal());
        } else if (std::isfinite(dom.hi)) {
          x[i] = dom.hi - std::exp(0.7 * rng.normal());
        } else {
          x[i] = rng.normal();
        }
      }
      return x;
    }
    // non-coordinatewise children have full-space domains in the catalogue
    return h_->sample_interior(rng);
  }
  bool coordinatewise() const override { return coordinatewise_; }
  double scalar_value(int c, double z) const override {
    return alpha_ * h_->scalar_value(c, z) + beta_ * g_->scalar_value(c, z);
  }
  double scalar_grad(int c, double z) const override {
    return alpha_ * h_->scalar_grad(c, z) + beta_ * g_->scalar_grad(c, z);
  }
  double scalar_hess(int c, double z) const override {
    return alpha_ * h_->scalar_hess(c, z) + beta_ * g_->scalar_hess(c, z);
  }
  Interval scalar_domain(int c) const override { return scalar_domain_at(c); }
  nlohmann::json to_json() const override {
    return {{"kind", "conic"},
            {"alpha", alpha_},
            {"beta", beta_},
            {"h", h_->to_json()},
            {"g", g_->to_json()}};
  }

 private:
  Interval scalar_domain_at(int c) const {
    const Interval a = h_->scalar_domain(c);
    const Interval b = g_->scalar_domain(c);
    return {std::max(a.lo, b.lo), std::min(a.hi, b.hi)};
  }

  Vec inverse_coordinatewise(const Vec& y) const {
    Vec x(dim());
    for (int i = 0; i < dim(); ++i) {
      x[i] = scalar_monotone_solve([this, i](double z) { return scalar_grad(i, z); },
                                   [this, i](double z) { return scalar_hess(i, z); }, y[i],
                                   scalar_domain_at(i));
    }
    return x;
  }

  // Damped Newton on the monotone map alpha grad h + beta grad g. The sum is
  // strictly convex, so the Jacobian is positive definite and the root is
  // unique. Tolerance 1e-12 relative, budget 200.
  Vec inverse_newton(const Vec& y) const {
    Vec x = h_->inverse_gradient(y / (alpha_ + beta_));
    if (!contains(x)) x = g_->inverse_gradient(y / (alpha_ + beta_));
    if (!contains(x)) throw RootFindFailure("conic inverse: no feasible starting point");
    const double tol = 1e-12 * std::max(1.0, y.norm());
    double res = (gradient(x) - y).norm();
    for (int it = 0; it < 200; ++it) {
      if (res <= tol) return x;
      const Vec f = gradient(x) - y;
      const Vec dx = hessian(x).llt().solve(-f);
      double t = 1.0;
      bool moved = false;
      for (int back = 0; back < 60; ++back) {
        const Vec trial = x + t * dx;
        if (contains(trial)) {
          const double trial_res = (gradient(trial) - y).norm();
          if (trial_res < res) {
            x = trial;
            res = trial_res;
            moved = true;
            break;
          }
        }
        t *= 0.5;
      }
      if (!moved) throw RootFindFailure("conic inverse: stalled Newton iteration");
    }
    throw RootFindFailure("conic inverse: budget exhausted");
  }

  BlockKernelPtr h_;
  BlockKernelPtr g_;
  double alpha_, beta_;
  bool coordinatewise_;
};

void spot_check_compatibility(const BlockKernel& h, const BlockKernel& g,
                              const BlockKernel& combined, std::uint64_t seed) {
  RngStream rng = RngStream::from_seed(seed, "conic-compat");
  for (int trial = 0; trial < 512; ++trial) {
    const Vec x = combined.sample_interior(rng);
    const Vec y = combined.sample_interior(rng);
    const Vec dh = h.gradient(x) - h.gradient(y);
    const Vec dg = g.gradient(x) - g.gradient(y);
    const double ip = dh.dot(dg);
    if (ip < -1e-12 * std::max(1.0, dh.norm() * dg.norm())) {
      throw CompatibilityViolation("conic combination: gradient increments not aligned toward " +
                                   std::to_string(ip));
    }
  }
}

}  // namespace

BlockKernelPtr compose_affine_block(BlockKernelPtr base, Mat A, Vec b) {
  return std::make_shared<AffineComposedKernel>(std::move(base), std::move(A), std::move(b));
}

BlockKernelPtr combine_conic_block(BlockKernelPtr h, BlockKernelPtr g, double alpha, double beta,
                                   std::uint64_t check_seed) {
  auto combined = std::make_shared<ConicCombinedKernel>(h, g, alpha, beta);
  spot_check_compatibility(*h, *g, *combined, check_seed);
  return combined;
}

Kernel compose_affine(const Kernel& h, const Mat& A, const Vec& b) {
  if (A.rows() != h.dim() || A.cols() != h.dim() || b.size() != h.dim()) {
    throw ShapeMismatch("compose_affine: A must be d x d and b length d");
  }
  // reject entries outside the block-diagonal pattern
  const auto& part = h.partition();
  for (int i = 0; i < A.rows(); ++i) {
    for (int j = 0; j < A.cols(); ++j) {
      bool allowed = false;
      for (const auto& range : part) {
        if (i >= range.start && i < range.start + range.len && j >= range.start &&
            j < range.start + range.len) {
          allowed = true;
          break;
        }
      }
      if (!allowed && A(i, j) != 0.0) {
        throw ShapeMismatch("compose_affine: A is not block-diagonal for this partition");
      }
    }
  }
  std::vector<BlockKernelPtr> blocks;
  for (std::size_t i = 0; i < h.blocks().size(); ++i) {
    const auto& range = part[i];
    blocks.push_back(compose_affine_block(h.blocks()[i],
                                          A.block(range.start, range.start, range.len, range.len),
                                          b.segment(range.start, range.len)));
  }
  return Kernel(std::move(blocks));
}

Kernel combine_conic(const Kernel& h, const Kernel& g, double alpha, double beta,
                     std::uint64_t check_seed) {
  if (h.dim() != g.dim() || h.block_count() != g.block_count()) {
    throw PartitionMismatch("combine_conic: kernels must share the block partition");
  }
  for (int i = 0; i < h.block_count(); ++i) {
    if (h.partition()[i].start != g.partition()[i].start ||
        h.partition()[i].len != g.partition()[i].len) {
      throw PartitionMismatch("combine_conic: kernels must share the block partition");
    }
  }
  std::vector<BlockKernelPtr> blocks;
  for (int i = 0; i < h.block_count(); ++i) {
    blocks.push_back(
        combine_conic_block(h.blocks()[i], g.blocks()[i], alpha, beta, check_seed + i));
  }
  return Kernel(std::move(blocks));
}

double gamma_constant(const std::vector<double>& mu) {
  if (mu.empty()) throw NonpositiveMu("gamma_constant: empty mu list");
  double mn = kInf, mx = -kInf;
  for (double v : mu) {
    if (!(v > 0.0)) throw NonpositiveMu("gamma_constant: mu values must be positive");
    mn = std::min(mn, v);
    mx = std::max(mx, v);
  }
  const double m = static_cast<double>(mu.size());
  const double log_branch = 8.0 * M_E * (2.0 + 3.0 * std::log(mx / mn));
  return std::sqrt(std::min(8.0 * m, log_branch));
}

BlockKernelPtr block_kernel_from_json(const nlohmann::json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "shannon") return make_shannon(j.at("dim").get<int>());
  if (kind == "regularized_burg") {
    return make_regularized_burg(j.at("dim").get<int>(), j.at("sigma").get<double>());
  }
  if (kind == "fermi_dirac") return make_fermi_dirac(j.at("dim").get<int>());
  if (kind == "power") return make_power(j.at("dim").get<int>(), j.at("r").get<double>());
  if (kind == "quadratic") return make_quadratic(j.at("dim").get<int>());
  if (kind == "affine") {
    auto base = block_kernel_from_json(j.at("base"));
    const auto& rows = j.at("A");
    const int d = base->dim();
    Mat A(d, d);
    for (int i = 0; i < d; ++i) {
      for (int c = 0; c < d; ++c) A(i, c) = rows.at(i).at(c).get<double>();
    }
    Vec b(d);
    for (int i = 0; i < d; ++i) b[i] = j.at("b").at(i).get<double>();
    return compose_affine_block(std::move(base), std::move(A), std::move(b));
  }
  if (kind == "conic") {
    return combine_conic_block(block_kernel_from_json(j.at("h")),
                               block_kernel_from_json(j.at("g")), j.at("alpha").get<double>(),
                               j.at("beta").get<double>());
  }
  throw ConfigError("unknown kernel kind: " + kind);
}

}  // namespace rrmd
