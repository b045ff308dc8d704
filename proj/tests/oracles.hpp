#pragma once

// Test-only reference computations, kept independent of the library's own
// evaluation paths: quadrature for Bregman divergences, finite differences
// for gradients, dense eigensolvers for Hessian ranges, and subset
// enumeration for without-replacement moments.

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <functional>
#include <vector>

#include "rrmd/kernel.hpp"

namespace rrmd::oracle {

// D_h(x, y) = int_0^1 (1-t) (x-y)^T H(y + t(x-y)) (x-y) dt via composite
// Simpson with `panels` panels. Valid when the straight segment [y, x] stays
// interior, which the tests arrange.
inline double bregman_by_quadrature(const Kernel& k, const Vec& x, const Vec& y,
                                    int panels = 2000) {
  const Vec d = x - y;
  auto integrand = [&](double t) {
    const Vec z = y + t * d;
    return (1.0 - t) * d.dot(k.hessian(z) * d);
  };
  const double h = 1.0 / panels;
  double acc = integrand(0.0) + integrand(1.0);
  for (int i = 1; i < panels; ++i) acc += (i % 2 == 1 ? 4.0 : 2.0) * integrand(i * h);
  return acc * h / 3.0;
}

// central finite-difference gradient of a scalar function
inline Vec fd_gradient(const std::function<double(const Vec&)>& f, const Vec& x,
                       double step_scale = 1e-6) {
  Vec g(x.size());
  const double h = step_scale * (1.0 + x.norm());
  for (int i = 0; i < x.size(); ++i) {
    Vec xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    g[i] = (f(xp) - f(xm)) / (2.0 * h);
  }
  return g;
}

// exact eigen range of the Hessian by dense decomposition
inline EigRange hessian_eig_range(const Mat& h) {
  Eigen::SelfAdjointEigenSolver<Mat> eig(h, Eigen::EigenvaluesOnly);
  return {eig.eigenvalues().minCoeff(), eig.eigenvalues().maxCoeff()};
}

// E[ || mean of t draws - full mean ||^2 ] by enumerating all C(n, t) subsets
inline double without_replacement_enum(const std::vector<Vec>& xs, int t) {
  const int n = static_cast<int>(xs.size());
  Vec mean = Vec::Zero(xs[0].size());
  for (const Vec& v : xs) mean += v;
  mean /= static_cast<double>(n);

  double total = 0.0;
  long count = 0;
  std::vector<int> idx(t);
  std::function<void(int, int)> rec = [&](int next, int chosen) {
    if (chosen == t) {
      Vec sub = Vec::Zero(xs[0].size());
      for (int i = 0; i < t; ++i) sub += xs[idx[i]];
      sub /= static_cast<double>(t);
      total += (sub - mean).squaredNorm();
      ++count;
      return;
    }
    for (int i = next; i <= n - (t - chosen); ++i) {
      idx[chosen] = i;
      rec(i + 1, chosen + 1);
    }
  };
  rec(0, 0);
  return total / static_cast<double>(count);
}

}  // namespace rrmd::oracle
