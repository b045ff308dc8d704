#include "rrmd/sampling.hpp"

#include <numeric>

namespace rrmd {

std::string to_string(SchemeKind kind) {
  switch (kind) {
    case SchemeKind::UniformReshuffle: return "uniform_reshuffle";
    case SchemeKind::ShuffleOnce: return "shuffle_once";
    case SchemeKind::FixedOrder: return "fixed_order";
    case SchemeKind::WithReplacement: return "with_replacement";
  }
  return "?";
}

SchemeKind scheme_from_string(const std::string& name) {
  if (name == "uniform_reshuffle") return SchemeKind::UniformReshuffle;
  if (name == "shuffle_once") return SchemeKind::ShuffleOnce;
  if (name == "fixed_order") return SchemeKind::FixedOrder;
  if (name == "with_replacement") return SchemeKind::WithReplacement;
  throw ConfigError("unknown sampling scheme: " + name);
}

SamplingScheme::SamplingScheme(SchemeKind kind, int n, std::uint64_t seed)
    : kind_(kind), n_(n), stream_(RngStream::from_seed(seed, "permutation")) {
  if (n <= 0) throw ConfigError("sampling scheme needs n >= 1");
}

std::vector<int> SamplingScheme::next_epoch_order() {
  std::vector<int> order(n_);
  switch (kind_) {
    case SchemeKind::FixedOrder:
      std::iota(order.begin(), order.end(), 0);
      return order;
    case SchemeKind::WithReplacement:
      for (int i = 0; i < n_; ++i) order[i] = static_cast<int>(stream_.below(n_));
      return order;
    case SchemeKind::ShuffleOnce:
      if (have_first_) return first_order_;
      [[fallthrough]];
    case SchemeKind::UniformReshuffle:
      std::iota(order.begin(), order.end(), 0);
      // Fisher-Yates over the counter-based stream
      for (int i = n_ - 1; i > 0; --i) {
        const int j = static_cast<int>(stream_.below(static_cast<std::uint64_t>(i) + 1));
        std::swap(order[i], order[j]);
      }
      if (kind_ == SchemeKind::ShuffleOnce) {
        first_order_ = order;
        have_first_ = true;
      }
      return order;
  }
  throw ConfigError("unreachable scheme kind");
}

WithoutReplacementMoments without_replacement_moments(const std::vector<Vec>& xs, int t) {
  const int n = static_cast<int>(xs.size());
  if (n < 1) throw BadT("without_replacement_moments: empty sample");
  if (t < 1 || t > n) throw BadT("without_replacement_moments: need 1 <= t <= n");

  Vec mean = Vec::Zero(xs[0].size());
  for (const Vec& v : xs) mean += v;
  mean /= static_cast<double>(n);

  double sigma_sq = 0.0;
  for (const Vec& v : xs) sigma_sq += (v - mean).squaredNorm();
  sigma_sq /= static_cast<double>(n);

  const double factor =
      (t == n) ? 0.0
               : static_cast<double>(n - t) / (static_cast<double>(t) * static_cast<double>(n - 1));
  return {std::move(mean), factor * sigma_sq};
}

}  // namespace rrmd
