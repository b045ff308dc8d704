#pragma once

#include <string>
#include <vector>

#include "rrmd/common.hpp"
#include "rrmd/rng.hpp"

namespace rrmd {

enum class SchemeKind {
  UniformReshuffle,  // fresh uniform permutation every epoch
  ShuffleOnce,       // one uniform permutation reused for all epochs
  FixedOrder,        // identity order
  WithReplacement,   // n i.i.d. uniform indices per epoch
};

std::string to_string(SchemeKind kind);
SchemeKind scheme_from_string(const std::string& name);

// Per-epoch index order generator. Owns a seeded stream; concurrent runs use
// independently seeded instances.
class SamplingScheme {
 public:
  SamplingScheme(SchemeKind kind, int n, std::uint64_t seed);

  // 0-based indices of length n; a bijection for the reshuffling schemes
  std::vector<int> next_epoch_order();

  SchemeKind kind() const { return kind_; }
  int n() const { return n_; }

 private:
  SchemeKind kind_;
  int n_;
  RngStream stream_;
  std::vector<int> first_order_;
  bool have_first_ = false;
};

struct WithoutReplacementMoments {
  Vec mean;                 // average of the n vectors
  double expected_sq_dev;   // E[ || mean of t draws - mean ||^2 ]
};

// Closed form (n - t) / (t (n - 1)) * sigma^2 with
// sigma^2 = (1/n) sum ||X_i - mean||^2.
WithoutReplacementMoments without_replacement_moments(const std::vector<Vec>& xs, int t);

}  // namespace rrmd
