#pragma once

#include <cstdint>
#include <string_view>

namespace rrmd {

// Counter-based 64-bit generator built on the SplitMix64 finalizer:
//   out(c) = mix(key + c * 0x9E3779B97F4A7C15)
// State is (key, counter), so streams are cheap to fork and a draw sequence
// is identical on every platform, independent of libstdc++ distribution
// internals. Streams for different purposes are derived from one master seed
// with a string tag, so e.g. extending the epoch budget never perturbs the
// dataset stream.
class RngStream {
 public:
  explicit RngStream(std::uint64_t key) : key_(key) {}

  // key = mix(master ^ fnv1a(tag)); distinct tags give decorrelated streams.
  static RngStream from_seed(std::uint64_t master_seed, std::string_view tag);

  std::uint64_t next_u64();

  // uniform on [0, 1) with 53 random bits
  double uniform();
  double uniform(double lo, double hi);

  // unbiased-to-2^-64 integer in [0, n)
  std::uint64_t below(std::uint64_t n);

  // standard normal via Box-Muller (second variate cached)
  double normal();

  // Student's t with `dof` degrees of freedom: Z / sqrt(chi2_dof / dof)
  double student_t(int dof);

  // Poisson: inversion for mean < 30, rounded normal approximation above
  long poisson(double mean);

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

std::uint64_t splitmix64(std::uint64_t z);
std::uint64_t fnv1a64(std::string_view s);

}  // namespace rrmd
