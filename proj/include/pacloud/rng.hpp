#pragma once

#include <cstdint>
#include <vector>

namespace pacloud {

struct RngSeed {
  std::uint64_t seed = 0;
};

/// Counter-based generator. The k-th draw of stream `s` under seed `x` is
///
///   key  = mix64(x ^ mix64(s + 0x632BE59BD9B4E019))
///   u64  = mix64(key + (k + 1) * 0x9E3779B97F4A7C15)
///
/// where mix64 is the SplitMix64 finalizer (Stafford variant 13). Doubles take
/// the top 53 bits. Normals use Box-Muller on two consecutive draws without
/// caching, so every draw index is reproducible from (seed, stream, k) alone.
/// This algorithm is frozen: changing it changes every seeded output.
class CounterRng {
public:
  explicit CounterRng(RngSeed seed, std::uint64_t stream = 0);

  static std::uint64_t mix64(std::uint64_t z);

  std::uint64_t at(std::uint64_t k) const;
  std::uint64_t next_u64() { return at(counter_++); }
  /// Uniform in [0, 1).
  double uniform();
  /// Uniform in [lo, hi); returns lo when lo == hi.
  double uniform(double lo, double hi);
  double normal();
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  std::uint64_t counter() const { return counter_; }

private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

/// n values in [lo, hi) from stream 0 of `seed`.
std::vector<double> seeded_uniform(RngSeed seed, double lo, double hi, std::size_t n);

} // namespace pacloud
