#include "pacloud/rng.hpp"

#include <cmath>
#include <numbers>

#include "pacloud/errors.hpp"

namespace pacloud {

CounterRng::CounterRng(RngSeed seed, std::uint64_t stream)
    : key_(mix64(seed.seed ^ mix64(stream + 0x632BE59BD9B4E019ULL))) {}

std::uint64_t CounterRng::mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t CounterRng::at(std::uint64_t k) const {
  return mix64(key_ + (k + 1) * 0x9E3779B97F4A7C15ULL);
}

double CounterRng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double CounterRng::uniform(double lo, double hi) {
  const double u = uniform();
  if (lo == hi)
    return lo;
  const double v = lo + (hi - lo) * u;
  return v < hi ? v : std::nextafter(hi, lo);
}

double CounterRng::normal() {
  // 1 - u keeps the log argument in (0, 1].
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t CounterRng::below(std::uint64_t n) {
  if (n == 0)
    throw ArgumentError("CounterRng::below: empty range");
  return static_cast<std::uint64_t>(uniform() * static_cast<double>(n)) % n;
}

std::vector<double> seeded_uniform(RngSeed seed, double lo, double hi, std::size_t n) {
  if (!(lo <= hi))
    throw ArgumentError("seeded_uniform: lo > hi");
  CounterRng rng(seed);
  std::vector<double> out(n);
  for (auto &v : out)
    v = rng.uniform(lo, hi);
  return out;
}

} // namespace pacloud
