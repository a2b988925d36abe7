#ifndef PLNMA_RNG_HPP
#define PLNMA_RNG_HPP

#include <cstdint>
#include <cmath>
#include <initializer_list>
#include <limits>

namespace plnma::rng {

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

inline std::uint64_t avalanche(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Derive a substream seed from a tuple of words (seed, rep, study, arm, tag).
// Gives every (replication, study, arm, purpose) its own independent stream,
// so generated data do not depend on execution order.
inline std::uint64_t substream(std::initializer_list<std::uint64_t> words) {
  std::uint64_t h = 0xA0761D6478BD642Full;
  for (std::uint64_t w : words) {
    h ^= w;
    h = avalanche(h + kGolden);
  }
  return h;
}

// SplitMix64: portable 64-bit generator with fixed output for a fixed seed on
// every platform. Distribution transforms below are hand-rolled for the same
// reason; std:: distributions are implementation-defined.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    state_ += kGolden;
    return avalanche(state_);
  }

  // Uniform on [0,1) with 53 random bits.
  double next_double() {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
  }

  double uniform(double a, double b) { return a + (b - a) * next_double(); }

  // Inclusive integer range, unbiased via rejection.
  long long uniform_int(long long lo, long long hi) {
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1ull;
    if (span == 0) return static_cast<long long>(next());  // full range
    const std::uint64_t max = std::numeric_limits<std::uint64_t>::max();
    const std::uint64_t limit = max - max % span;
    std::uint64_t r;
    do {
      r = next();
    } while (r >= limit);
    return lo + static_cast<long long>(r % span);
  }

  // Box-Muller using the cosine branch only (fixed two-draw cost per call).
  double normal(double mu, double sigma) {
    const double u1 = 1.0 - next_double();  // (0,1]
    const double u2 = next_double();
    const double z = std::sqrt(-2.0 * std::log(u1)) *
                     std::cos(2.0 * 3.14159265358979323846 * u2);
    return mu + sigma * z;
  }

  // Sum of n Bernoulli draws. n is small in this domain (<= a few hundred).
  long long binomial(long long n, double p) {
    long long k = 0;
    for (long long i = 0; i < n; ++i) {
      if (next_double() < p) ++k;
    }
    return k;
  }

 private:
  std::uint64_t state_;
};

}  // namespace plnma::rng

#endif  // PLNMA_RNG_HPP
