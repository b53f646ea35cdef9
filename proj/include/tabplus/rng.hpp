#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace tabplus {

/// SplitMix64 step. Used for seeding and for deriving child seeds.
std::uint64_t splitmix64(std::uint64_t& state);

/// Mixes two values into a new seed (e.g. study seed + trial index).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t salt);

/// xoshiro256** seeded by four consecutive SplitMix64 outputs of `seed`.
///
/// All randomness in the toolkit (fold shuffles, initialization, dropout
/// masks, HPO sampling) flows through this generator so that runs reproduce
/// bit-for-bit across platforms. The derived helpers are fully specified:
///   uniform()        = (next() >> 11) * 2^-53
///   bounded(n)       = rejection sampling: t = (2^64 - n) mod n; draw r until
///                      r >= t, return r mod n
///   shuffle(v)       = Fisher-Yates from the back, j = bounded(i + 1)
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next();
  double uniform();
  double uniform(double lo, double hi);
  std::uint64_t bounded(std::uint64_t n);

  template <typename T>
  void shuffle(std::span<T> values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(bounded(i));
      std::swap(values[i - 1], values[j]);
    }
  }
  template <typename T>
  void shuffle(std::vector<T>& values) {
    shuffle(std::span<T>(values));
  }

 private:
  std::array<std::uint64_t, 4> s_{};
};

}  // namespace tabplus
