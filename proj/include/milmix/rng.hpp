#ifndef MILMIX_RNG_HPP
#define MILMIX_RNG_HPP

#include <array>
#include <cstdint>
#include <vector>

namespace milmix {

/// Seeded, platform-stable random stream: xoshiro256++ with splitmix64 seeding.
///
/// All randomness in the toolkit flows through this class so that a seed fully
/// determines every downstream draw, independent of platform and standard
/// library. Draw disciplines (relied on by replay tests):
///   - uniform():        one 64-bit step, top 53 bits -> [0, 1)
///   - uniform_int(n):   Lemire bounded rejection, >= one 64-bit step
///   - permutation(n):   Fisher-Yates, j = uniform_int(i + 1) for i = n-1 .. 1
///   - normal():         Box-Muller, exactly two uniform() draws per call
class RngStream {
 public:
  static constexpr const char* kAlgorithmName = "xoshiro256++ (splitmix64-seeded)";

  explicit RngStream(std::uint64_t seed);

  std::uint64_t seed() const { return seed_; }

  /// Next raw 64-bit output.
  std::uint64_t next_u64();

  /// Uniform real in [0, 1).
  double uniform();

  /// Uniform integer in [0, n); n must be >= 1.
  std::uint64_t uniform_int(std::uint64_t n);

  /// Uniform permutation of {0, ..., n-1}.
  std::vector<std::size_t> permutation(std::size_t n);

  /// Standard normal deviate.
  double normal();

 private:
  std::uint64_t seed_ = 0;
  std::array<std::uint64_t, 4> state_{};
};

}  // namespace milmix

#endif  // MILMIX_RNG_HPP
