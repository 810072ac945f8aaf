#pragma once

#include <cstdint>
#include <limits>

namespace wavedet {

/// SplitMix64 finalizer; used to derive independent substream seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// xoshiro256** seeded through SplitMix64. Satisfies
/// UniformRandomBitGenerator so it plugs into <random> distributions.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed = 0) noexcept {
    std::uint64_t s = seed;
    for (auto& word : state_) {
      s = splitmix64(s);
      word = s;
    }
  }

  /// Generator for substream `index` of stream `tag` under `seed`. Substreams
  /// depend only on (seed, tag, index), so work can be split in any order.
  static Rng substream(std::uint64_t seed, std::uint64_t tag,
                       std::uint64_t index) noexcept {
    return Rng(splitmix64(splitmix64(seed ^ splitmix64(tag)) + index));
  }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() noexcept {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  /// Uniform double in [0, 1).
  double uniform() noexcept {
    return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
  }

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t state_[4];
};

// Stream tags keep the different consumers of one seed apart.
namespace stream {
inline constexpr std::uint64_t kDatasetTrial = 0x7472'6961'6cull;
inline constexpr std::uint64_t kEvalNoise = 0x6e6f'6973'65ull;
inline constexpr std::uint64_t kEvalPulse = 0x7075'6c73'65ull;
inline constexpr std::uint64_t kCorrelation = 0x636f'7272ull;
inline constexpr std::uint64_t kSvm = 0x73'766dull;
}  // namespace stream

}  // namespace wavedet
