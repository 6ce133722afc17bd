#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <utility>

namespace orchkit::bench {

/// splitmix64. The recurrence is fixed so that seeded manifests and run
/// streams replay identically across implementations.
class DeterministicRng {
 public:
  explicit DeterministicRng(std::uint64_t seed) noexcept : state_(seed) {}

  std::uint64_t next_u64() noexcept {
    state_ += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1) from the top 53 bits.
  double next_unit() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  std::uint64_t state() const noexcept { return state_; }

 private:
  std::uint64_t state_;
};

std::uint64_t fnv1a64(std::string_view bytes) noexcept;

/// Seed of an independent stream: first output of DeterministicRng(seed ^ fnv1a64(label)).
std::uint64_t derive_seed(std::uint64_t seed, std::string_view label) noexcept;

/// Fisher-Yates, i from n-1 down to 1, j = next_u64() mod (i+1). The modulo
/// bias is below 2^-40 for any realistic pool size.
template <typename Seq>
void shuffle(DeterministicRng& rng, Seq& seq) {
  const std::size_t n = seq.size();
  if (n < 2) return;
  for (std::size_t i = n - 1; i >= 1; --i) {
    const auto j = static_cast<std::size_t>(rng.next_u64() % (static_cast<std::uint64_t>(i) + 1));
    using std::swap;
    swap(seq[i], seq[j]);
  }
}

}  // namespace orchkit::bench
