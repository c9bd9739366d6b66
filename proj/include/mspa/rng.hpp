#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace mspa {

// Name recorded in generated manifests so other implementations can
// regenerate bit-identical data.
inline constexpr std::string_view kRngAlgorithm = "splitmix64-counter/v1";

std::uint64_t splitmix64_mix(std::uint64_t x);
std::uint64_t fnv1a64(std::string_view bytes);

// Counter-based generator: output n is mix(key + n * golden_gamma). Streams
// derived by name or index are independent of how many draws the parent made,
// which is what keeps per-context and per-author generation order-free.
//
// All distributions are implemented here rather than through <random> because
// the standard distributions are not specified bit-for-bit across platforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : key_(splitmix64_mix(seed)) {}

  std::uint64_t next_u64();

  // Uniform in [0, 1) with 53 bits of precision.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [0, n). n must be > 0.
  std::uint64_t index(std::uint64_t n);
  // Standard normal via Box-Muller (one draw per call, no cached pair).
  double normal();
  bool bernoulli(double p) { return uniform() < p; }

  Rng substream(std::string_view name) const;
  Rng substream(std::uint64_t index) const;

  std::uint64_t key() const { return key_; }

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(index(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  struct FromKey {};
  Rng(std::uint64_t key, FromKey) : key_(key) {}

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace mspa
