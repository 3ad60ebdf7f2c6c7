#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace mixlab {

/// Seeded generator with a fixed, platform-independent algorithm.
///
/// The engine is std::mt19937_64, whose output sequence is pinned by the
/// standard. The distribution code here is hand-written because the
/// standard library distributions are implementation-defined:
///   uniform()  : top 53 bits of one engine word, scaled to [0, 1)
///   normal()   : Box-Muller, both outputs used (cached second value)
///   below(n)   : rejection sampling on the top bits, unbiased
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  double uniform();
  double normal();
  std::uint64_t below(std::uint64_t n);

  /// Fisher-Yates, iterating from the back.
  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

  std::vector<std::size_t> permutation(std::size_t n);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Sub-seed for `(purpose, index)` under a master seed. Distinct purposes
/// give unrelated streams.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t purpose,
                          std::uint64_t index) noexcept;

}  // namespace mixlab
