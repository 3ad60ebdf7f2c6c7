#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "mixlab/mixtures.hpp"
#include "mixlab/rng.hpp"

namespace mixlab {

struct SampleDraw {
  std::size_t domain = 0;
  std::size_t item = 0;
  friend bool operator==(const SampleDraw&, const SampleDraw&) = default;
};

enum class ExhaustionPolicy {
  /// Stop the stream the first time the drawn domain has nothing left.
  Stop,
  /// Drop exhausted domains and redraw over the rest (experimental).
  Renormalize,
};

/// Two-stage draw: pick domain i with probability w_i by inverse CDF on one
/// uniform variate, then pop the next unseen item of that domain. Each
/// domain's items are a seeded permutation consumed front to back.
class MixtureSampler {
 public:
  MixtureSampler(std::span<const std::size_t> pool_sizes, const MixtureWeights& weights,
                 std::uint64_t seed, ExhaustionPolicy policy = ExhaustionPolicy::Stop);

  std::optional<SampleDraw> next();

  bool finished() const noexcept { return finished_; }
  std::size_t steps() const noexcept { return steps_; }
  std::size_t remaining(std::size_t domain) const;
  const std::vector<std::size_t>& permutation(std::size_t domain) const { return queues_.at(domain); }

 private:
  std::size_t draw_domain();

  std::vector<double> weights_;
  std::vector<std::vector<std::size_t>> queues_;
  std::vector<std::size_t> cursor_;
  Rng rng_;
  ExhaustionPolicy policy_;
  std::size_t steps_ = 0;
  bool finished_ = false;
};

/// Fraction of `draws` domain picks landing on each domain. Pools are
/// treated as unbounded; throws Exhausted if `pool_sizes` is given and a
/// pool would run dry within `draws`.
std::vector<double> empirical_frequencies(const MixtureWeights& weights, std::size_t draws,
                                          std::uint64_t seed,
                                          std::span<const std::size_t> pool_sizes = {});

}  // namespace mixlab
