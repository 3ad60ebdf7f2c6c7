#include "mixlab/sampler.hpp"

#include <algorithm>

#include "mixlab/error.hpp"

namespace mixlab {

MixtureSampler::MixtureSampler(std::span<const std::size_t> pool_sizes,
                               const MixtureWeights& weights, std::uint64_t seed,
                               ExhaustionPolicy policy)
    : weights_(weights.vector()), rng_(seed), policy_(policy) {
  if (pool_sizes.size() != weights.size()) {
    throw Error(Errc::DimensionMismatch, "weights have " + std::to_string(weights.size()) +
                                             " entries, catalog has " + std::to_string(pool_sizes.size()));
  }
  queues_.reserve(pool_sizes.size());
  for (auto size : pool_sizes) queues_.push_back(rng_.permutation(size));
  cursor_.assign(pool_sizes.size(), 0);
}

std::size_t MixtureSampler::remaining(std::size_t domain) const {
  return queues_.at(domain).size() - cursor_.at(domain);
}

std::size_t MixtureSampler::draw_domain() {
  const double u = rng_.uniform();
  double total = 0.0;
  for (double w : weights_) total += w;
  const double target = u * total;
  double cumulative = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    if (weights_[i] <= 0.0) continue;
    cumulative += weights_[i];
    last_positive = i;
    if (target < cumulative) return i;
  }
  // rounding left target at the top edge
  return last_positive;
}

std::optional<SampleDraw> MixtureSampler::next() {
  if (finished_) return std::nullopt;
  for (;;) {
    const std::size_t d = draw_domain();
    if (cursor_[d] < queues_[d].size()) {
      ++steps_;
      return SampleDraw{d, queues_[d][cursor_[d]++]};
    }
    if (policy_ == ExhaustionPolicy::Stop) {
      finished_ = true;
      return std::nullopt;
    }
    weights_[d] = 0.0;
    if (std::none_of(weights_.begin(), weights_.end(), [](double w) { return w > 0.0; })) {
      finished_ = true;
      return std::nullopt;
    }
  }
}

std::vector<double> empirical_frequencies(const MixtureWeights& weights, std::size_t draws,
                                          std::uint64_t seed,
                                          std::span<const std::size_t> pool_sizes) {
  if (draws == 0) throw Error(Errc::InvalidArgument, "draws must be > 0");
  std::vector<std::size_t> pools(pool_sizes.begin(), pool_sizes.end());
  const bool bounded = !pools.empty();
  if (!bounded) pools.assign(weights.size(), draws);
  MixtureSampler sampler(pools, weights, seed);
  std::vector<double> counts(weights.size(), 0.0);
  for (std::size_t i = 0; i < draws; ++i) {
    const auto s = sampler.next();
    if (!s) {
      throw Error(Errc::Exhausted, "a domain pool ran dry after " + std::to_string(i) + " draws");
    }
    counts[s->domain] += 1.0;
  }
  for (double& c : counts) c /= static_cast<double>(draws);
  return counts;
}

}  // namespace mixlab
