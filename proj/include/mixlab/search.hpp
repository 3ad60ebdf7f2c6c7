#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mixlab/mixtures.hpp"
#include "mixlab/records.hpp"
#include "mixlab/rng.hpp"
#include "mixlab/surrogate.hpp"

namespace mixlab {

inline constexpr double kDefaultJitter = 1e-4;

struct GaussianModel {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
};

/// Mean and maximum-likelihood (divide by n) covariance, plus jitter * I.
GaussianModel fit_gaussian(std::span<const MixtureWeights> mixtures, double jitter);

/// Keeps a raw Gaussian draw iff every entry is >= 0, then rescales it to
/// sum to one. Returns nullopt for rejected draws.
std::optional<MixtureWeights> to_candidate(std::span<const double> raw);

/// Draws `n` points from `gm` and returns the non-negative survivors,
/// normalized. Throws NoSurvivors when every draw is rejected.
std::vector<MixtureWeights> sample_candidates(const GaussianModel& gm, std::size_t n, Rng& rng);

inline constexpr std::size_t kSamplesPerShard = 4096;

/// Sharded variant: shard s draws min(kSamplesPerShard, remaining) points
/// with seed derive_seed(seed, 'shard', s); survivors concatenate in shard
/// order, so the result does not depend on `jobs`.
std::vector<MixtureWeights> sample_candidates_sharded(const GaussianModel& gm, std::size_t n,
                                                      std::uint64_t seed, std::size_t jobs = 1);

struct RankedMixture {
  MixtureWeights weights;
  double predicted = 0.0;
};

/// Stable sort by predicted score, descending; first k.
std::vector<RankedMixture> rank_candidates(const SurrogateModel& model,
                                           std::span<const MixtureWeights> candidates,
                                           std::size_t k);

struct ProposalConfig {
  std::size_t n_samples = 10000;
  std::size_t k = 10;
  double jitter = kDefaultJitter;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
};

struct SurrogateConfig {
  int degree = 2;
  std::size_t n_splits = 5;
  double test_fraction = 0.2;
  std::string target = "out";
};

struct Proposal {
  CrossValidatedFit fit;
  GaussianModel gaussian;
  std::size_t survivors = 0;
  std::vector<RankedMixture> top;
};

/// Fit -> Gaussian over record mixtures -> sample -> rank. Records without
/// weights are ignored. The surrogate's split seed and the sampling seed
/// both derive from `proposal.seed`.
Proposal propose(std::span<const PerformanceRecord> records, std::span<const BenchmarkSpec> suite,
                 const SurrogateConfig& surrogate, const ProposalConfig& proposal);

/// Same pipeline on bare (mixture, target) pairs.
Proposal propose(std::span<const MixtureWeights> mixtures, std::span<const double> targets,
                 const SurrogateConfig& surrogate, const ProposalConfig& proposal);

std::string proposal_to_jsonl(std::span<const RankedMixture> top);

}  // namespace mixlab
