#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "mixlab/mixtures.hpp"
#include "mixlab/records.hpp"

namespace mixlab {

/// A pilot run reduced to what the heuristics consume: which datasets were
/// trained on and the aggregate In/Out scores.
struct ScoredRun {
  std::vector<std::size_t> datasets;
  double in_score = 0.0;
  double out_score = 0.0;
};

std::vector<ScoredRun> scored_runs(std::span<const PerformanceRecord> records,
                                   std::span<const BenchmarkSpec> suite);

struct AlphaConfig {
  double alpha = 0.5;
  double alpha_single = 1.0;
};

/// Per-dataset accumulated In/Out scores, before min-max normalization.
struct ScoreSums {
  std::vector<double> in;
  std::vector<double> out;
};

struct HeuristicResult {
  MixtureWeights weights;
  std::vector<std::string> warnings;
};

inline constexpr double kDefaultRidgeLambda = 1e-3;

ScoreSums accumulate_scores(std::span<const ScoredRun> runs, std::size_t m, double alpha_single);

/// Min-max normalized In/Out sums blended by alpha, then normalized.
/// A sum vector with zero range is replaced by a constant vector (with a
/// warning), so an all-degenerate input yields uniform weights.
HeuristicResult alpha_weights(std::span<const ScoredRun> runs, std::size_t m,
                              const AlphaConfig& cfg);

/// Ridge on 0/1 participation indicators against Out scores. Coefficient i
/// is divided by entry (i, i) of (X'X + lambda I)^-1 and clamped at zero
/// before normalization.
HeuristicResult colinearity_weights(std::span<const ScoredRun> runs, std::size_t m,
                                    double lambda = kDefaultRidgeLambda);

struct LeaveOneOutConfig {
  double offset = 0.2;
  double slope = 0.1;
};

/// Uses exactly the runs that miss one dataset; a better Out score for the
/// combination missing dataset i means a smaller weight for i.
HeuristicResult leave_one_out_weights(std::span<const ScoredRun> runs, std::size_t m,
                                      const LeaveOneOutConfig& cfg = {});

/// Raw (pre-normalization) leave-one-out weights, indexed by the missing dataset.
std::vector<double> leave_one_out_raw(std::span<const ScoredRun> runs, std::size_t m,
                                      const LeaveOneOutConfig& cfg,
                                      std::vector<std::string>* warnings = nullptr);

}  // namespace mixlab
