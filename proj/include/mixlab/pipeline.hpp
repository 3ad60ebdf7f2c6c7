#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mixlab/grpo.hpp"
#include "mixlab/mixtures.hpp"
#include "mixlab/records.hpp"
#include "mixlab/search.hpp"
#include "mixlab/surrogate.hpp"

namespace mixlab {

/// Which seed mixtures to run before fitting. `random` adds that many
/// points drawn uniformly from the simplex.
struct SeedPlan {
  bool singles = true;
  bool exclude_one = true;
  bool all = true;
  std::size_t random = 0;
};

struct PipelineConfig {
  sim::WorldSpec world;
  sim::GrpoConfig train;
  SeedPlan plan;
  std::size_t seed_replicates = 1;
  SurrogateConfig surrogate;
  ProposalConfig proposal;
  std::size_t verification_seeds = 10;
  std::size_t refine_rounds = 0;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
  std::string output_dir;

  void validate() const;
};

PipelineConfig parse_pipeline_config(const std::string& json_text, const std::string& base_dir = ".");
PipelineConfig read_pipeline_config(const std::string& path);

struct LabeledMixture {
  std::string label;
  MixtureWeights weights;
};

/// Singles, exclude-ones, uniform, then random points; exact duplicates
/// (e.g. exclude-one equals single when m = 2) are dropped, first wins.
std::vector<LabeledMixture> seed_mixtures(std::size_t m, const SeedPlan& plan, std::uint64_t seed);

struct TrainJob {
  std::string id;
  MixtureWeights weights;
  std::uint64_t seed = 0;
};

/// Runs independent training jobs on up to `jobs` threads; output order
/// follows input order.
std::vector<PerformanceRecord> run_jobs(const sim::SyntheticWorld& world, const sim::GrpoConfig& cfg,
                                        const std::vector<TrainJob>& jobs, std::size_t threads);

std::vector<PerformanceRecord> run_seed_phase(const PipelineConfig& config, const sim::SyntheticWorld& world);

struct RealizedScores {
  std::vector<double> per_seed;
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
};

struct ProposalOutcome {
  MixtureWeights weights;
  double predicted = 0.0;
  RealizedScores realized;
};

struct PipelineReport {
  std::size_t round = 0;
  std::vector<PerformanceRecord> fit_records;
  std::vector<PerformanceRecord> verification_records;
  std::vector<std::uint64_t> fit_seeds;
  std::vector<std::uint64_t> verification_seeds;
  FitReport fit;
  std::optional<SurrogateModel> model;
  std::size_t survivors = 0;
  std::vector<ProposalOutcome> proposals;
  RealizedScores uniform;
  /// Top-ranked proposal's realized mean minus the uniform mean (0 when
  /// nothing was proposed).
  double uniform_delta = 0.0;
  /// Seeds where the top-ranked proposal beat uniform strictly.
  std::size_t paired_wins = 0;

  std::string to_json() const;
  std::string summary_table() const;
};

PipelineReport run_full(const PipelineConfig& config);

/// Each round appends one record per proposed mixture (scores averaged over
/// its verification seeds) to the fitting set, refits, re-proposes and
/// verifies on fresh seeds.
PipelineReport refine(const PipelineReport& report, const PipelineConfig& config, std::size_t rounds);

/// Writes records.jsonl, model.json, report.json and summary.txt.
void write_outputs(const PipelineReport& report, const std::string& dir);

}  // namespace mixlab
