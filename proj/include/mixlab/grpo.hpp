#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mixlab/records.hpp"
#include "mixlab/rewards.hpp"
#include "mixlab/rng.hpp"
#include "mixlab/sampler.hpp"

namespace mixlab::sim {

// ---------------------------------------------------------------------------
// Synthetic world
// ---------------------------------------------------------------------------

struct SkillDistribution {
  std::vector<std::size_t> skills;
  std::vector<double> weights;  // same length as skills, sums to 1
};

struct DomainDef {
  std::string name;
  std::size_t pool_size = 0;
  SkillDistribution skills;
};

struct BenchmarkDef {
  std::string name;
  BenchmarkGroup group = BenchmarkGroup::Out;
  std::size_t count = 0;
  SkillDistribution skills;
};

enum class Overlap { Disjoint, Chain, Twins, Custom };

/// Description of a world. With `overlap` != Custom the domain skill sets
/// (and, when `benchmarks` is empty, a default suite) are generated from
/// `num_domains`, `num_skills` and `pool_sizes`.
struct WorldSpec {
  std::size_t num_skills = 0;
  std::size_t num_answers = 4;
  std::size_t num_domains = 0;
  std::vector<std::size_t> pool_sizes;
  Overlap overlap = Overlap::Custom;
  std::vector<DomainDef> domains;
  std::vector<BenchmarkDef> benchmarks;
  std::uint64_t seed = 0;
};

struct Task {
  std::size_t skill = 0;
  std::size_t gold = 0;
};

/// Tabular multi-domain verifiable-reward world. Every task's gold answer
/// is answer_of(skill), fixed by the world seed.
struct SyntheticWorld {
  std::size_t num_skills = 0;
  std::size_t num_answers = 0;
  std::vector<std::size_t> answer_of;
  std::vector<DomainDef> domains;
  std::vector<std::vector<Task>> pools;
  std::vector<BenchmarkDef> benchmarks;

  std::size_t num_domains() const noexcept { return domains.size(); }
  std::vector<std::size_t> pool_sizes() const;
  BenchmarkSuite suite() const;
};

SyntheticWorld make_world(const WorldSpec& spec);
WorldSpec parse_world_spec(const std::string& json_text);
WorldSpec read_world_spec(const std::string& path);

// ---------------------------------------------------------------------------
// Policy and GRPO numerics
// ---------------------------------------------------------------------------

/// k x A logits; pi(a | task) = softmax of the row of the task's skill.
class TabularPolicy {
 public:
  TabularPolicy(std::size_t skills, std::size_t answers)
      : skills_(skills), answers_(answers), logits_(skills * answers, 0.0) {}

  std::size_t skills() const noexcept { return skills_; }
  std::size_t answers() const noexcept { return answers_; }
  std::span<double> row(std::size_t skill) { return {logits_.data() + skill * answers_, answers_}; }
  std::span<const double> row(std::size_t skill) const {
    return {logits_.data() + skill * answers_, answers_};
  }
  std::vector<double> probabilities(std::size_t skill) const;
  const std::vector<double>& logits() const noexcept { return logits_; }

 private:
  std::size_t skills_;
  std::size_t answers_;
  std::vector<double> logits_;
};

std::vector<double> softmax(std::span<const double> logits);
std::vector<double> log_softmax(std::span<const double> logits);

struct GrpoConfig {
  std::size_t group_size = 6;
  double epsilon = 0.2;
  double beta = 0.04;
  double peak_lr = 0.1;
  double warmup_fraction = 0.1;
  std::size_t steps = 200;
  std::size_t inner_epochs = 1;
  RewardWeights reward;

  void validate() const;
};

/// Linear warm-up over the first warmup_fraction of `steps` to peak_lr,
/// then linear decay towards zero at `steps`.
double learning_rate(const GrpoConfig& cfg, std::size_t step);

/// (r_i - mean) / std with the population std; all zeros when std = 0.
std::vector<double> group_advantages(std::span<const double> rewards);

/// min(ratio * A, clip(ratio, 1 - eps, 1 + eps) * A)
double clipped_term(double ratio, double advantage, double epsilon);

/// sum p log(p / q) over the discrete action space.
double categorical_kl(std::span<const double> p, std::span<const double> q);

/// G sampled actions for one task, with everything the objective needs.
/// Log-probabilities under the current policy are recomputed from logits.
struct TrajectoryGroup {
  std::size_t skill = 0;
  std::vector<std::size_t> actions;
  std::vector<double> rewards;
  std::vector<double> advantages;
  std::vector<double> old_logits;  // theta_old row
  std::vector<double> ref_logits;  // pi_ref row

  std::vector<double> old_logprobs() const;
  std::vector<double> ref_logprobs() const;
};

/// (1/G) sum_i [clipped_term(pi/pi_old, A_i, eps) - beta * KL(pi || pi_ref)]
/// evaluated at `logits` (the current row).
double grpo_objective(const TrajectoryGroup& group, std::span<const double> logits,
                      const GrpoConfig& cfg);

/// Analytic gradient of grpo_objective with respect to `logits`. Where the
/// min picks the clipped branch with an out-of-range ratio the term has
/// zero gradient.
std::vector<double> grpo_gradient(const TrajectoryGroup& group, std::span<const double> logits,
                                  const GrpoConfig& cfg);

struct StepResult {
  TrajectoryGroup group;
  double learning_rate = 0.0;
};

/// One GRPO update on the row of `task.skill`. Format is always satisfied
/// in the simulator; accuracy is exact match with gold. The row ascends the
/// objective inner_epochs times against a frozen pi_old snapshot.
StepResult grpo_step(TabularPolicy& policy, const TabularPolicy& reference, const Task& task,
                     const GrpoConfig& cfg, std::size_t step, Rng& rng);

/// Expected argmax accuracy on a benchmark: for each skill, 1/|argmax set|
/// if gold is among the tied maxima, else 0; weighted by the benchmark's
/// skill distribution.
double evaluate(const TabularPolicy& policy, const SyntheticWorld& world, const BenchmarkDef& bench);

struct TrainOptions {
  std::string id = "sim";
  ExhaustionPolicy exhaustion = ExhaustionPolicy::Stop;
};

/// Streams the mixture sampler through grpo_step until the budget is spent
/// or the stream stops, then scores every benchmark.
PerformanceRecord train_with_mixture(const SyntheticWorld& world, const MixtureWeights& w,
                                     const GrpoConfig& cfg, std::uint64_t seed,
                                     const TrainOptions& options = {});

/// Same as train_with_mixture but also returns the final policy.
struct TrainResult {
  PerformanceRecord record;
  TabularPolicy policy;
};
TrainResult train_policy(const SyntheticWorld& world, const MixtureWeights& w, const GrpoConfig& cfg,
                         std::uint64_t seed, const TrainOptions& options = {});

GrpoConfig parse_grpo_config(const std::string& json_text);

}  // namespace mixlab::sim
