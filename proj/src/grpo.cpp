#include "mixlab/grpo.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include "json.hpp"

#include "mixlab/error.hpp"

namespace mixlab::sim {

namespace {

constexpr std::uint64_t kPurposeWorld = 0x574f524c44ULL;    // "WORLD"
constexpr std::uint64_t kPurposeSampler = 0x5354524dULL;    // "STRM"
constexpr std::uint64_t kPurposeActions = 0x41435453ULL;    // "ACTS"

SkillDistribution uniform_over(std::vector<std::size_t> skills) {
  SkillDistribution d;
  d.weights.assign(skills.size(), 1.0 / static_cast<double>(skills.size()));
  d.skills = std::move(skills);
  return d;
}

std::vector<std::size_t> skill_range(std::size_t lo, std::size_t hi) {
  std::vector<std::size_t> out;
  for (std::size_t s = lo; s < hi; ++s) out.push_back(s);
  return out;
}

void check_distribution(const SkillDistribution& d, std::size_t num_skills, const std::string& owner) {
  if (d.skills.empty()) throw Error(Errc::InvalidSpec, owner + " has no skills");
  if (d.weights.size() != d.skills.size()) {
    throw Error(Errc::InvalidSpec, owner + ": skill_weights length differs from skills");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < d.skills.size(); ++i) {
    if (d.skills[i] >= num_skills) {
      throw Error(Errc::InvalidSpec, owner + ": skill " + std::to_string(d.skills[i]) + " out of range");
    }
    if (!(d.weights[i] >= 0.0)) throw Error(Errc::InvalidSpec, owner + ": negative skill weight");
    total += d.weights[i];
  }
  if (std::abs(total - 1.0) > 1e-9) throw Error(Errc::InvalidSpec, owner + ": skill weights must sum to 1");
}

std::size_t draw_skill(const SkillDistribution& d, Rng& rng) {
  const double u = rng.uniform();
  double c = 0.0;
  for (std::size_t i = 0; i < d.skills.size(); ++i) {
    c += d.weights[i];
    if (u < c) return d.skills[i];
  }
  return d.skills.back();
}

std::size_t sample_action(std::span<const double> probs, Rng& rng) {
  const double u = rng.uniform();
  double c = 0.0;
  for (std::size_t a = 0; a < probs.size(); ++a) {
    c += probs[a];
    if (u < c) return a;
  }
  return probs.size() - 1;
}

void generate_layout(WorldSpec& spec) {
  const std::size_t m = spec.num_domains;
  const std::size_t k = spec.num_skills;
  if (m == 0) throw Error(Errc::InvalidSpec, "generated worlds need num_domains >= 1");
  if (k < m) throw Error(Errc::InvalidSpec, "need at least as many skills as domains");
  if (spec.pool_sizes.size() != m) throw Error(Errc::InvalidSpec, "pool_sizes must list one size per domain");
  if (spec.overlap == Overlap::Twins && m < 2) throw Error(Errc::InvalidSpec, "twins layout needs m >= 2");

  // Twins: domains 0..m-2 tile the skills, domain m-1 copies domain 0.
  const std::size_t tiles = spec.overlap == Overlap::Twins ? m - 1 : m;
  const std::size_t block = k / tiles;
  spec.domains.clear();
  for (std::size_t d = 0; d < m; ++d) {
    const std::size_t tile = (spec.overlap == Overlap::Twins && d == m - 1) ? 0 : d;
    auto skills = skill_range(tile * block, (tile + 1) * block);
    if (spec.overlap == Overlap::Chain && d + 1 < m) {
      const std::size_t shared = (block + 1) / 2;
      for (std::size_t s = (d + 1) * block; s < (d + 1) * block + shared; ++s) skills.push_back(s);
    }
    spec.domains.push_back({"d" + std::to_string(d + 1), spec.pool_sizes[d], uniform_over(std::move(skills))});
  }
  if (spec.benchmarks.empty()) {
    for (const auto& d : spec.domains) {
      spec.benchmarks.push_back({"in_" + d.name, BenchmarkGroup::In, 500, d.skills});
    }
    spec.benchmarks.push_back({"out_all", BenchmarkGroup::Out, 1000, uniform_over(skill_range(0, k))});
  }
}

SkillDistribution parse_distribution(const nlohmann::json& j, const std::string& owner) {
  std::vector<std::size_t> skills;
  for (const auto& entry : j.at("skills")) {
    if (entry.is_array()) {
      if (entry.size() != 2) throw Error(Errc::InvalidSpec, owner + ": skill ranges are [first, last]");
      const auto lo = entry[0].get<std::size_t>();
      const auto hi = entry[1].get<std::size_t>();
      if (hi < lo) throw Error(Errc::InvalidSpec, owner + ": empty skill range");
      for (std::size_t s = lo; s <= hi; ++s) skills.push_back(s);
    } else {
      skills.push_back(entry.get<std::size_t>());
    }
  }
  if (std::set<std::size_t>(skills.begin(), skills.end()).size() != skills.size()) {
    throw Error(Errc::InvalidSpec, owner + ": repeated skill");
  }
  if (auto it = j.find("skill_weights"); it != j.end()) {
    SkillDistribution d{std::move(skills), it->get<std::vector<double>>()};
    return d;
  }
  if (skills.empty()) throw Error(Errc::InvalidSpec, owner + " has no skills");
  return uniform_over(std::move(skills));
}

}  // namespace

std::vector<std::size_t> SyntheticWorld::pool_sizes() const {
  std::vector<std::size_t> out;
  for (const auto& p : pools) out.push_back(p.size());
  return out;
}

BenchmarkSuite SyntheticWorld::suite() const {
  BenchmarkSuite s;
  for (const auto& b : benchmarks) s.push_back({b.name, b.count, b.group});
  return s;
}

SyntheticWorld make_world(const WorldSpec& input) {
  WorldSpec spec = input;
  if (spec.num_answers < 2) throw Error(Errc::InvalidSpec, "need at least 2 answers");
  if (spec.num_skills == 0) throw Error(Errc::InvalidSpec, "need at least 1 skill");
  if (spec.overlap != Overlap::Custom) generate_layout(spec);
  if (spec.domains.empty()) throw Error(Errc::InvalidSpec, "world has no domains");
  if (spec.num_skills < spec.domains.size()) throw Error(Errc::InvalidSpec, "need at least as many skills as domains");

  std::set<std::string> names;
  for (const auto& d : spec.domains) {
    if (!names.insert(d.name).second) throw Error(Errc::InvalidSpec, "duplicate domain '" + d.name + "'");
    if (d.pool_size == 0) throw Error(Errc::InvalidSpec, "domain '" + d.name + "' has an empty pool");
    check_distribution(d.skills, spec.num_skills, "domain '" + d.name + "'");
  }
  names.clear();
  for (const auto& b : spec.benchmarks) {
    if (!names.insert(b.name).second) throw Error(Errc::InvalidSpec, "duplicate benchmark '" + b.name + "'");
    if (b.count == 0) throw Error(Errc::InvalidSpec, "benchmark '" + b.name + "' has zero samples");
    check_distribution(b.skills, spec.num_skills, "benchmark '" + b.name + "'");
  }

  SyntheticWorld world;
  world.num_skills = spec.num_skills;
  world.num_answers = spec.num_answers;
  world.domains = spec.domains;
  world.benchmarks = spec.benchmarks;

  Rng answers(derive_seed(spec.seed, kPurposeWorld, 0));
  world.answer_of.resize(spec.num_skills);
  for (auto& a : world.answer_of) a = static_cast<std::size_t>(answers.below(spec.num_answers));

  for (std::size_t d = 0; d < world.domains.size(); ++d) {
    Rng pool_rng(derive_seed(spec.seed, kPurposeWorld, d + 1));
    std::vector<Task> pool;
    pool.reserve(world.domains[d].pool_size);
    for (std::size_t i = 0; i < world.domains[d].pool_size; ++i) {
      const auto skill = draw_skill(world.domains[d].skills, pool_rng);
      pool.push_back({skill, world.answer_of[skill]});
    }
    world.pools.push_back(std::move(pool));
  }
  return world;
}

WorldSpec parse_world_spec(const std::string& json_text) {
  try {
    const auto j = nlohmann::json::parse(json_text);
    WorldSpec spec;
    spec.num_skills = j.at("skills").get<std::size_t>();
    spec.num_answers = j.value("answers", std::size_t{4});
    spec.seed = j.value("seed", std::uint64_t{0});
    const auto overlap = j.value("overlap", std::string("custom"));
    if (overlap == "disjoint") spec.overlap = Overlap::Disjoint;
    else if (overlap == "chain") spec.overlap = Overlap::Chain;
    else if (overlap == "twins") spec.overlap = Overlap::Twins;
    else if (overlap == "custom") spec.overlap = Overlap::Custom;
    else throw Error(Errc::InvalidSpec, "unknown overlap '" + overlap + "'");

    if (spec.overlap == Overlap::Custom) {
      for (const auto& d : j.at("domains")) {
        const auto name = d.at("name").get<std::string>();
        spec.domains.push_back({name, d.at("pool").get<std::size_t>(), parse_distribution(d, "domain '" + name + "'")});
      }
      spec.num_domains = spec.domains.size();
    } else {
      spec.num_domains = j.at("domains").get<std::size_t>();
      spec.pool_sizes = j.at("pools").get<std::vector<std::size_t>>();
    }
    if (auto it = j.find("benchmarks"); it != j.end()) {
      for (const auto& b : *it) {
        const auto name = b.at("name").get<std::string>();
        const auto group = b.at("group").get<std::string>();
        if (group != "in" && group != "out") throw Error(Errc::InvalidSpec, "benchmark group must be in|out");
        spec.benchmarks.push_back({name, group == "in" ? BenchmarkGroup::In : BenchmarkGroup::Out,
                                   b.at("count").get<std::size_t>(), parse_distribution(b, "benchmark '" + name + "'")});
      }
    }
    return spec;
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(Errc::InvalidSpec, std::string("world spec: ") + e.what());
  }
}

WorldSpec read_world_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_world_spec(buf.str());
}

// ---------------------------------------------------------------------------

std::vector<double> softmax(std::span<const double> logits) {
  const double hi = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - hi);
    z += p[i];
  }
  for (double& x : p) x /= z;
  return p;
}

std::vector<double> log_softmax(std::span<const double> logits) {
  const double hi = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double l : logits) z += std::exp(l - hi);
  const double log_z = hi + std::log(z);
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - log_z;
  return out;
}

std::vector<double> TabularPolicy::probabilities(std::size_t skill) const { return softmax(row(skill)); }

void GrpoConfig::validate() const {
  if (group_size < 2) throw Error(Errc::GroupTooSmall, "group size must be >= 2");
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw Error(Errc::InvalidArgument, "epsilon must lie in (0,1)");
  if (!(beta >= 0.0)) throw Error(Errc::InvalidArgument, "beta must be >= 0");
  if (!(peak_lr >= 0.0)) throw Error(Errc::InvalidArgument, "peak learning rate must be >= 0");
  if (!(warmup_fraction >= 0.0 && warmup_fraction < 1.0)) {
    throw Error(Errc::InvalidArgument, "warm-up fraction must lie in [0,1)");
  }
  if (inner_epochs < 1) throw Error(Errc::InvalidArgument, "inner epochs must be >= 1");
}

double learning_rate(const GrpoConfig& cfg, std::size_t step) {
  if (cfg.steps == 0 || step >= cfg.steps) return 0.0;
  const auto total = static_cast<double>(cfg.steps);
  const double warm = std::max(1.0, std::round(cfg.warmup_fraction * total));
  const auto t = static_cast<double>(step);
  if (t < warm) return cfg.peak_lr * (t + 1.0) / warm;
  if (total <= warm) return cfg.peak_lr;
  return cfg.peak_lr * (total - t) / (total - warm);
}

std::vector<double> group_advantages(std::span<const double> rewards) {
  if (rewards.size() < 2) throw Error(Errc::GroupTooSmall, "advantages need a group of >= 2");
  const auto n = static_cast<double>(rewards.size());
  const double mean = std::accumulate(rewards.begin(), rewards.end(), 0.0) / n;
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  const double sd = std::sqrt(var / n);
  std::vector<double> adv(rewards.size(), 0.0);
  if (!(sd > 0.0)) return adv;
  for (std::size_t i = 0; i < rewards.size(); ++i) adv[i] = (rewards[i] - mean) / sd;
  return adv;
}

double clipped_term(double ratio, double advantage, double epsilon) {
  const double clipped = std::clamp(ratio, 1.0 - epsilon, 1.0 + epsilon);
  return std::min(ratio * advantage, clipped * advantage);
}

double categorical_kl(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw Error(Errc::DimensionMismatch, "distributions differ in size");
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == 0.0) continue;
    if (!(q[i] > 0.0)) throw Error(Errc::SupportMismatch, "q has zero mass where p does not");
    kl += p[i] * std::log(p[i] / q[i]);
  }
  return std::max(0.0, kl);
}

std::vector<double> TrajectoryGroup::old_logprobs() const {
  const auto lp = log_softmax(old_logits);
  std::vector<double> out;
  for (auto a : actions) out.push_back(lp[a]);
  return out;
}

std::vector<double> TrajectoryGroup::ref_logprobs() const {
  const auto lp = log_softmax(ref_logits);
  std::vector<double> out;
  for (auto a : actions) out.push_back(lp[a]);
  return out;
}

namespace {

// KL(pi || ref) from log-probabilities, without the clamp used by the
// public helper, so the value is smooth for gradient checks.
double kl_from_logs(std::span<const double> logp, std::span<const double> logq) {
  double kl = 0.0;
  for (std::size_t i = 0; i < logp.size(); ++i) kl += std::exp(logp[i]) * (logp[i] - logq[i]);
  return kl;
}

}  // namespace

double grpo_objective(const TrajectoryGroup& group, std::span<const double> logits, const GrpoConfig& cfg) {
  if (group.actions.size() != group.advantages.size()) {
    throw Error(Errc::DimensionMismatch, "one advantage per action");
  }
  if (logits.size() != group.old_logits.size() || logits.size() != group.ref_logits.size()) {
    throw Error(Errc::DimensionMismatch, "logit rows differ in size");
  }
  const auto logp = log_softmax(logits);
  const auto logp_old = log_softmax(group.old_logits);
  const auto logp_ref = log_softmax(group.ref_logits);
  const double kl = kl_from_logs(logp, logp_ref);
  double total = 0.0;
  for (std::size_t i = 0; i < group.actions.size(); ++i) {
    const auto a = group.actions[i];
    const double ratio = std::exp(logp[a] - logp_old[a]);
    total += clipped_term(ratio, group.advantages[i], cfg.epsilon) - cfg.beta * kl;
  }
  return total / static_cast<double>(group.actions.size());
}

std::vector<double> grpo_gradient(const TrajectoryGroup& group, std::span<const double> logits,
                                  const GrpoConfig& cfg) {
  const std::size_t n_actions = logits.size();
  const auto logp = log_softmax(logits);
  const auto logp_old = log_softmax(group.old_logits);
  const auto logp_ref = log_softmax(group.ref_logits);
  std::vector<double> pi(n_actions);
  for (std::size_t j = 0; j < n_actions; ++j) pi[j] = std::exp(logp[j]);

  std::vector<double> grad(n_actions, 0.0);
  const auto g = static_cast<double>(group.actions.size());
  for (std::size_t i = 0; i < group.actions.size(); ++i) {
    const auto a = group.actions[i];
    const double adv = group.advantages[i];
    const double ratio = std::exp(logp[a] - logp_old[a]);
    const double clipped = std::clamp(ratio, 1.0 - cfg.epsilon, 1.0 + cfg.epsilon);
    if (ratio * adv > clipped * adv) continue;  // clipped branch, flat in theta
    // d ratio / d theta_j = ratio * (1[j = a] - pi_j)
    const double scale = adv * ratio / g;
    for (std::size_t j = 0; j < n_actions; ++j) grad[j] -= scale * pi[j];
    grad[a] += scale;
  }

  if (cfg.beta != 0.0) {
    const double kl = kl_from_logs(logp, logp_ref);
    // d KL / d theta_j = pi_j (log pi_j - log ref_j - KL); the 1/G sum of G
    // identical KL terms leaves one copy.
    for (std::size_t j = 0; j < n_actions; ++j) {
      grad[j] -= cfg.beta * pi[j] * (logp[j] - logp_ref[j] - kl);
    }
  }
  return grad;
}

StepResult grpo_step(TabularPolicy& policy, const TabularPolicy& reference, const Task& task,
                     const GrpoConfig& cfg, std::size_t step, Rng& rng) {
  auto row = policy.row(task.skill);
  StepResult out;
  out.learning_rate = learning_rate(cfg, step);
  auto& group = out.group;
  group.skill = task.skill;
  group.old_logits.assign(row.begin(), row.end());
  const auto ref_row = reference.row(task.skill);
  group.ref_logits.assign(ref_row.begin(), ref_row.end());

  const auto probs_old = softmax(group.old_logits);
  group.actions.resize(cfg.group_size);
  group.rewards.resize(cfg.group_size);
  for (std::size_t i = 0; i < cfg.group_size; ++i) {
    const auto a = sample_action(probs_old, rng);
    group.actions[i] = a;
    RewardBreakdown parts;
    parts.format = 1;
    parts.accuracy = a == task.gold ? 1 : 0;
    group.rewards[i] = combined_reward(parts, cfg.reward).total;
  }
  group.advantages = group_advantages(group.rewards);

  for (std::size_t epoch = 0; epoch < cfg.inner_epochs; ++epoch) {
    const auto grad = grpo_gradient(group, row, cfg);
    for (std::size_t j = 0; j < row.size(); ++j) row[j] += out.learning_rate * grad[j];
  }
  return out;
}

double evaluate(const TabularPolicy& policy, const SyntheticWorld& world, const BenchmarkDef& bench) {
  double score = 0.0;
  for (std::size_t i = 0; i < bench.skills.skills.size(); ++i) {
    const auto skill = bench.skills.skills[i];
    const auto row = policy.row(skill);
    const double hi = *std::max_element(row.begin(), row.end());
    std::size_t ties = 0;
    for (double v : row) ties += (v == hi) ? 1 : 0;
    const double credit = row[world.answer_of[skill]] == hi ? 1.0 / static_cast<double>(ties) : 0.0;
    score += bench.skills.weights[i] * credit;
  }
  return std::clamp(score, 0.0, 1.0);
}

TrainResult train_policy(const SyntheticWorld& world, const MixtureWeights& w, const GrpoConfig& cfg,
                         std::uint64_t seed, const TrainOptions& options) {
  cfg.validate();
  if (w.size() != world.num_domains()) {
    throw Error(Errc::DimensionMismatch, "mixture has " + std::to_string(w.size()) + " entries, world has " +
                                             std::to_string(world.num_domains()) + " domains");
  }
  const TabularPolicy reference(world.num_skills, world.num_answers);
  TabularPolicy policy = reference;
  const auto pools = world.pool_sizes();
  MixtureSampler sampler(pools, w, derive_seed(seed, kPurposeSampler, 0), options.exhaustion);
  Rng actions(derive_seed(seed, kPurposeActions, 0));

  std::size_t step = 0;
  for (; step < cfg.steps; ++step) {
    const auto draw = sampler.next();
    if (!draw) break;
    grpo_step(policy, reference, world.pools[draw->domain][draw->item], cfg, step, actions);
  }

  PerformanceRecord record;
  record.id = options.id;
  record.datasets = w.support();
  record.weights = w;
  for (const auto& b : world.benchmarks) record.scores.emplace_back(b.name, evaluate(policy, world, b));
  record.step = static_cast<long long>(step);
  return {std::move(record), std::move(policy)};
}

PerformanceRecord train_with_mixture(const SyntheticWorld& world, const MixtureWeights& w,
                                     const GrpoConfig& cfg, std::uint64_t seed, const TrainOptions& options) {
  return train_policy(world, w, cfg, seed, options).record;
}

GrpoConfig parse_grpo_config(const std::string& json_text) {
  try {
    const auto j = nlohmann::json::parse(json_text);
    GrpoConfig cfg;
    cfg.group_size = j.value("group_size", cfg.group_size);
    cfg.epsilon = j.value("epsilon", cfg.epsilon);
    cfg.beta = j.value("beta", cfg.beta);
    cfg.peak_lr = j.value("peak_lr", cfg.peak_lr);
    cfg.warmup_fraction = j.value("warmup_fraction", cfg.warmup_fraction);
    cfg.steps = j.value("steps", cfg.steps);
    cfg.inner_epochs = j.value("inner_epochs", cfg.inner_epochs);
    if (auto it = j.find("reward_weights"); it != j.end()) {
      cfg.reward.accuracy = it->value("accuracy", cfg.reward.accuracy);
      cfg.reward.iou = it->value("iou", cfg.reward.iou);
      cfg.reward.format = it->value("format", cfg.reward.format);
    }
    cfg.validate();
    return cfg;
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(Errc::InvalidArgument, std::string("grpo config: ") + e.what());
  }
}

}  // namespace mixlab::sim
