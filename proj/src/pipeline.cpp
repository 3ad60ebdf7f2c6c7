#include "mixlab/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "json.hpp"

#include "mixlab/error.hpp"

namespace mixlab {

using json = nlohmann::ordered_json;

namespace {

constexpr std::uint64_t kPurposeSeedPhase = 0x5345454450ULL;  // "SEEDP"
constexpr std::uint64_t kPurposeRandomMix = 0x524d4958ULL;     // "RMIX"
constexpr std::uint64_t kPurposePropose = 0x50524f50ULL;       // "PROP"
constexpr std::uint64_t kPurposeVerify = 0x5645524946ULL;      // "VERIF"

RealizedScores realized_from(std::vector<double> values) {
  RealizedScores r;
  r.per_seed = std::move(values);
  if (r.per_seed.empty()) return r;
  double sum = 0.0;
  for (double v : r.per_seed) sum += v;
  r.mean = sum / static_cast<double>(r.per_seed.size());
  const auto [lo, hi] = std::minmax_element(r.per_seed.begin(), r.per_seed.end());
  r.min = *lo;
  r.max = *hi;
  return r;
}

json realized_json(const RealizedScores& r) {
  return {{"mean", r.mean}, {"min", r.min}, {"max", r.max}, {"per_seed", r.per_seed}};
}

std::string fmt(double x, int digits = 4) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, x);
  return buf;
}

// Record whose scores are the per-benchmark means of `runs` (same mixture).
PerformanceRecord averaged_record(const std::string& id, const std::vector<const PerformanceRecord*>& runs) {
  PerformanceRecord out = *runs.front();
  out.id = id;
  for (auto& [name, value] : out.scores) {
    double sum = 0.0;
    for (const auto* r : runs) sum += r->score(name);
    value = sum / static_cast<double>(runs.size());
  }
  long long steps = 0;
  for (const auto* r : runs) steps += r->step.value_or(0);
  out.step = steps / static_cast<long long>(runs.size());
  return out;
}

PipelineReport fit_propose_verify(const PipelineConfig& config, const sim::SyntheticWorld& world,
                                  std::vector<PerformanceRecord> fit_records,
                                  std::vector<std::uint64_t> fit_seeds, std::size_t round) {
  const auto suite = world.suite();
  PipelineReport report;
  report.round = round;
  report.fit_records = std::move(fit_records);
  report.fit_seeds = std::move(fit_seeds);

  ProposalConfig proposal = config.proposal;
  proposal.seed = derive_seed(config.seed, kPurposePropose, round);
  proposal.jobs = config.jobs;
  auto result = propose(report.fit_records, suite, config.surrogate, proposal);
  report.fit = result.fit.report;
  report.model = result.fit.model;
  report.survivors = result.survivors;

  for (std::size_t j = 0; j < config.verification_seeds; ++j) {
    report.verification_seeds.push_back(derive_seed(config.seed, kPurposeVerify + round, j));
  }
  const std::set<std::uint64_t> used(report.fit_seeds.begin(), report.fit_seeds.end());
  for (auto s : report.verification_seeds) {
    if (used.count(s)) throw Error(Errc::InvalidArgument, "verification seed collides with a fitting seed");
  }

  // Paired design: every mixture (proposals, then uniform) runs on the same seeds.
  std::vector<TrainJob> jobs;
  const auto uniform = seed_all(world.num_domains());
  for (std::size_t p = 0; p <= result.top.size(); ++p) {
    const bool is_uniform = p == result.top.size();
    const auto& w = is_uniform ? uniform : result.top[p].weights;
    for (std::size_t j = 0; j < report.verification_seeds.size(); ++j) {
      const std::string label = is_uniform ? "uniform" : "p" + std::to_string(p + 1);
      jobs.push_back({"verify/r" + std::to_string(round) + "/" + label + "/s" + std::to_string(j + 1), w,
                      report.verification_seeds[j]});
    }
  }
  report.verification_records = run_jobs(world, config.train, jobs, config.jobs);

  const std::size_t v = report.verification_seeds.size();
  auto realized_block = [&](std::size_t p) {
    std::vector<double> values;
    for (std::size_t j = 0; j < v; ++j) {
      values.push_back(target_score(report.verification_records[p * v + j], suite, config.surrogate.target));
    }
    return realized_from(std::move(values));
  };
  for (std::size_t p = 0; p < result.top.size(); ++p) {
    report.proposals.push_back({result.top[p].weights, result.top[p].predicted, realized_block(p)});
  }
  report.uniform = realized_block(result.top.size());
  if (!report.proposals.empty()) {
    const auto& top = report.proposals.front().realized;
    report.uniform_delta = top.mean - report.uniform.mean;
    for (std::size_t j = 0; j < v; ++j) {
      if (top.per_seed[j] > report.uniform.per_seed[j]) ++report.paired_wins;
    }
  }
  return report;
}

}  // namespace

void PipelineConfig::validate() const {
  if (!plan.singles && !plan.exclude_one && !plan.all && plan.random == 0) {
    throw Error(Errc::InvalidArgument, "seed plan selects no mixtures");
  }
  if (verification_seeds < 1) throw Error(Errc::InvalidArgument, "verification_seeds must be >= 1");
  if (seed_replicates < 1) throw Error(Errc::InvalidArgument, "seed_replicates must be >= 1");
  train.validate();
}

PipelineConfig parse_pipeline_config(const std::string& json_text, const std::string& base_dir) {
  PipelineConfig cfg;
  try {
    const auto j = json::parse(json_text);
    if (auto it = j.find("world_file"); it != j.end()) {
      std::filesystem::path p = it->get<std::string>();
      if (p.is_relative()) p = std::filesystem::path(base_dir) / p;
      cfg.world = sim::read_world_spec(p.string());
    } else {
      cfg.world = sim::parse_world_spec(j.at("world").dump());
    }
    if (auto it = j.find("train"); it != j.end()) cfg.train = sim::parse_grpo_config(it->dump());
    if (auto it = j.find("plan"); it != j.end()) {
      cfg.plan.singles = it->value("singles", cfg.plan.singles);
      cfg.plan.exclude_one = it->value("exclude_one", cfg.plan.exclude_one);
      cfg.plan.all = it->value("all", cfg.plan.all);
      cfg.plan.random = it->value("random", cfg.plan.random);
    }
    cfg.seed_replicates = j.value("seed_replicates", cfg.seed_replicates);
    if (auto it = j.find("surrogate"); it != j.end()) {
      cfg.surrogate.degree = it->value("degree", cfg.surrogate.degree);
      cfg.surrogate.n_splits = it->value("splits", cfg.surrogate.n_splits);
      cfg.surrogate.test_fraction = it->value("test_fraction", cfg.surrogate.test_fraction);
      cfg.surrogate.target = it->value("target", cfg.surrogate.target);
    }
    if (auto it = j.find("proposal"); it != j.end()) {
      cfg.proposal.n_samples = it->value("n_samples", cfg.proposal.n_samples);
      cfg.proposal.k = it->value("k", cfg.proposal.k);
      cfg.proposal.jitter = it->value("jitter", cfg.proposal.jitter);
    }
    cfg.verification_seeds = j.value("verification_seeds", cfg.verification_seeds);
    cfg.refine_rounds = j.value("refine_rounds", cfg.refine_rounds);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.jobs = j.value("jobs", cfg.jobs);
    if (auto it = j.find("output_dir"); it != j.end()) {
      std::filesystem::path p = it->get<std::string>();
      if (p.is_relative()) p = std::filesystem::path(base_dir) / p;
      cfg.output_dir = p.string();
    }
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(Errc::InvalidArgument, std::string("pipeline config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

PipelineConfig read_pipeline_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  const auto dir = std::filesystem::path(path).parent_path();
  return parse_pipeline_config(buf.str(), dir.empty() ? "." : dir.string());
}

std::vector<LabeledMixture> seed_mixtures(std::size_t m, const SeedPlan& plan, std::uint64_t seed) {
  std::vector<LabeledMixture> out;
  auto add = [&](std::string label, MixtureWeights w) {
    for (const auto& existing : out) {
      if (existing.weights == w) return;
    }
    out.push_back({std::move(label), std::move(w)});
  };
  if (plan.singles) {
    for (std::size_t i = 0; i < m; ++i) add("single-" + std::to_string(i + 1), seed_single(i, m));
  }
  if (plan.exclude_one && m >= 2) {
    for (std::size_t i = 0; i < m; ++i) add("exclude-" + std::to_string(i + 1), seed_exclude_one(i, m));
  }
  if (plan.all) add("all", seed_all(m));
  if (plan.random > 0) {
    // Normalized exponentials are uniform on the simplex.
    Rng rng(derive_seed(seed, kPurposeRandomMix, 0));
    for (std::size_t r = 0; r < plan.random; ++r) {
      std::vector<double> raw(m);
      for (auto& x : raw) {
        double u = rng.uniform();
        while (u <= 0.0) u = rng.uniform();
        x = -std::log(u);
      }
      add("random-" + std::to_string(r + 1), MixtureWeights::normalize(std::move(raw)));
    }
  }
  return out;
}

std::vector<PerformanceRecord> run_jobs(const sim::SyntheticWorld& world, const sim::GrpoConfig& cfg,
                                        const std::vector<TrainJob>& jobs, std::size_t threads) {
  std::vector<std::optional<PerformanceRecord>> slots(jobs.size());
  auto run_one = [&](std::size_t i) {
    slots[i] = sim::train_with_mixture(world, jobs[i].weights, cfg, jobs[i].seed, {jobs[i].id});
  };
  threads = std::max<std::size_t>(1, std::min(threads, jobs.size()));
  if (threads == 1) {
    for (std::size_t i = 0; i < jobs.size(); ++i) run_one(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(threads);
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        try {
          for (std::size_t i = next++; i < jobs.size(); i = next++) run_one(i);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  std::vector<PerformanceRecord> out;
  out.reserve(jobs.size());
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

namespace {

std::vector<TrainJob> seed_phase_jobs(const PipelineConfig& config, std::size_t m) {
  std::vector<TrainJob> jobs;
  const auto mixtures = seed_mixtures(m, config.plan, config.seed);
  std::size_t index = 0;
  for (const auto& mix : mixtures) {
    for (std::size_t rep = 0; rep < config.seed_replicates; ++rep, ++index) {
      jobs.push_back({"seed/" + mix.label + "/s" + std::to_string(rep + 1), mix.weights,
                      derive_seed(config.seed, kPurposeSeedPhase, index)});
    }
  }
  return jobs;
}

}  // namespace

std::vector<PerformanceRecord> run_seed_phase(const PipelineConfig& config, const sim::SyntheticWorld& world) {
  return run_jobs(world, config.train, seed_phase_jobs(config, world.num_domains()), config.jobs);
}

PipelineReport run_full(const PipelineConfig& config) {
  config.validate();
  const auto world = sim::make_world(config.world);
  const auto jobs = seed_phase_jobs(config, world.num_domains());
  std::vector<std::uint64_t> seeds;
  for (const auto& j : jobs) seeds.push_back(j.seed);
  auto records = run_jobs(world, config.train, jobs, config.jobs);
  auto report = fit_propose_verify(config, world, std::move(records), std::move(seeds), 0);
  if (config.refine_rounds > 0) return refine(report, config, config.refine_rounds);
  return report;
}

PipelineReport refine(const PipelineReport& report, const PipelineConfig& config, std::size_t rounds) {
  if (rounds == 0) return report;
  const auto world = sim::make_world(config.world);
  PipelineReport current = report;
  for (std::size_t r = 0; r < rounds; ++r) {
    auto records = current.fit_records;
    auto seeds = current.fit_seeds;
    const std::size_t v = current.verification_seeds.size();
    for (std::size_t p = 0; p < current.proposals.size(); ++p) {
      std::vector<const PerformanceRecord*> runs;
      for (std::size_t j = 0; j < v; ++j) runs.push_back(&current.verification_records[p * v + j]);
      records.push_back(averaged_record(
          "refine/r" + std::to_string(current.round) + "/p" + std::to_string(p + 1), runs));
    }
    seeds.insert(seeds.end(), current.verification_seeds.begin(), current.verification_seeds.end());
    current = fit_propose_verify(config, world, std::move(records), std::move(seeds), current.round + 1);
  }
  return current;
}

std::string PipelineReport::to_json() const {
  json j;
  j["round"] = round;
  j["fit_record_count"] = fit_records.size();
  j["fit"] = json::parse(fit.to_json());
  j["model"] = model ? json::parse(model->to_json()) : json(nullptr);
  j["candidate_survivors"] = survivors;
  j["verification_seeds"] = verification_seeds;
  j["proposals"] = json::array();
  for (std::size_t i = 0; i < proposals.size(); ++i) {
    j["proposals"].push_back({{"rank", i + 1},
                              {"weights", proposals[i].weights.vector()},
                              {"predicted", proposals[i].predicted},
                              {"realized", realized_json(proposals[i].realized)}});
  }
  j["uniform"] = realized_json(uniform);
  j["uniform_delta"] = uniform_delta;
  j["paired_wins"] = paired_wins;
  return j.dump(2);
}

std::string PipelineReport::summary_table() const {
  std::ostringstream out;
  out << "round " << round << ": " << fit_records.size() << " fitting records, degree " << fit.degree
      << " surrogate, split " << fit.chosen_split + 1 << "/" << fit.splits.size();
  if (!fit.splits.empty()) {
    const auto& s = fit.splits[fit.chosen_split];
    out << " (train R2 " << fmt(s.train_r2) << ", test R2 " << fmt(s.test_r2) << ")";
  }
  out << "\n\n";
  out << "rank  predicted  realized_mean  [min, max]          weights\n";
  for (std::size_t i = 0; i < proposals.size(); ++i) {
    const auto& p = proposals[i];
    out << (i + 1 < 10 ? " " : "") << i + 1 << "    " << fmt(p.predicted) << "     " << fmt(p.realized.mean)
        << "         [" << fmt(p.realized.min) << ", " << fmt(p.realized.max) << "]  "
        << format_mixture_line(p.weights.values()) << "\n";
  }
  out << "uniform           " << fmt(uniform.mean) << "         [" << fmt(uniform.min) << ", "
      << fmt(uniform.max) << "]\n\n";
  out << "top-1 minus uniform: " << (uniform_delta >= 0 ? "+" : "") << fmt(uniform_delta) << " ("
      << paired_wins << "/" << verification_seeds.size() << " paired seeds improved)\n";
  return out.str();
}

void write_outputs(const PipelineReport& report, const std::string& dir) {
  std::filesystem::create_directories(dir);
  const std::filesystem::path base(dir);
  auto open = [&](const char* name) {
    std::ofstream out(base / name);
    if (!out) throw Error(Errc::Io, "cannot write " + (base / name).string());
    return out;
  };
  {
    auto out = open("records.jsonl");
    write_records(out, report.fit_records);
    write_records(out, report.verification_records);
  }
  if (report.model) {
    auto out = open("model.json");
    out << report.model->to_json() << '\n';
  }
  {
    auto out = open("report.json");
    out << report.to_json() << '\n';
  }
  {
    auto out = open("summary.txt");
    out << report.summary_table();
  }
}

}  // namespace mixlab
