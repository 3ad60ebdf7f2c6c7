#include "mixlab/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "mixlab/error.hpp"
#include "mixlab/grpo.hpp"
#include "mixlab/heuristics.hpp"
#include "mixlab/mixtures.hpp"
#include "mixlab/pipeline.hpp"
#include "mixlab/records.hpp"
#include "mixlab/rewards.hpp"
#include "mixlab/sampler.hpp"
#include "mixlab/search.hpp"
#include "mixlab/surrogate.hpp"

namespace mixlab::cli {

using json = nlohmann::ordered_json;

namespace {

double round4(double x) { return std::round(x * 1e4) / 1e4; }

std::string fixed(double x, int digits = 4) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, x);
  return buf;
}

struct Globals {
  std::optional<std::uint64_t> seed_flag;
  bool verbose = false;
  bool pretty = false;
  std::size_t jobs = 1;

  std::uint64_t resolved_seed = 0;
};

std::optional<std::uint64_t> env_seed() {
  const char* raw = std::getenv("MIXLAB_SEED");
  if (raw == nullptr || *raw == '\0') return std::nullopt;
  try {
    std::size_t used = 0;
    const auto v = std::stoull(raw, &used, 10);
    if (used != std::string(raw).size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw CLI::ValidationError("MIXLAB_SEED", std::string("not an unsigned integer: ") + raw);
  }
}

BenchmarkSuite load_suite(const std::string& path) {
  return path.empty() ? table1_suite() : read_suite_file(path);
}

std::size_t infer_domains(std::span<const PerformanceRecord> records) {
  std::size_t m = 0;
  for (const auto& r : records) {
    if (r.weights) m = std::max(m, r.weights->size());
    for (auto d : r.datasets) m = std::max(m, d + 1);
  }
  return m;
}

void split_weighted(std::span<const PerformanceRecord> records, std::span<const BenchmarkSpec> suite,
                    const std::string& target, std::vector<MixtureWeights>& mixtures,
                    std::vector<double>& targets) {
  for (const auto& r : records) {
    if (!r.weights) continue;
    mixtures.push_back(*r.weights);
    targets.push_back(target_score(r, suite, target));
  }
}

// ---------------------------------------------------------------------------

struct AggregateArgs {
  std::string records;
  std::string suite;
};

void run_aggregate(const AggregateArgs& a, const Globals& g, std::ostream& out) {
  const auto suite = load_suite(a.suite);
  const auto records = read_records_file(a.records, suite);
  if (g.pretty) out << "id                 in      out\n";
  for (const auto& r : records) {
    const auto s = summarize(r, suite);
    if (g.pretty) {
      std::string id = r.id;
      id.resize(std::max<std::size_t>(id.size(), 16), ' ');
      out << id << "  " << fixed(s.in_score) << "  " << fixed(s.out_score) << '\n';
    } else {
      out << json{{"id", r.id}, {"in", round4(s.in_score)}, {"out", round4(s.out_score)}}.dump() << '\n';
    }
  }
}

struct HeuristicArgs {
  std::string method;
  std::string records;
  std::string suite;
  double alpha = 0.5;
  double alpha_single = 1.0;
  double lambda = kDefaultRidgeLambda;
  std::size_t domains = 0;
  bool all_records = false;
};

void run_heuristic(const HeuristicArgs& a, const Globals& g, std::ostream& out, std::ostream& err) {
  const auto suite = load_suite(a.suite);
  auto records = read_records_file(a.records, suite);
  if (!a.all_records) records = weighted_records(records);
  if (records.empty()) throw Error(Errc::EmptyRecords, "no records to aggregate");
  const std::size_t m = a.domains ? a.domains : infer_domains(records);
  const auto runs = scored_runs(records, suite);
  HeuristicResult result = [&] {
    if (a.method == "alpha") return alpha_weights(runs, m, AlphaConfig{a.alpha, a.alpha_single});
    if (a.method == "coli") return colinearity_weights(runs, m, a.lambda);
    return leave_one_out_weights(runs, m);
  }();
  for (const auto& w : result.warnings) err << "warning: " << w << '\n';
  if (g.verbose) err << "heuristic " << a.method << " over " << runs.size() << " runs, m = " << m << '\n';
  out << format_mixture_line(result.weights.values()) << '\n';
}

struct FitArgs {
  std::string records;
  std::string suite;
  std::string target = "out";
  std::string save;
  int degree = 2;
  std::size_t splits = 5;
  double test_fraction = 0.2;
};

void run_fit(const FitArgs& a, const Globals& g, std::ostream& out, std::ostream& err) {
  const auto suite = load_suite(a.suite);
  const auto records = read_records_file(a.records, suite);
  std::vector<MixtureWeights> mixtures;
  std::vector<double> targets;
  split_weighted(records, suite, a.target, mixtures, targets);
  const auto fit = cross_validated_fit(mixtures, targets,
                                       {a.degree, a.splits, a.test_fraction, g.resolved_seed});
  if (!a.save.empty()) fit.model.save(a.save);
  if (g.verbose) {
    const auto& s = fit.report.splits[fit.report.chosen_split];
    err << "fit on " << mixtures.size() << " records; chosen split " << fit.report.chosen_split + 1
        << " test R2 " << fixed(s.test_r2) << '\n';
  }
  json j;
  j["model"] = json::parse(fit.model.to_json());
  j["report"] = json::parse(fit.report.to_json());
  out << (g.pretty ? j.dump(2) : j.dump()) << '\n';
}

struct ProposeArgs {
  std::string records;
  std::string suite;
  std::string target = "out";
  int degree = 2;
  std::size_t splits = 5;
  double test_fraction = 0.2;
  std::size_t n = 10000;
  std::size_t k = 10;
  double jitter = kDefaultJitter;
};

void run_propose(const ProposeArgs& a, const Globals& g, std::ostream& out, std::ostream& err) {
  const auto suite = load_suite(a.suite);
  const auto records = read_records_file(a.records, suite);
  const SurrogateConfig sc{a.degree, a.splits, a.test_fraction, a.target};
  const ProposalConfig pc{a.n, a.k, a.jitter, g.resolved_seed, g.jobs};
  const auto p = propose(records, suite, sc, pc);
  if (g.verbose) err << p.survivors << " of " << a.n << " samples survived the simplex filter\n";
  if (!g.pretty) {
    out << proposal_to_jsonl(p.top);
    return;
  }
  out << "rank  predicted  weights\n";
  for (std::size_t i = 0; i < p.top.size(); ++i) {
    out << (i + 1 < 10 ? " " : "") << i + 1 << "    " << fixed(p.top[i].predicted) << "     "
        << format_mixture_line(p.top[i].weights.values()) << '\n';
  }
}

struct SampleArgs {
  std::string weights;
  std::vector<std::size_t> pools;
  std::size_t max_steps = 0;
  std::string policy = "stop";
};

ExhaustionPolicy parse_policy(const std::string& s) {
  return s == "renormalize" ? ExhaustionPolicy::Renormalize : ExhaustionPolicy::Stop;
}

void run_sample(const SampleArgs& a, const Globals& g, std::ostream& out, std::ostream& err) {
  const auto w = read_mixture_file(a.weights);
  MixtureSampler sampler(a.pools, w, g.resolved_seed, parse_policy(a.policy));
  std::size_t emitted = 0;
  while (a.max_steps == 0 || emitted < a.max_steps) {
    const auto d = sampler.next();
    if (!d) break;
    out << '(' << d->domain << ',' << d->item << ")\n";
    ++emitted;
  }
  if (g.verbose || sampler.finished()) {
    err << emitted << " draws" << (sampler.finished() ? ", stream exhausted" : "") << '\n';
  }
}

struct SimulateArgs {
  std::string world;
  std::string weights;
  std::string train;
  std::string out;
  std::string id = "sim";
  std::string policy = "stop";
  std::size_t steps = 0;
};

void run_simulate(const SimulateArgs& a, const Globals& g, std::ostream& out, std::ostream& err) {
  const auto world = sim::make_world(sim::read_world_spec(a.world));
  sim::GrpoConfig cfg;
  if (!a.train.empty()) {
    std::ifstream in(a.train);
    if (!in) throw Error(Errc::Io, "cannot open " + a.train);
    std::stringstream buf;
    buf << in.rdbuf();
    cfg = sim::parse_grpo_config(buf.str());
  }
  if (a.steps) cfg.steps = a.steps;
  const auto w = read_mixture_file(a.weights);
  const auto record = sim::train_with_mixture(world, w, cfg, g.resolved_seed, {a.id, parse_policy(a.policy)});
  const auto line = record_to_jsonl(record);
  if (!a.out.empty()) {
    std::ofstream file(a.out, std::ios::app);
    if (!file) throw Error(Errc::Io, "cannot write " + a.out);
    file << line << '\n';
  }
  if (g.verbose) err << "trained " << record.step.value_or(0) << " steps\n";
  if (g.pretty) {
    const auto s = summarize(record, world.suite());
    out << record.id << "  in " << fixed(s.in_score) << "  out " << fixed(s.out_score) << '\n';
  } else {
    out << line << '\n';
  }
}

struct PipelineArgs {
  std::string config;
  std::string out_dir;
  std::optional<std::size_t> refine;
};

void run_pipeline(const PipelineArgs& a, const Globals& g, std::ostream& out, std::ostream& err) {
  auto cfg = read_pipeline_config(a.config);
  cfg.seed = g.resolved_seed;
  cfg.jobs = g.jobs;
  if (a.refine) cfg.refine_rounds = *a.refine;
  if (!a.out_dir.empty()) cfg.output_dir = a.out_dir;
  if (cfg.output_dir.empty()) throw Error(Errc::InvalidArgument, "no output directory (use --out)");
  const auto report = run_full(cfg);
  write_outputs(report, cfg.output_dir);
  if (g.verbose) err << "wrote " << cfg.output_dir << '\n';
  out << report.summary_table();
}

struct ScoreArgs {
  std::string input;
  double w_accuracy = 2.0;
  double w_iou = 2.0;
  double w_format = 1.0;
};

void run_score(const ScoreArgs& a, const Globals& g, std::ostream& out) {
  std::ifstream in(a.input);
  if (!in) throw Error(Errc::Io, "cannot open " + a.input);
  const RewardWeights weights{a.w_accuracy, a.w_iou, a.w_format};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const std::exception& e) {
      throw Error(Errc::MalformedLine, "line " + std::to_string(lineno) + ": " + e.what());
    }
    const auto mode_name = j.value("mode", std::string("text"));
    if (mode_name != "text" && mode_name != "box") {
      throw Error(Errc::MalformedLine, "line " + std::to_string(lineno) + ": mode must be text or box");
    }
    const auto mode = mode_name == "box" ? AnswerMode::Box : AnswerMode::Text;
    const auto gold = j.at("gold").is_string() ? j.at("gold").get<std::string>() : j.at("gold").dump();
    const auto text_key = j.contains("prediction") ? "prediction" : "output";
    const auto r = score_output(j.at(text_key).get<std::string>(), gold, mode, weights);
    json o;
    if (auto id = j.find("id"); id != j.end()) o["id"] = *id;
    o["format"] = r.format;
    o["accuracy"] = r.accuracy ? json(*r.accuracy) : json(nullptr);
    o["iou"] = r.iou ? json(*r.iou) : json(nullptr);
    o["total"] = r.total;
    out << (g.pretty ? o.dump(2) : o.dump()) << '\n';
  }
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Data-mixture search toolkit", "mixlab"};
  app.set_help_all_flag("--help-all", "Show help for all subcommands");
  app.fallthrough();

  Globals g;
  app.add_option("--seed", g.seed_flag, "Master seed (falls back to MIXLAB_SEED, then 0)");
  app.add_flag("-v,--verbose", g.verbose, "Extra diagnostics on stderr");
  app.add_flag("--pretty", g.pretty, "Human-readable tables instead of JSONL");
  app.add_option("--jobs", g.jobs, "Parallel simulation runs")->check(CLI::PositiveNumber);

  AggregateArgs agg;
  auto* c_agg = app.add_subcommand("aggregate", "In/Out scores of every record");
  c_agg->add_option("--records", agg.records, "Records JSONL")->required()->check(CLI::ExistingFile);
  c_agg->add_option("--suite", agg.suite, "Benchmark suite JSON (default: built-in)")->check(CLI::ExistingFile);

  HeuristicArgs heu;
  auto* c_heu = app.add_subcommand("heuristic", "Heuristic mixture weights");
  c_heu->add_option("--method", heu.method, "alpha | coli | norm")
      ->required()
      ->check(CLI::IsMember({"alpha", "coli", "norm"}));
  c_heu->add_option("--records", heu.records, "Records JSONL")->required()->check(CLI::ExistingFile);
  c_heu->add_option("--suite", heu.suite, "Benchmark suite JSON")->check(CLI::ExistingFile);
  c_heu->add_option("--alpha", heu.alpha, "In/Out trade-off")->check(CLI::Range(0.0, 1.0));
  c_heu->add_option("--alpha-single", heu.alpha_single, "Single-dataset damping")->check(CLI::Range(0.0, 1.0));
  c_heu->add_option("--lambda", heu.lambda, "Ridge penalty")->check(CLI::PositiveNumber);
  c_heu->add_option("--domains", heu.domains, "Number of datasets (default: inferred)");
  c_heu->add_flag("--all-records", heu.all_records, "Also use records without mixture weights");

  FitArgs fit;
  auto* c_fit = app.add_subcommand("fit", "Cross-validated surrogate fit");
  c_fit->add_option("--records", fit.records, "Records JSONL")->required()->check(CLI::ExistingFile);
  c_fit->add_option("--suite", fit.suite, "Benchmark suite JSON")->check(CLI::ExistingFile);
  c_fit->add_option("--degree", fit.degree, "1 or 2")->check(CLI::IsMember({1, 2}));
  c_fit->add_option("--splits", fit.splits, "Random train/test splits")->check(CLI::PositiveNumber);
  c_fit->add_option("--test-fraction", fit.test_fraction, "Held-out share")->check(CLI::Range(0.0, 1.0));
  c_fit->add_option("--target", fit.target, "in | out | benchmark name");
  c_fit->add_option("--save", fit.save, "Write the model JSON here");

  ProposeArgs pro;
  auto* c_pro = app.add_subcommand("propose", "Fit, sample and rank candidate mixtures");
  c_pro->add_option("--records", pro.records, "Records JSONL")->required()->check(CLI::ExistingFile);
  c_pro->add_option("--suite", pro.suite, "Benchmark suite JSON")->check(CLI::ExistingFile);
  c_pro->add_option("--n", pro.n, "Gaussian samples")->check(CLI::PositiveNumber);
  c_pro->add_option("--k", pro.k, "Mixtures to emit");
  c_pro->add_option("--jitter", pro.jitter, "Covariance jitter")->check(CLI::NonNegativeNumber);
  c_pro->add_option("--degree", pro.degree, "1 or 2")->check(CLI::IsMember({1, 2}));
  c_pro->add_option("--splits", pro.splits, "Random train/test splits")->check(CLI::PositiveNumber);
  c_pro->add_option("--test-fraction", pro.test_fraction, "Held-out share")->check(CLI::Range(0.0, 1.0));
  c_pro->add_option("--target", pro.target, "in | out | benchmark name");

  SampleArgs smp;
  auto* c_smp = app.add_subcommand("sample", "Stream (domain,item) draws");
  c_smp->add_option("--weights", smp.weights, "Mixture file")->required()->check(CLI::ExistingFile);
  c_smp->add_option("--pools", smp.pools, "Pool sizes, comma separated")->required()->delimiter(',');
  c_smp->add_option("--max-steps", smp.max_steps, "Stop after this many draws (0: until exhausted)");
  c_smp->add_option("--policy", smp.policy, "stop | renormalize")
      ->check(CLI::IsMember({"stop", "renormalize"}));

  SimulateArgs simu;
  auto* c_sim = app.add_subcommand("simulate", "Train one policy on a synthetic world");
  c_sim->add_option("--world", simu.world, "World spec JSON")->required()->check(CLI::ExistingFile);
  c_sim->add_option("--weights", simu.weights, "Mixture file")->required()->check(CLI::ExistingFile);
  c_sim->add_option("--train", simu.train, "Training config JSON")->check(CLI::ExistingFile);
  c_sim->add_option("--steps", simu.steps, "Step budget (overrides the config)");
  c_sim->add_option("--out", simu.out, "Append the record to this JSONL file");
  c_sim->add_option("--id", simu.id, "Record id");
  c_sim->add_option("--policy", simu.policy, "stop | renormalize")
      ->check(CLI::IsMember({"stop", "renormalize"}));

  PipelineArgs pip;
  auto* c_pip = app.add_subcommand("pipeline", "Seed runs, fit, propose, verify");
  c_pip->add_option("--config", pip.config, "Pipeline config JSON")->required()->check(CLI::ExistingFile);
  c_pip->add_option("--out", pip.out_dir, "Output directory (overrides the config)");
  c_pip->add_option("--refine", pip.refine, "Extra refinement rounds");

  ScoreArgs sco;
  auto* c_sco = app.add_subcommand("score", "Rewards for {prediction, gold, mode} JSONL lines");
  c_sco->add_option("--input", sco.input, "JSONL file")->required()->check(CLI::ExistingFile);
  c_sco->add_option("--accuracy-weight", sco.w_accuracy);
  c_sco->add_option("--iou-weight", sco.w_iou);
  c_sco->add_option("--format-weight", sco.w_format);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
    if (app.get_subcommands().empty()) {
      err << app.help();
      return kExitUsage;
    }
    if (g.seed_flag) {
      g.resolved_seed = *g.seed_flag;
    } else if (auto e = env_seed()) {
      g.resolved_seed = *e;
    }
  } catch (const CLI::CallForHelp&) {
    out << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\nRun with --help for usage.\n";
    return kExitUsage;
  }

  // The pipeline keeps its config seed unless a seed is given explicitly.
  const bool pipeline_seed_from_config = c_pip->parsed() && !g.seed_flag && !std::getenv("MIXLAB_SEED");
  try {
    if (pipeline_seed_from_config) {
      g.resolved_seed = read_pipeline_config(pip.config).seed;
    }
    err << "seed: " << g.resolved_seed << '\n';
    if (c_agg->parsed()) run_aggregate(agg, g, out);
    if (c_heu->parsed()) run_heuristic(heu, g, out, err);
    if (c_fit->parsed()) run_fit(fit, g, out, err);
    if (c_pro->parsed()) run_propose(pro, g, out, err);
    if (c_smp->parsed()) run_sample(smp, g, out, err);
    if (c_sim->parsed()) run_simulate(simu, g, out, err);
    if (c_pip->parsed()) run_pipeline(pip, g, out, err);
    if (c_sco->parsed()) run_score(sco, g, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
  out.flush();
  return kExitOk;
}

int main_entry(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return dispatch(args, std::cout, std::cerr);
}

}  // namespace mixlab::cli
