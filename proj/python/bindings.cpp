#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "mixlab/error.hpp"
#include "mixlab/grpo.hpp"
#include "mixlab/heuristics.hpp"
#include "mixlab/pipeline.hpp"
#include "mixlab/records.hpp"
#include "mixlab/rewards.hpp"
#include "mixlab/sampler.hpp"
#include "mixlab/search.hpp"
#include "mixlab/surrogate.hpp"

namespace py = pybind11;
using namespace mixlab;

namespace {

BenchmarkSuite suite_or_default(const std::optional<std::string>& path) {
  return path ? read_suite_file(*path) : table1_suite();
}

std::size_t count_domains(const std::vector<PerformanceRecord>& records) {
  std::size_t m = 0;
  for (const auto& r : records) {
    if (r.weights) m = std::max(m, r.weights->size());
    for (auto d : r.datasets) m = std::max(m, d + 1);
  }
  return m;
}

std::vector<double> values(const MixtureWeights& w) { return {w.values().begin(), w.values().end()}; }

py::dict breakdown(const RewardBreakdown& r) {
  py::dict d;
  d["format"] = r.format;
  d["accuracy"] = r.accuracy ? py::cast(*r.accuracy) : py::none();
  d["iou"] = r.iou ? py::cast(*r.iou) : py::none();
  d["total"] = r.total;
  return d;
}

AnswerMode parse_mode(const std::string& mode) {
  if (mode == "text") return AnswerMode::Text;
  if (mode == "box") return AnswerMode::Box;
  throw Error(Errc::InvalidArgument, "mode must be 'text' or 'box'");
}

ExhaustionPolicy parse_policy(const std::string& policy) {
  if (policy == "stop") return ExhaustionPolicy::Stop;
  if (policy == "renormalize") return ExhaustionPolicy::Renormalize;
  throw Error(Errc::InvalidArgument, "policy must be 'stop' or 'renormalize'");
}

}  // namespace

PYBIND11_MODULE(_mixlab, m) {
  m.doc() = "Data-mixture search for multi-domain RL post-training";

  static py::exception<Error> error(m, "MixlabError", PyExc_ValueError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::set_error(error, e.what());
    }
  });

  m.def("normalize", [](std::vector<double> raw) { return values(MixtureWeights::normalize(std::move(raw))); },
        py::arg("raw"));
  m.def("validate", [](std::vector<double> raw) { return values(MixtureWeights::validate(std::move(raw))); },
        py::arg("weights"));

  py::class_<PerformanceRecord>(m, "Record")
      .def_readonly("id", &PerformanceRecord::id)
      .def_readonly("datasets", &PerformanceRecord::datasets)
      .def_property_readonly("weights",
                             [](const PerformanceRecord& r) -> std::optional<std::vector<double>> {
                               if (!r.weights) return std::nullopt;
                               return values(*r.weights);
                             })
      .def_property_readonly("scores",
                             [](const PerformanceRecord& r) {
                               py::dict d;
                               for (const auto& [k, v] : r.scores) d[py::str(k)] = v;
                               return d;
                             })
      .def_readonly("step", &PerformanceRecord::step)
      .def("score", &PerformanceRecord::score)
      .def("to_json", &record_to_jsonl)
      .def("__repr__", [](const PerformanceRecord& r) { return "<Record " + r.id + ">"; });

  m.def("read_records", [](const std::string& path) { return read_records_file(path); }, py::arg("path"));
  m.def(
      "parse_records",
      [](const std::string& text) {
        std::istringstream in(text);
        return parse_records(in);
      },
      py::arg("text"));
  m.def("table2_fixture", &table2_fixture, py::return_value_policy::copy);
  m.def(
      "summarize",
      [](const PerformanceRecord& r, std::optional<std::string> suite) {
        const auto s = summarize(r, suite_or_default(suite));
        return py::make_tuple(s.in_score, s.out_score);
      },
      py::arg("record"), py::arg("suite") = py::none());

  m.def(
      "heuristic",
      [](std::vector<PerformanceRecord> records, const std::string& method, double alpha, double alpha_single,
         double lambda, bool all_records, std::optional<std::string> suite) {
        if (!all_records) records = weighted_records(records);
        if (records.empty()) throw Error(Errc::EmptyRecords, "no records");
        const auto runs = scored_runs(records, suite_or_default(suite));
        const auto n = count_domains(records);
        const auto r = [&] {
          if (method == "alpha") return alpha_weights(runs, n, {alpha, alpha_single});
          if (method == "coli") return colinearity_weights(runs, n, lambda);
          if (method == "norm") return leave_one_out_weights(runs, n);
          throw Error(Errc::InvalidArgument, "method must be alpha, coli or norm");
        }();
        return py::make_tuple(values(r.weights), r.warnings);
      },
      py::arg("records"), py::arg("method"), py::arg("alpha") = 0.5, py::arg("alpha_single") = 1.0,
      py::arg("lam") = kDefaultRidgeLambda, py::arg("all_records") = false, py::arg("suite") = py::none());

  py::class_<SurrogateModel>(m, "SurrogateModel")
      .def_property_readonly("degree", &SurrogateModel::degree)
      .def_property_readonly("dimension", &SurrogateModel::dimension)
      .def("predict", [](const SurrogateModel& s, std::vector<double> w) { return s.predict(w); })
      .def("to_json", &SurrogateModel::to_json)
      .def_static("from_json", &SurrogateModel::from_json);

  m.def(
      "fit",
      [](const std::vector<std::vector<double>>& mixtures, const std::vector<double>& targets, int degree,
         std::size_t splits, double test_fraction, std::uint64_t seed) {
        std::vector<MixtureWeights> ws;
        for (const auto& w : mixtures) ws.push_back(MixtureWeights::validate(w));
        auto fit = cross_validated_fit(ws, targets, {degree, splits, test_fraction, seed});
        return py::make_tuple(fit.model, fit.report.to_json());
      },
      py::arg("mixtures"), py::arg("targets"), py::arg("degree") = 2, py::arg("splits") = 5,
      py::arg("test_fraction") = 0.2, py::arg("seed") = 0);

  m.def(
      "propose",
      [](const std::vector<PerformanceRecord>& records, std::size_t k, std::size_t n_samples, int degree,
         std::string target, std::uint64_t seed, std::size_t jobs, std::optional<std::string> suite) {
        SurrogateConfig sc;
        sc.degree = degree;
        sc.target = std::move(target);
        ProposalConfig pc;
        pc.k = k;
        pc.n_samples = n_samples;
        pc.seed = seed;
        pc.jobs = jobs;
        const auto p = propose(records, suite_or_default(suite), sc, pc);
        std::vector<py::tuple> out;
        for (const auto& r : p.top) out.push_back(py::make_tuple(values(r.weights), r.predicted));
        return out;
      },
      py::arg("records"), py::arg("k") = 10, py::arg("n_samples") = 10000, py::arg("degree") = 2,
      py::arg("target") = "out", py::arg("seed") = 0, py::arg("jobs") = 1, py::arg("suite") = py::none());

  m.def(
      "sample",
      [](const std::vector<double>& weights, const std::vector<std::size_t>& pools, std::uint64_t seed,
         std::size_t max_steps, const std::string& policy) {
        MixtureSampler s(pools, MixtureWeights::validate(weights), seed, parse_policy(policy));
        std::vector<std::pair<std::size_t, std::size_t>> out;
        while (max_steps == 0 || out.size() < max_steps) {
          const auto d = s.next();
          if (!d) break;
          out.emplace_back(d->domain, d->item);
        }
        return out;
      },
      py::arg("weights"), py::arg("pools"), py::arg("seed") = 0, py::arg("max_steps") = 0,
      py::arg("policy") = "stop");
  m.def(
      "empirical_frequencies",
      [](const std::vector<double>& weights, std::size_t draws, std::uint64_t seed) {
        return empirical_frequencies(MixtureWeights::validate(weights), draws, seed);
      },
      py::arg("weights"), py::arg("draws"), py::arg("seed") = 0);

  m.def(
      "extract_answer",
      [](const std::string& output, const std::string& mode) -> py::object {
        const auto a = extract_answer(output, parse_mode(mode));
        if (!a.format_ok) return py::none();
        if (a.boxes.empty()) return py::str(a.text);
        std::vector<py::tuple> boxes;
        for (const auto& b : a.boxes) {
          boxes.push_back(py::make_tuple(py::make_tuple(b.box.x1, b.box.y1, b.box.x2, b.box.y2), b.confidence));
        }
        return py::cast(boxes);
      },
      py::arg("output"), py::arg("mode") = "text");
  m.def(
      "iou",
      [](std::array<double, 4> a, std::array<double, 4> b) {
        return iou({a[0], a[1], a[2], a[3]}, {b[0], b[1], b[2], b[3]});
      },
      py::arg("a"), py::arg("b"));
  m.def(
      "score_output",
      [](const std::string& output, const std::string& gold, const std::string& mode) {
        return breakdown(score_output(output, gold, parse_mode(mode)));
      },
      py::arg("output"), py::arg("gold"), py::arg("mode") = "text");

  py::class_<sim::SyntheticWorld>(m, "World")
      .def_property_readonly("num_domains", &sim::SyntheticWorld::num_domains)
      .def_property_readonly("pool_sizes", &sim::SyntheticWorld::pool_sizes)
      .def_property_readonly("benchmarks", [](const sim::SyntheticWorld& w) {
        std::vector<std::string> names;
        for (const auto& b : w.benchmarks) names.push_back(b.name);
        return names;
      });
  m.def("make_world", [](const std::string& spec_json) { return sim::make_world(sim::parse_world_spec(spec_json)); },
        py::arg("spec_json"));
  m.def(
      "train_with_mixture",
      [](const sim::SyntheticWorld& world, const std::vector<double>& weights, const std::string& config_json,
         std::uint64_t seed, const std::string& id) {
        sim::TrainOptions opts;
        opts.id = id;
        py::gil_scoped_release release;
        return sim::train_with_mixture(world, MixtureWeights::validate(weights), sim::parse_grpo_config(config_json),
                                       seed, opts);
      },
      py::arg("world"), py::arg("weights"), py::arg("config_json") = "{}", py::arg("seed") = 0,
      py::arg("id") = "sim");

  m.def(
      "run_pipeline",
      [](const std::string& config_path, std::optional<std::string> out_dir, std::optional<std::uint64_t> seed) {
        auto cfg = read_pipeline_config(config_path);
        if (seed) cfg.seed = *seed;
        if (out_dir) cfg.output_dir = *out_dir;
        std::string json, summary;
        {
          py::gil_scoped_release release;
          const auto report = run_full(cfg);
          if (!cfg.output_dir.empty()) write_outputs(report, cfg.output_dir);
          json = report.to_json();
          summary = report.summary_table();
        }
        return py::make_tuple(json, summary);
      },
      py::arg("config_path"), py::arg("out_dir") = py::none(), py::arg("seed") = py::none());
}
