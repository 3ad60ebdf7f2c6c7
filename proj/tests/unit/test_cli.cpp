#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "mixlab/cli.hpp"
#include "test_paths.hpp"

using mixlab::testing::source_path;
using mixlab::testing::tmp_path;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = mixlab::cli::dispatch(args, out, err);
  return {code, out.str(), err.str()};
}

std::string write_file(const std::string& name, const std::string& text) {
  const auto path = tmp_path(name);
  std::ofstream(path) << text;
  return path;
}

std::size_t lines(const std::string& s) {
  std::size_t n = 0;
  for (char c : s) n += c == '\n';
  return n;
}

const std::string kTable2 = source_path("fixtures/table2.jsonl");

}  // namespace

TEST_CASE("exit codes") {
  CHECK(run({}).code == mixlab::cli::kExitUsage);
  CHECK(run({"--help"}).code == mixlab::cli::kExitOk);
  CHECK(run({"aggregate", "--records", kTable2, "--bogus"}).code == mixlab::cli::kExitUsage);
  CHECK(run({"aggregate", "--records", tmp_path("does_not_exist.jsonl")}).code == mixlab::cli::kExitUsage);
  CHECK(run({"frobnicate"}).code == mixlab::cli::kExitUsage);
  const auto broken = write_file("broken.jsonl", "{\"id\": \"x\", \"scores\": \n");
  const auto r = run({"aggregate", "--records", broken});
  CHECK(r.code == mixlab::cli::kExitData);
  CHECK(r.err.find("error: ") != std::string::npos);
}

TEST_CASE("aggregate prints one line per record") {
  const auto r = run({"aggregate", "--records", kTable2});
  CHECK(r.code == 0);
  CHECK(lines(r.out) == 42);
  CHECK(r.out.find("\"id\"") != std::string::npos);
  CHECK(run({"--pretty", "aggregate", "--records", kTable2}).out != r.out);
}

TEST_CASE("heuristic norm prints a normalized mixture") {
  const auto r = run({"heuristic", "--method", "norm", "--records", kTable2});
  CHECK(r.code == 0);
  CHECK(lines(r.out) == 1);
  std::istringstream in(r.out);
  double total = 0;
  std::size_t n = 0;
  for (std::string field; std::getline(in, field, ',');) {
    total += std::stod(field);
    ++n;
  }
  CHECK(n == 5);
  CHECK(total == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("seed resolution") {
  CHECK(run({"--seed", "17", "aggregate", "--records", kTable2}).err.find("seed: 17") != std::string::npos);
  ::setenv("MIXLAB_SEED", "23", 1);
  CHECK(run({"aggregate", "--records", kTable2}).err.find("seed: 23") != std::string::npos);
  CHECK(run({"--seed", "5", "aggregate", "--records", kTable2}).err.find("seed: 5") != std::string::npos);
  ::setenv("MIXLAB_SEED", "abc", 1);
  CHECK(run({"aggregate", "--records", kTable2}).code == mixlab::cli::kExitUsage);
  ::unsetenv("MIXLAB_SEED");
  CHECK(run({"aggregate", "--records", kTable2}).err.find("seed: 0") != std::string::npos);
}

TEST_CASE("sample") {
  const auto w = write_file("w_sample.txt", "0.5,0.3,0.2\n");
  const auto a = run({"--seed", "4", "sample", "--weights", w, "--pools", "5,5,5"});
  CHECK(a.code == 0);
  CHECK(a.out == run({"--seed", "4", "sample", "--weights", w, "--pools", "5,5,5"}).out);
  CHECK(a.out != run({"--seed", "5", "sample", "--weights", w, "--pools", "5,5,5"}).out);
  CHECK(a.out.rfind("(", 0) == 0);
  const auto renorm = run({"--seed", "4", "sample", "--weights", w, "--pools", "5,5,5", "--policy", "renormalize"});
  CHECK(lines(renorm.out) == 15);
  CHECK(lines(run({"sample", "--weights", w, "--pools", "50,50,50", "--max-steps", "7"}).out) == 7);
  CHECK(run({"sample", "--weights", w, "--pools", "5,5"}).code == mixlab::cli::kExitData);
}

TEST_CASE("fit and propose are reproducible") {
  const auto model = tmp_path("cli_model.json");
  const auto f1 = run({"--seed", "3", "fit", "--records", kTable2, "--save", model});
  CHECK(f1.code == 0);
  CHECK(std::filesystem::exists(model));
  CHECK(f1.out == run({"--seed", "3", "fit", "--records", kTable2, "--save", model}).out);
  const auto p1 = run({"--seed", "3", "propose", "--records", kTable2, "--k", "4", "--n", "2000"});
  CHECK(p1.code == 0);
  CHECK(lines(p1.out) == 4);
  CHECK(p1.out == run({"--seed", "3", "propose", "--records", kTable2, "--k", "4", "--n", "2000"}).out);
  CHECK(p1.out == run({"--seed", "3", "--jobs", "3", "propose", "--records", kTable2, "--k", "4", "--n", "2000"}).out);
}

TEST_CASE("simulate appends a record") {
  const auto w = write_file("w_sim.txt", "0.25,0.25,0.25,0.25\n");
  const auto out = tmp_path("sim_records.jsonl");
  std::filesystem::remove(out);
  const auto world = source_path("fixtures/worlds/overlap.json");
  const auto a = run({"--seed", "2", "simulate", "--world", world, "--weights", w, "--steps", "30", "--out", out});
  const auto b = run({"--seed", "2", "simulate", "--world", world, "--weights", w, "--steps", "30", "--out", out});
  CHECK(a.code == 0);
  CHECK(a.out == b.out);
  std::ifstream in(out);
  std::stringstream ss;
  ss << in.rdbuf();
  CHECK(ss.str() == a.out + b.out);
}

TEST_CASE("pipeline output is byte-identical across runs") {
  const auto cfg = write_file("tiny_pipeline.json", R"({
    "world": {"skills": 24, "overlap": "disjoint", "domains": 3, "pools": [200, 200, 200], "seed": 1},
    "train": {"steps": 30}, "plan": {"random": 4},
    "proposal": {"n_samples": 1000, "k": 2}, "verification_seeds": 3, "seed": 5})");
  const auto d1 = tmp_path("tiny_out_1"), d2 = tmp_path("tiny_out_2");
  const auto a = run({"pipeline", "--config", cfg, "--out", d1});
  const auto b = run({"--jobs", "4", "pipeline", "--config", cfg, "--out", d2});
  REQUIRE(a.code == 0);
  CHECK(a.out == b.out);
  CHECK(a.err.find("seed: 5") != std::string::npos);
  for (const char* f : {"records.jsonl", "report.json", "model.json", "summary.txt"}) {
    std::ifstream x(d1 + "/" + f), y(d2 + "/" + f);
    std::stringstream sx, sy;
    sx << x.rdbuf();
    sy << y.rdbuf();
    CHECK(sx.str() == sy.str());
    CHECK(!sx.str().empty());
  }
}

TEST_CASE("score") {
  const auto in = write_file("score.jsonl",
                             R"({"prediction": "<think>x</think><answer>B</answer>", "gold": "B", "mode": "text", "id": "a"})"
                             "\n"
                             R"({"output": "no tags", "gold": "B"})"
                             "\n");
  const auto r = run({"score", "--input", in});
  CHECK(r.code == 0);
  CHECK(lines(r.out) == 2);
  CHECK(r.out.find("\"id\":\"a\"") != std::string::npos);
}
