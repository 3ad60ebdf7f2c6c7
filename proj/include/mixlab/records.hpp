#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mixlab/mixtures.hpp"

namespace mixlab {

enum class BenchmarkGroup { In, Out };

struct BenchmarkSpec {
  std::string name;
  std::size_t count = 0;
  BenchmarkGroup group = BenchmarkGroup::In;
};

using BenchmarkSuite = std::vector<BenchmarkSpec>;

/// Benchmark name -> score in [0,1], in file order.
using ScoreMap = std::vector<std::pair<std::string, double>>;

std::optional<double> find_score(const ScoreMap& scores, std::string_view name);

/// One pilot run. `datasets` holds 0-based catalog indices; the JSONL form
/// uses 1-based dataset ids, matching the digit codes of seed experiments.
struct PerformanceRecord {
  std::string id;
  std::vector<std::size_t> datasets;
  std::optional<MixtureWeights> weights;
  ScoreMap scores;
  std::optional<long long> step;

  double score(std::string_view name) const;
};

struct ScoreSummary {
  double in_score = 0.0;
  double out_score = 0.0;
};

void validate_suite(std::span<const BenchmarkSpec> suite);

/// Sample-count weighted mean over the suite members of `group`.
double weighted_aggregate(const ScoreMap& scores, std::span<const BenchmarkSpec> suite,
                          BenchmarkGroup group);

ScoreSummary summarize(const PerformanceRecord& record, std::span<const BenchmarkSpec> suite);

/// Aggregate target used by fitting and heuristics: "in", "out", or a
/// single benchmark name.
double target_score(const PerformanceRecord& record, std::span<const BenchmarkSpec> suite,
                    std::string_view target);

/// Parses JSONL records. Blank lines are skipped; line numbers in errors
/// are 1-based. When `suite` is non-empty, every score must name a suite
/// member.
std::vector<PerformanceRecord> parse_records(std::istream& in,
                                             std::span<const BenchmarkSpec> suite = {});
std::vector<PerformanceRecord> read_records_file(const std::string& path,
                                                 std::span<const BenchmarkSpec> suite = {});

std::string record_to_jsonl(const PerformanceRecord& record);
void write_records(std::ostream& out, std::span<const PerformanceRecord> records);

BenchmarkSuite parse_suite(std::istream& in);
BenchmarkSuite read_suite_file(const std::string& path);
std::string suite_to_json(std::span<const BenchmarkSpec> suite);

/// Reference evaluation suite (3 in-group, 4 out-group benchmarks).
const BenchmarkSuite& table1_suite();

/// The 42 reference pilot runs in the records schema.
const std::vector<PerformanceRecord>& table2_fixture();

/// Records that carry a weight vector.
std::vector<PerformanceRecord> weighted_records(std::span<const PerformanceRecord> records);

const PerformanceRecord& find_record(std::span<const PerformanceRecord> records,
                                     std::string_view id);

}  // namespace mixlab
