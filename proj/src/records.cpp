#include "mixlab/records.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <set>
#include <sstream>

#include "json.hpp"

#include "mixlab/error.hpp"

namespace mixlab {

namespace detail {
extern const std::string_view kTable2Jsonl;
extern const std::string_view kTable1SuiteJson;
}  // namespace detail

using json = nlohmann::ordered_json;

std::optional<double> find_score(const ScoreMap& scores, std::string_view name) {
  for (const auto& [key, value] : scores) {
    if (key == name) return value;
  }
  return std::nullopt;
}

double PerformanceRecord::score(std::string_view name) const {
  if (auto s = find_score(scores, name)) return *s;
  throw Error(Errc::MissingBenchmark, "record '" + id + "' has no score for '" + std::string(name) + "'");
}

void validate_suite(std::span<const BenchmarkSpec> suite) {
  std::set<std::string> names;
  for (const auto& b : suite) {
    if (b.count == 0) throw Error(Errc::InvalidSpec, "benchmark '" + b.name + "' has zero samples");
    if (!names.insert(b.name).second) {
      throw Error(Errc::InvalidSpec, "duplicate benchmark '" + b.name + "'");
    }
  }
}

double weighted_aggregate(const ScoreMap& scores, std::span<const BenchmarkSpec> suite,
                          BenchmarkGroup group) {
  double numerator = 0.0;
  std::size_t total = 0;
  for (const auto& b : suite) {
    if (b.group != group) continue;
    const auto s = find_score(scores, b.name);
    if (!s) throw Error(Errc::MissingBenchmark, "no score for '" + b.name + "'");
    numerator += static_cast<double>(b.count) * *s;
    total += b.count;
  }
  if (total == 0) {
    throw Error(Errc::EmptyGroup,
                group == BenchmarkGroup::In ? "suite has no in-group benchmark"
                                            : "suite has no out-group benchmark");
  }
  return numerator / static_cast<double>(total);
}

ScoreSummary summarize(const PerformanceRecord& record, std::span<const BenchmarkSpec> suite) {
  try {
    return {weighted_aggregate(record.scores, suite, BenchmarkGroup::In),
            weighted_aggregate(record.scores, suite, BenchmarkGroup::Out)};
  } catch (const Error& e) {
    throw Error(e.code(), "record '" + record.id + "': " + e.what());
  }
}

double target_score(const PerformanceRecord& record, std::span<const BenchmarkSpec> suite,
                    std::string_view target) {
  if (target == "out") return weighted_aggregate(record.scores, suite, BenchmarkGroup::Out);
  if (target == "in") return weighted_aggregate(record.scores, suite, BenchmarkGroup::In);
  return record.score(target);
}

namespace {

PerformanceRecord record_from_json(const json& j, std::span<const BenchmarkSpec> suite) {
  PerformanceRecord r;
  if (!j.is_object()) throw std::invalid_argument("record is not an object");
  const auto& id = j.at("id");
  r.id = id.is_string() ? id.get<std::string>() : id.dump();

  std::set<std::size_t> seen;
  for (const auto& d : j.at("datasets")) {
    const auto one_based = d.get<long long>();
    if (one_based < 1) throw std::invalid_argument("dataset ids are 1-based");
    const auto idx = static_cast<std::size_t>(one_based - 1);
    if (!seen.insert(idx).second) throw std::invalid_argument("duplicate dataset id");
    r.datasets.push_back(idx);
  }
  std::sort(r.datasets.begin(), r.datasets.end());

  if (auto it = j.find("weights"); it != j.end() && !it->is_null()) {
    r.weights = MixtureWeights::validate(it->get<std::vector<double>>());
    const auto support = r.weights->support();
    if (support != r.datasets) {
      throw std::invalid_argument("weight support differs from participating datasets");
    }
  }

  for (const auto& [name, value] : j.at("scores").items()) {
    const double s = value.get<double>();
    if (!(s >= 0.0 && s <= 1.0)) {
      throw Error(Errc::ScoreOutOfRange, "'" + name + "' = " + value.dump());
    }
    if (!suite.empty() &&
        std::none_of(suite.begin(), suite.end(), [&](const auto& b) { return b.name == name; })) {
      throw Error(Errc::UnknownBenchmark, "'" + name + "'");
    }
    r.scores.emplace_back(name, s);
  }

  if (auto it = j.find("step"); it != j.end() && !it->is_null()) r.step = it->get<long long>();
  return r;
}

}  // namespace

std::vector<PerformanceRecord> parse_records(std::istream& in,
                                             std::span<const BenchmarkSpec> suite) {
  std::vector<PerformanceRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = "line " + std::to_string(line_no);
    try {
      out.push_back(record_from_json(json::parse(line), suite));
    } catch (const Error& e) {
      if (e.code() == Errc::ScoreOutOfRange || e.code() == Errc::UnknownBenchmark) {
        throw Error(e.code(), where + ": " + e.what());
      }
      throw Error(Errc::MalformedLine, where + ": " + e.what());
    } catch (const std::exception& e) {
      throw Error(Errc::MalformedLine, where + ": " + e.what());
    }
  }
  return out;
}

std::vector<PerformanceRecord> read_records_file(const std::string& path,
                                                 std::span<const BenchmarkSpec> suite) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open " + path);
  return parse_records(in, suite);
}

std::string record_to_jsonl(const PerformanceRecord& record) {
  json j;
  j["id"] = record.id;
  j["datasets"] = json::array();
  for (auto d : record.datasets) j["datasets"].push_back(d + 1);
  j["weights"] = record.weights ? json(record.weights->vector()) : json(nullptr);
  j["scores"] = json::object();
  for (const auto& [name, value] : record.scores) j["scores"][name] = value;
  j["step"] = record.step ? json(*record.step) : json(nullptr);
  return j.dump();
}

void write_records(std::ostream& out, std::span<const PerformanceRecord> records) {
  for (const auto& r : records) out << record_to_jsonl(r) << '\n';
}

BenchmarkSuite parse_suite(std::istream& in) {
  BenchmarkSuite suite;
  try {
    const auto j = json::parse(in);
    for (const auto& b : j) {
      const auto group = b.at("group").get<std::string>();
      if (group != "in" && group != "out") throw std::invalid_argument("group must be in|out");
      const auto count = b.at("count").get<long long>();
      if (count <= 0) throw std::invalid_argument("count must be positive");
      suite.push_back({b.at("name").get<std::string>(), static_cast<std::size_t>(count),
                       group == "in" ? BenchmarkGroup::In : BenchmarkGroup::Out});
    }
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(Errc::MalformedLine, std::string("suite: ") + e.what());
  }
  validate_suite(suite);
  return suite;
}

BenchmarkSuite read_suite_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open " + path);
  return parse_suite(in);
}

std::string suite_to_json(std::span<const BenchmarkSpec> suite) {
  json j = json::array();
  for (const auto& b : suite) {
    j.push_back({{"name", b.name},
                 {"count", b.count},
                 {"group", b.group == BenchmarkGroup::In ? "in" : "out"}});
  }
  return j.dump(2);
}

const BenchmarkSuite& table1_suite() {
  static const BenchmarkSuite suite = [] {
    std::istringstream in{std::string(detail::kTable1SuiteJson)};
    return parse_suite(in);
  }();
  return suite;
}

const std::vector<PerformanceRecord>& table2_fixture() {
  static const std::vector<PerformanceRecord> rows = [] {
    std::istringstream in{std::string(detail::kTable2Jsonl)};
    return parse_records(in, table1_suite());
  }();
  return rows;
}

std::vector<PerformanceRecord> weighted_records(std::span<const PerformanceRecord> records) {
  std::vector<PerformanceRecord> out;
  for (const auto& r : records) {
    if (r.weights) out.push_back(r);
  }
  return out;
}

const PerformanceRecord& find_record(std::span<const PerformanceRecord> records,
                                     std::string_view id) {
  for (const auto& r : records) {
    if (r.id == id) return r;
  }
  throw Error(Errc::InvalidArgument, "no record with id '" + std::string(id) + "'");
}

}  // namespace mixlab
