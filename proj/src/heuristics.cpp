#include "mixlab/heuristics.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "mixlab/error.hpp"
#include "mixlab/surrogate.hpp"

namespace mixlab {

std::vector<ScoredRun> scored_runs(std::span<const PerformanceRecord> records,
                                   std::span<const BenchmarkSpec> suite) {
  std::vector<ScoredRun> runs;
  runs.reserve(records.size());
  for (const auto& r : records) {
    const auto summary = summarize(r, suite);
    runs.push_back({r.datasets, summary.in_score, summary.out_score});
  }
  return runs;
}

namespace {

void check_indices(std::span<const ScoredRun> runs, std::size_t m) {
  if (m == 0) throw Error(Errc::DegenerateCatalog, "m = 0");
  for (const auto& run : runs) {
    for (auto i : run.datasets) {
      if (i >= m) {
        throw Error(Errc::IndexOutOfRange,
                    "dataset " + std::to_string(i + 1) + " outside catalog of " + std::to_string(m));
      }
    }
  }
}

// Returns nullopt when max == min.
std::optional<std::vector<double>> min_max(const std::vector<double>& xs) {
  const auto [lo, hi] = std::minmax_element(xs.begin(), xs.end());
  const double range = *hi - *lo;
  if (!(range > 0.0)) return std::nullopt;
  std::vector<double> out(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) out[i] = (xs[i] - *lo) / range;
  return out;
}

}  // namespace

ScoreSums accumulate_scores(std::span<const ScoredRun> runs, std::size_t m, double alpha_single) {
  check_indices(runs, m);
  ScoreSums sums{std::vector<double>(m, 0.0), std::vector<double>(m, 0.0)};
  for (const auto& run : runs) {
    const double scale = run.datasets.size() == 1 ? alpha_single : 1.0;
    for (auto i : run.datasets) {
      sums.in[i] += scale * run.in_score;
      sums.out[i] += scale * run.out_score;
    }
  }
  return sums;
}

HeuristicResult alpha_weights(std::span<const ScoredRun> runs, std::size_t m,
                              const AlphaConfig& cfg) {
  if (runs.empty()) throw Error(Errc::EmptyRecords, "alpha heuristic needs at least one record");
  if (!(cfg.alpha >= 0.0 && cfg.alpha <= 1.0) || !(cfg.alpha_single >= 0.0 && cfg.alpha_single <= 1.0)) {
    throw Error(Errc::InvalidArgument, "alpha and alpha_single must lie in [0,1]");
  }
  check_indices(runs, m);
  std::vector<bool> covered(m, false);
  for (const auto& run : runs) {
    for (auto i : run.datasets) covered[i] = true;
  }
  for (std::size_t i = 0; i < m; ++i) {
    if (!covered[i]) {
      throw Error(Errc::MissingCombination, "dataset " + std::to_string(i + 1) + " appears in no record");
    }
  }

  const auto sums = accumulate_scores(runs, m, cfg.alpha_single);
  std::vector<std::string> warnings;
  auto normalized = [&](const std::vector<double>& s, const char* which) {
    if (auto n = min_max(s)) return *n;
    warnings.push_back(std::string("all ") + which +
                       " score sums are equal; min-max undefined, using a constant vector");
    return std::vector<double>(m, 1.0);
  };
  const auto in_hat = normalized(sums.in, "In");
  const auto out_hat = normalized(sums.out, "Out");

  std::vector<double> combined(m);
  double total = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    combined[i] = cfg.alpha * in_hat[i] + (1.0 - cfg.alpha) * out_hat[i];
    total += combined[i];
  }
  if (!(total > 0.0)) throw Error(Errc::ZeroCombined, "combined scores sum to zero");
  return {MixtureWeights::normalize(std::move(combined)), std::move(warnings)};
}

HeuristicResult colinearity_weights(std::span<const ScoredRun> runs, std::size_t m, double lambda) {
  if (runs.empty()) throw Error(Errc::EmptyRecords, "colinearity heuristic needs at least one record");
  if (!(lambda > 0.0)) {
    throw Error(Errc::InvalidArgument, "lambda must be > 0 (lambda = 0 may be singular)");
  }
  check_indices(runs, m);

  const auto rows = static_cast<Eigen::Index>(runs.size());
  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(rows, static_cast<Eigen::Index>(m));
  Eigen::VectorXd y(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (auto i : runs[static_cast<std::size_t>(r)].datasets) X(r, static_cast<Eigen::Index>(i)) = 1.0;
    y(r) = runs[static_cast<std::size_t>(r)].out_score;
  }

  const Eigen::VectorXd beta = ridge_fit(X, y, lambda);
  const Eigen::VectorXd vif = regularized_gram_inverse(X, lambda).diagonal();

  std::vector<double> adjusted(m);
  double total = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    adjusted[i] = std::max(0.0, beta(k) / vif(k));
    total += adjusted[i];
  }
  if (!(total > 0.0)) {
    throw Error(Errc::AllZeroAdjusted, "every VIF-adjusted coefficient is <= 0");
  }
  return {MixtureWeights::normalize(std::move(adjusted)), {}};
}

std::vector<double> leave_one_out_raw(std::span<const ScoredRun> runs, std::size_t m,
                                      const LeaveOneOutConfig& cfg,
                                      std::vector<std::string>* warnings) {
  if (m < 2) throw Error(Errc::DegenerateCatalog, "leave-one-out needs m >= 2");
  if (!(cfg.offset > 0.0) || cfg.offset - cfg.slope < 0.0 || cfg.slope < 0.0) {
    throw Error(Errc::InvalidArgument, "transform must map [0,1] into non-negative weights");
  }
  check_indices(runs, m);

  // missing[i] = out score of the run that trains on everything except i
  std::vector<std::optional<double>> missing(m);
  for (const auto& run : runs) {
    if (run.datasets.size() != m - 1) continue;
    std::vector<bool> present(m, false);
    for (auto i : run.datasets) present[i] = true;
    const auto absent = static_cast<std::size_t>(std::find(present.begin(), present.end(), false) - present.begin());
    if (missing[absent]) {
      throw Error(Errc::DuplicateCombination,
                  "two records miss dataset " + std::to_string(absent + 1));
    }
    missing[absent] = run.out_score;
  }
  std::vector<double> scores(m);
  for (std::size_t i = 0; i < m; ++i) {
    if (!missing[i]) {
      throw Error(Errc::MissingCombination, "no record misses dataset " + std::to_string(i + 1));
    }
    scores[i] = *missing[i];
  }

  std::vector<double> raw(m);
  if (auto hat = min_max(scores)) {
    for (std::size_t i = 0; i < m; ++i) raw[i] = cfg.offset - cfg.slope * (*hat)[i];
  } else {
    if (warnings) warnings->push_back("all leave-one-out scores are equal; using uniform weights");
    std::fill(raw.begin(), raw.end(), cfg.offset);
  }
  return raw;
}

HeuristicResult leave_one_out_weights(std::span<const ScoredRun> runs, std::size_t m,
                                      const LeaveOneOutConfig& cfg) {
  std::vector<std::string> warnings;
  auto raw = leave_one_out_raw(runs, m, cfg, &warnings);
  return {MixtureWeights::normalize(std::move(raw)), std::move(warnings)};
}

}  // namespace mixlab
