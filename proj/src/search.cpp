#include "mixlab/search.hpp"

#include <algorithm>
#include <numeric>
#include <optional>
#include <thread>

#include "json.hpp"

#include "mixlab/error.hpp"

namespace mixlab {

namespace {

constexpr std::uint64_t kPurposeSurrogate = 0x5355525247ULL;  // "SURRG"
constexpr std::uint64_t kPurposeSampling = 0x53414d504cULL;   // "SAMPL"
constexpr std::uint64_t kPurposeShard = 0x5348415244ULL;      // "SHARD"

Eigen::MatrixXd cholesky_factor(const GaussianModel& gm) {
  Eigen::LLT<Eigen::MatrixXd> llt(gm.covariance);
  if (llt.info() != Eigen::Success) {
    throw Error(Errc::InvalidArgument, "covariance is not positive definite; increase jitter");
  }
  return llt.matrixL();
}

std::vector<MixtureWeights> draw(const GaussianModel& gm, const Eigen::MatrixXd& L, std::size_t n,
                                 Rng& rng) {
  const auto m = gm.mean.size();
  std::vector<MixtureWeights> out;
  Eigen::VectorXd z(m);
  std::vector<double> raw(static_cast<std::size_t>(m));
  for (std::size_t s = 0; s < n; ++s) {
    for (Eigen::Index i = 0; i < m; ++i) z(i) = rng.normal();
    const Eigen::VectorXd x = gm.mean + L * z;
    std::copy(x.data(), x.data() + m, raw.begin());
    if (auto c = to_candidate(raw)) out.push_back(std::move(*c));
  }
  return out;
}

}  // namespace

GaussianModel fit_gaussian(std::span<const MixtureWeights> mixtures, double jitter) {
  if (mixtures.size() < 2) throw Error(Errc::TooFewPoints, "Gaussian fit needs >= 2 mixtures");
  if (!(jitter >= 0.0)) throw Error(Errc::InvalidArgument, "jitter must be >= 0");
  const auto m = static_cast<Eigen::Index>(mixtures.front().size());
  const auto n = static_cast<double>(mixtures.size());

  GaussianModel gm;
  gm.mean = Eigen::VectorXd::Zero(m);
  for (const auto& w : mixtures) {
    if (static_cast<Eigen::Index>(w.size()) != m) throw Error(Errc::DimensionMismatch, "mixtures differ in size");
    gm.mean += Eigen::Map<const Eigen::VectorXd>(w.values().data(), m);
  }
  gm.mean /= n;

  gm.covariance = Eigen::MatrixXd::Zero(m, m);
  for (const auto& w : mixtures) {
    const Eigen::VectorXd d = Eigen::Map<const Eigen::VectorXd>(w.values().data(), m) - gm.mean;
    gm.covariance.noalias() += d * d.transpose();
  }
  gm.covariance /= n;
  gm.covariance = 0.5 * (gm.covariance + gm.covariance.transpose()).eval();
  gm.covariance.diagonal().array() += jitter;
  return gm;
}

std::optional<MixtureWeights> to_candidate(std::span<const double> raw) {
  double sum = 0.0;
  for (double x : raw) {
    if (!(x >= 0.0)) return std::nullopt;
    sum += x;
  }
  if (!(sum > 0.0)) return std::nullopt;
  return MixtureWeights::normalize(std::vector<double>(raw.begin(), raw.end()));
}

std::vector<MixtureWeights> sample_candidates(const GaussianModel& gm, std::size_t n, Rng& rng) {
  const Eigen::MatrixXd L = cholesky_factor(gm);
  auto out = draw(gm, L, n, rng);
  if (out.empty() && n > 0) {
    throw Error(Errc::NoSurvivors, "all " + std::to_string(n) + " draws had a negative entry");
  }
  return out;
}

std::vector<MixtureWeights> sample_candidates_sharded(const GaussianModel& gm, std::size_t n,
                                                      std::uint64_t seed, std::size_t jobs) {
  const Eigen::MatrixXd L = cholesky_factor(gm);
  const std::size_t shards = (n + kSamplesPerShard - 1) / kSamplesPerShard;
  std::vector<std::vector<MixtureWeights>> results(shards);

  auto run_shard = [&](std::size_t s) {
    Rng rng(derive_seed(seed, kPurposeShard, s));
    const std::size_t count = std::min(kSamplesPerShard, n - s * kSamplesPerShard);
    results[s] = draw(gm, L, count, rng);
  };

  jobs = std::max<std::size_t>(1, std::min(jobs, shards));
  if (jobs == 1) {
    for (std::size_t s = 0; s < shards; ++s) run_shard(s);
  } else {
    std::vector<std::thread> workers;
    for (std::size_t t = 0; t < jobs; ++t) {
      workers.emplace_back([&, t] {
        for (std::size_t s = t; s < shards; s += jobs) run_shard(s);
      });
    }
    for (auto& w : workers) w.join();
  }

  std::vector<MixtureWeights> out;
  for (auto& r : results) {
    for (auto& c : r) out.push_back(std::move(c));
  }
  if (out.empty() && n > 0) {
    throw Error(Errc::NoSurvivors, "all " + std::to_string(n) + " draws had a negative entry");
  }
  return out;
}

std::vector<RankedMixture> rank_candidates(const SurrogateModel& model,
                                           std::span<const MixtureWeights> candidates,
                                           std::size_t k) {
  if (k == 0) return {};
  if (candidates.empty()) throw Error(Errc::EmptyCandidates, "no candidates to rank");
  if (k > candidates.size()) {
    throw Error(Errc::InvalidArgument, "k = " + std::to_string(k) + " exceeds " +
                                           std::to_string(candidates.size()) + " candidates");
  }
  std::vector<double> scores(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) scores[i] = model.predict(candidates[i]);
  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::vector<RankedMixture> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) out.push_back({candidates[order[i]], scores[order[i]]});
  return out;
}

Proposal propose(std::span<const MixtureWeights> mixtures, std::span<const double> targets,
                 const SurrogateConfig& surrogate, const ProposalConfig& proposal) {
  CrossValidationConfig cv{surrogate.degree, surrogate.n_splits, surrogate.test_fraction,
                           derive_seed(proposal.seed, kPurposeSurrogate, 0)};
  Proposal out{cross_validated_fit(mixtures, targets, cv), fit_gaussian(mixtures, proposal.jitter), 0, {}};
  if (proposal.k == 0) return out;
  const auto candidates = sample_candidates_sharded(
      out.gaussian, proposal.n_samples, derive_seed(proposal.seed, kPurposeSampling, 0), proposal.jobs);
  out.survivors = candidates.size();
  out.top = rank_candidates(out.fit.model, candidates, std::min(proposal.k, candidates.size()));
  return out;
}

Proposal propose(std::span<const PerformanceRecord> records, std::span<const BenchmarkSpec> suite,
                 const SurrogateConfig& surrogate, const ProposalConfig& proposal) {
  std::vector<MixtureWeights> mixtures;
  std::vector<double> targets;
  for (const auto& r : records) {
    if (!r.weights) continue;
    mixtures.push_back(*r.weights);
    targets.push_back(target_score(r, suite, surrogate.target));
  }
  return propose(mixtures, targets, surrogate, proposal);
}

std::string proposal_to_jsonl(std::span<const RankedMixture> top) {
  std::string out;
  for (const auto& r : top) {
    nlohmann::ordered_json j;
    j["weights"] = r.weights.vector();
    j["predicted"] = r.predicted;
    out += j.dump();
    out += '\n';
  }
  return out;
}

}  // namespace mixlab
