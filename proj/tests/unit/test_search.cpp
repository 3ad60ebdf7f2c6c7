#include <cmath>

#include "check_errc.hpp"
#include "doctest.h"
#include "mixlab/search.hpp"

using namespace mixlab;
using V = std::vector<double>;

namespace {

Eigen::VectorXd vec(const V& v) { return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())); }

std::vector<MixtureWeights> random_mixtures(std::size_t n, std::size_t m, Rng& rng) {
  std::vector<MixtureWeights> out;
  for (std::size_t i = 0; i < n; ++i) {
    V raw(m);
    for (auto& x : raw) x = -std::log(1.0 - rng.uniform());
    out.push_back(MixtureWeights::normalize(raw));
  }
  return out;
}

}  // namespace

TEST_CASE("Gaussian fit") {
  const std::vector<MixtureWeights> two{seed_single(0, 2), seed_single(1, 2)};
  const auto gm = fit_gaussian(two, 0.0);
  CHECK(gm.mean(0) == 0.5);
  CHECK(gm.mean(1) == 0.5);
  CHECK(gm.covariance(0, 0) == 0.25);
  CHECK(gm.covariance(0, 1) == -0.25);
  CHECK(gm.covariance(1, 1) == 0.25);

  const auto p = MixtureWeights::validate({0.2, 0.3, 0.5});
  const auto same = fit_gaussian(std::vector<MixtureWeights>(4, p), 1e-4);
  for (int i = 0; i < 3; ++i) CHECK(same.mean(i) == doctest::Approx(p[static_cast<std::size_t>(i)]).epsilon(1e-15));
  CHECK((same.covariance - 1e-4 * Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-18);

  Rng rng(1);
  const auto ws = random_mixtures(25, 4, rng);
  const auto g = fit_gaussian(ws, 1e-4);
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(4);
  for (const auto& w : ws) mean += Eigen::Map<const Eigen::VectorXd>(w.values().data(), 4);
  mean /= 25.0;
  CHECK((g.mean - mean).cwiseAbs().maxCoeff() < 1e-15);
  CHECK((g.covariance - g.covariance.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(g.mean.minCoeff() >= 0.0);
  CHECK(g.mean.sum() == doctest::Approx(1.0));
  CHECK_ERRC(fit_gaussian(std::vector<MixtureWeights>{p}, 1e-4), Errc::TooFewPoints);
  CHECK_ERRC(fit_gaussian(two, -1.0), Errc::InvalidArgument);
}

TEST_CASE("candidate filter and normalization") {
  CHECK_FALSE(to_candidate(V{0.2, -0.1, 0.3}).has_value());
  const auto c = to_candidate(V{0.2, 0.3});
  REQUIRE(c.has_value());
  CHECK((*c)[0] == doctest::Approx(0.4));
  CHECK((*c)[1] == doctest::Approx(0.6));
  CHECK_FALSE(to_candidate(V{0.0, 0.0}).has_value());
}

TEST_CASE("samples around a degenerate Gaussian stay close to its point") {
  const auto p = MixtureWeights::validate({0.2, 0.3, 0.5});
  const auto gm = fit_gaussian(std::vector<MixtureWeights>(3, p), 1e-4);
  Rng rng(2);
  const auto cands = sample_candidates(gm, 1000, rng);
  CHECK(cands.size() > 900);
  for (const auto& c : cands) {
    for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(c[i] - p[i]) <= 0.05);
    CHECK_NOTHROW(MixtureWeights::validate(c.vector()));
  }
}

TEST_CASE("no survivors") {
  GaussianModel gm{vec({-10, -10}), 1e-6 * Eigen::MatrixXd::Identity(2, 2)};
  Rng rng(3);
  CHECK_ERRC(sample_candidates(gm, 100, rng), Errc::NoSurvivors);
  CHECK_ERRC(sample_candidates_sharded(gm, 100, 3), Errc::NoSurvivors);
  const std::vector<MixtureWeights> two{seed_single(0, 2), seed_single(1, 2)};
  CHECK_ERRC(sample_candidates(fit_gaussian(two, 0.0), 10, rng), Errc::InvalidArgument);
}

TEST_CASE("sharded sampling does not depend on the worker count") {
  Rng rng(4);
  const auto gm = fit_gaussian(random_mixtures(20, 5, rng), 1e-4);
  const auto one = sample_candidates_sharded(gm, 10000, 77, 1);
  const auto four = sample_candidates_sharded(gm, 10000, 77, 4);
  REQUIRE(one.size() == four.size());
  for (std::size_t i = 0; i < one.size(); ++i) CHECK(one[i] == four[i]);
  CHECK(sample_candidates_sharded(gm, 10000, 78, 1).front() != one.front());
}

TEST_CASE("ranking") {
  const auto g = SurrogateModel::linear(0.0, vec({1.0, 0.0}));
  const std::vector<MixtureWeights> cands{seed_single(1, 2), seed_all(2), seed_single(0, 2)};
  const auto top = rank_candidates(g, cands, 2);
  REQUIRE(top.size() == 2);
  CHECK(top[0].weights == seed_single(0, 2));
  CHECK(top[1].weights == seed_all(2));
  CHECK(top[0].predicted == 1.0);
  const auto all = rank_candidates(g, cands, 3);
  CHECK(all.size() == 3);
  CHECK(all[2].weights == seed_single(1, 2));
  const auto flat = rank_candidates(SurrogateModel::linear(0.5, vec({0, 0})), cands, 3);
  for (std::size_t i = 0; i < 3; ++i) CHECK(flat[i].weights == cands[i]);
  CHECK(rank_candidates(g, cands, 0).empty());
  CHECK_ERRC(rank_candidates(g, std::vector<MixtureWeights>{}, 1), Errc::EmptyCandidates);
  CHECK_ERRC(rank_candidates(g, cands, 4), Errc::InvalidArgument);
}

TEST_CASE("propose on the table seed rows") {
  const auto& rows = table2_fixture();
  ProposalConfig pc;
  pc.seed = 5;
  const auto a = propose(rows, table1_suite(), {}, pc);
  const auto b = propose(rows, table1_suite(), {}, pc);
  CHECK(a.top.size() == 10);
  CHECK(proposal_to_jsonl(a.top) == proposal_to_jsonl(b.top));
  for (std::size_t i = 0; i < a.top.size(); ++i) {
    CHECK_NOTHROW(MixtureWeights::validate(a.top[i].weights.vector()));
    if (i + 1 < a.top.size()) CHECK(a.top[i].predicted >= a.top[i + 1].predicted);
  }
  pc.k = 0;
  CHECK(propose(rows, table1_suite(), {}, pc).top.empty());
}

TEST_CASE("propose finds the vertex optimum of a known target") {
  Rng rng(6);
  const auto ws = random_mixtures(30, 3, rng);
  V y;
  for (const auto& w : ws) y.push_back(0.1 + 0.8 * w[0]);
  ProposalConfig pc;
  pc.seed = 9;
  pc.jitter = 0.05;
  pc.k = 5;
  const auto p = propose(ws, y, SurrogateConfig{}, pc);
  const auto cands = sample_candidates_sharded(p.gaussian, pc.n_samples, derive_seed(9, 0x53414d504cULL, 0));
  double best_w1 = 0.0;
  for (const auto& c : cands) best_w1 = std::max(best_w1, c[0]);
  REQUIRE_FALSE(p.top.empty());
  CHECK(p.top[0].weights[0] == doctest::Approx(best_w1).epsilon(1e-6));
  const auto jsonl = proposal_to_jsonl(p.top);
  CHECK(std::count(jsonl.begin(), jsonl.end(), '\n') == 5);
  CHECK(jsonl.find("\"predicted\"") != std::string::npos);
}
