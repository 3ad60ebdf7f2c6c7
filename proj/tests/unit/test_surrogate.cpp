#include <cmath>
#include <fstream>

#include "check_errc.hpp"
#include "doctest.h"
#include "mixlab/heuristics.hpp"
#include "mixlab/rng.hpp"
#include "mixlab/surrogate.hpp"
#include "test_paths.hpp"

using namespace mixlab;
using V = std::vector<double>;

namespace {

std::vector<MixtureWeights> random_mixtures(std::size_t n, std::size_t m, Rng& rng) {
  std::vector<MixtureWeights> out;
  for (std::size_t i = 0; i < n; ++i) {
    V raw(m);
    for (auto& x : raw) x = -std::log(1.0 - rng.uniform());
    out.push_back(MixtureWeights::normalize(raw));
  }
  return out;
}

Eigen::VectorXd vec(const V& v) { return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())); }

}  // namespace

TEST_CASE("design rows") {
  const auto row = design_row(V{0.3, 0.7}, 2);
  const V expected{1, 0.3, 0.7, 0.09, 0.21, 0.49};
  REQUIRE(row.size() == 6);
  for (int i = 0; i < 6; ++i) CHECK(row(i) == doctest::Approx(expected[static_cast<std::size_t>(i)]).epsilon(1e-15));
  const auto vertex = design_row(V{1, 0}, 2);
  CHECK(vertex(3) == 1.0);
  CHECK(vertex(4) == 0.0);
  CHECK(vertex(5) == 0.0);
  const auto lin = design_row(V{0.5, 0.5}, 1);
  CHECK(lin.size() == 3);
  CHECK(lin(0) == 1.0);
  CHECK(design_columns(5, 2) == 21);
  CHECK(design_columns(5, 1) == 6);
  const std::vector<MixtureWeights> ws{seed_all(2), seed_single(0, 2)};
  const auto X = design_matrix(ws, 2);
  CHECK(X.rows() == 2);
  CHECK(X.cols() == 6);
  CHECK_ERRC(design_matrix(std::vector<MixtureWeights>{}, 2), Errc::InsufficientRecords);
  CHECK_ERRC(design_row(V{0.5, 0.5}, 3), Errc::InvalidArgument);
}

TEST_CASE("least squares") {
  Eigen::MatrixXd ones(2, 1);
  ones << 1, 1;
  CHECK(least_squares_fit(ones, vec({2, 4}))(0) == doctest::Approx(3.0));
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(3, 3);
  const auto y = vec({0.1, -2, 5});
  CHECK((least_squares_fit(I, y) - y).norm() < 1e-14);
  Eigen::MatrixXd A(2, 2);
  A << 2, 1, 1, 3;
  const auto b = vec({1, 2});
  CHECK((least_squares_fit(A, b) - A.inverse() * b).norm() < 1e-14);
}

TEST_CASE("least squares returns the minimum-norm solution when underdetermined") {
  Eigen::MatrixXd X(1, 2);
  X << 1, 1;
  const auto beta = least_squares_fit(X, vec({2}));
  CHECK(beta(0) == doctest::Approx(1.0));
  CHECK(beta(1) == doctest::Approx(1.0));
  Eigen::MatrixXd dup(3, 2);
  dup << 1, 1, 2, 2, 3, 3;
  const auto b2 = least_squares_fit(dup, vec({2, 4, 6}));
  CHECK(b2(0) == doctest::Approx(1.0));
  CHECK(b2(1) == doctest::Approx(1.0));
}

TEST_CASE("ridge") {
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(2, 2);
  const auto beta = ridge_fit(I, vec({0.4, 0.2}), 1e-3);
  CHECK(beta(0) == doctest::Approx(0.4 / 1.001).epsilon(1e-14));
  CHECK(beta(1) == doctest::Approx(0.2 / 1.001).epsilon(1e-14));
  CHECK(ridge_fit(I, vec({0, 0}), 1e-3).norm() == 0.0);
  Rng rng(3);
  Eigen::MatrixXd X(8, 3);
  for (int i = 0; i < 8; ++i) {
    for (int j = 0; j < 3; ++j) X(i, j) = rng.normal();
  }
  Eigen::VectorXd y(8);
  for (int i = 0; i < 8; ++i) y(i) = rng.normal();
  double previous = std::numeric_limits<double>::infinity();
  for (double lambda : {1e-3, 1e-1, 1.0, 10.0, 1e3, 1e6}) {
    const double norm = ridge_fit(X, y, lambda).norm();
    CHECK(norm < previous);
    previous = norm;
  }
  CHECK(previous < 1e-4);
  CHECK_ERRC(ridge_fit(I, vec({0, 0}), 0.0), Errc::InvalidArgument);
  const auto inv = regularized_gram_inverse(I, 1e-3);
  CHECK(inv(0, 0) == doctest::Approx(1 / 1.001));
}

TEST_CASE("predict") {
  const auto lin = SurrogateModel::linear(0.1, vec({0.2, 0}));
  CHECK(lin.predict(V{1, 0}) == doctest::Approx(0.3));
  const auto quad0 = SurrogateModel::quadratic(0.1, vec({0.2, 0}), Eigen::MatrixXd::Zero(2, 2));
  Rng rng(5);
  for (const auto& w : random_mixtures(50, 2, rng)) CHECK(quad0.predict(w) == lin.predict(w));
  const auto bowl = SurrogateModel::quadratic(0, vec({0, 0}), 2 * Eigen::MatrixXd::Identity(2, 2));
  CHECK(bowl.predict(V{0.5, 0.5}) == doctest::Approx(0.5));
  const auto unit = SurrogateModel::quadratic(0, vec({0, 0}), Eigen::MatrixXd::Identity(2, 2));
  CHECK(unit.predict(V{0.5, 0.5}) == doctest::Approx(0.25));
  CHECK_ERRC(lin.predict(V{1, 0, 0}), Errc::DimensionMismatch);
  Eigen::MatrixXd asym(2, 2);
  asym << 1, 2, 0, 1;
  CHECK_ERRC(SurrogateModel::quadratic(0, vec({0, 0}), asym), Errc::InvalidArgument);
}

TEST_CASE("upper-triangle storage matches the full outer-product form") {
  Rng rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::Index m = 2 + static_cast<Eigen::Index>(rng.below(5));
    Eigen::MatrixXd C(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
      for (Eigen::Index j = 0; j < m; ++j) C(i, j) = rng.normal();
    }
    C = (C + C.transpose()).eval();
    Eigen::VectorXd a(m);
    for (Eigen::Index i = 0; i < m; ++i) a(i) = rng.normal();
    const auto model = SurrogateModel::quadratic(0.3, a, C);
    CHECK((model.curvature() - C).cwiseAbs().maxCoeff() == 0.0);
    for (const auto& w : random_mixtures(10, static_cast<std::size_t>(m), rng)) {
      const auto x = Eigen::Map<const Eigen::VectorXd>(w.values().data(), m);
      const double full = 0.3 + a.dot(x) + 0.5 * (x * x.transpose()).cwiseProduct(C).sum();
      CHECK(std::abs(model.predict(w) - full) <= 1e-12);
    }
  }
}

TEST_CASE("quadratic models have constant second differences along a line") {
  Eigen::MatrixXd C(3, 3);
  C << 1, -2, 0.5, -2, 3, 1, 0.5, 1, -1;
  const auto model = SurrogateModel::quadratic(0.1, vec({0.3, -0.2, 0.4}), C);
  const V p{0.2, 0.3, 0.5}, d{0.1, -0.05, -0.05};
  auto at = [&](double t) { return model.predict(V{p[0] + t * d[0], p[1] + t * d[1], p[2] + t * d[2]}); };
  const double h = 0.1;
  const double first = at(2 * h) - 2 * at(h) + at(0);
  for (int k = 1; k < 5; ++k) {
    const double t = k * h;
    CHECK(at(t + 2 * h) - 2 * at(t + h) + at(t) == doctest::Approx(first).epsilon(1e-9));
  }
}

TEST_CASE("from_coefficients inverts the design layout") {
  Eigen::MatrixXd C(2, 2);
  C << 1.5, 0.4, 0.4, -0.6;
  const auto truth = SurrogateModel::quadratic(0.2, vec({0.1, -0.3}), C);
  Rng rng(7);
  const auto ws = random_mixtures(30, 2, rng);
  V y;
  for (const auto& w : ws) y.push_back(truth.predict(w));
  // The simplex constraint makes [1, w1, w2, ...] collinear, so coefficients
  // are not identifiable; predictions are.
  const auto model = SurrogateModel::from_coefficients(least_squares_fit(design_matrix(ws, 2), vec(y)), 2, 2);
  for (const auto& w : random_mixtures(20, 2, rng)) CHECK(model.predict(w) == doctest::Approx(truth.predict(w)).epsilon(1e-9));
  CHECK_ERRC(SurrogateModel::from_coefficients(vec({1, 2}), 2, 2), Errc::DimensionMismatch);
}

TEST_CASE("r squared") {
  CHECK(r_squared(V{1, 2, 3}, V{1, 2, 3}) == 1.0);
  CHECK(r_squared(V{2, 2, 2}, V{1, 2, 3}) == 0.0);
  CHECK(r_squared(V{0.5, 0.5}, V{0, 1}) == 0.0);
  CHECK_ERRC(r_squared(V{1, 2}, V{3, 3}), Errc::ZeroVariance);
  CHECK_ERRC(r_squared(V{1}, V{1, 2}), Errc::DimensionMismatch);
  CHECK_ERRC(r_squared(V{}, V{}), Errc::DimensionMismatch);
}

TEST_CASE("model json round trip and file save/load") {
  Eigen::MatrixXd C(2, 2);
  C << 1.25, -0.5, -0.5, 2;
  const auto q = SurrogateModel::quadratic(0.125, vec({0.5, -0.25}), C);
  const auto back = SurrogateModel::from_json(q.to_json());
  CHECK(back.degree() == 2);
  CHECK(back.curvature_upper() == q.curvature_upper());
  CHECK(back.to_json() == q.to_json());
  const auto path = testing::tmp_path("model.json");
  q.save(path);
  CHECK(SurrogateModel::load(path).predict(V{0.3, 0.7}) == q.predict(V{0.3, 0.7}));
  const auto lin = SurrogateModel::linear(1, vec({2, 3}));
  CHECK(SurrogateModel::from_json(lin.to_json()).degree() == 1);
  CHECK(q.to_json().find("\"C_upper\"") != std::string::npos);
  CHECK_ERRC(SurrogateModel::from_json("{\"degree\":3,\"b\":0,\"a\":[1],\"C_upper\":[]}"), Errc::InvalidArgument);
  CHECK_ERRC(SurrogateModel::from_json("{\"degree\":2,\"b\":0,\"a\":[1,2],\"C_upper\":[1]}"), Errc::DimensionMismatch);
  CHECK_ERRC(SurrogateModel::from_json("not json"), Errc::MalformedLine);
  CHECK_ERRC(SurrogateModel::load(testing::tmp_path("nope.json")), Errc::Io);
}

TEST_CASE("cross-validated fit recovers exact linear and quadratic targets") {
  Rng rng(11);
  const auto ws = random_mixtures(40, 4, rng);
  V lin_y, quad_y;
  Eigen::MatrixXd C(4, 4);
  C << 2, -1, 0.5, 0, -1, 1, 0.3, -0.2, 0.5, 0.3, -1.5, 0.4, 0, -0.2, 0.4, 0.8;
  const auto truth = SurrogateModel::quadratic(0.1, vec({0.3, -0.1, 0.2, 0.05}), C);
  for (const auto& w : ws) {
    lin_y.push_back(0.3 + 0.2 * w[0]);
    quad_y.push_back(truth.predict(w));
  }
  const auto lin = cross_validated_fit(ws, lin_y, {1, 5, 0.2, 1});
  for (const auto& s : lin.report.splits) CHECK(s.test_r2 >= 0.999);
  const auto quad = cross_validated_fit(ws, quad_y, {2, 5, 0.2, 1});
  for (const auto& s : quad.report.splits) CHECK(s.test_r2 >= 0.999);
  const auto lin_on_quad = cross_validated_fit(ws, quad_y, {1, 5, 0.2, 1});
  for (std::size_t i = 0; i < 5; ++i) CHECK(lin_on_quad.report.splits[i].train_r2 < quad.report.splits[i].train_r2);
}

TEST_CASE("cross-validation bookkeeping") {
  Rng rng(12);
  const auto ws = random_mixtures(11, 3, rng);
  V y;
  for (const auto& w : ws) y.push_back(w[0] * w[1] + rng.normal() * 0.01);
  const auto fit = cross_validated_fit(ws, y, {2, 5, 0.2, 99});
  CHECK(fit.report.splits.size() == 5);
  CHECK(fit.report.coefficient_count == 10);
  for (const auto& s : fit.report.splits) {
    CHECK(s.train_rows.size() == 9);  // ceil(0.8 * 11)
    CHECK(s.test_rows.size() == 2);
    CHECK(fit.report.splits[fit.report.chosen_split].test_r2 >= s.test_r2);
  }
  const auto again = cross_validated_fit(ws, y, {2, 5, 0.2, 99});
  CHECK(again.report.to_json() == fit.report.to_json());
  CHECK(again.model.to_json() == fit.model.to_json());
  CHECK_ERRC(cross_validated_fit(std::span(ws).first(4), std::span(y).first(4), {}), Errc::InsufficientRecords);
  CHECK_ERRC(cross_validated_fit(ws, y, {2, 0, 0.2, 1}), Errc::InvalidArgument);
  CHECK_ERRC(cross_validated_fit(ws, y, {2, 5, 1.0, 1}), Errc::InvalidArgument);
  CHECK_ERRC(cross_validated_fit(ws, std::span(y).first(3), {}), Errc::DimensionMismatch);
}

TEST_CASE("nested models on the table seed rows: quadratic train R2 >= linear") {
  const auto seeds = weighted_records(table2_fixture());
  std::vector<MixtureWeights> ws;
  V y;
  for (const auto& r : seeds) {
    ws.push_back(*r.weights);
    y.push_back(target_score(r, table1_suite(), "out"));
  }
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto lin = cross_validated_fit(ws, y, {1, 5, 0.2, seed});
    const auto quad = cross_validated_fit(ws, y, {2, 5, 0.2, seed});
    for (std::size_t i = 0; i < 5; ++i) {
      CHECK(quad.report.splits[i].train_rows == lin.report.splits[i].train_rows);
      CHECK(quad.report.splits[i].train_r2 >= lin.report.splits[i].train_r2 - 1e-12);
    }
  }
}
