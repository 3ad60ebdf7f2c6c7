#include "mixlab/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "json.hpp"

#include "mixlab/error.hpp"
#include "mixlab/rng.hpp"

namespace mixlab {

using json = nlohmann::ordered_json;

namespace {

std::size_t upper_size(std::size_t m) { return m * (m + 1) / 2; }

}  // namespace

SurrogateModel SurrogateModel::linear(double intercept, Eigen::VectorXd linear_terms) {
  SurrogateModel s;
  s.degree_ = 1;
  s.b_ = intercept;
  s.a_ = std::move(linear_terms);
  return s;
}

SurrogateModel SurrogateModel::quadratic(double intercept, Eigen::VectorXd linear_terms,
                                         Eigen::MatrixXd curvature) {
  const auto m = static_cast<std::size_t>(linear_terms.size());
  if (static_cast<std::size_t>(curvature.rows()) != m ||
      static_cast<std::size_t>(curvature.cols()) != m) {
    throw Error(Errc::DimensionMismatch, "curvature must be m x m");
  }
  if (m > 0 && (curvature - curvature.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
    throw Error(Errc::InvalidArgument, "curvature must be symmetric");
  }
  SurrogateModel s;
  s.degree_ = 2;
  s.b_ = intercept;
  s.a_ = std::move(linear_terms);
  s.c_upper_.reserve(upper_size(m));
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i; j < m; ++j) s.c_upper_.push_back(curvature(i, j));
  }
  return s;
}

SurrogateModel SurrogateModel::from_coefficients(const Eigen::VectorXd& beta, std::size_t m,
                                                 int degree) {
  if (static_cast<std::size_t>(beta.size()) != design_columns(m, degree)) {
    throw Error(Errc::DimensionMismatch, "coefficient count does not match design");
  }
  Eigen::VectorXd a = beta.segment(1, static_cast<Eigen::Index>(m));
  if (degree == 1) return linear(beta(0), std::move(a));

  // Monomial w_i w_j (i<j) carries C_ij; w_i^2 carries C_ii / 2.
  SurrogateModel s;
  s.degree_ = 2;
  s.b_ = beta(0);
  s.a_ = std::move(a);
  s.c_upper_.reserve(upper_size(m));
  Eigen::Index col = 1 + static_cast<Eigen::Index>(m);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i; j < m; ++j, ++col) {
      s.c_upper_.push_back(i == j ? 2.0 * beta(col) : beta(col));
    }
  }
  return s;
}

Eigen::MatrixXd SurrogateModel::curvature() const {
  const auto m = dimension();
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
  if (degree_ == 1) return c;
  std::size_t k = 0;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i; j < m; ++j, ++k) {
      c(i, j) = c_upper_[k];
      c(j, i) = c_upper_[k];
    }
  }
  return c;
}

std::size_t SurrogateModel::coefficient_count() const noexcept {
  return 1 + dimension() + (degree_ == 2 ? upper_size(dimension()) : 0);
}

double SurrogateModel::predict(std::span<const double> w) const {
  const auto m = dimension();
  if (w.size() != m) {
    throw Error(Errc::DimensionMismatch,
                "model has " + std::to_string(m) + " domains, mixture has " + std::to_string(w.size()));
  }
  double value = b_;
  for (std::size_t i = 0; i < m; ++i) value += a_(static_cast<Eigen::Index>(i)) * w[i];
  if (degree_ == 2) {
    double quad = 0.0;
    std::size_t k = 0;
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = i; j < m; ++j, ++k) {
        quad += (i == j ? 0.5 : 1.0) * c_upper_[k] * w[i] * w[j];
      }
    }
    value += quad;
  }
  return value;
}

std::string SurrogateModel::to_json() const {
  json j;
  j["degree"] = degree_;
  j["b"] = b_;
  j["a"] = std::vector<double>(a_.data(), a_.data() + a_.size());
  j["C_upper"] = degree_ == 2 ? json(c_upper_) : json::array();
  return j.dump();
}

SurrogateModel SurrogateModel::from_json(const std::string& text) {
  try {
    const auto j = json::parse(text);
    const int degree = j.at("degree").get<int>();
    const auto a = j.at("a").get<std::vector<double>>();
    SurrogateModel s;
    s.degree_ = degree;
    s.b_ = j.at("b").get<double>();
    s.a_ = Eigen::Map<const Eigen::VectorXd>(a.data(), static_cast<Eigen::Index>(a.size()));
    if (degree == 2) {
      s.c_upper_ = j.at("C_upper").get<std::vector<double>>();
      if (s.c_upper_.size() != upper_size(a.size())) {
        throw Error(Errc::DimensionMismatch, "C_upper has wrong length");
      }
    } else if (degree != 1) {
      throw Error(Errc::InvalidArgument, "degree must be 1 or 2");
    }
    return s;
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(Errc::MalformedLine, std::string("model json: ") + e.what());
  }
}

void SurrogateModel::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw Error(Errc::Io, "cannot write " + path);
  out << to_json() << '\n';
}

SurrogateModel SurrogateModel::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return from_json(buf.str());
}

std::size_t design_columns(std::size_t m, int degree) {
  if (degree != 1 && degree != 2) throw Error(Errc::InvalidArgument, "degree must be 1 or 2");
  return 1 + m + (degree == 2 ? upper_size(m) : 0);
}

Eigen::RowVectorXd design_row(std::span<const double> w, int degree) {
  const auto m = w.size();
  Eigen::RowVectorXd row(static_cast<Eigen::Index>(design_columns(m, degree)));
  Eigen::Index col = 0;
  row(col++) = 1.0;
  for (double x : w) row(col++) = x;
  if (degree == 2) {
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = i; j < m; ++j) row(col++) = w[i] * w[j];
    }
  }
  return row;
}

Eigen::MatrixXd design_matrix(std::span<const MixtureWeights> mixtures, int degree) {
  if (mixtures.empty()) throw Error(Errc::InsufficientRecords, "no mixtures");
  const auto m = mixtures.front().size();
  Eigen::MatrixXd X(static_cast<Eigen::Index>(mixtures.size()),
                    static_cast<Eigen::Index>(design_columns(m, degree)));
  for (std::size_t r = 0; r < mixtures.size(); ++r) {
    if (mixtures[r].size() != m) throw Error(Errc::DimensionMismatch, "mixtures differ in size");
    X.row(static_cast<Eigen::Index>(r)) = design_row(mixtures[r].values(), degree);
  }
  return X;
}

Eigen::VectorXd least_squares_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  if (X.rows() != y.size() || X.rows() == 0) {
    throw Error(Errc::DimensionMismatch, "least squares needs rows(X) = len(y) >= 1");
  }
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(X);
  return cod.solve(y);
}

Eigen::MatrixXd regularized_gram_inverse(const Eigen::MatrixXd& X, double lambda) {
  if (!(lambda > 0.0)) throw Error(Errc::InvalidArgument, "ridge lambda must be > 0");
  const Eigen::Index p = X.cols();
  Eigen::MatrixXd gram = X.transpose() * X;
  gram.diagonal().array() += lambda;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
  return ldlt.solve(Eigen::MatrixXd::Identity(p, p));
}

Eigen::VectorXd ridge_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double lambda) {
  if (X.rows() != y.size()) throw Error(Errc::DimensionMismatch, "rows(X) != len(y)");
  if (!(lambda > 0.0)) throw Error(Errc::InvalidArgument, "ridge lambda must be > 0");
  Eigen::MatrixXd gram = X.transpose() * X;
  gram.diagonal().array() += lambda;
  return gram.ldlt().solve(X.transpose() * y);
}

namespace {

double r_squared_about(std::span<const double> predicted, std::span<const double> actual,
                       double reference) {
  double ss_res = 0.0;
  double ss_tot = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    ss_res += (actual[i] - predicted[i]) * (actual[i] - predicted[i]);
    ss_tot += (actual[i] - reference) * (actual[i] - reference);
  }
  if (ss_tot == 0.0) throw Error(Errc::ZeroVariance, "actual values have zero variance");
  return 1.0 - ss_res / ss_tot;
}

double mean_of(std::span<const double> xs) {
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

}  // namespace

double r_squared(std::span<const double> predicted, std::span<const double> actual) {
  if (predicted.size() != actual.size() || actual.empty()) {
    throw Error(Errc::DimensionMismatch, "r_squared needs equal nonzero lengths");
  }
  return r_squared_about(predicted, actual, mean_of(actual));
}

double r_squared(const Eigen::VectorXd& predicted, const Eigen::VectorXd& actual) {
  return r_squared(std::span<const double>(predicted.data(), static_cast<std::size_t>(predicted.size())),
                   std::span<const double>(actual.data(), static_cast<std::size_t>(actual.size())));
}

std::string FitReport::to_json() const {
  json j;
  j["degree"] = degree;
  j["splits"] = json::array();
  for (const auto& s : splits) {
    j["splits"].push_back({{"train_r2", s.train_r2},
                           {"test_r2", s.test_r2},
                           {"train_rows", s.train_rows},
                           {"test_rows", s.test_rows}});
  }
  j["chosen_split"] = chosen_split;
  j["coefficient_count"] = coefficient_count;
  return j.dump();
}

CrossValidatedFit cross_validated_fit(std::span<const MixtureWeights> mixtures,
                                      std::span<const double> targets,
                                      const CrossValidationConfig& cfg) {
  const std::size_t n = mixtures.size();
  if (targets.size() != n) throw Error(Errc::DimensionMismatch, "mixtures and targets differ in length");
  if (n < kMinFitRecords) {
    throw Error(Errc::InsufficientRecords,
                "need at least " + std::to_string(kMinFitRecords) + " weighted records, got " +
                    std::to_string(n));
  }
  if (cfg.n_splits < 1) throw Error(Errc::InvalidArgument, "n_splits must be >= 1");
  if (!(cfg.test_fraction > 0.0 && cfg.test_fraction < 1.0)) {
    throw Error(Errc::InvalidArgument, "test fraction must lie in (0,1)");
  }

  const Eigen::MatrixXd X = design_matrix(mixtures, cfg.degree);
  const Eigen::Map<const Eigen::VectorXd> y(targets.data(), static_cast<Eigen::Index>(n));
  const double overall_mean = mean_of(targets);

  auto n_train = static_cast<std::size_t>(std::ceil((1.0 - cfg.test_fraction) * static_cast<double>(n) - 1e-9));
  n_train = std::clamp<std::size_t>(n_train, 1, n - 1);

  Rng rng(cfg.seed);
  FitReport report;
  report.degree = cfg.degree;
  std::vector<SurrogateModel> models;
  double best = -std::numeric_limits<double>::infinity();

  for (std::size_t split = 0; split < cfg.n_splits; ++split) {
    const auto order = rng.permutation(n);
    SplitScore score;
    score.train_rows.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    score.test_rows.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());

    auto gather = [&](const std::vector<std::size_t>& rows, Eigen::MatrixXd& Xs, Eigen::VectorXd& ys) {
      Xs.resize(static_cast<Eigen::Index>(rows.size()), X.cols());
      ys.resize(static_cast<Eigen::Index>(rows.size()));
      for (std::size_t r = 0; r < rows.size(); ++r) {
        Xs.row(static_cast<Eigen::Index>(r)) = X.row(static_cast<Eigen::Index>(rows[r]));
        ys(static_cast<Eigen::Index>(r)) = y(static_cast<Eigen::Index>(rows[r]));
      }
    };
    Eigen::MatrixXd X_train, X_test;
    Eigen::VectorXd y_train, y_test;
    gather(score.train_rows, X_train, y_train);
    gather(score.test_rows, X_test, y_test);

    const Eigen::VectorXd beta = least_squares_fit(X_train, y_train);
    const Eigen::VectorXd fit_train = X_train * beta;
    const Eigen::VectorXd fit_test = X_test * beta;

    auto as_span = [](const Eigen::VectorXd& v) {
      return std::span<const double>(v.data(), static_cast<std::size_t>(v.size()));
    };
    // A fold with constant targets (e.g. a single test row) has no
    // variance of its own; score it against the mean of all targets.
    auto fold_r2 = [&](const Eigen::VectorXd& fit, const Eigen::VectorXd& actual) {
      const double fold_mean = actual.mean();
      const bool flat = (actual.array() - fold_mean).abs().maxCoeff() == 0.0;
      return r_squared_about(as_span(fit), as_span(actual), flat ? overall_mean : fold_mean);
    };
    score.train_r2 = fold_r2(fit_train, y_train);
    score.test_r2 = fold_r2(fit_test, y_test);

    if (score.test_r2 > best) {
      best = score.test_r2;
      report.chosen_split = split;
    }
    models.push_back(SurrogateModel::from_coefficients(beta, mixtures.front().size(), cfg.degree));
    report.splits.push_back(std::move(score));
  }
  report.coefficient_count = design_columns(mixtures.front().size(), cfg.degree);
  return {models[report.chosen_split], std::move(report)};
}

}  // namespace mixlab
