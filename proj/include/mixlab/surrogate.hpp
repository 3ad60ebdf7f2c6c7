#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mixlab/mixtures.hpp"

namespace mixlab {

/// g(w) = b + a'w                 (degree 1)
/// g(w) = b + a'w + 1/2 w'Cw      (degree 2)
///
/// C is symmetric and stored as its upper triangle, row-major over i <= j.
class SurrogateModel {
 public:
  static SurrogateModel linear(double intercept, Eigen::VectorXd linear_terms);
  static SurrogateModel quadratic(double intercept, Eigen::VectorXd linear_terms,
                                  Eigen::MatrixXd curvature);

  /// Rebuilds a model from least-squares coefficients laid out like
  /// design_matrix(..., degree).
  static SurrogateModel from_coefficients(const Eigen::VectorXd& beta, std::size_t m, int degree);

  int degree() const noexcept { return degree_; }
  std::size_t dimension() const noexcept { return static_cast<std::size_t>(a_.size()); }
  double intercept() const noexcept { return b_; }
  const Eigen::VectorXd& linear_terms() const noexcept { return a_; }
  /// Full symmetric curvature matrix (zero for linear models).
  Eigen::MatrixXd curvature() const;
  std::vector<double> curvature_upper() const { return c_upper_; }
  std::size_t coefficient_count() const noexcept;

  double predict(std::span<const double> w) const;
  double predict(const MixtureWeights& w) const { return predict(w.values()); }

  std::string to_json() const;
  static SurrogateModel from_json(const std::string& text);
  void save(const std::string& path) const;
  static SurrogateModel load(const std::string& path);

 private:
  SurrogateModel() = default;
  int degree_ = 1;
  double b_ = 0.0;
  Eigen::VectorXd a_;
  std::vector<double> c_upper_;
};

/// Columns [1, w_1..w_m] and, for degree 2, w_i*w_j for i <= j in
/// lexicographic order.
Eigen::MatrixXd design_matrix(std::span<const MixtureWeights> mixtures, int degree);
Eigen::RowVectorXd design_row(std::span<const double> w, int degree);
std::size_t design_columns(std::size_t m, int degree);

/// Minimum-norm least squares solution; defined for any shape and rank.
Eigen::VectorXd least_squares_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y);

/// (X'X + lambda I)^-1 X'y, no intercept. Requires lambda > 0.
Eigen::VectorXd ridge_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double lambda);

/// (X'X + lambda I)^-1. Requires lambda > 0.
Eigen::MatrixXd regularized_gram_inverse(const Eigen::MatrixXd& X, double lambda);

/// 1 - SS_res / SS_tot, SS_tot about the mean of `actual`.
double r_squared(std::span<const double> predicted, std::span<const double> actual);
double r_squared(const Eigen::VectorXd& predicted, const Eigen::VectorXd& actual);

struct SplitScore {
  double train_r2 = 0.0;
  double test_r2 = 0.0;
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> test_rows;
};

struct FitReport {
  int degree = 1;
  std::vector<SplitScore> splits;
  std::size_t chosen_split = 0;
  std::size_t coefficient_count = 0;

  std::string to_json() const;
};

struct CrossValidationConfig {
  int degree = 2;
  std::size_t n_splits = 5;
  double test_fraction = 0.2;
  std::uint64_t seed = 0;
};

struct CrossValidatedFit {
  SurrogateModel model;
  FitReport report;
};

inline constexpr std::size_t kMinFitRecords = 5;

/// Repeated random splits (shuffle with the seed, first ceil((1-f) n) rows
/// train); returns the model from the split with the best test R^2.
CrossValidatedFit cross_validated_fit(std::span<const MixtureWeights> mixtures,
                                      std::span<const double> targets,
                                      const CrossValidationConfig& cfg);

}  // namespace mixlab
