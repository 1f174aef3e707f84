#pragma once

#include <Eigen/Core>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "synprobe/error.hpp"

namespace synprobe {

class InsufficientDataError : public StatsError {
 public:
  using StatsError::StatsError;
};

class SingularDesignError : public StatsError {
 public:
  using StatsError::StatsError;
};

struct RegressionFit {
  Eigen::VectorXd coefficients;  // in design-matrix column order
  Eigen::VectorXd standard_errors;
  Eigen::VectorXd t_stats;
  Eigen::VectorXd p_values;  // two-sided
  Eigen::VectorXd residuals;
  double r2 = 0;
  double adj_r2 = 0;
  double rss = 0;
  double log_likelihood = 0;  // Gaussian at the MLE variance RSS/n
  int n = 0;
  int num_columns = 0;
  int df_resid = 0;
  bool has_intercept = false;
};

// OLS via column-pivoted QR. X carries its own intercept column (a column of
// ones). Throws InsufficientDataError when n <= columns and
// SingularDesignError when X is rank deficient.
RegressionFit ols_fit(const Eigen::VectorXd& y, const Eigen::MatrixXd& x);

// Design matrix [1, x1, x2, ...] from predictor columns.
Eigen::MatrixXd design_with_intercept(std::span<const std::vector<double>> predictors);

// Step-down Holm correction, returned in input order.
std::vector<double> holm_bonferroni(std::span<const double> p_values);

struct LrtResult {
  double statistic = 0;
  double p_value = 1;
  int df = 0;
};
// Likelihood-ratio test of a reduced fit nested in a full fit on the same y.
LrtResult lrt(const RegressionFit& reduced, const RegressionFit& full);

struct TTestResult {
  double t = 0;
  double df = 0;
  double p_value = 0;  // one-sided, alternative mean_a > mean_b
};
// Welch two-sample t-test. nullopt when either sample has fewer than two
// values or both have zero variance.
std::optional<TTestResult> welch_ttest_greater(std::span<const double> a, std::span<const double> b);

enum class Granularity { full, phenomenon, paradigm };
std::string granularity_name(Granularity g);
Granularity parse_granularity(const std::string& name);

enum class PredictorAggregation { paradigm_mean, pooled };
std::string aggregation_name(PredictorAggregation a);
PredictorAggregation parse_aggregation(const std::string& name);

struct TaggedScore {
  std::string paradigm;
  double value = 0;
};
// Mean of per-paradigm means (paradigm_mean) or plain mean (pooled).
std::optional<double> aggregate_predictor(std::span<const TaggedScore> scores, PredictorAggregation mode);

// One model's values for one table cell (e.g. one phenomenon).
struct ModelObservation {
  std::string model_id;
  std::string cell;
  std::optional<double> syntax_score;   // UUAS or UAS
  std::optional<double> control_score;  // rho_s
  std::optional<double> accuracy;       // minimal-pair accuracy
};

struct RegressionRow {
  std::string cell;
  std::size_t n = 0;
  std::vector<std::string> excluded_models;
  std::optional<RegressionFit> simple;    // y ~ syntax
  std::optional<RegressionFit> multiple;  // y ~ syntax + control
  std::optional<RegressionFit> control;   // y ~ control
  std::optional<LrtResult> lrt;
  // Corrected p-values (identical to the raw ones when m = 1).
  std::optional<double> simple_p;
  std::optional<double> multiple_p;
  std::optional<double> control_p;
  std::optional<double> lrt_p;
  std::string status = "ok";  // ok | insufficient-data

  std::vector<double> syntax_x, control_x, y;  // observations used, model order
  std::vector<std::string> models;
};

struct RegressionTable {
  std::string family;
  Granularity granularity = Granularity::full;
  std::vector<RegressionRow> rows;

  std::string to_csv() const;
  std::string to_json() const;
};

// Fits every cell in `cell_order`. Observations lacking a syntax score or an
// accuracy are listed and dropped with a warning; the multiple and control
// fits run only when every remaining model has a control score. Cells with
// fewer than three complete models are marked insufficient-data. Holm
// correction runs across cells within each p-value column for the
// phenomenon and paradigm granularities.
RegressionTable build_regression_table(const std::string& family, Granularity granularity,
                                       std::span<const ModelObservation> observations,
                                       std::span<const std::string> cell_order);

// Fixed-precision formatting shared by every report so that CSV, JSON and
// plot annotations print identical digits.
std::string format_stat(double v);
std::string format_stat(const std::optional<double>& v);

}  // namespace synprobe
