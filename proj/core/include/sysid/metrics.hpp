#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "sysid/numerics.hpp"

namespace sysid {

enum class EstimatorKind { sgd_rer, sgd, sgd_er, ols, sparse_rer };

EstimatorKind parse_estimator(std::string_view s);
std::string_view to_string(EstimatorKind k);

struct ErrorRecord {
  std::uint64_t buffer_index = 0;
  std::uint64_t samples_seen = 0;
  double param_err = 0.0;
  double pred_excess = 0.0;
  bool burn_in = false;

  friend bool operator==(const ErrorRecord&, const ErrorRecord&) = default;
};

struct ErrorCurve {
  EstimatorKind estimator = EstimatorKind::sgd_rer;
  std::uint64_t seed = 0;
  std::vector<ErrorRecord> records;
};

/// ||a_hat - a_star||, the operator-norm parameter error.
double param_error(const Matrix& a_hat, const Matrix& a_star);

/// Excess one-step prediction loss at stationarity over tr(Sigma):
/// tr((a_hat - a_star)^T (a_hat - a_star) G) with G the stationary covariance.
double pred_excess(const Matrix& a_hat, const Matrix& a_star, const Matrix& g);

/// Final-record statistics of one estimator across seeds.
struct SummaryRow {
  EstimatorKind estimator = EstimatorKind::sgd_rer;
  std::size_t runs = 0;
  double param_err_mean = 0.0;
  double param_err_std = 0.0;
  double pred_excess_mean = 0.0;
  double pred_excess_std = 0.0;
  // Mean divided by the OLS mean, when an OLS row exists.
  std::optional<double> param_err_ratio_ols;
  std::optional<double> pred_excess_ratio_ols;
};

/// One row per estimator in order of first appearance. Standard deviations
/// use the n-1 denominator (0 for a single run); empty curves are skipped.
std::vector<SummaryRow> summarize(std::span<const ErrorCurve> curves);

}  // namespace sysid
