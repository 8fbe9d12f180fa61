#include "sysid/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <tuple>
#include <string>

namespace sysid {

EstimatorKind parse_estimator(std::string_view s) {
  if (s == "sgd_rer") return EstimatorKind::sgd_rer;
  if (s == "sgd") return EstimatorKind::sgd;
  if (s == "sgd_er") return EstimatorKind::sgd_er;
  if (s == "ols") return EstimatorKind::ols;
  if (s == "sparse_rer") return EstimatorKind::sparse_rer;
  throw ValidationError("unknown estimator '" + std::string(s) +
                        "' (expected sgd_rer|sgd|sgd_er|ols|sparse_rer)");
}

std::string_view to_string(EstimatorKind k) {
  switch (k) {
    case EstimatorKind::sgd_rer:
      return "sgd_rer";
    case EstimatorKind::sgd:
      return "sgd";
    case EstimatorKind::sgd_er:
      return "sgd_er";
    case EstimatorKind::ols:
      return "ols";
    case EstimatorKind::sparse_rer:
      return "sparse_rer";
  }
  return "?";
}

namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(what) + ": shape mismatch");
  }
}

}  // namespace

double param_error(const Matrix& a_hat, const Matrix& a_star) {
  require_same_shape(a_hat, a_star, "param_error");
  const Matrix delta = a_hat - a_star;
  try {
    return spectral_norm(delta);
  } catch (const ConvergenceError& e) {
    // Nearly tied top singular values; the Rayleigh quotient is already
    // accurate to well below the metric's resolution.
    return e.best();
  }
}

double pred_excess(const Matrix& a_hat, const Matrix& a_star, const Matrix& g) {
  require_same_shape(a_hat, a_star, "pred_excess");
  require_same_shape(a_hat, g, "pred_excess");
  const Matrix delta = a_hat - a_star;
  // tr(D^T D G) = sum_ij (D G)_ij D_ij
  return ((delta * g).array() * delta.array()).sum();
}

std::vector<SummaryRow> summarize(std::span<const ErrorCurve> curves) {
  struct Acc {
    EstimatorKind kind;
    std::vector<double> param;
    std::vector<double> pred;
  };
  std::vector<Acc> accs;
  for (const ErrorCurve& c : curves) {
    if (c.records.empty()) continue;
    auto it = std::find_if(accs.begin(), accs.end(), [&](const Acc& a) { return a.kind == c.estimator; });
    if (it == accs.end()) {
      accs.push_back({c.estimator, {}, {}});
      it = std::prev(accs.end());
    }
    it->param.push_back(c.records.back().param_err);
    it->pred.push_back(c.records.back().pred_excess);
  }

  auto mean_std = [](const std::vector<double>& xs) {
    double sum = 0.0;
    for (double x : xs) sum += x;
    const double mean = sum / double(xs.size());
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    const double sd = xs.size() > 1 ? std::sqrt(ss / double(xs.size() - 1)) : 0.0;
    return std::pair{mean, sd};
  };

  std::vector<SummaryRow> rows;
  for (const Acc& a : accs) {
    SummaryRow row;
    row.estimator = a.kind;
    row.runs = a.param.size();
    std::tie(row.param_err_mean, row.param_err_std) = mean_std(a.param);
    std::tie(row.pred_excess_mean, row.pred_excess_std) = mean_std(a.pred);
    rows.push_back(row);
  }
  auto ols = std::find_if(rows.begin(), rows.end(), [](const SummaryRow& r) { return r.estimator == EstimatorKind::ols; });
  if (ols != rows.end()) {
    const SummaryRow base = *ols;
    for (SummaryRow& r : rows) {
      r.param_err_ratio_ols = r.param_err_mean / base.param_err_mean;
      r.pred_excess_ratio_ols = r.pred_excess_mean / base.pred_excess_mean;
    }
  }
  return rows;
}

}  // namespace sysid
