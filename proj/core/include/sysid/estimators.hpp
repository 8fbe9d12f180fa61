#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "sysid/metrics.hpp"
#include "sysid/model.hpp"
#include "sysid/replay.hpp"

namespace sysid {

/// Running average of end-of-buffer iterates after a burn-in of `burn_in`
/// buffers: after t buffers (t > a) value() is (1/(t-a)) sum_{k=a}^{t-1} A_k,
/// with A_k the iterate at the end of 0-based buffer k.
class TailAverage {
public:
  TailAverage(Eigen::Index d, std::uint64_t burn_in);

  void push(const Matrix& end_iterate);

  /// True while no post-burn-in iterate has been pushed.
  bool in_burn_in() const { return averaged_ == 0; }
  std::uint64_t pushed() const { return pushed_; }
  std::uint64_t averaged() const { return averaged_; }
  std::uint64_t burn_in() const { return burn_in_; }
  const Matrix& sum() const { return sum_; }

  /// Tail average, or the last pushed iterate during burn-in (zero before
  /// any push).
  Matrix value() const;

private:
  Matrix sum_;
  Matrix last_;
  std::uint64_t burn_in_;
  std::uint64_t pushed_ = 0;
  std::uint64_t averaged_ = 0;
};

/// SGD with reverse experience replay (and, with another schedule, SGD-ER).
struct RerState {
  Matrix current;
  TailAverage tail;
  bool poisoned = false;

  RerState(Eigen::Index d, std::uint64_t burn_in);
  RerState(Matrix initial, std::uint64_t burn_in);

  std::uint64_t buffers_done() const { return tail.pushed(); }
};

/// One buffer of replay updates A <- A - 2 gamma (A x - y) x^T in schedule
/// order. If any of the buffer's first S samples has ||X||^2 > R the state is
/// poisoned for good and the estimate is frozen; the buffer still counts.
void rer_process_buffer(RerState& state, const BufferView& buf, const TransitionSchedule& sched,
                        const HyperParams& hp);

/// Zero if poisoned, the last iterate during burn-in, else the tail average.
Matrix rer_snapshot(const RerState& state);

/// Plain SGD step A <- A - 2 gamma (A x - y) x^T.
void sgd_step(Matrix& a, const Vector& x, const Vector& y, double gamma);

/// Online least squares through the Sherman-Morrison identity.
///
/// The inverse starts at I/eps, so the first rank-one updates cancel about
/// -log10(eps) digits; the statistics are kept in extended precision to keep
/// the streaming estimate within 1e-6 of a batch solve even for eps = 1e-8.
struct OlsState {
  using Precise = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;

  Precise inv_cov;  ///< (sum x x^T + eps I)^{-1}, exactly symmetric
  Precise cross;    ///< sum y x^T
  double epsilon = 0.0;
  std::uint64_t count = 0;

  OlsState(Eigen::Index d, double epsilon);

  /// inv_cov rounded to double.
  Matrix inverse() const { return inv_cov.cast<double>(); }
};

void ols_update(OlsState& state, const Vector& x, const Vector& y);
Matrix ols_estimate(const OlsState& state);

/// Ridge used when none is configured: 1e-8 * sum ||x||^2 / d over the given
/// samples, falling back to 1e-8 when they are all zero.
double default_ols_epsilon(std::span<const Vector> samples);

/// Known row supports S_l of A*; indices sorted and unique.
struct SupportPattern {
  std::vector<std::vector<std::uint32_t>> rows;

  static SupportPattern full(Eigen::Index d);
  static SupportPattern diagonal(Eigen::Index d);
  /// Support of the entries with |A_lk| > tol.
  static SupportPattern of(const Matrix& a, double tol = 0.0);

  /// Throws DimensionError / ValidationError on an inconsistent pattern.
  void validate(Eigen::Index d) const;
  std::size_t max_row_size() const;
};

/// Row-wise masked variant of rer_process_buffer: row l only ever moves
/// inside span{e_k : k in S_l}.
void sparse_rer_process_buffer(RerState& state, const BufferView& buf, const TransitionSchedule& sched,
                               const HyperParams& hp, const SupportPattern& pattern);

/// Norm bound for the sparse variant: c * s0 * lambda_max(G) * ln T.
double sparse_default_R(const SupportPattern& pattern, double lambda_max_G, std::uint64_t T, double c = 1.0);

enum class PoisonMode {
  zero_and_continue,  ///< emit the zero estimate and keep consuming the stream
  abort,              ///< stop the curve at the poisoned buffer
};

/// Everything run_estimator needs besides the sample source.
struct RunSetup {
  HyperParams hp;
  Matrix a_star;
  /// Stationary covariance used by pred_excess.
  Matrix g;
  /// Samples consumed before `source` (R estimation). Only OLS uses them.
  std::vector<Vector> prefix;
  std::uint64_t seed = 0;
  std::uint64_t scheduler_seed = 0;
  std::optional<Matrix> initial;
  std::optional<SupportPattern> support;
  std::optional<double> ols_epsilon;
  PoisonMode poison = PoisonMode::zero_and_continue;
  bool er_with_replacement = false;
  /// Called after every record with the snapshot it was computed from.
  std::function<void(const ErrorRecord&, const Matrix&)> on_snapshot;
};

/// Streams `source` through one estimator, recording the error at every
/// buffer end. Non-buffered estimators (sgd, ols) consume every transition
/// and are evaluated at the same sample counts.
ErrorCurve run_estimator(EstimatorKind kind, SampleSource& source, const RunSetup& setup);

}  // namespace sysid
