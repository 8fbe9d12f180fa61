#include "sysid/estimators.hpp"

#include <algorithm>
#include <string>

namespace sysid {

namespace {

void require_dim(Eigen::Index expected, Eigen::Index got, const char* what) {
  if (expected != got) {
    throw DimensionError(std::string(what) + ": expected dimension " + std::to_string(expected) +
                         ", got " + std::to_string(got));
  }
}

// Row-by-row rank-one step. Row l uses only its own residual, so updating in
// place is exact. The dense and masked kernels sum in the same index order,
// which makes a full-support sparse run bit-identical to the dense one.
inline void dense_step(Matrix& a, const Vector& x, const Vector& y, double two_gamma) {
  const Eigen::Index d = a.rows();
  for (Eigen::Index l = 0; l < d; ++l) {
    double r = 0.0;
    for (Eigen::Index k = 0; k < d; ++k) {
      r += a(l, k) * x[k];
    }
    const double c = two_gamma * (r - y[l]);
    for (Eigen::Index k = 0; k < d; ++k) {
      a(l, k) -= c * x[k];
    }
  }
}

inline void masked_step(Matrix& a, const Vector& x, const Vector& y, double two_gamma,
                        const SupportPattern& pattern) {
  const Eigen::Index d = a.rows();
  for (Eigen::Index l = 0; l < d; ++l) {
    const auto& support = pattern.rows[static_cast<std::size_t>(l)];
    double r = 0.0;
    for (std::uint32_t k : support) {
      r += a(l, k) * x[k];
    }
    const double c = two_gamma * (r - y[l]);
    for (std::uint32_t k : support) {
      a(l, k) -= c * x[k];
    }
  }
}

bool exceeds_bound(const BufferView& buf, double R) {
  for (std::size_t j = 0; j < buf.span_size(); ++j) {
    if (buf.samples[j].squaredNorm() > R) {
      return true;
    }
  }
  return false;
}

void check_buffer(const RerState& state, const BufferView& buf, const TransitionSchedule& sched,
                  const HyperParams& hp, const char* what) {
  if (buf.samples.size() != hp.S + 1) {
    throw DimensionError(std::string(what) + ": buffer holds " + std::to_string(buf.samples.size()) +
                         " samples, expected S+1 = " + std::to_string(hp.S + 1));
  }
  if (sched.size() != hp.B) {
    throw DimensionError(std::string(what) + ": schedule has " + std::to_string(sched.size()) +
                         " transitions, expected B = " + std::to_string(hp.B));
  }
  require_dim(state.current.rows(), buf.samples.front().size(), what);
}

template <typename Step>
void process_buffer(RerState& state, const BufferView& buf, const TransitionSchedule& sched,
                    const HyperParams& hp, Step&& step) {
  if (!state.poisoned && exceeds_bound(buf, hp.R)) {
    state.poisoned = true;
  }
  if (!state.poisoned) {
    const double two_gamma = 2.0 * hp.gamma;
    for (const Transition& tr : sched) {
      step(state.current, buf.samples[tr.cov], buf.samples[tr.tgt], two_gamma);
    }
  }
  state.tail.push(state.current);
}

}  // namespace

TailAverage::TailAverage(Eigen::Index d, std::uint64_t burn_in)
    : sum_(Matrix::Zero(d, d)), last_(Matrix::Zero(d, d)), burn_in_(burn_in) {}

void TailAverage::push(const Matrix& end_iterate) {
  ++pushed_;
  last_ = end_iterate;
  if (pushed_ >= burn_in_ + 1) {
    sum_ += end_iterate;
    ++averaged_;
  }
}

Matrix TailAverage::value() const {
  if (averaged_ == 0) {
    return last_;
  }
  return sum_ / double(averaged_);
}

RerState::RerState(Eigen::Index d, std::uint64_t burn_in)
    : current(Matrix::Zero(d, d)), tail(d, burn_in) {}

RerState::RerState(Matrix initial, std::uint64_t burn_in)
    : current(std::move(initial)), tail(current.rows(), burn_in) {
  if (current.rows() != current.cols()) {
    throw DimensionError("RerState: initial estimate must be square");
  }
}

void rer_process_buffer(RerState& state, const BufferView& buf, const TransitionSchedule& sched,
                        const HyperParams& hp) {
  check_buffer(state, buf, sched, hp, "rer_process_buffer");
  process_buffer(state, buf, sched, hp, dense_step);
}

Matrix rer_snapshot(const RerState& state) {
  if (state.poisoned) {
    return Matrix::Zero(state.current.rows(), state.current.cols());
  }
  return state.tail.value();
}

void sgd_step(Matrix& a, const Vector& x, const Vector& y, double gamma) {
  require_dim(a.rows(), x.size(), "sgd_step");
  require_dim(a.rows(), y.size(), "sgd_step");
  require_dim(a.rows(), a.cols(), "sgd_step");
  dense_step(a, x, y, 2.0 * gamma);
}

OlsState::OlsState(Eigen::Index d, double eps)
    : inv_cov(Precise::Identity(d, d) / static_cast<long double>(eps)), cross(Precise::Zero(d, d)), epsilon(eps) {
  if (!(eps > 0.0)) {
    throw ValidationError("OlsState: ridge epsilon must be positive");
  }
}

void ols_update(OlsState& state, const Vector& x, const Vector& y) {
  require_dim(state.inv_cov.rows(), x.size(), "ols_update");
  require_dim(state.inv_cov.rows(), y.size(), "ols_update");
  using PreciseVector = Eigen::Matrix<long double, Eigen::Dynamic, 1>;
  const PreciseVector xp = x.cast<long double>();
  const PreciseVector v = state.inv_cov * xp;
  const long double denom = 1.0L + xp.dot(v);
  // (v_i v_j) / denom is symmetric bit for bit.
  state.inv_cov -= (v * v.transpose()) / denom;
  state.cross.noalias() += y.cast<long double>() * xp.transpose();
  ++state.count;
}

Matrix ols_estimate(const OlsState& state) { return (state.cross * state.inv_cov).cast<double>(); }

double default_ols_epsilon(std::span<const Vector> samples) {
  double tr = 0.0;
  Eigen::Index d = 1;
  for (const Vector& x : samples) {
    tr += x.squaredNorm();
    d = x.size();
  }
  const double eps = 1e-8 * tr / double(d);
  return eps > 0.0 ? eps : 1e-8;
}

SupportPattern SupportPattern::full(Eigen::Index d) {
  SupportPattern p;
  p.rows.resize(static_cast<std::size_t>(d));
  for (auto& row : p.rows) {
    for (Eigen::Index k = 0; k < d; ++k) row.push_back(static_cast<std::uint32_t>(k));
  }
  return p;
}

SupportPattern SupportPattern::diagonal(Eigen::Index d) {
  SupportPattern p;
  for (Eigen::Index l = 0; l < d; ++l) p.rows.push_back({static_cast<std::uint32_t>(l)});
  return p;
}

SupportPattern SupportPattern::of(const Matrix& a, double tol) {
  SupportPattern p;
  p.rows.resize(static_cast<std::size_t>(a.rows()));
  for (Eigen::Index l = 0; l < a.rows(); ++l) {
    for (Eigen::Index k = 0; k < a.cols(); ++k) {
      if (std::abs(a(l, k)) > tol) p.rows[static_cast<std::size_t>(l)].push_back(static_cast<std::uint32_t>(k));
    }
  }
  return p;
}

void SupportPattern::validate(Eigen::Index d) const {
  if (rows.size() != static_cast<std::size_t>(d)) {
    throw DimensionError("SupportPattern: expected " + std::to_string(d) + " rows, got " +
                         std::to_string(rows.size()));
  }
  for (std::size_t l = 0; l < rows.size(); ++l) {
    const auto& row = rows[l];
    if (row.empty()) {
      throw ValidationError("SupportPattern: row " + std::to_string(l) + " has an empty support");
    }
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (row[i] >= d) {
        throw DimensionError("SupportPattern: index " + std::to_string(row[i]) + " out of range in row " +
                             std::to_string(l));
      }
      if (i > 0 && row[i] <= row[i - 1]) {
        throw ValidationError("SupportPattern: row " + std::to_string(l) + " is not sorted and unique");
      }
    }
  }
}

std::size_t SupportPattern::max_row_size() const {
  std::size_t s = 0;
  for (const auto& row : rows) s = std::max(s, row.size());
  return s;
}

void sparse_rer_process_buffer(RerState& state, const BufferView& buf, const TransitionSchedule& sched,
                               const HyperParams& hp, const SupportPattern& pattern) {
  check_buffer(state, buf, sched, hp, "sparse_rer_process_buffer");
  pattern.validate(state.current.rows());
  process_buffer(state, buf, sched, hp, [&](Matrix& a, const Vector& x, const Vector& y, double two_gamma) {
    masked_step(a, x, y, two_gamma, pattern);
  });
}

double sparse_default_R(const SupportPattern& pattern, double lambda_max_G, std::uint64_t T, double c) {
  return c * double(pattern.max_row_size()) * lambda_max_G * std::log(double(std::max<std::uint64_t>(T, 2)));
}

namespace {

class Recorder {
public:
  Recorder(EstimatorKind kind, const RunSetup& setup) : setup_(setup) {
    curve_.estimator = kind;
    curve_.seed = setup.seed;
  }

  void record(std::uint64_t buffer_index, const Matrix& snapshot, bool burn_in) {
    ErrorRecord rec;
    rec.buffer_index = buffer_index;
    rec.samples_seen = (buffer_index + 1) * setup_.hp.S;
    rec.param_err = param_error(snapshot, setup_.a_star);
    rec.pred_excess = pred_excess(snapshot, setup_.a_star, setup_.g);
    rec.burn_in = burn_in;
    curve_.records.push_back(rec);
    if (setup_.on_snapshot) {
      setup_.on_snapshot(rec, snapshot);
    }
  }

  ErrorCurve take() { return std::move(curve_); }

private:
  const RunSetup& setup_;
  ErrorCurve curve_;
};

Matrix initial_estimate(const RunSetup& setup, Eigen::Index d) {
  if (setup.initial) {
    require_dim(d, setup.initial->rows(), "run_estimator: initial estimate");
    require_dim(d, setup.initial->cols(), "run_estimator: initial estimate");
    return *setup.initial;
  }
  return Matrix::Zero(d, d);
}

ErrorCurve run_replay(EstimatorKind kind, SampleSource& source, const RunSetup& setup) {
  const HyperParams& hp = setup.hp;
  const Eigen::Index d = setup.a_star.rows();
  RerState state(initial_estimate(setup, d), hp.a);
  SeededRng sched_rng(setup.scheduler_seed);
  const TransitionSchedule reverse = make_schedule(OrderPolicy::reverse, hp.B, hp.u);
  TransitionSchedule random;

  SupportPattern pattern;
  if (kind == EstimatorKind::sparse_rer) {
    pattern = setup.support ? *setup.support : SupportPattern::of(setup.a_star);
    pattern.validate(d);
  }

  Recorder rec(kind, setup);
  BufferWindow window(hp.S);
  while (auto buf = window.next(source)) {
    require_dim(d, buf->samples.front().size(), "run_estimator");
    switch (kind) {
      case EstimatorKind::sgd_rer:
        rer_process_buffer(state, *buf, reverse, hp);
        break;
      case EstimatorKind::sgd_er:
        random = setup.er_with_replacement ? make_schedule_with_replacement(hp.B, hp.u, sched_rng)
                                           : make_schedule(OrderPolicy::random, hp.B, hp.u, &sched_rng);
        rer_process_buffer(state, *buf, random, hp);
        break;
      case EstimatorKind::sparse_rer:
        sparse_rer_process_buffer(state, *buf, reverse, hp, pattern);
        break;
      default:
        throw ValidationError("run_replay: not a replay estimator");
    }
    if (state.poisoned && setup.poison == PoisonMode::abort) {
      break;
    }
    rec.record(buf->index, rer_snapshot(state), !state.poisoned && state.tail.in_burn_in());
  }
  return rec.take();
}

ErrorCurve run_sgd(SampleSource& source, const RunSetup& setup) {
  const HyperParams& hp = setup.hp;
  const Eigen::Index d = setup.a_star.rows();
  Matrix current = initial_estimate(setup, d);
  TailAverage tail(d, hp.a);
  const double two_gamma = 2.0 * hp.gamma;

  Recorder rec(EstimatorKind::sgd, setup);
  BufferWindow window(hp.S);
  while (auto buf = window.next(source)) {
    require_dim(d, buf->samples.front().size(), "run_estimator");
    for (std::size_t j = 0; j < hp.S; ++j) {
      dense_step(current, buf->samples[j], buf->samples[j + 1], two_gamma);
    }
    tail.push(current);
    rec.record(buf->index, tail.value(), tail.in_burn_in());
  }
  return rec.take();
}

ErrorCurve run_ols(SampleSource& source, const RunSetup& setup) {
  const HyperParams& hp = setup.hp;
  const Eigen::Index d = setup.a_star.rows();
  std::optional<OlsState> state;
  if (setup.ols_epsilon) {
    state.emplace(d, *setup.ols_epsilon);
  } else if (!setup.prefix.empty()) {
    state.emplace(d, default_ols_epsilon(setup.prefix));
  }
  for (std::size_t i = 0; state && i + 1 < setup.prefix.size(); ++i) {
    ols_update(*state, setup.prefix[i], setup.prefix[i + 1]);
  }

  Recorder rec(EstimatorKind::ols, setup);
  BufferWindow window(hp.S);
  while (auto buf = window.next(source)) {
    require_dim(d, buf->samples.front().size(), "run_estimator");
    if (!state) {
      state.emplace(d, default_ols_epsilon(buf->samples.first(hp.S)));
    }
    if (buf->index == 0 && !setup.prefix.empty()) {
      ols_update(*state, setup.prefix.back(), buf->samples.front());
    }
    for (std::size_t j = 0; j < hp.S; ++j) {
      ols_update(*state, buf->samples[j], buf->samples[j + 1]);
    }
    rec.record(buf->index, ols_estimate(*state), false);
  }
  return rec.take();
}

}  // namespace

ErrorCurve run_estimator(EstimatorKind kind, SampleSource& source, const RunSetup& setup) {
  setup.hp.validate();
  if (setup.a_star.rows() != setup.a_star.cols() || setup.g.rows() != setup.a_star.rows() ||
      setup.g.cols() != setup.a_star.cols()) {
    throw DimensionError("run_estimator: A* and G must be square with equal dimensions");
  }
  switch (kind) {
    case EstimatorKind::sgd:
      return run_sgd(source, setup);
    case EstimatorKind::ols:
      return run_ols(source, setup);
    default:
      return run_replay(kind, source, setup);
  }
}

}  // namespace sysid
