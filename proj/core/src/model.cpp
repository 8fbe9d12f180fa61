#include "sysid/model.hpp"

#include <cmath>
#include <iostream>
#include <string>

namespace sysid {

SystemSpec SystemSpec::make(Matrix a_star, Matrix sigma) {
  if (a_star.rows() != a_star.cols() || a_star.rows() == 0) {
    throw DimensionError("SystemSpec: A* must be a non-empty square matrix");
  }
  if (sigma.rows() != a_star.rows() || sigma.cols() != a_star.cols()) {
    throw DimensionError("SystemSpec: Sigma must have the same shape as A*");
  }
  if (!a_star.allFinite() || !sigma.allFinite()) {
    throw ValidationError("SystemSpec: non-finite entries");
  }
  if ((sigma - sigma.transpose()).norm() > 1e-12 * std::max(1.0, sigma.norm())) {
    throw ValidationError("SystemSpec: Sigma must be symmetric");
  }
  SystemSpec spec;
  spec.d = a_star.rows();
  spec.sigma_chol = cholesky_psd(sigma);
  spec.a_star_norm = spectral_norm(a_star);
  spec.a_star = std::move(a_star);
  spec.sigma = std::move(sigma);
  return spec;
}

StartMode parse_start_mode(std::string_view s) {
  if (s == "zero") return StartMode::zero;
  if (s == "stationary") return StartMode::stationary;
  throw ValidationError("unknown start mode '" + std::string(s) + "' (expected zero|stationary)");
}

std::string_view to_string(StartMode m) { return m == StartMode::zero ? "zero" : "stationary"; }

VarStream::VarStream(SystemSpec spec, StartMode start, std::uint64_t seed, std::uint64_t max_samples)
    : spec_(std::move(spec)), rng_(seed), state_(Vector::Zero(spec_.d)), noise_(spec_.d),
      max_samples_(max_samples) {
  if (!spec_.stable()) {
    if (start == StartMode::stationary) {
      throw StabilityError("VarStream: stationary start requires ||A*|| < 1 (got " +
                           std::to_string(spec_.a_star_norm) + ")");
    }
    std::cerr << "warning: ||A*|| = " << spec_.a_star_norm << " >= 1; the stream may not mix\n";
  }
  if (start == StartMode::stationary) {
    const Matrix g = solve_lyapunov(spec_.a_star, spec_.sigma);
    gaussian_vector(rng_, cholesky_psd(g), state_);
  }
}

VarStream::VarStream(SystemSpec spec, Vector x0, std::uint64_t seed, std::uint64_t max_samples)
    : spec_(std::move(spec)), rng_(seed), state_(std::move(x0)), noise_(spec_.d),
      max_samples_(max_samples) {
  if (state_.size() != spec_.d) {
    throw DimensionError("VarStream: X_0 has the wrong dimension");
  }
}

bool VarStream::next(Vector& out) {
  if (emitted_ >= max_samples_) {
    return false;
  }
  out = state_;
  ++emitted_;
  gaussian_vector(rng_, spec_.sigma_chol, noise_);
  state_.noalias() = spec_.a_star * out;
  state_ += noise_;
  return true;
}

bool VectorSource::next(Vector& out) {
  if (pos_ >= samples_.size()) {
    return false;
  }
  out = samples_[pos_++];
  return true;
}

Matrix rand_bimod(Eigen::Index d, double rho, SeededRng& rng) {
  if (d < 1) {
    throw ValidationError("rand_bimod: d must be >= 1");
  }
  if (!(rho > 0.0 && rho < 1.0)) {
    throw ValidationError("rand_bimod: rho must lie in (0, 1)");
  }
  Matrix gauss(d, d);
  for (Eigen::Index j = 0; j < d; ++j) {
    for (Eigen::Index i = 0; i < d; ++i) {
      gauss(i, j) = rng.normal();
    }
  }
  Eigen::HouseholderQR<Matrix> qr(gauss);
  Matrix q = qr.householderQ() * Matrix::Identity(d, d);
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < d; ++j) {
    if (r(j, j) < 0.0) {
      q.col(j) = -q.col(j);
    }
  }
  Vector lambda(d);
  const Eigen::Index n_high = (d + 1) / 2;
  for (Eigen::Index i = 0; i < d; ++i) {
    lambda[i] = i < n_high ? rho : rho / 3.0;
  }
  Matrix a = q * lambda.asDiagonal() * q.transpose();
  return 0.5 * (a + a.transpose());
}

RNormRule parse_r_rule(std::string_view s) {
  if (s == "squared") return RNormRule::squared;
  if (s == "plain" || s == "norms") return RNormRule::plain;
  throw ValidationError("unknown R rule '" + std::string(s) + "' (expected squared|plain)");
}

std::string_view to_string(RNormRule r) { return r == RNormRule::squared ? "squared" : "plain"; }

double estimate_R(std::span<const Vector> prefix, RNormRule rule) {
  if (prefix.empty()) {
    throw DegenerateError("estimate_R: empty prefix");
  }
  double r = 0.0;
  for (const Vector& x : prefix) {
    r += rule == RNormRule::squared ? x.squaredNorm() : x.norm();
  }
  if (!(r > 0.0)) {
    throw DegenerateError("estimate_R: all prefix samples are zero, R would be 0");
  }
  return r;
}

std::uint64_t r_prefix_length(std::uint64_t T) {
  if (T < 2) return 1;
  return std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::floor(2.0 * std::log(double(T)))));
}

void HyperParams::validate() const {
  auto fail = [](const std::string& what) { throw ValidationError("invalid hyperparameters: " + what); };
  if (B < 1) fail("B >= 1");
  if (S != B + u) fail("S = B + u");
  if (N < 1) fail("N >= 1 (horizon T too short for a single buffer of S = " + std::to_string(S) + ")");
  if (prefix + N * S > T) fail("prefix + N*S <= T");
  if (a >= N) fail("0 <= a < N (a = " + std::to_string(a) + ", N = " + std::to_string(N) + ")");
  if (!(gamma > 0.0) || !std::isfinite(gamma)) fail("gamma > 0");
  if (!(R > 0.0) || !std::isfinite(R)) fail("R > 0");
  if (gamma * R > 0.5 * (1.0 + 1e-12)) {
    fail("gamma*R <= 1/2 (gamma*R = " + std::to_string(gamma * R) + ")");
  }
}

Preset parse_preset(std::string_view s) {
  if (s == "theory") return Preset::theory;
  if (s == "experiment") return Preset::experiment;
  throw ValidationError("unknown preset '" + std::string(s) + "' (expected theory|experiment)");
}

std::string_view to_string(Preset p) { return p == Preset::theory ? "theory" : "experiment"; }

HyperParams pick_hyperparams(const HyperParamInputs& in) {
  if (in.T < 1) {
    throw ValidationError("pick_hyperparams: T must be >= 1");
  }
  HyperParams hp;
  hp.T = in.T;
  hp.alpha = in.alpha;
  const double log_t = std::log(double(in.T));
  if (in.preset == Preset::theory) {
    if (!(in.norm_bound > 0.0)) {
      throw ValidationError("pick_hyperparams: norm bound must be positive");
    }
    if (in.norm_bound >= 1.0) {
      throw StabilityError("pick_hyperparams: ||A*|| >= 1; use gelfand_gap_u for the gap");
    }
    if (in.alpha < 22.0) {
      throw ValidationError("pick_hyperparams: the theory preset needs alpha >= 22");
    }
    hp.u = static_cast<std::uint64_t>(std::ceil(in.alpha * log_t / std::log(1.0 / in.norm_bound)));
    hp.B = 10 * hp.u;
    hp.S = hp.B + hp.u;
    hp.N = in.T / hp.S;
    hp.R = in.r_constant * in.tr_sigma * log_t / (1.0 - in.norm_bound * in.norm_bound);
    hp.gamma = 1.0 / (8.0 * hp.R * double(hp.B));
    hp.a = hp.N / 2;
  } else {
    if (!in.r_estimate) {
      throw ValidationError("pick_hyperparams: the experiment preset needs a data-driven R");
    }
    hp.B = 100;
    hp.u = 10;
    hp.S = hp.B + hp.u;
    hp.prefix = r_prefix_length(in.T);
    hp.N = in.T > hp.prefix ? (in.T - hp.prefix) / hp.S : 0;
    hp.R = *in.r_estimate;
    hp.gamma = 1.0 / (2.0 * hp.R);
    hp.a = in.T < 2 ? 0 : static_cast<std::uint64_t>(std::floor(log_t));
  }
  hp.validate();
  return hp;
}

double spectral_radius_estimate(const Matrix& a, int iterations) {
  if (a.rows() != a.cols() || a.rows() == 0) {
    throw DimensionError("spectral_radius_estimate: expected a square matrix");
  }
  const Eigen::Index n = a.rows();
  Vector v = Vector::Constant(n, 1.0 / std::sqrt(double(n)));
  Vector w(n);
  double log_growth = 0.0;
  int counted = 0;
  for (int it = 0; it < iterations; ++it) {
    w.noalias() = a * v;
    const double norm = w.norm();
    if (norm == 0.0) {
      return 0.0;
    }
    v = w / norm;
    if (it >= iterations / 2) {
      log_growth += std::log(norm);
      ++counted;
    }
  }
  return std::exp(log_growth / std::max(counted, 1));
}

std::uint64_t gelfand_gap_u(const Matrix& a_star, std::uint64_t T, double lambda_max_G) {
  if (T < 1 || !(lambda_max_G > 0.0)) {
    throw ValidationError("gelfand_gap_u: T and lambda_max(G) must be positive");
  }
  const double rho = spectral_radius_estimate(a_star);
  if (rho >= 1.0) {
    throw StabilityError("gelfand_gap_u: estimated spectral radius " + std::to_string(rho) + " >= 1");
  }
  const double d = double(a_star.rows());
  const double norm = spectral_norm(a_star);
  double u = 1.0;
  if (rho > 0.0) {
    const double num = std::log(double(T) * lambda_max_G) + d * std::log(d * norm);
    u = std::max(u, std::ceil(num / std::log(1.0 / rho)));
  }
  if (norm > 0.0 && norm < 1.0) {
    u = std::max(u, std::ceil(std::log(double(T)) / std::log(1.0 / norm)));
  }
  return static_cast<std::uint64_t>(u);
}

}  // namespace sysid
