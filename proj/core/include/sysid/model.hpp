#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string_view>

#include "sysid/numerics.hpp"
#include "sysid/random.hpp"

namespace sysid {

/// Ground truth of a VAR(1) process X_{t+1} = A* X_t + eta_t, eta_t ~ N(0, Sigma).
struct SystemSpec {
  Eigen::Index d = 0;
  Matrix a_star;
  Matrix sigma;
  Matrix sigma_chol;
  double a_star_norm = 0.0;

  /// Validates shapes and symmetry, caches the noise factor and ||A*||.
  static SystemSpec make(Matrix a_star, Matrix sigma);

  bool stable() const { return a_star_norm < 1.0; }
};

enum class StartMode { zero, stationary };

StartMode parse_start_mode(std::string_view s);
std::string_view to_string(StartMode m);

/// Anything that yields a sequence of state vectors.
class SampleSource {
public:
  virtual ~SampleSource() = default;
  /// Writes the next sample into `out`; false once the source is exhausted.
  virtual bool next(Vector& out) = 0;
  virtual Eigen::Index dim() const = 0;
};

/// Simulated trajectory X_0, X_1, ... of a SystemSpec. Yields at most
/// `max_samples` vectors (unbounded by default).
class VarStream final : public SampleSource {
public:
  static constexpr std::uint64_t kUnbounded = std::numeric_limits<std::uint64_t>::max();

  VarStream(SystemSpec spec, StartMode start, std::uint64_t seed,
            std::uint64_t max_samples = kUnbounded);

  /// Starts from an explicit X_0.
  VarStream(SystemSpec spec, Vector x0, std::uint64_t seed,
            std::uint64_t max_samples = kUnbounded);

  bool next(Vector& out) override;
  Eigen::Index dim() const override { return spec_.d; }

  std::uint64_t emitted() const { return emitted_; }
  const SystemSpec& spec() const { return spec_; }

private:
  SystemSpec spec_;
  SeededRng rng_;
  Vector state_;
  Vector noise_;
  std::uint64_t emitted_ = 0;
  std::uint64_t max_samples_;
};

/// Replays a fixed list of samples.
class VectorSource final : public SampleSource {
public:
  explicit VectorSource(std::vector<Vector> samples) : samples_(std::move(samples)) {}

  bool next(Vector& out) override;
  Eigen::Index dim() const override { return samples_.empty() ? 0 : samples_.front().size(); }

private:
  std::vector<Vector> samples_;
  std::size_t pos_ = 0;
};

/// A* = U diag(rho x ceil(d/2), rho/3 x floor(d/2)) U^T with U Haar-orthogonal
/// (QR of a Gaussian matrix with the sign of R's diagonal fixed).
Matrix rand_bimod(Eigen::Index d, double rho, SeededRng& rng);

/// How the norm bound R is read off a sample prefix.
enum class RNormRule {
  squared,  ///< sum of ||X||^2 (matches the ||X||^2 <= R guard)
  plain,    ///< sum of ||X||
};

RNormRule parse_r_rule(std::string_view s);
std::string_view to_string(RNormRule r);

/// Norm bound estimated from the first samples of a stream. Throws
/// DegenerateError when every sample is zero.
double estimate_R(std::span<const Vector> prefix, RNormRule rule = RNormRule::squared);

/// Number of prefix samples used for the R estimate: floor(2 ln T).
std::uint64_t r_prefix_length(std::uint64_t T);

struct HyperParams {
  std::uint64_t T = 0;
  std::uint64_t B = 0;
  std::uint64_t u = 0;
  std::uint64_t S = 0;
  std::uint64_t N = 0;
  double gamma = 0.0;
  double R = 0.0;
  std::uint64_t a = 0;
  double alpha = 22.0;
  /// Samples consumed ahead of the first buffer (R estimation).
  std::uint64_t prefix = 0;

  /// Throws ValidationError naming the first violated invariant.
  void validate() const;
};

enum class Preset { theory, experiment };

Preset parse_preset(std::string_view s);
std::string_view to_string(Preset p);

struct HyperParamInputs {
  std::uint64_t T = 0;
  Eigen::Index d = 0;
  /// Upper bound on ||A*||.
  double norm_bound = 0.0;
  /// Estimate of tr(Sigma).
  double tr_sigma = 0.0;
  double alpha = 22.0;
  Preset preset = Preset::experiment;
  /// Constant in the theory-preset R; left unspecified by the analysis.
  double r_constant = 1.0;
  /// Data-driven R, required for the experiment preset.
  std::optional<double> r_estimate;
};

/// Buffer/gap/step-size recipe. Theory: u = ceil(alpha ln T / ln(1/||A*||)),
/// B = 10u, R = C tr(Sigma) ln T / (1 - ||A*||^2), gamma = 1/(8RB), a = N/2.
/// Experiment: B = 100, u = 10, R from data, gamma = 1/(2R),
/// a = floor(ln T), prefix = floor(2 ln T).
HyperParams pick_hyperparams(const HyperParamInputs& in);

/// Spectral radius estimate: 1000 normalized power iterations on A, then
/// the geometric-mean growth rate over the second half of the run.
double spectral_radius_estimate(const Matrix& a, int iterations = 1000);

/// Gap size from the Gelfand spectral-radius bound,
/// ceil((ln(T lambda_max(G)) + d ln(d ||A||)) / ln(1/rho)), never below the
/// stable-norm value ceil(ln T / ln(1/||A||)) when ||A|| < 1, and at least 1.
/// Throws StabilityError if the estimated spectral radius is >= 1.
std::uint64_t gelfand_gap_u(const Matrix& a_star, std::uint64_t T, double lambda_max_G);

}  // namespace sysid
