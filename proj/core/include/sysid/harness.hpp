#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sysid/estimators.hpp"
#include "sysid/metrics.hpp"
#include "sysid/model.hpp"

namespace sysid {

enum class SystemKind { rand_bimod, scaled_identity, user_matrix_file };

SystemKind parse_system_kind(std::string_view s);
std::string_view to_string(SystemKind k);

/// Step-size rule: "1/2R", "1/8RB" or a literal positive number.
struct GammaRule {
  enum class Kind { half_over_r, eighth_over_rb, fixed } kind = Kind::half_over_r;
  double value = 0.0;

  static GammaRule parse(std::string_view s);
  std::string str() const;
  double apply(double R, std::uint64_t B) const;
};

struct ExperimentConfig {
  Eigen::Index d = 5;
  double rho = 0.9;
  /// Noise variance: Sigma = sigma * I.
  double sigma = 1.0;
  SystemKind system = SystemKind::rand_bimod;
  std::filesystem::path matrix_file;
  std::uint64_t T = 1'000'000;
  Preset preset = Preset::experiment;
  std::optional<std::uint64_t> B;
  std::optional<std::uint64_t> u;
  std::optional<GammaRule> gamma_rule;
  RNormRule r_rule = RNormRule::squared;
  std::optional<std::uint64_t> a;
  double alpha = 22.0;
  double r_constant = 1.0;
  std::vector<EstimatorKind> estimators{EstimatorKind::sgd_rer, EstimatorKind::sgd, EstimatorKind::sgd_er,
                                        EstimatorKind::ols};
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::filesystem::path out = "results.csv";
  StartMode start = StartMode::zero;
  PoisonMode poison = PoisonMode::zero_and_continue;
  unsigned threads = 0;

  /// Static checks plus a dry hyperparameter resolution for every seed.
  void validate() const;
};

/// Applies one `key = value` setting (keys are the CLI flag names without
/// dashes). Throws ValidationError on an unknown key or a malformed value.
void apply_setting(ExperimentConfig& cfg, std::string_view key, std::string_view value);

/// Reads a flat `key = value` file ('#' starts a comment).
std::vector<std::pair<std::string, std::string>> read_config_file(const std::filesystem::path& path);

/// Parses the arguments of `sysid run` (without program and subcommand
/// names). Values from --config are applied first, explicit flags override
/// them, and the result is validated.
ExperimentConfig parse_config(const std::vector<std::string>& args);

/// Help text for the `sysid run` flags.
std::string run_help();

/// One seed's problem instance, shared by every estimator of that seed.
struct RunInstance {
  RunSeeds seeds;
  SystemSpec spec;
  Matrix g;
  std::vector<Vector> prefix;
  HyperParams hp;
};

SystemSpec build_system(const ExperimentConfig& cfg, std::uint64_t system_seed);

/// Builds the system, draws the R-estimation prefix and resolves the
/// hyperparameters for one master seed. `with_g` skips the Lyapunov solve
/// when false.
RunInstance prepare_instance(const ExperimentConfig& cfg, std::uint64_t master_seed, bool with_g = true);

struct RunEntry {
  EstimatorKind estimator;
  std::uint64_t seed;
  RunSeeds derived;
  HyperParams hp;
  double wall_seconds = 0.0;
  std::size_t rows = 0;
};

struct RunManifest {
  std::string version;
  std::map<std::string, std::string> config;
  std::vector<RunEntry> runs;
};

struct ExperimentResult {
  /// Canonical order: estimator (config order), then seed (config order).
  std::vector<ErrorCurve> curves;
  RunManifest manifest;
};

ExperimentResult run_experiment(const ExperimentConfig& cfg);

/// Runs a single (estimator, seed) pair exactly as run_experiment does.
ErrorCurve run_single(const ExperimentConfig& cfg, EstimatorKind kind, std::uint64_t seed);

inline constexpr std::string_view kCsvHeader =
    "estimator,seed,buffer_index,samples_seen,param_err,pred_excess,burn_in";

/// Shortest decimal string that parses back to exactly `v`.
std::string format_double(double v);

void write_csv(std::ostream& os, const std::vector<ErrorCurve>& curves);
void write_csv(const std::filesystem::path& path, const std::vector<ErrorCurve>& curves);
std::vector<ErrorCurve> read_csv(std::istream& is);
std::vector<ErrorCurve> read_csv(const std::filesystem::path& path);

std::string manifest_json(const RunManifest& m);
std::filesystem::path manifest_path(const std::filesystem::path& csv);

/// Writes the CSV and its `.manifest.json` sidecar.
void write_results(const ExperimentResult& result, const std::filesystem::path& out);

void write_summary(std::ostream& os, const std::vector<SummaryRow>& rows);

/// Configuration echo as key/value strings (CLI flag names as keys).
std::map<std::string, std::string> config_echo(const ExperimentConfig& cfg);

std::string version_string();

}  // namespace sysid
