#include "sysid/harness.hpp"

#include <json.hpp>

#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <thread>

#ifndef SYSID_VERSION
#define SYSID_VERSION "0.0.0"
#endif

namespace sysid {

std::string version_string() { return std::string("sysid ") + SYSID_VERSION; }

namespace {

Matrix read_matrix_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open matrix file " + path.string());
  }
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream ls(line);
    std::vector<double> row;
    double v = 0.0;
    while (ls >> v) row.push_back(v);
    if (!ls.eof()) {
      throw IoError(path.string() + ": malformed number in matrix row");
    }
    if (!row.empty()) rows.push_back(std::move(row));
  }
  const auto d = static_cast<Eigen::Index>(rows.size());
  if (d == 0) {
    throw IoError(path.string() + ": empty matrix file");
  }
  Matrix m(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    if (static_cast<Eigen::Index>(rows[i].size()) != d) {
      throw DimensionError(path.string() + ": matrix must be square");
    }
    for (Eigen::Index j = 0; j < d; ++j) m(i, j) = rows[i][j];
  }
  return m;
}

}  // namespace

SystemSpec build_system(const ExperimentConfig& cfg, std::uint64_t system_seed) {
  Matrix a;
  switch (cfg.system) {
    case SystemKind::rand_bimod: {
      SeededRng rng(system_seed);
      a = rand_bimod(cfg.d, cfg.rho, rng);
      break;
    }
    case SystemKind::scaled_identity:
      a = cfg.rho * Matrix::Identity(cfg.d, cfg.d);
      break;
    case SystemKind::user_matrix_file:
      a = read_matrix_file(cfg.matrix_file);
      break;
  }
  const Eigen::Index d = a.rows();
  return SystemSpec::make(std::move(a), cfg.sigma * Matrix::Identity(d, d));
}

RunInstance prepare_instance(const ExperimentConfig& cfg, std::uint64_t master_seed, bool with_g) {
  RunInstance inst{derive_seeds(master_seed), build_system(cfg, derive_seeds(master_seed).system), {}, {}, {}};
  HyperParams& hp = inst.hp;
  const double log_t = std::log(double(cfg.T));

  if (cfg.preset == Preset::experiment) {
    hp.prefix = r_prefix_length(cfg.T);
    VarStream stream(inst.spec, cfg.start, inst.seeds.stream, cfg.T + 1);
    inst.prefix.resize(hp.prefix);
    for (Vector& x : inst.prefix) {
      if (!stream.next(x)) {
        throw ValidationError("invalid configuration: T too short for the R-estimation prefix");
      }
    }
    hp.T = cfg.T;
    hp.alpha = cfg.alpha;
    hp.B = cfg.B.value_or(100);
    hp.u = cfg.u.value_or(10);
    hp.S = hp.B + hp.u;
    hp.N = cfg.T > hp.prefix ? (cfg.T - hp.prefix) / hp.S : 0;
    hp.R = estimate_R(inst.prefix, cfg.r_rule);
    hp.gamma = cfg.gamma_rule.value_or(GammaRule{}).apply(hp.R, hp.B);
    hp.a = cfg.a.value_or(static_cast<std::uint64_t>(std::floor(log_t)));
  } else {
    if (!inst.spec.stable()) {
      throw StabilityError("theory preset needs ||A*|| < 1 (got " + std::to_string(inst.spec.a_star_norm) +
                           "); choose the gap with gelfand_gap_u");
    }
    HyperParamInputs in;
    in.T = cfg.T;
    in.d = inst.spec.d;
    in.norm_bound = inst.spec.a_star_norm;
    in.tr_sigma = inst.spec.sigma.trace();
    in.alpha = cfg.alpha;
    in.preset = Preset::theory;
    in.r_constant = cfg.r_constant;
    hp = pick_hyperparams(in);
    if (cfg.u || cfg.B) {
      hp.u = cfg.u ? *cfg.u : *cfg.B / 10;
      hp.B = 10 * hp.u;
      hp.S = hp.B + hp.u;
      hp.N = cfg.T / hp.S;
      hp.a = hp.N / 2;
    }
    hp.gamma = cfg.gamma_rule.value_or(GammaRule{GammaRule::Kind::eighth_over_rb, 0.0}).apply(hp.R, hp.B);
    if (cfg.a) hp.a = *cfg.a;
  }
  hp.validate();

  if (with_g) {
    inst.g = solve_lyapunov(inst.spec.a_star, inst.spec.sigma, 1e-12);
  }
  return inst;
}

namespace {

ErrorCurve run_prepared(const ExperimentConfig& cfg, const RunInstance& inst, EstimatorKind kind,
                        std::uint64_t seed) {
  VarStream stream(inst.spec, cfg.start, inst.seeds.stream, cfg.T + 1);
  Vector skip;
  for (std::uint64_t i = 0; i < inst.hp.prefix; ++i) stream.next(skip);

  RunSetup setup;
  setup.hp = inst.hp;
  setup.a_star = inst.spec.a_star;
  setup.g = inst.g;
  setup.prefix = inst.prefix;
  setup.seed = seed;
  setup.scheduler_seed = inst.seeds.scheduler;
  setup.poison = cfg.poison;
  if (kind == EstimatorKind::sparse_rer) {
    const double scale = inst.spec.a_star.cwiseAbs().maxCoeff();
    setup.support = SupportPattern::of(inst.spec.a_star, 1e-12 * scale);
  }
  return run_estimator(kind, stream, setup);
}

}  // namespace

ErrorCurve run_single(const ExperimentConfig& cfg, EstimatorKind kind, std::uint64_t seed) {
  return run_prepared(cfg, prepare_instance(cfg, seed), kind, seed);
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  struct Job {
    EstimatorKind kind;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (EstimatorKind k : cfg.estimators) {
    for (std::uint64_t s : cfg.seeds) jobs.push_back({k, s});
  }

  ExperimentResult result;
  result.curves.resize(jobs.size());
  result.manifest.version = version_string();
  result.manifest.config = config_echo(cfg);
  result.manifest.runs.resize(jobs.size());

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      try {
        const auto t0 = std::chrono::steady_clock::now();
        const RunInstance inst = prepare_instance(cfg, jobs[i].seed);
        result.curves[i] = run_prepared(cfg, inst, jobs[i].kind, jobs[i].seed);
        const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
        result.manifest.runs[i] =
            RunEntry{jobs[i].kind, jobs[i].seed, inst.seeds, inst.hp, dt.count(), result.curves[i].records.size()};
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = jobs.size();
      }
    }
  };

  unsigned threads = cfg.threads != 0 ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(jobs.size()));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
  return result;
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) {
    throw Error("format_double: conversion failed");
  }
  return std::string(buf, ptr);
}

void write_csv(std::ostream& os, const std::vector<ErrorCurve>& curves) {
  os << kCsvHeader << '\n';
  for (const ErrorCurve& c : curves) {
    const std::string_view name = to_string(c.estimator);
    for (const ErrorRecord& r : c.records) {
      os << name << ',' << c.seed << ',' << r.buffer_index << ',' << r.samples_seen << ','
         << format_double(r.param_err) << ',' << format_double(r.pred_excess) << ',' << (r.burn_in ? 1 : 0)
         << '\n';
    }
  }
}

void write_csv(const std::filesystem::path& path, const std::vector<ErrorCurve>& curves) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw IoError("cannot open " + path.string() + " for writing");
  }
  write_csv(out, curves);
  out.flush();
  if (!out) {
    throw IoError("write to " + path.string() + " failed");
  }
}

std::vector<ErrorCurve> read_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != kCsvHeader) {
    throw IoError("results CSV: missing or unexpected header");
  }
  std::vector<ErrorCurve> curves;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string_view> fields;
    std::string_view rest = line;
    while (true) {
      const auto comma = rest.find(',');
      fields.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    auto fail = [&](const std::string& why) {
      throw IoError("results CSV line " + std::to_string(lineno) + ": " + why);
    };
    if (fields.size() != 7) fail("expected 7 fields");
    auto num = [&](std::string_view f, auto& out) {
      const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), out);
      if (ec != std::errc() || ptr != f.data() + f.size()) fail("malformed number '" + std::string(f) + "'");
    };
    const EstimatorKind kind = parse_estimator(fields[0]);
    std::uint64_t seed = 0;
    num(fields[1], seed);
    ErrorRecord rec;
    num(fields[2], rec.buffer_index);
    num(fields[3], rec.samples_seen);
    num(fields[4], rec.param_err);
    num(fields[5], rec.pred_excess);
    int burn = 0;
    num(fields[6], burn);
    rec.burn_in = burn != 0;
    if (curves.empty() || curves.back().estimator != kind || curves.back().seed != seed) {
      curves.push_back(ErrorCurve{kind, seed, {}});
    } else if (rec.buffer_index <= curves.back().records.back().buffer_index) {
      fail("buffer_index must increase within a run");
    }
    curves.back().records.push_back(rec);
  }
  return curves;
}

std::vector<ErrorCurve> read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open " + path.string());
  }
  try {
    return read_csv(in);
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

std::map<std::string, std::string> config_echo(const ExperimentConfig& cfg) {
  std::map<std::string, std::string> m;
  m["d"] = std::to_string(cfg.d);
  m["rho"] = format_double(cfg.rho);
  m["sigma"] = format_double(cfg.sigma);
  m["system"] = std::string(to_string(cfg.system));
  if (!cfg.matrix_file.empty()) m["matrix-file"] = cfg.matrix_file.string();
  m["T"] = std::to_string(cfg.T);
  m["preset"] = std::string(to_string(cfg.preset));
  if (cfg.B) m["B"] = std::to_string(*cfg.B);
  if (cfg.u) m["u"] = std::to_string(*cfg.u);
  if (cfg.a) m["a"] = std::to_string(*cfg.a);
  if (cfg.gamma_rule) m["gamma-rule"] = cfg.gamma_rule->str();
  m["r-rule"] = std::string(to_string(cfg.r_rule));
  m["alpha"] = format_double(cfg.alpha);
  m["r-constant"] = format_double(cfg.r_constant);
  std::string est;
  for (EstimatorKind k : cfg.estimators) est += (est.empty() ? "" : ",") + std::string(to_string(k));
  m["estimators"] = est;
  std::string seeds;
  for (std::uint64_t s : cfg.seeds) seeds += (seeds.empty() ? "" : ",") + std::to_string(s);
  m["seeds"] = seeds;
  m["out"] = cfg.out.string();
  m["start"] = std::string(to_string(cfg.start));
  m["poison"] = cfg.poison == PoisonMode::abort ? "abort" : "zero";
  return m;
}

std::string manifest_json(const RunManifest& m) {
  nlohmann::ordered_json j;
  j["version"] = m.version;
  j["config"] = m.config;
  nlohmann::ordered_json seeds = nlohmann::ordered_json::array();
  auto runs = nlohmann::ordered_json::array();
  for (const RunEntry& r : m.runs) {
    nlohmann::ordered_json e;
    e["estimator"] = std::string(to_string(r.estimator));
    e["seed"] = r.seed;
    e["derived_seeds"] = {{"system", r.derived.system},
                          {"stream", r.derived.stream},
                          {"init", r.derived.init},
                          {"scheduler", r.derived.scheduler}};
    e["hyperparams"] = {{"T", r.hp.T},         {"B", r.hp.B},         {"u", r.hp.u},
                        {"S", r.hp.S},         {"N", r.hp.N},         {"gamma", r.hp.gamma},
                        {"R", r.hp.R},         {"a", r.hp.a},         {"alpha", r.hp.alpha},
                        {"prefix", r.hp.prefix}};
    e["rows"] = r.rows;
    e["wall_seconds"] = r.wall_seconds;
    runs.push_back(std::move(e));
    if (std::find(seeds.begin(), seeds.end(), r.seed) == seeds.end()) seeds.push_back(r.seed);
  }
  j["seeds"] = seeds;
  j["runs"] = runs;
  return j.dump(2) + "\n";
}

std::filesystem::path manifest_path(const std::filesystem::path& csv) {
  return std::filesystem::path(csv.string() + ".manifest.json");
}

void write_results(const ExperimentResult& result, const std::filesystem::path& out) {
  write_csv(out, result.curves);
  const auto mpath = manifest_path(out);
  std::ofstream m(mpath, std::ios::binary);
  if (!m) {
    throw IoError("cannot open " + mpath.string() + " for writing");
  }
  m << manifest_json(result.manifest);
  if (!m) {
    throw IoError("write to " + mpath.string() + " failed");
  }
}

void write_summary(std::ostream& os, const std::vector<SummaryRow>& rows) {
  os << "estimator,runs,param_err_mean,param_err_std,pred_excess_mean,pred_excess_std,"
        "param_err_ratio_ols,pred_excess_ratio_ols\n";
  for (const SummaryRow& r : rows) {
    os << to_string(r.estimator) << ',' << r.runs << ',' << format_double(r.param_err_mean) << ','
       << format_double(r.param_err_std) << ',' << format_double(r.pred_excess_mean) << ','
       << format_double(r.pred_excess_std) << ','
       << (r.param_err_ratio_ols ? format_double(*r.param_err_ratio_ols) : "") << ','
       << (r.pred_excess_ratio_ols ? format_double(*r.pred_excess_ratio_ols) : "") << '\n';
  }
}

}  // namespace sysid
