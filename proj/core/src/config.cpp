#include <CLI11.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "sysid/harness.hpp"

namespace sysid {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view expected) {
  throw ValidationError("invalid value '" + std::string(value) + "' for '" + std::string(key) + "': expected " +
                        std::string(expected));
}

double to_double(std::string_view key, std::string_view value) {
  value = trim(value);
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size() || !std::isfinite(out)) {
    bad_value(key, value, "a real number");
  }
  return out;
}

// Accepts plain integers and integral scientific notation such as 1e6.
std::uint64_t to_uint(std::string_view key, std::string_view value) {
  value = trim(value);
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec == std::errc() && ptr == value.data() + value.size()) {
    return out;
  }
  const double d = to_double(key, value);
  if (d < 0.0 || d != std::floor(d) || d > 9.0e18) {
    bad_value(key, value, "a non-negative integer");
  }
  return static_cast<std::uint64_t>(d);
}

template <typename F>
void for_each_item(std::string_view list, F&& f) {
  while (!list.empty()) {
    const auto comma = list.find(',');
    const auto item = trim(list.substr(0, comma));
    if (!item.empty()) f(item);
    if (comma == std::string_view::npos) break;
    list.remove_prefix(comma + 1);
  }
}

}  // namespace

GammaRule GammaRule::parse(std::string_view s) {
  s = trim(s);
  if (s == "1/2R") return {Kind::half_over_r, 0.0};
  if (s == "1/8RB") return {Kind::eighth_over_rb, 0.0};
  const double v = to_double("gamma-rule", s);
  if (!(v > 0.0)) bad_value("gamma-rule", s, "1/2R, 1/8RB or a positive number");
  return {Kind::fixed, v};
}

std::string GammaRule::str() const {
  switch (kind) {
    case Kind::half_over_r:
      return "1/2R";
    case Kind::eighth_over_rb:
      return "1/8RB";
    case Kind::fixed:
      return format_double(value);
  }
  return "?";
}

double GammaRule::apply(double R, std::uint64_t B) const {
  switch (kind) {
    case Kind::half_over_r:
      return 1.0 / (2.0 * R);
    case Kind::eighth_over_rb:
      return 1.0 / (8.0 * R * double(B));
    case Kind::fixed:
      return value;
  }
  return 0.0;
}

SystemKind parse_system_kind(std::string_view s) {
  if (s == "rand_bimod") return SystemKind::rand_bimod;
  if (s == "scaled_identity") return SystemKind::scaled_identity;
  if (s == "user_matrix_file") return SystemKind::user_matrix_file;
  bad_value("system", s, "rand_bimod|scaled_identity|user_matrix_file");
}

std::string_view to_string(SystemKind k) {
  switch (k) {
    case SystemKind::rand_bimod:
      return "rand_bimod";
    case SystemKind::scaled_identity:
      return "scaled_identity";
    case SystemKind::user_matrix_file:
      return "user_matrix_file";
  }
  return "?";
}

void apply_setting(ExperimentConfig& cfg, std::string_view key, std::string_view raw) {
  const std::string_view value = trim(raw);
  if (key == "d") {
    cfg.d = static_cast<Eigen::Index>(to_uint(key, value));
  } else if (key == "rho") {
    cfg.rho = to_double(key, value);
  } else if (key == "sigma") {
    cfg.sigma = to_double(key, value);
  } else if (key == "T") {
    cfg.T = to_uint(key, value);
  } else if (key == "B") {
    cfg.B = to_uint(key, value);
  } else if (key == "u") {
    cfg.u = to_uint(key, value);
  } else if (key == "a") {
    cfg.a = to_uint(key, value);
  } else if (key == "preset") {
    cfg.preset = parse_preset(value);
  } else if (key == "estimators") {
    cfg.estimators.clear();
    for_each_item(value, [&](std::string_view item) { cfg.estimators.push_back(parse_estimator(item)); });
  } else if (key == "seeds") {
    cfg.seeds.clear();
    for_each_item(value, [&](std::string_view item) { cfg.seeds.push_back(to_uint(key, item)); });
  } else if (key == "out") {
    cfg.out = std::string(value);
  } else if (key == "start") {
    cfg.start = parse_start_mode(value);
  } else if (key == "system") {
    cfg.system = parse_system_kind(value);
  } else if (key == "matrix-file") {
    cfg.matrix_file = std::string(value);
  } else if (key == "gamma-rule") {
    cfg.gamma_rule = GammaRule::parse(value);
  } else if (key == "r-rule") {
    cfg.r_rule = parse_r_rule(value);
  } else if (key == "alpha") {
    cfg.alpha = to_double(key, value);
  } else if (key == "r-constant") {
    cfg.r_constant = to_double(key, value);
  } else if (key == "threads") {
    cfg.threads = static_cast<unsigned>(to_uint(key, value));
  } else if (key == "poison") {
    if (value == "zero") {
      cfg.poison = PoisonMode::zero_and_continue;
    } else if (value == "abort") {
      cfg.poison = PoisonMode::abort;
    } else {
      bad_value(key, value, "zero|abort");
    }
  } else {
    throw ValidationError("unknown configuration key '" + std::string(key) + "'");
  }
}

std::vector<std::pair<std::string, std::string>> read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open config file " + path.string());
  }
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view view = line;
    if (const auto hash = view.find('#'); hash != std::string_view::npos) {
      view = view.substr(0, hash);
    }
    view = trim(view);
    if (view.empty()) continue;
    const auto eq = view.find('=');
    if (eq == std::string_view::npos) {
      throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": expected 'key = value'");
    }
    out.emplace_back(std::string(trim(view.substr(0, eq))), std::string(trim(view.substr(eq + 1))));
  }
  return out;
}

namespace {

struct FlagInfo {
  std::string_view key;
  std::string_view help;
};

// Flag names double as config-file keys.
constexpr FlagInfo kFlags[] = {
    {"d", "state dimension (default 5)"},
    {"rho", "spectral scale of the generated A* (default 0.9)"},
    {"sigma", "noise variance, Sigma = sigma I (default 1)"},
    {"T", "stream length; 1e6 style accepted (default 1e6)"},
    {"B", "updates per buffer (experiment default 100)"},
    {"u", "buffer gap (experiment default 10)"},
    {"a", "burn-in buffers before tail averaging (default floor(ln T))"},
    {"preset", "experiment|theory (default experiment)"},
    {"estimators", "comma list of sgd_rer,sgd,sgd_er,ols,sparse_rer"},
    {"seeds", "comma list of master seeds (default 1,2,3,4,5)"},
    {"out", "results CSV path (default results.csv)"},
    {"start", "zero|stationary initial state (default zero)"},
    {"system", "rand_bimod|scaled_identity|user_matrix_file"},
    {"matrix-file", "whitespace-separated square A* for system=user_matrix_file"},
    {"gamma-rule", "1/2R|1/8RB|<number> (default 1/2R, theory 1/8RB)"},
    {"r-rule", "squared|plain norms for the R estimate (default squared)"},
    {"alpha", "tail exponent of the theory preset (default 22)"},
    {"r-constant", "constant C in the theory-preset R (default 1)"},
    {"threads", "worker threads, 0 = hardware concurrency"},
    {"poison", "zero|abort behaviour after the norm guard fires (default zero)"},
};

struct RunCli {
  CLI::App app{"sysid run: simulate and write results CSV plus manifest"};
  std::string config_path;
  std::map<std::string, std::string> flags;
  std::map<std::string, CLI::Option*> opts;

  RunCli() {
    app.add_option("--config", config_path, "flat key = value configuration file");
    for (const FlagInfo& f : kFlags) {
      const std::string k(f.key);
      opts[k] = app.add_option("--" + k, flags[k], std::string(f.help));
    }
  }
};

}  // namespace

std::string run_help() { return RunCli{}.app.help(); }

ExperimentConfig parse_config(const std::vector<std::string>& args) {
  RunCli cli;
  std::vector<std::string> argv_storage{"sysid run"};
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : argv_storage) argv.push_back(s.data());
  try {
    cli.app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    throw ValidationError(std::string("command line: ") + e.what());
  }

  ExperimentConfig cfg;
  if (!cli.config_path.empty()) {
    for (const auto& [key, value] : read_config_file(cli.config_path)) {
      apply_setting(cfg, key, value);
    }
  }
  for (const FlagInfo& f : kFlags) {
    const std::string k(f.key);
    if (cli.opts[k]->count() > 0) {
      apply_setting(cfg, k, cli.flags[k]);
    }
  }
  cfg.validate();
  return cfg;
}

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& what) { throw ValidationError("invalid configuration: " + what); };
  if (system != SystemKind::user_matrix_file && d < 1) fail("d >= 1");
  if (system == SystemKind::rand_bimod && !(rho > 0.0 && rho < 1.0)) fail("0 < rho < 1 for rand_bimod");
  if (system == SystemKind::user_matrix_file && matrix_file.empty()) fail("matrix-file is required");
  if (!(sigma > 0.0)) fail("sigma > 0");
  if (T < 2) fail("T >= 2");
  if (seeds.empty()) fail("at least one seed");
  if (estimators.empty()) fail("at least one estimator");
  if (preset == Preset::theory) {
    if (alpha < 22.0) fail("alpha >= 22 in theory preset");
    if (B && u && *B != 10 * *u) {
      fail("B = 10u in theory preset (got B = " + std::to_string(*B) + ", u = " + std::to_string(*u) + ")");
    }
    if (B && !u && *B % 10 != 0) fail("B = 10u in theory preset (B must be a multiple of 10)");
  }
  if (B && *B < 1) fail("B >= 1");
  for (std::uint64_t seed : seeds) {
    prepare_instance(*this, seed, /*with_g=*/false);
  }
}

}  // namespace sysid
