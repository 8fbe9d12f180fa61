// sysid: streaming linear system identification experiments.
//
//   sysid run [--config PATH] [--d N] [--rho F] ... [--out PATH]
//   sysid summarize --in PATH
//   sysid params --T N --rho F --alpha F

#include <CLI11.hpp>

#include <cmath>
#include <iostream>
#include <string>
#include <vector>

#include "sysid/harness.hpp"

namespace {

void usage(std::ostream& os) {
  os << "usage: sysid <run|summarize|params> [options]\n"
        "  run        simulate and write <out> (CSV) plus <out>.manifest.json\n"
        "  summarize  per-estimator final-error statistics of a results CSV\n"
        "  params     print the theory-preset hyperparameters\n";
}

int cmd_run(const std::vector<std::string>& args) {
  for (const std::string& a : args) {
    if (a == "-h" || a == "--help") {
      std::cout << sysid::run_help();
      return 0;
    }
  }
  const sysid::ExperimentConfig cfg = sysid::parse_config(args);
  const sysid::ExperimentResult result = sysid::run_experiment(cfg);
  sysid::write_results(result, cfg.out);
  std::size_t rows = 0;
  for (const auto& c : result.curves) rows += c.records.size();
  std::cerr << "wrote " << rows << " rows to " << cfg.out.string() << " ("
            << sysid::manifest_path(cfg.out).string() << ")\n";
  return 0;
}

int cmd_summarize(int argc, char** argv) {
  CLI::App app{"sysid summarize"};
  std::string in;
  app.add_option("--in", in, "results CSV")->required();
  CLI11_PARSE(app, argc, argv);
  const auto curves = sysid::read_csv(std::filesystem::path(in));
  if (curves.empty()) {
    std::cerr << "error: " << in << " holds no data rows\n";
    return 1;
  }
  sysid::write_summary(std::cout, sysid::summarize(curves));
  return 0;
}

int cmd_params(int argc, char** argv) {
  CLI::App app{"sysid params"};
  std::string T_text;
  double rho = 0.9;
  double alpha = 22.0;
  int d = 5;
  double sigma = 1.0;
  double c = 1.0;
  app.add_option("--T", T_text, "horizon")->required();
  app.add_option("--rho", rho, "upper bound on ||A*||")->required();
  app.add_option("--alpha", alpha, "tail exponent (>= 22)");
  app.add_option("--d", d, "state dimension");
  app.add_option("--sigma", sigma, "noise variance (Sigma = sigma I)");
  app.add_option("--r-constant", c, "constant C in R");
  CLI11_PARSE(app, argc, argv);

  sysid::ExperimentConfig scratch;
  sysid::apply_setting(scratch, "T", T_text);

  sysid::HyperParamInputs in;
  in.T = scratch.T;
  in.d = d;
  in.norm_bound = rho;
  in.tr_sigma = sigma * d;
  in.alpha = alpha;
  in.preset = sysid::Preset::theory;
  in.r_constant = c;
  const sysid::HyperParams hp = sysid::pick_hyperparams(in);
  std::cout << "T = " << hp.T << "\n"
            << "u = " << hp.u << "\n"
            << "B = " << hp.B << "\n"
            << "S = " << hp.S << "\n"
            << "N = " << hp.N << "\n"
            << "R = " << sysid::format_double(hp.R) << "\n"
            << "gamma = " << sysid::format_double(hp.gamma) << "\n"
            << "a = " << hp.a << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    usage(std::cerr);
    return 2;
  }
  const std::string cmd = argv[1];
  try {
    if (cmd == "run") {
      return cmd_run(std::vector<std::string>(argv + 2, argv + argc));
    }
    if (cmd == "summarize") {
      return cmd_summarize(argc - 1, argv + 1);
    }
    if (cmd == "params") {
      return cmd_params(argc - 1, argv + 1);
    }
    if (cmd == "-h" || cmd == "--help") {
      usage(std::cout);
      return 0;
    }
    std::cerr << "error: unknown command '" << cmd << "'\n";
    usage(std::cerr);
    return 2;
  } catch (const sysid::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
