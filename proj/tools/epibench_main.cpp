#include <cstdlib>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "epibench/errors.hpp"
#include "epibench/runner.hpp"

namespace {

epibench::ExperimentConfig load_config(const std::string& config_path, const std::string& out_override) {
  epibench::ExperimentConfig cfg = epibench::parse_config(config_path);
  if (!out_override.empty()) cfg.output_dir = out_override;
  if (const char* env_seed = std::getenv("EPIBENCH_SEED")) {
    cfg.master_seed = std::strtoull(env_seed, nullptr, 10);
  }
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Benchmark of epistemic-uncertainty methods over data-size x model-size grids"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_override;
  int jobs = 1;

  CLI::App* run = app.add_subcommand("run", "Train the configured grid and write metric CSVs");
  run->add_option("--config", config_path, "experiment config file")->required();
  run->add_option("--jobs", jobs, "maximum concurrent grid cells")->check(CLI::PositiveNumber);
  run->add_option("--out", out_override, "output directory (overrides the config)");

  CLI::App* oracle = app.add_subcommand("oracle-check", "Run the analytic self-checks");

  CLI::App* report = app.add_subcommand("report", "Re-aggregate compliance/summary from existing outputs");
  std::string report_dir;
  report->add_option("--out", report_dir, "run output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      const epibench::ExperimentConfig cfg = load_config(config_path, out_override);
      const epibench::RunResult result = epibench::run_experiment(cfg, jobs);
      if (result.failed_cells > 0) {
        std::cerr << result.failed_cells << " grid cell(s) failed; see "
                  << result.output_dir << "/manifest.txt\n";
        return 1;
      }
      std::cout << "outputs written to " << result.output_dir << "\n";
      return 0;
    }
    if (oracle->parsed()) {
      return epibench::oracle_check(std::cout) ? 0 : 1;
    }
    if (report->parsed()) {
      epibench::reaggregate_outputs(report_dir);
      std::cout << "compliance.csv and summary.csv rebuilt in " << report_dir << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
