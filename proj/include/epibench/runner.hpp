#pragma once

#include <string>

#include "epibench/config.hpp"
#include "epibench/principles.hpp"

namespace epibench {

struct RunResult {
  int failed_cells = 0;
  std::string output_dir;
};

/// Execute the configured grid for every method and populate the output
/// directory: <out>/<method>/<metric>.csv, compliance.csv, summary.csv, and
/// manifest.txt (config hash, seeds, per-cell status and wall-clock).
/// Metric CSVs are byte-identical across reruns and across job counts.
RunResult run_experiment(const ExperimentConfig& cfg, int jobs);

/// Rebuild compliance.csv and summary.csv from the metric CSVs already in
/// the output directory, without retraining.
void reaggregate_outputs(const std::string& output_dir);

/// Pass/fail table for the analytic checks (closed-form regression variance
/// vs its Monte Carlo estimator, expected one-observation information drop).
/// Returns true when every check passes.
bool oracle_check(std::ostream& out);

}  // namespace epibench
